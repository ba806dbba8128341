#include "membrane/field_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace membrane {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw FormatError("field csv line " + std::to_string(line) + ": empty value");
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + b, s.data() + e + 1, v);
  if (ec != std::errc() || ptr != s.data() + e + 1)
    throw FormatError("field csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

void write_header(std::ostream& os, const Grid2D<double>& g) {
  os << g.nx << ',' << g.ny << ',' << format_double(g.ax) << ',' << format_double(g.bx) << ','
     << format_double(g.ay) << ',' << format_double(g.by) << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_field_csv(std::ostream& os, const ScalarField<double>& f) {
  const auto& g = f.grid();
  write_header(os, g);
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      if (i) os << ',';
      os << format_double(f(i, j));
    }
    os << '\n';
  }
}

void write_field_csv(const std::filesystem::path& path, const ScalarField<double>& f) {
  auto os = open_out(path);
  write_field_csv(os, f);
}

ScalarField<double> read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("field csv: missing header");
  const auto head = split_commas(line);
  if (head.size() != 6) throw FormatError("field csv line 1: expected nx,ny,ax,bx,ay,by");
  const double nxd = parse_double(head[0], 1), nyd = parse_double(head[1], 1);
  if (nxd != std::floor(nxd) || nyd != std::floor(nyd))
    throw FormatError("field csv line 1: node counts must be integers");
  Grid2D<double> grid;
  try {
    grid = Grid2D<double>(Index(nxd), Index(nyd), parse_double(head[2], 1),
                          parse_double(head[3], 1), parse_double(head[4], 1),
                          parse_double(head[5], 1));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("field csv line 1: ") + e.what());
  }
  ScalarField<double> f(grid);
  for (Index j = 0; j < grid.ny; ++j) {
    const int lineno = int(j) + 2;
    if (!std::getline(is, line))
      throw FormatError("field csv: expected " + std::to_string(grid.ny) + " rows, got " +
                        std::to_string(j));
    const auto cells = split_commas(line);
    if (Index(cells.size()) != grid.nx)
      throw FormatError("field csv line " + std::to_string(lineno) + ": expected " +
                        std::to_string(grid.nx) + " values");
    for (Index i = 0; i < grid.nx; ++i) {
      f(i, j) = parse_double(cells[std::size_t(i)], lineno);
      if (!std::isfinite(f(i, j)))
        throw FormatError("field csv line " + std::to_string(lineno) + ": non-finite value");
    }
  }
  while (std::getline(is, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos)
      throw FormatError("field csv: trailing data after the last row");
  return f;
}

ScalarField<double> read_field_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_field_csv(is);
}

void write_labels_csv(std::ostream& os, const FreeBoundary<double>& fb) {
  const auto& g = fb.grid;
  write_header(os, g);
  for (Index j = 0; j < g.ny; ++j) {
    for (Index i = 0; i < g.nx; ++i) {
      if (i) os << ',';
      os << label_name(fb(i, j));
    }
    os << '\n';
  }
}

void write_labels_csv(const std::filesystem::path& path, const FreeBoundary<double>& fb) {
  auto os = open_out(path);
  write_labels_csv(os, fb);
}

}  // namespace membrane
