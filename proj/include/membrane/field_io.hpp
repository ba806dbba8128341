#ifndef MEMBRANE_FIELD_IO_HPP
#define MEMBRANE_FIELD_IO_HPP

#include "membrane/state.hpp"

#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace membrane {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Field CSV: a header line `nx,ny,ax,bx,ay,by`, then ny rows of nx values,
/// row j = 0 first.
void write_field_csv(std::ostream& os, const ScalarField<double>& f);
void write_field_csv(const std::filesystem::path& path, const ScalarField<double>& f);

ScalarField<double> read_field_csv(std::istream& is);
ScalarField<double> read_field_csv(const std::filesystem::path& path);

/// Same layout as the field CSV with labels P, N, Z, G1, G2 in place of values.
void write_labels_csv(std::ostream& os, const FreeBoundary<double>& fb);
void write_labels_csv(const std::filesystem::path& path, const FreeBoundary<double>& fb);

}  // namespace membrane

#endif  // MEMBRANE_FIELD_IO_HPP
