#include "membrane/cli/config.hpp"

#include "membrane/field_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace membrane::cli {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "command", "nx",        "ny",        "ax",        "bx",       "ay",
      "by",      "f_plus",    "f_minus",   "g",         "phi",      "phi_file",
      "z",       "z_file",    "phi_target", "phi_target_file", "eps", "eps_list",
      "eps0",    "tol_h1",    "tol",       "max_newton", "lambda",  "step0",
      "armijo_c", "shrink",   "max_iters", "stat_tol",  "state_tol", "mode",
      "utol",    "gtol",      "seed",      "out",       "verify_n", "verify_instances",
      "verify_eps"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& raw(const std::string& key) const { return entries_.at(key).value; }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return to_double(key, raw(key));
  }
  double positive(const std::string& key, double fallback) const {
    const double v = number(key, fallback);
    if (!(v > 0)) throw ConfigValidationError(key, "must be positive");
    return v;
  }
  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigValidationError(key, "expected an integer, got '" + s + "'");
    return v;
  }
  std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::string cell;
    std::istringstream ss(raw(key));
    while (std::getline(ss, cell, ',')) out.push_back(to_double(key, trim(cell)));
    if (out.empty()) throw ConfigValidationError(key, "empty list");
    return out;
  }
  std::optional<Expression> expression(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    try {
      return Expression::parse(raw(key));
    } catch (const ExpressionError& e) {
      throw ConfigValidationError(key, e.what());
    }
  }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      throw ConfigValidationError(key, "expected a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, Entry> entries_;
};

ScalarField<double> sample_expr(const Grid2D<double>& grid, const Expression& e,
                                const std::string& key) {
  auto f = ScalarField<double>::sample(grid, [&](double x, double y) { return e(x, y); });
  if (!f.all_finite()) throw ConfigValidationError(key, "expression is not finite on the grid");
  return f;
}

/// Field from an expression key or a CSV file key; at most one of the two.
std::optional<ScalarField<double>> field_source(const Reader& r, const Grid2D<double>& grid,
                                                const std::string& expr_key,
                                                const std::string& file_key,
                                                const std::filesystem::path& base_dir) {
  if (r.has(expr_key) && r.has(file_key))
    throw ConfigValidationError(file_key, "conflicts with '" + expr_key + "'");
  if (auto e = r.expression(expr_key)) return sample_expr(grid, *e, expr_key);
  if (!r.has(file_key)) return std::nullopt;
  std::filesystem::path path = r.raw(file_key);
  if (path.is_relative()) path = base_dir / path;
  ScalarField<double> f = [&] {
    try {
      return read_field_csv(path);
    } catch (const std::exception& e) {
      throw ConfigValidationError(file_key, e.what());
    }
  }();
  if (!(f.grid() == grid)) throw ConfigValidationError(file_key, "grid does not match nx/ny/ax/bx/ay/by");
  return f;
}

}  // namespace

const char* command_name(Command c) {
  switch (c) {
    case Command::State: return "state";
    case Command::Optimize: return "optimize";
    case Command::Verify: return "verify";
    case Command::SweepEps: return "sweep-eps";
    case Command::MakeTarget: return "make-target";
  }
  return "?";
}

std::optional<Command> parse_command(const std::string& name) {
  for (Command c : {Command::State, Command::Optimize, Command::Verify, Command::SweepEps,
                    Command::MakeTarget})
    if (name == command_name(c)) return c;
  return std::nullopt;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, std::optional<Command> command,
                       const std::filesystem::path& base_dir) {
  std::map<std::string, Entry> entries;
  {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigParseError(lineno, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigParseError(lineno, "missing key");
      if (!known_keys().count(key)) throw ConfigParseError(lineno, "unknown key '" + key + "'");
      if (value.empty()) throw ConfigParseError(lineno, "missing value for '" + key + "'");
      if (entries.count(key)) throw ConfigParseError(lineno, "duplicate key '" + key + "'");
      entries.emplace(key, Entry{value, lineno});
    }
  }
  const Reader r(std::move(entries));

  RunConfig cfg;
  cfg.text = text;

  if (r.has("command")) {
    auto c = parse_command(r.raw("command"));
    if (!c) throw ConfigValidationError("command", "unknown command '" + r.raw("command") + "'");
    if (command && *command != *c)
      throw ConfigValidationError("command", std::string("config says '") + command_name(*c) +
                                                 "' but '" + command_name(*command) +
                                                 "' was requested");
    cfg.command = *c;
  } else if (command) {
    cfg.command = *command;
  } else {
    throw ConfigValidationError("command", "no command given");
  }

  const long long nx = r.integer("nx", 33), ny = r.integer("ny", nx);
  if (nx < 3) throw ConfigValidationError("nx", "need at least 3 nodes");
  if (ny < 3) throw ConfigValidationError("ny", "need at least 3 nodes");
  const double ax = r.number("ax", 0), bx = r.number("bx", 1);
  const double ay = r.number("ay", 0), by = r.number("by", 1);
  if (!(bx > ax)) throw ConfigValidationError("bx", "must exceed ax");
  if (!(by > ay)) throw ConfigValidationError("by", "must exceed ay");
  cfg.grid = Grid2D<double>(nx, ny, ax, bx, ay, by);

  auto coefficient = [&](const std::string& key) {
    auto e = r.expression(key);
    ScalarField<double> f = e ? sample_expr(cfg.grid, *e, key) : ScalarField<double>(cfg.grid, 1.0);
    if ((f.values().array() < 0).any()) throw ConfigValidationError(key, "must be nonnegative on the grid");
    return f;
  };
  cfg.fp = coefficient("f_plus");
  cfg.fm = coefficient("f_minus");

  if (auto e = r.expression("g"))
    cfg.g = BoundaryData<double>::from_field(sample_expr(cfg.grid, *e, "g"));
  else
    cfg.g = BoundaryData<double>::zero(cfg.grid);

  cfg.phi = field_source(r, cfg.grid, "phi", "phi_file", base_dir)
                .value_or(ScalarField<double>(cfg.grid, 0.0));
  cfg.z = field_source(r, cfg.grid, "z", "z_file", base_dir);
  cfg.phi_target = field_source(r, cfg.grid, "phi_target", "phi_target_file", base_dir);

  if (r.has("mode")) {
    const std::string m = r.raw("mode");
    if (m == "two-phase") cfg.mode = StateMode::TwoPhase;
    else if (m == "one-phase") cfg.mode = StateMode::OnePhase;
    else if (m == "limit") cfg.mode = StateMode::Limit;
    else throw ConfigValidationError("mode", "expected two-phase, one-phase or limit");
  }
  if (cfg.mode == StateMode::OnePhase && cfg.g.sign_changing())
    cfg.warnings.push_back("g changes sign on the boundary; one-phase mode expects g >= 0");
  if (cfg.mode == StateMode::OnePhase && ((cfg.fp - cfg.phi).values().array() < 0).any())
    throw ConfigValidationError("phi", "one-phase mode needs f_plus - phi >= 0");

  // Smoothing width scales with the boundary amplitude unless given.
  const double g_amp = cfg.g.max_abs();
  cfg.eps = r.has("eps") ? r.positive("eps", 0) : (g_amp > 0 ? 0.1 * g_amp : 0.1);
  cfg.eps_list = r.list("eps_list", cfg.eps_list);
  for (std::size_t k = 0; k < cfg.eps_list.size(); ++k) {
    if (!(cfg.eps_list[k] > 0)) throw ConfigValidationError("eps_list", "entries must be positive");
    if (k && !(cfg.eps_list[k] < cfg.eps_list[k - 1]))
      throw ConfigValidationError("eps_list", "must be strictly decreasing");
  }
  cfg.eps0 = r.positive("eps0", cfg.eps);
  cfg.tol_h1 = r.positive("tol_h1", cfg.tol_h1);
  cfg.tol = r.positive("tol", cfg.tol);
  cfg.max_newton = int(r.integer("max_newton", cfg.max_newton));
  if (cfg.max_newton <= 0) throw ConfigValidationError("max_newton", "must be positive");

  if (r.has("lambda")) cfg.lambda = r.positive("lambda", 0);
  cfg.step0 = r.positive("step0", cfg.step0);
  cfg.armijo_c = r.number("armijo_c", cfg.armijo_c);
  if (!(cfg.armijo_c > 0 && cfg.armijo_c < 1)) throw ConfigValidationError("armijo_c", "must lie in (0, 1)");
  cfg.shrink = r.number("shrink", cfg.shrink);
  if (!(cfg.shrink > 0 && cfg.shrink < 1)) throw ConfigValidationError("shrink", "must lie in (0, 1)");
  cfg.max_iters = int(r.integer("max_iters", cfg.max_iters));
  if (cfg.max_iters <= 0) throw ConfigValidationError("max_iters", "must be positive");
  cfg.stat_tol = r.positive("stat_tol", cfg.stat_tol);
  cfg.state_tol = r.positive("state_tol", cfg.state_tol);

  cfg.utol = r.positive("utol", cfg.utol);
  cfg.gtol = r.positive("gtol", cfg.gtol);

  const long long seed = r.integer("seed", static_cast<long long>(cfg.seed));
  if (seed < 0) throw ConfigValidationError("seed", "must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (r.has("out")) cfg.out = r.raw("out");

  cfg.verify_n = r.integer("verify_n", cfg.verify_n);
  if (cfg.verify_n < 5) throw ConfigValidationError("verify_n", "need at least 5 nodes");
  cfg.verify_instances = int(r.integer("verify_instances", cfg.verify_instances));
  if (cfg.verify_instances <= 0) throw ConfigValidationError("verify_instances", "must be positive");
  cfg.verify_eps = r.positive("verify_eps", cfg.verify_eps);

  switch (cfg.command) {
    case Command::Optimize:
      if (!cfg.lambda) throw ConfigValidationError("lambda", "required by optimize");
      if (!cfg.z) throw ConfigValidationError("z", "required by optimize (or give z_file)");
      break;
    case Command::MakeTarget:
      if (!cfg.phi_target) throw ConfigValidationError("phi_target", "required by make-target");
      break;
    case Command::SweepEps:
      if (cfg.z && !cfg.lambda) throw ConfigValidationError("lambda", "required by an optimal-control sweep");
      break;
    default:
      break;
  }
  return cfg;
}

}  // namespace membrane::cli
