#ifndef MEMBRANE_CLI_CONFIG_HPP
#define MEMBRANE_CLI_CONFIG_HPP

#include "membrane/cli/expression.hpp"
#include "membrane/state.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace membrane::cli {

enum class Command { State, Optimize, Verify, SweepEps, MakeTarget };

const char* command_name(Command c);
std::optional<Command> parse_command(const std::string& name);

/// Syntax problem; carries the 1-based line.
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(int line, const std::string& what)
      : std::runtime_error("config line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Semantic problem; carries the offending key.
class ConfigValidationError : public std::runtime_error {
 public:
  ConfigValidationError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// State mode: regularized two-phase, regularized one-phase obstacle, or the
/// eps -> 0 limit by halving.
enum class StateMode { TwoPhase, OnePhase, Limit };

struct RunConfig {
  Command command{Command::State};
  /// Verbatim config text; hashed into the manifest.
  std::string text;

  Grid2D<double> grid{Grid2D<double>::unit_square(33)};
  ScalarField<double> fp{grid, 1.0};
  ScalarField<double> fm{grid, 1.0};
  BoundaryData<double> g{BoundaryData<double>::zero(grid)};
  ScalarField<double> phi{grid, 0.0};
  std::optional<ScalarField<double>> z;
  std::optional<ScalarField<double>> phi_target;

  double eps{0.1};
  std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025, 0.0125};
  double eps0{0.1};
  double tol_h1{1e-6};
  double tol{1e-10};
  int max_newton{100};

  std::optional<double> lambda;
  double step0{1};
  double armijo_c{1e-4};
  double shrink{0.5};
  int max_iters{500};
  double stat_tol{1e-6};
  double state_tol{1e-12};

  StateMode mode{StateMode::TwoPhase};
  double utol{1e-8};
  /// The centred gradient at a tangential touch is O(h), so this cannot be tiny.
  double gtol{0.1};

  std::uint64_t seed{20240917};
  std::string out{"out"};

  Index verify_n{33};
  int verify_instances{100};
  double verify_eps{0.01};

  std::vector<std::string> warnings;

  ProblemData<double> problem() const { return {grid, fp, fm, g, phi}; }
};

/// Parses `key = value` lines (`#` starts a comment). File paths in
/// `phi_file`/`z_file` resolve relative to base_dir. If `command` is given it
/// must agree with a `command` key in the text, if any.
RunConfig parse_config(const std::string& text, std::optional<Command> command = {},
                       const std::filesystem::path& base_dir = ".");

/// 64-bit FNV-1a, hex encoded.
std::string config_hash(const std::string& text);

}  // namespace membrane::cli

#endif  // MEMBRANE_CLI_CONFIG_HPP
