#ifndef MEMBRANE_CLI_RUN_HPP
#define MEMBRANE_CLI_RUN_HPP

#include "membrane/cli/config.hpp"

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>

namespace membrane::cli {

/// Executes one command, writing its artifacts and manifest.json into
/// out_dir. Progress and errors go to `log` as JSON lines. Returns the
/// process exit status: 0 on success, 1 when a check or solve fails, 2 on
/// errors.
int run(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

/// Single-line JSON error record.
std::string error_record(const std::exception& e);

}  // namespace membrane::cli

#endif  // MEMBRANE_CLI_RUN_HPP
