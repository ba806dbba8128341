// membrane-opt <command> --config <path> [--out <dir>] [--seed N]
#include "membrane/cli/run.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  using namespace membrane::cli;

  CLI::App app{"Two-phase membrane solver and optimal control driver"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;

  for (const char* name : {"state", "optimize", "verify", "sweep-eps", "make-target"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file (key = value lines)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config's out)");
    sub->add_option("--seed", seed, "random seed (overrides the config's seed)");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    std::ifstream is(config_path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read config " + config_path);
    std::ostringstream text;
    text << is.rdbuf();
    const auto base = std::filesystem::path(config_path).parent_path();
    RunConfig cfg = parse_config(text.str(), parse_command(name), base.empty() ? "." : base);
    if (seed) cfg.seed = *seed;
    const std::filesystem::path out = out_dir.empty() ? std::filesystem::path(cfg.out) : std::filesystem::path(out_dir);
    return run(cfg, out, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << error_record(e) << std::endl;
    return 2;
  }
}
