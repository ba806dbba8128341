#include "membrane/cli/run.hpp"

#include "membrane/control.hpp"
#include "membrane/field_io.hpp"
#include "membrane/verify.hpp"
#include "membrane/version.hpp"

#include "json.hpp"

#include <chrono>
#include <fstream>

namespace membrane::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Field = ScalarField<double>;

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_{std::chrono::steady_clock::now()};
};

struct Context {
  const RunConfig& cfg;
  fs::path out;
  std::ostream& log;
  std::vector<std::string> outputs;
  json timings = json::object();

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream os(file(name), std::ios::binary);
    os << j.dump(2) << '\n';
  }
  void event(json j) { log << j.dump() << std::endl; }
};

OptimizerConfig<double> optimizer_config(const RunConfig& cfg) {
  OptimizerConfig<double> o;
  o.lambda = cfg.lambda.value_or(o.lambda);
  o.eps = cfg.eps;
  o.step0 = cfg.step0;
  o.armijo_c = cfg.armijo_c;
  o.shrink = cfg.shrink;
  o.max_iters = cfg.max_iters;
  o.stat_tol = cfg.stat_tol;
  o.state_tol = cfg.state_tol;
  o.max_newton = cfg.max_newton;
  return o;
}

json state_json(const StateSolution<double>& s) {
  return {{"newton_iters", s.newton_iters},
          {"final_residual", s.final_residual},
          {"energy", s.energy},
          {"converged", s.converged}};
}

json labels_json(const FreeBoundary<double>& fb) {
  return {{"P", fb.count(NodeLabel::Positive)},
          {"N", fb.count(NodeLabel::Negative)},
          {"Z", fb.count(NodeLabel::Zero)},
          {"G1", fb.count(NodeLabel::Tangential)},
          {"G2", fb.count(NodeLabel::Transversal)}};
}

std::string eps_tag(double eps) { return "eps_" + format_double(eps); }

int run_state(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto data = cfg.problem();
  NewtonOptions<double> opt;
  opt.tol = cfg.tol;
  opt.max_newton = cfg.max_newton;

  json diag = {{"mode", cfg.mode == StateMode::TwoPhase   ? "two-phase"
                        : cfg.mode == StateMode::OnePhase ? "one-phase"
                                                          : "limit"}};
  StateSolution<double> sol;
  Clock clock;
  switch (cfg.mode) {
    case StateMode::TwoPhase:
      sol = solve_state(data, Smoother<double>(cfg.eps), opt);
      diag["eps"] = cfg.eps;
      diag["energy_two_phase"] = energy_two_phase(sol.u, data);
      break;
    case StateMode::OnePhase:
      sol = solve_one_phase(data, Smoother<double>(cfg.eps), opt);
      diag["eps"] = cfg.eps;
      break;
    case StateMode::Limit: {
      auto lim = solve_state_limit(data, cfg.eps0, cfg.tol_h1, cfg.tol, cfg.max_newton);
      diag["eps_levels"] = lim.eps;
      diag["h1_steps"] = lim.h1_steps;
      diag["limit_converged"] = lim.converged;
      diag["eps"] = lim.eps.back();
      sol = std::move(lim.state);
      sol.converged = sol.converged && lim.converged;
      break;
    }
  }
  ctx.timings["solve"] = clock.seconds();

  const auto fb = free_boundary(sol.u, cfg.utol, cfg.gtol);
  write_field_csv(ctx.file("u.csv"), sol.u);
  write_labels_csv(ctx.file("labels.csv"), fb);
  diag["state"] = state_json(sol);
  diag["labels"] = labels_json(fb);
  diag["warnings"] = cfg.warnings;
  ctx.write_json("diagnostics.json", diag);
  ctx.event({{"event", "state"}, {"converged", sol.converged}, {"residual", sol.final_residual},
             {"newton_iters", sol.newton_iters}});
  return sol.converged ? 0 : 1;
}

int run_make_target(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto data = cfg.problem().with_control(*cfg.phi_target);
  Clock clock;
  const auto sol = solve_state(data, Smoother<double>(cfg.eps), cfg.tol, cfg.max_newton);
  ctx.timings["solve"] = clock.seconds();
  write_field_csv(ctx.file("z.csv"), sol.u);
  write_field_csv(ctx.file("phi_target.csv"), *cfg.phi_target);
  ctx.write_json("diagnostics.json",
                 {{"eps", cfg.eps}, {"state", state_json(sol)}, {"warnings", cfg.warnings}});
  ctx.event({{"event", "make-target"}, {"converged", sol.converged},
             {"residual", sol.final_residual}});
  return sol.converged ? 0 : 1;
}

void write_optimize_log(std::ostream& os, const OptimizeReport<double>& rep, double j0,
                        double opt_res, double lambda) {
  for (const auto& h : rep.history)
    os << json{{"event", "iteration"}, {"eps", rep.eps}, {"iter", h.iter},
               {"objective", h.objective}, {"stationarity", h.stationarity}, {"step", h.step}}
              .dump()
       << '\n';
  const bool monotone = std::is_sorted(rep.objective_trace.rbegin(), rep.objective_trace.rend());
  os << json{{"event", "final"},
             {"eps", rep.eps},
             {"lambda", lambda},
             {"iterations", rep.iters},
             {"objective", rep.objective_trace.back()},
             {"objective_at_zero", j0},
             {"tracking", rep.tracking},
             {"tracking_ratio", j0 > 0 ? rep.tracking / j0 : 0.0},
             {"stationarity", rep.stationarity},
             {"optimality_residual", opt_res},
             {"monotone", monotone},
             {"converged", rep.converged}}
            .dump()
     << '\n';
}

int run_optimize(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto data = cfg.problem();
  const auto ocfg = optimizer_config(cfg);
  Clock clock;
  const auto rep = optimize(data, *cfg.z, ocfg);
  ctx.timings["optimize"] = clock.seconds();
  const double j0 = objective(Field(cfg.grid, 0.0), *cfg.z, ocfg, data);
  const double res = optimality_residual(rep.phi, rep.u, rep.p, data, ocfg.lambda);

  write_field_csv(ctx.file("phi.csv"), rep.phi);
  write_field_csv(ctx.file("u.csv"), rep.u);
  write_field_csv(ctx.file("p.csv"), rep.p);
  std::ofstream os(ctx.file("log.jsonl"), std::ios::binary);
  write_optimize_log(os, rep, j0, res, ocfg.lambda);
  ctx.event({{"event", "optimize"}, {"iterations", rep.iters}, {"converged", rep.converged},
             {"stationarity", rep.stationarity}});
  return 0;
}

int run_verify(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  verify::VerifyConfig vc;
  vc.seed = cfg.seed;
  vc.n = cfg.verify_n;
  vc.instances = cfg.verify_instances;
  vc.eps = cfg.verify_eps;
  vc.eps_list = cfg.eps_list;
  Clock clock;
  const auto reports = verify::run_all(vc);
  ctx.timings["verify"] = clock.seconds();
  std::ofstream os(ctx.file("checks.jsonl"), std::ios::binary);
  verify::write_jsonl(os, reports);
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.passed;
    ctx.event({{"event", "check"}, {"name", r.name}, {"passed", r.passed},
               {"worst_violation", r.worst_violation}});
  }
  return ok ? 0 : 1;
}

int run_sweep(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto data = cfg.problem();
  std::ofstream dist(ctx.file("distances.csv"), std::ios::binary);
  Clock clock;
  if (cfg.z) {
    const auto path = epsilon_path(data, *cfg.z, optimizer_config(cfg), cfg.eps_list);
    std::ofstream log(ctx.file("log.jsonl"), std::ios::binary);
    for (const auto& rep : path.reports) {
      const std::string tag = eps_tag(rep.eps);
      write_field_csv(ctx.file("phi_" + tag + ".csv"), rep.phi);
      write_field_csv(ctx.file("u_" + tag + ".csv"), rep.u);
      write_field_csv(ctx.file("p_" + tag + ".csv"), rep.p);
      const double j0 = objective(Field(cfg.grid, 0.0), *cfg.z,
                                  [&] { auto o = optimizer_config(cfg); o.eps = rep.eps; return o; }(),
                                  data);
      write_optimize_log(log, rep, j0,
                         optimality_residual(rep.phi, rep.u, rep.p, data, *cfg.lambda),
                         *cfg.lambda);
    }
    dist << "eps_from,eps_to,phi_l2,u_h1\n";
    for (std::size_t k = 0; k < path.phi_l2_distances.size(); ++k)
      dist << format_double(cfg.eps_list[k]) << ',' << format_double(cfg.eps_list[k + 1]) << ','
           << format_double(path.phi_l2_distances[k]) << ','
           << format_double(path.u_h1_distances[k]) << '\n';
  } else {
    NewtonOptions<double> opt;
    opt.tol = cfg.tol;
    opt.max_newton = cfg.max_newton;
    std::vector<Field> us;
    bool ok = true;
    for (double eps : cfg.eps_list) {
      auto sol = solve_state(data, Smoother<double>(eps), opt);
      ok = ok && sol.converged;
      write_field_csv(ctx.file("u_" + eps_tag(eps) + ".csv"), sol.u);
      ctx.event({{"event", "state"}, {"eps", eps}, {"converged", sol.converged},
                 {"residual", sol.final_residual}});
      opt.initial = sol.u;
      us.push_back(std::move(sol.u));
    }
    dist << "eps_from,eps_to,u_h1\n";
    for (std::size_t k = 0; k + 1 < us.size(); ++k)
      dist << format_double(cfg.eps_list[k]) << ',' << format_double(cfg.eps_list[k + 1]) << ','
           << format_double(h1_norm(us[k] - us[k + 1])) << '\n';
    if (!ok) {
      ctx.timings["sweep"] = clock.seconds();
      return 1;
    }
  }
  ctx.timings["sweep"] = clock.seconds();
  return 0;
}

}  // namespace

std::string error_record(const std::exception& e) {
  json j = {{"event", "error"}, {"message", e.what()}};
  if (auto* p = dynamic_cast<const ConfigParseError*>(&e)) {
    j["type"] = "config_parse";
    j["line"] = p->line();
  } else if (auto* v = dynamic_cast<const ConfigValidationError*>(&e)) {
    j["type"] = "config_validation";
    j["key"] = v->key();
  } else if (auto* c = dynamic_cast<const ConvergenceError*>(&e)) {
    j["type"] = "convergence";
    j["residual"] = c->residual();
    j["iterations"] = c->iterations();
  } else if (dynamic_cast<const FormatError*>(&e)) {
    j["type"] = "format";
  } else if (dynamic_cast<const std::invalid_argument*>(&e)) {
    j["type"] = "invalid_argument";
  } else {
    j["type"] = "runtime";
  }
  return j.dump();
}

int run(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  Clock total;
  Context ctx{cfg, out_dir, log, {}};
  int status = 2;
  std::string error;
  try {
    fs::create_directories(out_dir);
    for (const auto& w : cfg.warnings) ctx.event({{"event", "warning"}, {"message", w}});
    switch (cfg.command) {
      case Command::State: status = run_state(ctx); break;
      case Command::Optimize: status = run_optimize(ctx); break;
      case Command::Verify: status = run_verify(ctx); break;
      case Command::SweepEps: status = run_sweep(ctx); break;
      case Command::MakeTarget: status = run_make_target(ctx); break;
    }
  } catch (const std::exception& e) {
    error = error_record(e);
    log << error << std::endl;
    status = 2;
  }
  ctx.timings["total"] = total.seconds();

  json manifest = {{"tool", "membrane-opt"},
                   {"version", version},
                   {"command", command_name(cfg.command)},
                   {"config_hash", config_hash(cfg.text)},
                   {"seed", cfg.seed},
                   {"exit_status", status},
                   {"outputs", ctx.outputs},
                   {"timings_s", ctx.timings}};
  if (!error.empty()) manifest["error"] = json::parse(error);
  try {
    std::ofstream os(out_dir / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write manifest.json");
  } catch (const std::exception& e) {
    log << error_record(e) << std::endl;
    return 2;
  }
  return status;
}

}  // namespace membrane::cli
