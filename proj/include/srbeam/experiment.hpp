#pragma once

// Experiment orchestration: config-file parsing, scenario sweeps over a
// policy/seed grid with a worker pool, deterministic CSV emission, stored
// per-row solutions, and the audit pass that re-derives every stored row
// through the link metrics.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "srbeam/analysis.hpp"
#include "srbeam/baselines.hpp"
#include "srbeam/sdr.hpp"

namespace srbeam {

enum class Scenario { SweepK, SweepRate, Convergence, RankTable, MpCheck };
enum class Policy { AO, LowComplexity, RandomBeam, NoRIS, RandomInit, GridSearchAO, PureAssist };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::SweepK: return "sweep_k";
    case Scenario::SweepRate: return "sweep_rate";
    case Scenario::Convergence: return "convergence";
    case Scenario::RankTable: return "rank_table";
    case Scenario::MpCheck: return "mp_check";
  }
  return "unknown";
}

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::AO: return "ao";
    case Policy::LowComplexity: return "low_complexity";
    case Policy::RandomBeam: return "random_beam";
    case Policy::NoRIS: return "no_ris";
    case Policy::RandomInit: return "random_init";
    case Policy::GridSearchAO: return "grid_search";
    case Policy::PureAssist: return "pure_assist";
  }
  return "unknown";
}

struct ExperimentConfig {
  Scenario scenario = Scenario::SweepK;
  std::vector<Policy> policies = {Policy::AO, Policy::LowComplexity,
                                  Policy::RandomBeam, Policy::NoRIS};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
                                 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  std::vector<int> k_list = {4, 8, 16, 32};
  std::vector<double> rate_list = {1.0, 3.0, 5.0, 7.0, 9.0};
  SystemConfig system;
  LinkGeometry geometry;
  bool blocked_direct = false;  // zero both direct links (weak-direct scenario)
  bool co_located = false;      // G2 := G1 (requires N1 == N2)

  int max_outer = 30;
  double power_rel_tol = 1e-4;
  ElementMethod subproblem = ElementMethod::MaxMinAnalytic;
  double grid_resolution = 0.005;
  int num_candidates = 200;
  int retry_random_init = 0;
  double solver_tol = 1e-7;
  double solver_mu = 10.0;
  int max_newton = 200;

  int quad_points = 2000;    // mp_check quadrature nodes
  int mc_trials = 50;        // mp_check realizations per point
  double mp_power_w = 1e-2;  // mp_check per-antenna transmit power
  int table_seeds = 10;      // rank_table realizations

  std::string out_dir = "out";
  int jobs = 0;  // 0: hardware concurrency
  bool timing = false;

  void validate() const {
    system.validate();
    geometry.validate();
    if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
    if (policies.empty()) throw ConfigError("config: policies must be nonempty");
    const bool solver_scenario = scenario == Scenario::SweepK ||
                                 scenario == Scenario::SweepRate ||
                                 scenario == Scenario::Convergence;
    for (int k : k_list) {
      if (k < 1) throw ConfigError("config: k values must be positive");
      if (solver_scenario && k > 64)
        throw ConfigError("config: k values must lie in [1, 64] (solver ceiling)");
    }
    if (solver_scenario && system.ris_elements > 64)
      throw ConfigError("config: k must lie in [1, 64] (solver ceiling)");
    if (co_located && system.pr_antennas != system.sr_antennas)
      throw ConfigError("config: co_located requires n1 == n2");
    if (grid_resolution <= 0.0) throw ConfigError("config: grid_resolution must be > 0");
    if (num_candidates < 1) throw ConfigError("config: num_candidates must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Config file: `key value` lines, '#' comments. Unknown keys are rejected
// with their line number. An empty file yields the default benchmark setup.

namespace detail_cfg {

inline double parse_double(const std::string& v, int line) {
  if (v == "inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) + ": bad number '" + v + "'");
  }
}

inline long long parse_int(const std::string& v, int line) {
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line) + ": bad integer '" + v + "'");
  }
}

inline std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline Policy parse_policy(const std::string& v, int line) {
  for (Policy p : {Policy::AO, Policy::LowComplexity, Policy::RandomBeam,
                   Policy::NoRIS, Policy::RandomInit, Policy::GridSearchAO,
                   Policy::PureAssist})
    if (v == to_string(p)) return p;
  throw ConfigError("config line " + std::to_string(line) + ": unknown policy '" + v + "'");
}

inline std::vector<uint64_t> parse_seeds(const std::string& v, int line) {
  std::vector<uint64_t> out;
  for (const std::string& part : split_commas(v)) {
    const size_t dots = part.find("..");
    if (dots != std::string::npos) {
      const long long a = parse_int(part.substr(0, dots), line);
      const long long b = parse_int(part.substr(dots + 2), line);
      if (a < 0 || b < a)
        throw ConfigError("config line " + std::to_string(line) + ": bad seed range");
      for (long long s = a; s <= b; ++s) out.push_back(static_cast<uint64_t>(s));
    } else {
      out.push_back(static_cast<uint64_t>(parse_int(part, line)));
    }
  }
  return out;
}

}  // namespace detail_cfg

inline ExperimentConfig parse_config(std::istream& in) {
  using namespace detail_cfg;
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  bool scenario_set = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::istringstream ls(raw);
    std::string key, value, extra;
    if (!(ls >> key)) continue;
    if (!(ls >> value))
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key +
                        "' has no value");
    if (ls >> extra)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": trailing content after value");
    seen.insert(key);

    auto setd = [&](double& dst) { dst = parse_double(value, line_no); };
    auto seti = [&](int& dst) { dst = static_cast<int>(parse_int(value, line_no)); };
    auto setb = [&](bool& dst) {
      if (value == "0" || value == "false") dst = false;
      else if (value == "1" || value == "true") dst = true;
      else
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 0/1");
    };

    if (key == "scenario") {
      scenario_set = true;
      if (value == "sweep_k") cfg.scenario = Scenario::SweepK;
      else if (value == "sweep_rate") cfg.scenario = Scenario::SweepRate;
      else if (value == "convergence") cfg.scenario = Scenario::Convergence;
      else if (value == "rank_table") cfg.scenario = Scenario::RankTable;
      else if (value == "mp_check") cfg.scenario = Scenario::MpCheck;
      else
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown scenario '" + value + "'");
    } else if (key == "policies") {
      cfg.policies.clear();
      for (const std::string& p : split_commas(value))
        cfg.policies.push_back(parse_policy(p, line_no));
    } else if (key == "seeds") {
      cfg.seeds = parse_seeds(value, line_no);
    } else if (key == "k_list") {
      cfg.k_list.clear();
      for (const std::string& p : split_commas(value))
        cfg.k_list.push_back(static_cast<int>(parse_int(p, line_no)));
    } else if (key == "rate_list") {
      cfg.rate_list.clear();
      for (const std::string& p : split_commas(value))
        cfg.rate_list.push_back(parse_double(p, line_no));
    } else if (key == "m") {
      seti(cfg.system.pt_antennas);
    } else if (key == "n1") {
      seti(cfg.system.pr_antennas);
    } else if (key == "n2") {
      seti(cfg.system.sr_antennas);
    } else if (key == "k") {
      seti(cfg.system.ris_elements);
    } else if (key == "l") {
      seti(cfg.system.symbol_ratio);
    } else if (key == "alpha") {
      setd(cfg.system.reflect_efficiency);
    } else if (key == "sigma2_w") {
      setd(cfg.system.noise_power_w);
    } else if (key == "sigma2_dbm") {
      cfg.system.noise_power_w =
          std::pow(10.0, (parse_double(value, line_no) - 30.0) / 10.0);
    } else if (key == "rate_target") {
      setd(cfg.system.rate_target);
    } else if (key == "snr_target") {
      setd(cfg.system.snr_target);
    } else if (key == "beta_db") {
      setd(cfg.geometry.beta_db);
    } else if (key == "gamma_e") {
      setd(cfg.geometry.gamma_e);
    } else if (key == "spacing_ratio") {
      setd(cfg.geometry.spacing_ratio);
    } else if (key == "random_angles") {
      setb(cfg.geometry.randomize_angles);
    } else if (key == "d_h1") {
      setd(cfg.geometry.pt_to_pr.distance_m);
    } else if (key == "d_h2") {
      setd(cfg.geometry.pt_to_sr.distance_m);
    } else if (key == "d_h3") {
      setd(cfg.geometry.pt_to_ris.distance_m);
    } else if (key == "d_g1") {
      setd(cfg.geometry.ris_to_pr.distance_m);
    } else if (key == "d_g2") {
      setd(cfg.geometry.ris_to_sr.distance_m);
    } else if (key == "kappa") {
      const double v = parse_double(value, line_no);
      for (LinkParams* l : {&cfg.geometry.pt_to_pr, &cfg.geometry.pt_to_sr,
                            &cfg.geometry.pt_to_ris, &cfg.geometry.ris_to_pr,
                            &cfg.geometry.ris_to_sr})
        l->rician_kappa = v;
    } else if (key == "kappa_h1") {
      setd(cfg.geometry.pt_to_pr.rician_kappa);
    } else if (key == "kappa_h2") {
      setd(cfg.geometry.pt_to_sr.rician_kappa);
    } else if (key == "kappa_h3") {
      setd(cfg.geometry.pt_to_ris.rician_kappa);
    } else if (key == "kappa_g1") {
      setd(cfg.geometry.ris_to_pr.rician_kappa);
    } else if (key == "kappa_g2") {
      setd(cfg.geometry.ris_to_sr.rician_kappa);
    } else if (key == "aoa_h1") {
      setd(cfg.geometry.pt_to_pr.aoa_rad);
    } else if (key == "aoa_h2") {
      setd(cfg.geometry.pt_to_sr.aoa_rad);
    } else if (key == "aoa_h3") {
      setd(cfg.geometry.pt_to_ris.aoa_rad);
    } else if (key == "aoa_g1") {
      setd(cfg.geometry.ris_to_pr.aoa_rad);
    } else if (key == "aoa_g2") {
      setd(cfg.geometry.ris_to_sr.aoa_rad);
    } else if (key == "aod_h1") {
      setd(cfg.geometry.pt_to_pr.aod_rad);
    } else if (key == "aod_h2") {
      setd(cfg.geometry.pt_to_sr.aod_rad);
    } else if (key == "aod_h3") {
      setd(cfg.geometry.pt_to_ris.aod_rad);
    } else if (key == "aod_g1") {
      setd(cfg.geometry.ris_to_pr.aod_rad);
    } else if (key == "aod_g2") {
      setd(cfg.geometry.ris_to_sr.aod_rad);
    } else if (key == "blocked_direct") {
      setb(cfg.blocked_direct);
    } else if (key == "co_located") {
      setb(cfg.co_located);
    } else if (key == "max_outer") {
      seti(cfg.max_outer);
    } else if (key == "power_rel_tol") {
      setd(cfg.power_rel_tol);
    } else if (key == "subproblem") {
      if (value == "maxmin") cfg.subproblem = ElementMethod::MaxMinAnalytic;
      else if (value == "grid") cfg.subproblem = ElementMethod::GridSearch;
      else
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": subproblem must be maxmin or grid");
    } else if (key == "grid_resolution") {
      setd(cfg.grid_resolution);
    } else if (key == "num_candidates") {
      seti(cfg.num_candidates);
    } else if (key == "retry_random_init") {
      seti(cfg.retry_random_init);
    } else if (key == "solver_tol") {
      setd(cfg.solver_tol);
    } else if (key == "solver_mu") {
      setd(cfg.solver_mu);
    } else if (key == "max_newton") {
      seti(cfg.max_newton);
    } else if (key == "quad_points") {
      seti(cfg.quad_points);
    } else if (key == "mc_trials") {
      seti(cfg.mc_trials);
    } else if (key == "mp_power_w") {
      setd(cfg.mp_power_w);
    } else if (key == "table_seeds") {
      seti(cfg.table_seeds);
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "jobs") {
      seti(cfg.jobs);
    } else if (key == "timing") {
      setb(cfg.timing);
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                        key + "'");
    }
  }
  // Scenario-specific defaults for keys the file left unset.
  if (scenario_set && cfg.scenario == Scenario::RankTable) {
    if (!seen.count("m")) cfg.system.pt_antennas = 8;
    if (!seen.count("n1")) cfg.system.pr_antennas = 8;
    if (!seen.count("n2")) cfg.system.sr_antennas = 8;
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  return parse_config(f);
}

// ---------------------------------------------------------------------------
// CSV plumbing. Numbers print with %.12g so re-parsing stays well inside the
// 1e-9 audit tolerance; identical inputs give identical bytes.

namespace detail_csv {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(uint64_t v) { return std::to_string(v); }

}  // namespace detail_csv

// ---------------------------------------------------------------------------
// One sweep row.

struct ResultRow {
  int k = 0;
  double rate_target = 0.0;
  double snr_target = 0.0;
  Policy policy = Policy::AO;
  uint64_t seed = 0;
  double power_w = 0.0;
  double rate_primary = 0.0;
  double rate_secondary = 0.0;
  double snr_c = 0.0;
  SolveStatus status = SolveStatus::NumericalFailure;
  int iters = 0;
  double wall_ms = 0.0;
  // stored for the audit pass
  bool has_solution = false;
  ComplexMatrix w;
  PhaseVector phi;
  ConditionReport condition;
  // low-complexity pipeline report
  bool has_sdr_report = false;
  double t_sdr = 0.0;
  double t_best_candidate = 0.0;
};

namespace detail_exp {

inline SystemConfig system_for_point(const ExperimentConfig& cfg, int k, double rate) {
  SystemConfig s = cfg.system;
  s.ris_elements = k;
  s.rate_target = rate;
  return s;
}

inline ChannelSet channels_for(const ExperimentConfig& cfg, const SystemConfig& sys,
                               uint64_t seed) {
  ChannelSet ch = generate_channels(sys, cfg.geometry, Rng(seed));
  if (cfg.co_located) ch.ris_to_sr = ch.ris_to_pr;
  if (cfg.blocked_direct) {
    ch.pt_to_pr = ComplexMatrix::zeros(sys.pr_antennas, sys.pt_antennas);
    ch.pt_to_sr = ComplexMatrix::zeros(sys.sr_antennas, sys.pt_antennas);
  }
  return ch;
}

inline AOSettings ao_settings(const ExperimentConfig& cfg) {
  AOSettings s;
  s.max_outer = cfg.max_outer;
  s.power_rel_tol = cfg.power_rel_tol;
  s.element.method = cfg.subproblem;
  s.element.grid_resolution_rad = cfg.grid_resolution;
  s.retry_random_init = cfg.retry_random_init;
  s.solver.barrier_mu = cfg.solver_mu;
  s.solver.max_newton = cfg.max_newton;
  // AO keeps its tighter internal tolerance unless the user asked for tighter.
  s.solver.tol = std::min(1e-9, cfg.solver_tol);
  return s;
}

inline SolveSettings solver_settings(const ExperimentConfig& cfg) {
  SolveSettings s;
  s.tol = cfg.solver_tol;
  s.barrier_mu = cfg.solver_mu;
  s.max_newton = cfg.max_newton;
  return s;
}

inline ResultRow run_policy_task(const ExperimentConfig& cfg, int k, double rate,
                                 Policy policy, uint64_t seed) {
  const SystemConfig sys = system_for_point(cfg, k, rate);
  const ChannelSet ch = channels_for(cfg, sys, seed);
  const auto t0 = std::chrono::steady_clock::now();

  ResultRow row;
  row.k = k;
  row.rate_target = rate;
  row.snr_target = sys.snr_target;
  row.policy = policy;
  row.seed = seed;

  BeamformerSolution sol;
  int iters = 0;
  Rng algo_rng = Rng(seed).fork(0xa160 + static_cast<uint64_t>(policy));
  switch (policy) {
    case Policy::AO: {
      auto [s, tr] = run_ao(ch, sys, ao_settings(cfg), algo_rng);
      sol = std::move(s);
      iters = static_cast<int>(tr.outer.size());
      break;
    }
    case Policy::LowComplexity: {
      RandomizationSettings rs;
      rs.num_candidates = cfg.num_candidates;
      rs.rng_seed = Rng(seed).fork(0x5d).seed();
      auto lc = run_low_complexity(ch, sys, solver_settings(cfg), rs);
      sol = std::move(lc.first);
      row.has_sdr_report = sol.status == SolveStatus::Optimal;
      row.t_sdr = lc.second.t_sdr;
      row.t_best_candidate = lc.second.t_best_candidate;
      iters = 1;
      break;
    }
    case Policy::RandomBeam:
      sol = random_beamforming(ch, sys, solver_settings(cfg), algo_rng);
      iters = 1;
      break;
    case Policy::NoRIS:
      sol = water_filling_no_ris(ch.pt_to_pr, sys);
      iters = 1;
      if (sol.status == SolveStatus::Optimal) {
        // Report through the standard link metrics with the cascade absent,
        // so the audit pass can re-derive the row uniformly.
        const EffectiveChannels eff0 = effective_channels(ch, sol.phi, 0.0);
        const HermitianMatrix qw(sol.w * adjoint(sol.w));
        sol.rate_primary = primary_rate(qw, eff0, ch, sys.noise_power_w);
        sol.rate_secondary = secondary_rate(qw, eff0, ch, sys.noise_power_w);
        sol.snr_c = backscatter_snr(qw, eff0, sys.noise_power_w, sys.symbol_ratio);
      }
      break;
    case Policy::RandomInit: {
      auto [s, tr] = random_initialization_ao(ch, sys, ao_settings(cfg), algo_rng);
      sol = std::move(s);
      iters = static_cast<int>(tr.outer.size());
      break;
    }
    case Policy::GridSearchAO: {
      auto [s, tr] = one_dimensional_search_ao(ch, sys, ao_settings(cfg));
      sol = std::move(s);
      iters = static_cast<int>(tr.outer.size());
      break;
    }
    case Policy::PureAssist: {
      auto [s, tr] = pure_assist_ao(ch, sys, ao_settings(cfg), algo_rng);
      sol = std::move(s);
      iters = static_cast<int>(tr.outer.size());
      break;
    }
  }

  row.status = sol.status;
  row.iters = iters;
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  if (sol.status == SolveStatus::Optimal) {
    row.power_w = sol.power_w;
    row.rate_primary = sol.rate_primary;
    row.rate_secondary = sol.rate_secondary;
    row.snr_c = sol.snr_c;
    row.has_solution = true;
    row.w = sol.w;
    row.phi = sol.phi;
    row.condition =
        condition_and_eigengain(ch, sol.phi, sys.reflect_efficiency);
  }
  return row;
}

// Fixed-order task list executed by a small pool; results land by index so
// the output order never depends on scheduling.
template <typename Task>
void run_pool(const std::vector<Task>& tasks, int jobs,
              const std::function<void(const Task&, size_t)>& fn) {
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int n_workers = std::max(1, jobs > 0 ? jobs : (hw > 0 ? hw : 1));
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      fn(tasks[i], i);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write: " + path);
  for (const std::string& l : lines) f << l << "\r\n";  // RFC 4180 line ends
}

}  // namespace detail_exp

// ---------------------------------------------------------------------------

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 2 numerical failure present
  int rows = 0;
  int failures = 0;
  int infeasible = 0;
  std::string summary;
};

inline void write_solution_file(const std::string& path, const ResultRow& row) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write: " + path);
  f << "k " << row.k << "\nrate_target " << detail_csv::fmt(row.rate_target)
    << "\nsnr_target " << detail_csv::fmt(row.snr_target) << "\npolicy "
    << to_string(row.policy) << "\nseed " << row.seed << "\n";
  ComplexMatrix phi_row(1, row.phi.size());
  for (int i = 0; i < row.phi.size(); ++i) phi_row(0, i) = row.phi[i];
  f << "phi\n";
  write_matrix(f, phi_row);
  f << "w\n";
  write_matrix(f, row.w);
}

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  ExperimentOutcome out;

  if (cfg.scenario == Scenario::SweepK || cfg.scenario == Scenario::SweepRate) {
    struct Task {
      int k;
      double rate;
      Policy policy;
      uint64_t seed;
    };
    std::vector<Task> tasks;
    if (cfg.scenario == Scenario::SweepK) {
      for (int k : cfg.k_list)
        for (Policy p : cfg.policies)
          for (uint64_t s : cfg.seeds) tasks.push_back({k, cfg.system.rate_target, p, s});
    } else {
      for (double r : cfg.rate_list)
        for (Policy p : cfg.policies)
          for (uint64_t s : cfg.seeds)
            tasks.push_back({cfg.system.ris_elements, r, p, s});
    }

    std::vector<ResultRow> rows(tasks.size());
    detail_exp::run_pool<Task>(tasks, cfg.jobs, [&](const Task& t, size_t i) {
      rows[i] = detail_exp::run_policy_task(cfg, t.k, t.rate, t.policy, t.seed);
    });

    using detail_csv::fmt;
    std::vector<std::string> lines;
    lines.push_back(
        "scenario,k,rate_target,snr_target,policy,seed,power_w,rate_primary,"
        "rate_secondary,snr_c,status,iters,wall_ms");
    const std::string scen = to_string(cfg.scenario);
    fs::create_directories(fs::path(cfg.out_dir) / "solutions");
    for (size_t i = 0; i < rows.size(); ++i) {
      const ResultRow& r = rows[i];
      lines.push_back(scen + "," + fmt(r.k) + "," + fmt(r.rate_target) + "," +
                      fmt(r.snr_target) + "," + to_string(r.policy) + "," +
                      fmt(r.seed) + "," + fmt(r.power_w) + "," +
                      fmt(r.rate_primary) + "," + fmt(r.rate_secondary) + "," +
                      fmt(r.snr_c) + "," + to_string(r.status) + "," +
                      fmt(r.iters) + "," + fmt(cfg.timing ? r.wall_ms : 0.0));
      if (r.status == SolveStatus::NumericalFailure) ++out.failures;
      if (r.status == SolveStatus::Infeasible) ++out.infeasible;
      if (r.has_solution)
        write_solution_file(
            (fs::path(cfg.out_dir) / "solutions" / ("row_" + std::to_string(i) + ".txt"))
                .string(),
            r);
    }
    detail_exp::write_lines((fs::path(cfg.out_dir) / "results.csv").string(), lines);

    // Aggregate means over seeds (rows that produced a solution).
    std::vector<std::string> agg;
    agg.push_back(
        "scenario,k,rate_target,snr_target,policy,n_runs,n_solved,n_infeasible,"
        "mean_power_w,mean_rate_primary,mean_rate_secondary,mean_snr_c");
    struct Acc {
      int runs = 0, solved = 0, infeasible = 0;
      double p = 0, rp = 0, rb = 0, sc = 0;
    };
    std::map<std::tuple<int, double, int>, Acc> acc;  // (k, rate, policy index)
    for (const ResultRow& r : rows) {
      Acc& a = acc[{r.k, r.rate_target,
                    static_cast<int>(std::find(cfg.policies.begin(), cfg.policies.end(),
                                               r.policy) -
                                     cfg.policies.begin())}];
      ++a.runs;
      if (r.status == SolveStatus::Infeasible) ++a.infeasible;
      if (r.has_solution) {
        ++a.solved;
        a.p += r.power_w;
        a.rp += r.rate_primary;
        a.rb += r.rate_secondary;
        a.sc += r.snr_c;
      }
    }
    for (const auto& [key, a] : acc) {
      const auto [k, rate, pidx] = key;
      const double n = std::max(1, a.solved);
      agg.push_back(scen + "," + fmt(k) + "," + fmt(rate) + "," +
                    fmt(cfg.system.snr_target) + "," + to_string(cfg.policies[pidx]) +
                    "," + fmt(a.runs) + "," + fmt(a.solved) + "," + fmt(a.infeasible) +
                    "," + fmt(a.p / n) + "," + fmt(a.rp / n) + "," + fmt(a.rb / n) +
                    "," + fmt(a.sc / n));
    }
    detail_exp::write_lines((fs::path(cfg.out_dir) / "aggregate.csv").string(), agg);

    // Per-run relaxation report for the iteration-free pipeline.
    {
      std::vector<std::string> rep;
      rep.push_back("k,rate_target,seed,t_sdr,t_best_candidate,power_w");
      for (const ResultRow& r : rows) {
        if (!r.has_sdr_report) continue;
        rep.push_back(fmt(r.k) + "," + fmt(r.rate_target) + "," + fmt(r.seed) + "," +
                      fmt(r.t_sdr) + "," + fmt(r.t_best_candidate) + "," +
                      fmt(r.power_w));
      }
      if (rep.size() > 1)
        detail_exp::write_lines((fs::path(cfg.out_dir) / "sdr_report.csv").string(),
                                rep);
    }

    if (cfg.scenario == Scenario::SweepRate) {
      // Both condition-number conventions for the optimized-channel sweep.
      std::vector<std::string> cond;
      cond.push_back(
          "k,rate_target,policy,seed,condition_mean,eigengain_mean,condition_plus,"
          "eigengain_plus");
      for (const ResultRow& r : rows) {
        if (!r.has_solution) continue;
        cond.push_back(fmt(r.k) + "," + fmt(r.rate_target) + "," +
                       to_string(r.policy) + "," + fmt(r.seed) + "," +
                       fmt(r.condition.condition_mean) + "," +
                       fmt(r.condition.eigengain_mean) + "," +
                       fmt(r.condition.condition_plus) + "," +
                       fmt(r.condition.eigengain_plus));
      }
      detail_exp::write_lines((fs::path(cfg.out_dir) / "condition.csv").string(), cond);
    }
    out.rows = static_cast<int>(rows.size());
  } else if (cfg.scenario == Scenario::Convergence) {
    const SystemConfig sys = cfg.system;
    const uint64_t seed = cfg.seeds.front();
    const ChannelSet ch = detail_exp::channels_for(cfg, sys, seed);
    Rng rng = Rng(seed).fork(0xa160);
    const auto [sol, trace] = run_ao(ch, sys, detail_exp::ao_settings(cfg), rng);
    using detail_csv::fmt;
    std::vector<std::string> conv{"iter,power_w,min_slack,elements_accepted,wall_ms"};
    std::vector<std::string> slack{"iter,element,slack,accepted"};
    for (size_t i = 0; i < trace.outer.size(); ++i) {
      const OuterTrace& ot = trace.outer[i];
      int accepted = 0;
      for (const ElementTrace& e : ot.elements) accepted += e.accepted ? 1 : 0;
      const double min_slack =
          ot.elements.empty() ? 1.0 : trace.min_slack(i);
      conv.push_back(fmt(static_cast<int>(i + 1)) + "," + fmt(ot.power_w) + "," +
                     fmt(min_slack) + "," + fmt(accepted) + "," +
                     fmt(cfg.timing ? ot.wall_ms : 0.0));
      for (const ElementTrace& e : ot.elements)
        slack.push_back(fmt(static_cast<int>(i + 1)) + "," + fmt(e.element) + "," +
                        fmt(e.slack) + "," + fmt(e.accepted ? 1 : 0));
    }
    detail_exp::write_lines((fs::path(cfg.out_dir) / "convergence.csv").string(), conv);
    detail_exp::write_lines((fs::path(cfg.out_dir) / "slack_trace.csv").string(), slack);
    out.rows = static_cast<int>(trace.outer.size());
    if (sol.status == SolveStatus::NumericalFailure) ++out.failures;
  } else if (cfg.scenario == Scenario::RankTable) {
    using detail_csv::fmt;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::string> lines{"scheme,seed,rank"};
    for (int i = 0; i < cfg.table_seeds; ++i) {
      const uint64_t seed = cfg.seeds[i % cfg.seeds.size()] + 1000ull * (i / cfg.seeds.size());
      for (int scheme = 0; scheme < 3; ++scheme) {
        LinkGeometry geom = cfg.geometry;
        geom.pt_to_pr.rician_kappa = inf;
        if (scheme == 1) {
          geom.ris_to_pr.rician_kappa = inf;
          geom.pt_to_ris.rician_kappa = inf;
        }
        const ChannelSet ch = generate_channels(cfg.system, geom, Rng(seed));
        Rng prng = Rng(seed).fork(0x717);
        const PhaseVector phi = random_phases(cfg.system.ris_elements, prng);
        const double alpha = (scheme == 0) ? 0.0 : cfg.system.reflect_efficiency;
        const int rank = effective_rank(ch, phi, alpha, +1);
        const char* name = scheme == 0 ? "no_ris"
                           : scheme == 1 ? "ris_los_cascade"
                                         : "ris_scattered_cascade";
        lines.push_back(std::string(name) + "," + fmt(seed) + "," + fmt(rank));
      }
    }
    detail_exp::write_lines((fs::path(cfg.out_dir) / "rank_table.csv").string(), lines);
    out.rows = static_cast<int>(lines.size()) - 1;
  } else {  // MpCheck
    using detail_csv::fmt;
    std::vector<std::string> lines{"k,rate_with,rate_without,mc_mean,rel_dev"};
    LinkGeometry geom = cfg.geometry;
    for (LinkParams* l : {&geom.pt_to_pr, &geom.pt_to_sr, &geom.pt_to_ris,
                          &geom.ris_to_pr, &geom.ris_to_sr})
      l->rician_kappa = 0.0;  // the asymptotics are Rayleigh-only
    const double eta_d = path_loss(geom.pt_to_pr.distance_m, geom.beta_db, geom.gamma_e);
    const double eta_g = path_loss(geom.ris_to_pr.distance_m, geom.beta_db, geom.gamma_e);
    const double eta_h = path_loss(geom.pt_to_ris.distance_m, geom.beta_db, geom.gamma_e);
    for (int k : cfg.k_list) {
      SystemConfig sys = cfg.system;
      sys.ris_elements = k;
      const MpRates mp = mp_asymptotic_rates(
          sys.pt_antennas, sys.pr_antennas, cfg.mp_power_w, sys.noise_power_w, eta_d,
          sys.reflect_efficiency * eta_g * eta_h * k, cfg.quad_points);
      double mc = 0.0;
      for (int t = 0; t < cfg.mc_trials; ++t) {
        const uint64_t seed = cfg.seeds[t % cfg.seeds.size()] + 7919ull * t;
        const ChannelSet ch = generate_channels(sys, geom, Rng(seed));
        Rng prng = Rng(seed).fork(0x3a3);
        const PhaseVector phi = random_phases(k, prng);
        const ComplexMatrix heff = effective_channel(ch, phi, sys.reflect_efficiency, +1);
        const ComplexMatrix arg =
            ComplexMatrix::identity(sys.pr_antennas) +
            (cfg.mp_power_w / sys.noise_power_w) * (heff * adjoint(heff));
        mc += logdet_pd(arg).value() / std::log(2.0);
      }
      mc /= std::max(1, cfg.mc_trials);
      const double dev = std::abs(mc - mp.rate_with) / std::max(1e-12, mp.rate_with);
      lines.push_back(fmt(k) + "," + fmt(mp.rate_with) + "," + fmt(mp.rate_without) +
                      "," + fmt(mc) + "," + fmt(dev));
    }
    detail_exp::write_lines((fs::path(cfg.out_dir) / "mp_check.csv").string(), lines);
    out.rows = static_cast<int>(lines.size()) - 1;
  }

  out.exit_code = out.failures > 0 ? 2 : 0;
  std::ostringstream sum;
  sum << to_string(cfg.scenario) << ": " << out.rows << " rows, " << out.infeasible
      << " infeasible, " << out.failures << " numerical failures";
  out.summary = sum.str();
  return out;
}

// ---------------------------------------------------------------------------
// Audit: re-derive every stored row's metrics from (W, phi) and deterministic
// channel regeneration; compare against the CSV within 1e-9 relative.

struct AuditOutcome {
  int checked = 0;
  int mismatches = 0;
  std::string summary;
};

inline AuditOutcome audit_results(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  AuditOutcome out;
  const fs::path dir(cfg.out_dir);
  std::ifstream f(dir / "results.csv", std::ios::binary);
  if (!f) throw ConfigError("audit: cannot open results.csv under " + cfg.out_dir);

  std::string line;
  std::getline(f, line);  // header
  int row_index = -1;
  auto close_enough = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  while (std::getline(f, line)) {
    ++row_index;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    const std::vector<std::string> cells = detail_cfg::split_commas(line);
    if (cells.size() != 13) throw ConfigError("audit: malformed results row");
    if (cells[10] != "optimal") continue;

    const fs::path sol_path = dir / "solutions" / ("row_" + std::to_string(row_index) + ".txt");
    std::ifstream sf(sol_path);
    if (!sf) throw ConfigError("audit: missing " + sol_path.string());
    std::map<std::string, std::string> head;
    for (int i = 0; i < 5; ++i) {
      std::string k, v;
      sf >> k >> v;
      head[k] = v;
    }
    std::string tag;
    sf >> tag;  // "phi"
    const ComplexMatrix phi_row = read_matrix(sf);
    sf >> tag;  // "w"
    const ComplexMatrix w = read_matrix(sf);

    const int k = static_cast<int>(detail_cfg::parse_int(head.at("k"), 0));
    const double rate = detail_cfg::parse_double(head.at("rate_target"), 0);
    const uint64_t seed =
        static_cast<uint64_t>(detail_cfg::parse_int(head.at("seed"), 0));
    SystemConfig sys = detail_exp::system_for_point(cfg, k, rate);
    const ChannelSet ch = detail_exp::channels_for(cfg, sys, seed);

    std::vector<Cx> phases(phi_row.cols());
    for (int i = 0; i < phi_row.cols(); ++i) phases[i] = phi_row(0, i);
    const PhaseVector phi(std::move(phases));
    const HermitianMatrix qw(w * adjoint(w));
    // The no-RIS baseline is defined with the cascade absent.
    const double alpha_eff =
        head.at("policy") == "no_ris" ? 0.0 : sys.reflect_efficiency;
    const EffectiveChannels eff = effective_channels(ch, phi, alpha_eff);

    const double power = trace(qw.matrix()).real();
    const double rp = primary_rate(qw, eff, ch, sys.noise_power_w);
    const double rb = secondary_rate(qw, eff, ch, sys.noise_power_w);
    const double sc = backscatter_snr(qw, eff, sys.noise_power_w, sys.symbol_ratio);

    ++out.checked;
    const bool ok = close_enough(power, detail_cfg::parse_double(cells[6], 0)) &&
                    close_enough(rp, detail_cfg::parse_double(cells[7], 0)) &&
                    close_enough(rb, detail_cfg::parse_double(cells[8], 0)) &&
                    close_enough(sc, detail_cfg::parse_double(cells[9], 0));
    if (!ok) ++out.mismatches;
  }
  std::ostringstream sum;
  sum << "audit: " << out.checked << " rows checked, " << out.mismatches
      << " mismatches";
  out.summary = sum.str();
  return out;
}

}  // namespace srbeam
