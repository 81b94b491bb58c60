// Command-line front end: channel generation, scenario sweeps, the rank
// table, convergence traces, the Marchenko-Pastur check, and the audit pass.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "srbeam/experiment.hpp"

namespace {

using namespace srbeam;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string policies;
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "configuration file (key value lines)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads (default: hardware)");
  cmd->add_option("--seed", o.seed, "override the seed list with one seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--policy", o.policies, "comma-separated policy override");
  cmd->add_flag("--timing", o.timing, "emit wall-clock columns (breaks byte determinism)");
}

ExperimentConfig load_config(const CommonOpts& o, Scenario fallback_scenario) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = parse_config_file(o.config_path);
  } else {
    std::istringstream empty("");
    cfg = parse_config(empty);
    if (fallback_scenario == Scenario::RankTable) {
      cfg.system.pt_antennas = 8;
      cfg.system.pr_antennas = 8;
      cfg.system.sr_antennas = 8;
    }
  }
  if (o.config_path.empty()) cfg.scenario = fallback_scenario;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed_set) cfg.seeds = {o.seed};
  if (o.jobs >= 0) cfg.jobs = o.jobs;
  if (o.timing) cfg.timing = true;
  if (!o.policies.empty()) {
    cfg.policies.clear();
    for (const std::string& p : detail_cfg::split_commas(o.policies))
      cfg.policies.push_back(detail_cfg::parse_policy(p, 0));
  }
  cfg.validate();
  return cfg;
}

int cmd_gen_channels(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o, Scenario::SweepK);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const uint64_t seed = cfg.seeds.front();
  const ChannelSet ch = generate_channels(cfg.system, cfg.geometry, Rng(seed));
  write_matrix_file((fs::path(cfg.out_dir) / "h1.txt").string(), ch.pt_to_pr);
  write_matrix_file((fs::path(cfg.out_dir) / "h2.txt").string(), ch.pt_to_sr);
  write_matrix_file((fs::path(cfg.out_dir) / "h3.txt").string(), ch.pt_to_ris);
  write_matrix_file((fs::path(cfg.out_dir) / "g1.txt").string(), ch.ris_to_pr);
  write_matrix_file((fs::path(cfg.out_dir) / "g2.txt").string(), ch.ris_to_sr);
  std::cout << "wrote h1.txt h2.txt h3.txt g1.txt g2.txt under " << cfg.out_dir
            << " (seed " << seed << ")\n";
  return 0;
}

int run_scenario(const CommonOpts& o, Scenario scenario) {
  ExperimentConfig cfg = load_config(o, scenario);
  if (o.config_path.empty()) cfg.scenario = scenario;
  const ExperimentOutcome out = run_experiment(cfg);
  std::cout << out.summary << "\n";
  return out.exit_code;
}

int cmd_audit(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o, Scenario::SweepK);
  const AuditOutcome out = audit_results(cfg);
  std::cout << out.summary << "\n";
  return out.mismatches == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-assisted MIMO symbiotic-radio beamforming experiments"};
  app.require_subcommand(1);

  CommonOpts gen_o, run_o, rank_o, conv_o, mp_o, audit_o;
  CLI::App* gen = app.add_subcommand("gen-channels", "write one channel realization");
  add_common(gen, gen_o);
  CLI::App* run = app.add_subcommand("run", "run the configured scenario sweep");
  add_common(run, run_o);
  CLI::App* rank = app.add_subcommand("rank-table", "effective-channel rank table");
  add_common(rank, rank_o);
  CLI::App* conv = app.add_subcommand("convergence", "per-element slack trace");
  add_common(conv, conv_o);
  CLI::App* mp = app.add_subcommand("mp-check", "Marchenko-Pastur asymptotic check");
  add_common(mp, mp_o);
  CLI::App* audit = app.add_subcommand("audit", "re-derive stored rows and compare");
  add_common(audit, audit_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_channels(gen_o);
    if (run->parsed()) return run_scenario(run_o, Scenario::SweepK);
    if (rank->parsed()) return run_scenario(rank_o, Scenario::RankTable);
    if (conv->parsed()) return run_scenario(conv_o, Scenario::Convergence);
    if (mp->parsed()) return run_scenario(mp_o, Scenario::MpCheck);
    if (audit->parsed()) return cmd_audit(audit_o);
  } catch (const srbeam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const srbeam::DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const srbeam::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
