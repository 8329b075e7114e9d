#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgldlab/commands.hpp"

int main(int argc, char** argv) {
  using namespace sgldlab;
  CLI::App app{"SGLD generalization-bound laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* out_opt = app.add_option("--out", out, "override the output directory");
  auto* thr_opt = app.add_option("--threads", threads, "OpenMP thread count")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  app.add_flag("--allow-unsafe", g.allow_unsafe, "run even when strict-mode preconditions fail");

  auto* certify = app.add_subcommand("certify", "check the claimed loss constants on sampled points");
  auto* run = app.add_subcommand("run", "run the SGLD ensemble and estimators");
  std::string trace_dir;
  auto* bounds = app.add_subcommand("bounds", "evaluate bounds over recorded traces");
  bounds->add_option("trace_dir", trace_dir, "directory holding the run outputs");
  auto* verify = app.add_subcommand("verify", "Gaussian oracle and Fokker-Planck suites");
  std::vector<std::string> dirs;
  auto* compare = app.add_subcommand("compare", "tabulate bound reports against empirical gaps");
  compare->add_option("report_dirs", dirs, "bounds output directories")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(kExitUsage);
  }
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out;
  if (*thr_opt) g.threads = threads;
  apply_thread_count(g);

  if (*certify) return cmd_certify(g, std::cerr);
  if (*run) return cmd_run(g, std::cerr);
  if (*bounds) return cmd_bounds(g, trace_dir, std::cerr);
  if (*verify) return cmd_verify(g, std::cerr);
  if (*compare) return cmd_compare(g, dirs, std::cerr);
  return int(kExitUsage);
}
