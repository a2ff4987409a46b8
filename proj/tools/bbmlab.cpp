// Copyright 2026 The bbmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// bbmlab command line.
//
//   bbmlab simulate --config cfg.json [--seed N] [--env-seed N] [--workers N]
//                   [--out DIR] [--checkpoint PATH] [--stop-after N]
//   bbmlab resume   --checkpoint PATH [--config cfg.json] [--workers N] [--out DIR]
//   bbmlab theory   [--config cfg.json | --dim D --nu V --beta B --kappa K --t T --r R --k K --ell L]
//   bbmlab env gen  --dim D --nu V --trap-radius A --half-width H --env-seed N --out FILE
//   bbmlab env scan --in FILE [--resolution H] [--inscribed]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
// 3 interrupted run (--stop-after), 4 checkpoint does not match the config.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "bbmlab/bbmlab.hpp"

namespace {

using namespace bbmlab;

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> env_seed;
  unsigned workers = 0;
  std::string out = "out";
  std::string checkpoint;
  std::optional<std::uint64_t> stop_after;
};

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

int finish(const RunSummary& s, const RunOptions& opt, const Experiment& e) {
  if (s.interrupted) {
    std::cerr << "stopped after " << s.completed << " of " << e.config().replicas << " replicas";
    if (!opt.checkpoint.empty()) std::cerr << "; checkpoint at " << opt.checkpoint.string();
    std::cerr << "\n";
    return 3;
  }
  std::cerr << to_string(e.config().mode) << ": " << s.completed << " replicas in " << s.wall_seconds
            << " s, config_hash=" << e.hash() << ", outputs in " << opt.out_dir.string() << "\n";
  return 0;
}

int simulate(const SimulateArgs& a) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.env_seed) cfg.env_seed = *a.env_seed;
  const Experiment e(cfg);
  RunOptions opt;
  opt.workers = a.workers ? a.workers : default_workers();
  opt.out_dir = a.out;
  opt.checkpoint = a.checkpoint;
  opt.stop_after = a.stop_after;
  return finish(run_experiment(e, opt), opt, e);
}

int resume(const SimulateArgs& a) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  // With --config the checkpoint must belong to that config; without it the
  // config stored in the checkpoint is used.
  ExperimentConfig cfg = a.config.empty() ? parse_config(ck.config) : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.env_seed) cfg.env_seed = *a.env_seed;
  const Experiment e(cfg);
  RunOptions opt;
  opt.workers = a.workers ? a.workers : default_workers();
  opt.out_dir = a.out;
  opt.checkpoint = a.checkpoint;
  opt.stop_after = a.stop_after;
  opt.resume_from = &ck;
  return finish(run_experiment(e, opt), opt, e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbmlab: branching Brownian motion experiments"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run the experiment described by a config file");
  s->add_option("--config", sim.config, "JSON config")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", sim.seed, "override run.seed");
  s->add_option("--env-seed", sim.env_seed, "override environment.env_seed");
  s->add_option("--workers", sim.workers, "worker threads (default: hardware concurrency)");
  s->add_option("--out", sim.out, "output directory");
  s->add_option("--checkpoint", sim.checkpoint, "checkpoint file, rewritten as replicas finish");
  s->add_option("--stop-after", sim.stop_after, "run only replicas [0, N) and stop");

  SimulateArgs res;
  auto* r = app.add_subcommand("resume", "continue a checkpointed run");
  r->add_option("--checkpoint", res.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  r->add_option("--config", res.config, "config the checkpoint must match")->check(CLI::ExistingFile);
  r->add_option("--seed", res.seed, "override run.seed");
  r->add_option("--env-seed", res.env_seed, "override environment.env_seed");
  r->add_option("--workers", res.workers, "worker threads");
  r->add_option("--out", res.out, "output directory");
  r->add_option("--stop-after", res.stop_after, "run only replicas [0, N) and stop");

  TheoryQuery tq;
  std::string theory_config;
  std::string theory_out;
  auto* th = app.add_subcommand("theory", "print closed-form predictions as CSV");
  th->add_option("--config", theory_config, "take the parameters from a config file")->check(CLI::ExistingFile);
  th->add_option("--dim", tq.dim);
  th->add_option("--nu", tq.nu);
  th->add_option("--beta", tq.beta);
  th->add_option("--kappa", tq.kappa);
  th->add_option("--t", tq.t);
  th->add_option("--r", tq.r);
  th->add_option("--k", tq.k, "displacement level");
  th->add_option("--ell", tq.ell, "clearing scale");
  th->add_option("--out", theory_out, "also write the table to this file");

  auto* env = app.add_subcommand("env", "build or scan trap fields");
  env->require_subcommand(1);
  int g_dim = 1;
  double g_nu = 1.0;
  double g_a = 0.5;
  double g_half = 10.0;
  std::uint64_t g_seed = 0;
  std::string g_out;
  auto* gen = env->add_subcommand("gen", "sample a Poisson trap field on a cube");
  gen->add_option("--dim", g_dim);
  gen->add_option("--nu", g_nu, "intensity");
  gen->add_option("--trap-radius", g_a, "trap radius a");
  gen->add_option("--half-width", g_half, "half-width of the cube");
  gen->add_option("--env-seed", g_seed);
  gen->add_option("--out", g_out, "environment file")->required();
  std::string sc_in;
  double sc_res = 0.05;
  bool sc_inscribed = false;
  auto* scan = env->add_subcommand("scan", "largest clearing of a stored field");
  scan->add_option("--in", sc_in, "environment file")->required()->check(CLI::ExistingFile);
  scan->add_option("--resolution", sc_res, "grid resolution, at most a/2");
  scan->add_flag("--inscribed", sc_inscribed, "clearing must lie inside the box");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return simulate(sim);
    if (r->parsed()) return resume(res);
    if (th->parsed()) {
      if (!theory_config.empty()) {
        const auto c = load_config(theory_config);
        const auto h = c.ld_horizons();
        tq = {c.dim, c.nu > 0.0 ? c.nu : 1.0, c.beta, c.kappas.empty() ? 0.5 : c.kappas.front(),
              h.back(), c.radius_function()(h.back()), 1.0, c.ell};
      }
      const std::string csv = theory_csv(tq);
      std::cout << csv;
      if (!theory_out.empty()) write_file_atomic(theory_out, csv);
      return 0;
    }
    if (gen->parsed()) {
      const TrapField f = build_trap_field(RngStream(g_seed, detail::kEnvironmentStream), g_dim, g_nu, g_a,
                                           Box::cube(g_dim, g_half));
      std::ostringstream os;
      write_environment(os, f);
      write_file_atomic(g_out, os.str());
      std::cerr << f.atoms().coords.size() / static_cast<std::size_t>(g_dim) << " atoms written to " << g_out << "\n";
      return 0;
    }
    if (scan->parsed()) {
      std::ifstream in(sc_in);
      const TrapField f = read_environment(in);
      const Box box = f.bounding_box();
      const auto rep = largest_clearing(f, box, sc_res, sc_inscribed);
      std::cout << "radius," << format_double(rep.radius);
      for (std::size_t k = 0; k < rep.center.size(); ++k)
        std::cout << ",center_" << k + 1 << "," << format_double(rep.center[k]);
      std::cout << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.path() << ": " << e.what() << "\n";
    return 2;
  } catch (const ConfigHashMismatch& e) {
    std::cerr << "refusing to resume: " << e.what() << "\n";
    return 4;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
