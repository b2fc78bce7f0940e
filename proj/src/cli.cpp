#include "ddest/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "ddest/config_io.hpp"
#include "ddest/family_size.hpp"
#include "ddest/matrix_io.hpp"

#ifndef DDEST_VERSION
#define DDEST_VERSION "dev"
#endif

namespace ddest {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version_string() { return DDEST_VERSION; }

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string snr;
  std::string np;
  std::string estimators;
  bool noiseless = false;
  bool quick = false;
  unsigned threads = 1;
  std::string matrix_stem;
};

void add_common(CLI::App* sub, CliArgs& a) {
  sub->add_option("--config", a.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--out", a.out_dir, "Output directory");
  sub->add_option("--set", a.overrides, "Override a config key, e.g. --set grid.p_d=0.3 (repeatable)");
  sub->add_option("--trials", a.trials, "Monte Carlo trials per point");
  sub->add_option("--seed", a.seed, "Master seed (u64)");
  sub->add_option("--snr", a.snr, "Comma-separated SNR list in dB");
  sub->add_option("--np", a.np, "Comma-separated pilot counts");
  sub->add_option("--estimators", a.estimators, "Comma-separated estimator names");
  sub->add_flag("--noiseless", a.noiseless, "Disable observation noise");
  sub->add_flag("--quick", a.quick, "Reduced workload");
  sub->add_option("--threads", a.threads, "Worker threads (0 = all cores); results do not depend on it");
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
  if (!j.is_object()) throw ConfigError("config " + path + " must be a JSON object");
  return j;
}

ExperimentConfig resolve_config(const CliArgs& a, const ExperimentConfig& defaults) {
  json user = a.config_path.empty() ? json::object() : read_json_file(a.config_path);
  for (const auto& o : a.overrides) apply_override(user, o);
  ExperimentConfig cfg = experiment_from_json(user, defaults);
  if (a.trials) cfg.n_trials = *a.trials;
  if (a.seed) cfg.master_seed = *a.seed;
  if (!a.snr.empty()) cfg.snr_db_list = parse_real_list(a.snr);
  if (!a.np.empty()) cfg.n_p = parse_int_list(a.np);
  if (!a.estimators.empty()) cfg.estimators = parse_estimator_list(a.estimators);
  if (a.noiseless) cfg.noiseless = true;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const CliArgs& a) {
  fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const ExperimentConfig& cfg,
                    const std::vector<std::string>& outputs) {
  json m{{"tool", "ddest"},
         {"version", version_string()},
         {"subcommand", subcommand},
         {"config", experiment_to_json(cfg)},
         {"outputs", outputs}};
  write_text(dir / "run-manifest.json", m.dump(2) + "\n");
}

RunOptions run_options(const CliArgs& a, std::ostream& err) {
  RunOptions run;
  run.threads = a.threads;
  if (&err == &std::cerr && isatty(STDERR_FILENO)) {
    run.progress = [&err](std::size_t done, std::size_t total) {
      if (done == total || done % 25 == 0) err << "\r  trials " << done << "/" << total << (done == total ? "\n" : "") << std::flush;
    };
  }
  return run;
}

int cmd_sweep(const CliArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = resolve_config(a, ExperimentConfig{});
  if (a.quick) cfg.n_trials = std::min(cfg.n_trials, 20);
  const fs::path dir = prepare_out(a);
  std::ostringstream csv;
  write_sweep_csv(csv, run_sweep(cfg, run_options(a, err)));
  write_text(dir / "sweep.csv", csv.str());
  write_manifest(dir, "sweep", cfg, {"sweep.csv"});
  out << "wrote " << (dir / "sweep.csv").string() << '\n';
  return kExitOk;
}

int cmd_heatmap(const CliArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig defaults;
  defaults.n_p = {1, 2, 3, 4, 5, 6, 7, 8};
  defaults.estimators = {EstimatorKind::proposed, EstimatorKind::shared_mean};
  ExperimentConfig cfg = resolve_config(a, defaults);
  if (a.quick) cfg.n_trials = std::min(cfg.n_trials, 20);
  const fs::path dir = prepare_out(a);
  const HeatmapResult res = run_heatmap(cfg, run_options(a, err));
  std::ostringstream csv;
  write_heatmap_csv(csv, res.rows);
  write_text(dir / "heatmap.csv", csv.str());
  std::ostringstream ex;
  write_exclusions_csv(ex, res.exclusions);
  write_text(dir / "heatmap-exclusions.csv", ex.str());
  write_manifest(dir, "heatmap", cfg, {"heatmap.csv", "heatmap-exclusions.csv"});
  out << "wrote " << (dir / "heatmap.csv").string() << '\n';
  return kExitOk;
}

std::string ascii_map(const SupportPattern& s, const GridConfig& cfg) {
  std::ostringstream os;
  for (int l = 0; l < cfg.L; ++l) {
    const bool delay_on = std::find(s.delays.begin(), s.delays.end(), l) != s.delays.end();
    os << (l < 10 ? " " : "") << l << ' ';
    for (int q = -cfg.Q; q <= cfg.Q; ++q) {
      const bool on = delay_on && std::find(s.dopplers.begin(), s.dopplers.end(), q) != s.dopplers.end();
      os << (on ? '#' : '.');
    }
    os << '\n';
  }
  return os.str();
}

std::string mask_csv(const SupportPattern& s, const GridConfig& cfg) {
  std::ostringstream os;
  os << "delay";
  for (int q = -cfg.Q; q <= cfg.Q; ++q) os << ',' << q;
  os << '\n';
  for (int l = 0; l < cfg.L; ++l) {
    const bool delay_on = std::find(s.delays.begin(), s.delays.end(), l) != s.delays.end();
    os << l;
    for (int q = -cfg.Q; q <= cfg.Q; ++q) {
      const bool on = delay_on && std::find(s.dopplers.begin(), s.dopplers.end(), q) != s.dopplers.end();
      os << ',' << (on ? 1 : 0);
    }
    os << '\n';
  }
  return os.str();
}

int cmd_single(const CliArgs& a, std::ostream& out) {
  ExperimentConfig defaults;
  defaults.snr_db_list = {20};
  ExperimentConfig cfg = resolve_config(a, defaults);
  cfg.estimators = {EstimatorKind::proposed, EstimatorKind::shared_mean, EstimatorKind::shared_tolerant};
  const fs::path dir = prepare_out(a);

  const TrialContext ctx(cfg.grid, cfg.n_p.front(), cfg.pilot_layout, cfg.lambda_reg);
  TrialOptions opts;
  opts.estimators = cfg.estimators;
  opts.require_nonempty = cfg.require_nonempty;
  opts.noiseless = cfg.noiseless;
  opts.sbl = cfg.sbl;
  const Real snr = cfg.snr_db_list.front();
  const TrialOutcome t = run_trial_detailed(ctx, snr, 0, cfg.master_seed, opts);

  std::vector<std::string> outputs;
  auto emit = [&](const std::string& name, const SupportPattern& s, const EstimatorMetrics* m) {
    out << "== " << name << " (" << s.num_delays() << " delays x " << s.num_dopplers() << " Dopplers";
    if (m) out << ", NMSE " << format_real(m->nmse) << (m->exact_support ? ", exact" : "");
    out << ")\n   q: " << -cfg.grid.Q << " .. " << cfg.grid.Q << "\n" << ascii_map(s, cfg.grid) << '\n';
    const std::string file = "support_" + name + ".csv";
    write_text(dir / file, mask_csv(s, cfg.grid));
    outputs.push_back(file);
  };
  out << "seed " << cfg.master_seed << ", SNR " << format_real(snr) << " dB"
      << (cfg.noiseless ? " (noiseless)" : "") << ", N_p " << ctx.pilot().n_p << "\n\n";
  emit("true", t.channel.support, nullptr);
  for (size_t i = 0; i < t.results.size(); ++i)
    emit(to_string(t.metrics.per_estimator[i].kind), t.results[i].support, &t.metrics.per_estimator[i]);
  write_manifest(dir, "single", cfg, outputs);
  return kExitOk;
}

int cmd_export(const CliArgs& a, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(a, ExperimentConfig{});
  const fs::path dir = prepare_out(a);
  const PilotConfig pilot = build_pilot_config(cfg.grid, cfg.n_p.front(), cfg.pilot_layout);
  const SensingMatrix Mp = build_sensing_matrix(cfg.grid, pilot);
  const MatrixFiles files = export_sensing_matrix(dir / "sensing", cfg.grid, pilot, Mp);
  write_manifest(dir, "export-matrix", cfg, {"sensing.ddsm", "sensing.json"});
  out << "wrote " << files.binary.string() << " (" << Mp.rows() << " x " << Mp.cols() << ") and "
      << files.sidecar.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// selftest

struct Check {
  std::string name;
  bool ok = true;
  std::string detail;
};

int cmd_selftest(const CliArgs& a, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(a, ExperimentConfig{});
  const GridConfig& g = cfg.grid;
  std::vector<Check> checks;
  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    Check c{name, true, {}};
    try {
      c.detail = body();
      c.ok = c.detail.empty();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = e.what();
    }
    out << (c.ok ? "[PASS] " : "[FAIL] ") << name << (c.ok ? "" : ": " + c.detail) << '\n';
    checks.push_back(c);
  };

  run("family-size-identity", [&]() -> std::string {
    const auto [d, r] = shared_mean_dims(g);
    const BigInt structured = structured_family_size(g.L, g.B(), d, r);
    const BigInt unstructured = unstructured_family_size(g.L, g.B(), d, r);
    if (g == GridConfig::reference_profile() && structured != BigInt(270167625)) return "C(30,6)C(15,3) != 270167625";
    if (!(structured < unstructured)) return "structured family not smaller than unstructured";
    return {};
  });

  run("iota-round-trip", [&]() -> std::string {
    for (int l = 0; l < g.L; ++l)
      for (int q = -g.Q; q <= g.Q; ++q) {
        const Index c = dd_index(g, l, q);
        if (c != static_cast<Index>(l) * g.B() + q + g.Q) return "unexpected column";
        if (dd_coords(g, c) != std::make_pair(l, q)) return "dd_coords does not invert dd_index";
      }
    return {};
  });

  const TrialContext ctx(g, cfg.n_p.front(), cfg.pilot_layout, cfg.lambda_reg);
  const SensingMatrix& Mp = ctx.sensing();

  run("observation-window", [&]() -> std::string {
    const auto& obs = ctx.pilot().obs_indices;
    if (static_cast<int>(obs.size()) != ctx.pilot().n_p * ctx.pilot().window_size) return "|P| != N_p * W";
    for (size_t i = 1; i < obs.size(); ++i)
      if (obs[i] <= obs[i - 1]) return "observation indices not strictly increasing";
    return {};
  });

  run("atom-unit-modulus", [&]() -> std::string {
    for (Index j = 0; j < Mp.cols(); ++j) {
      if (Mp.column_support(j).empty()) return "empty column " + std::to_string(j);
      for (Index i : Mp.column_support(j))
        if (std::abs(std::abs(Mp.entries()(i, j)) - 1.0) > 1e-12) return "non-unit entry";
    }
    return {};
  });

  run("empty-model-rss", [&]() -> std::string {
    Rng rng = trial_stream(cfg.master_seed, 0);
    std::normal_distribution<Real> n01;
    VectorXc y(Mp.rows());
    for (Index i = 0; i < y.size(); ++i) y(i) = Complex(n01(rng), n01(rng));
    const auto ls = restricted_ls(Mp.entries(), y, {}, &Mp.partition());
    return ls.rss == y.squaredNorm() ? std::string() : std::string("rss(empty) != ||y||^2");
  });

  run("noiseless-oracle-equivalence", [&]() -> std::string {
    const int count = a.quick ? 5 : 20;
    TrialOptions opts;
    opts.estimators = {EstimatorKind::proposed, EstimatorKind::oracle};
    opts.noiseless = true;
    for (int t = 0; t < count; ++t) {
      const auto o = run_trial_detailed(ctx, 20.0, static_cast<std::uint64_t>(t), cfg.master_seed, opts);
      const auto& prop = o.results[0];
      const auto& orc = o.results[1];
      if (!exact_support_match(prop.support, o.channel.support))
        return "support mismatch at trial " + std::to_string(t);
      if ((prop.alpha_hat - o.channel.alpha).norm() > 1e-8 * o.channel.alpha.norm())
        return "coefficient error at trial " + std::to_string(t);
      if (prop.alpha_hat != orc.alpha_hat) return "estimate differs from oracle at trial " + std::to_string(t);
    }
    return {};
  });

  run("matrix-export-import", [&]() -> std::string {
    const fs::path tmp = fs::temp_directory_path() / ("ddest-selftest-" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    const MatrixFiles files = export_sensing_matrix(tmp / "m", g, ctx.pilot(), Mp);
    std::string problem;
    if (import_sensing_matrix(tmp / "m").entries != Mp.entries()) problem = "round trip not bit exact";
    if (problem.empty()) {
      std::fstream f(files.binary, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(100);
      char c = 0;
      f.seekg(100);
      f.get(c);
      f.seekp(100);
      f.put(static_cast<char>(c ^ 0x5A));
      f.close();
      try {
        import_sensing_matrix(tmp / "m");
        problem = "corrupted matrix file was not detected";
      } catch (const ChecksumError&) {
      }
    }
    fs::remove_all(tmp);
    return problem;
  });

  if (!a.matrix_stem.empty()) {
    run("matrix-file", [&]() -> std::string {
      const ImportedMatrix im = import_sensing_matrix(a.matrix_stem);
      const PilotConfig pilot = build_pilot_config(
          im.grid, im.sidecar.at("pilot").at("n_p").get<int>(),
          pilot_layout_from_string(im.sidecar.at("pilot").at("layout").get<std::string>()));
      if (build_sensing_matrix(im.grid, pilot).entries() != im.entries) return "entries differ from rebuilt matrix";
      return {};
    });
  }

  const bool all_ok = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
  out << (all_ok ? "selftest passed" : "selftest FAILED") << '\n';
  return all_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparsity-agnostic delay-Doppler channel estimation simulator", "ddest"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  CliArgs args;
  auto* sweep = app.add_subcommand("sweep", "NMSE and support recovery versus SNR (sweep.csv)");
  auto* heatmap = app.add_subcommand("heatmap", "Support recovery over (N_p, SNR) (heatmap.csv)");
  auto* single = app.add_subcommand("single", "One realization with ASCII support maps");
  auto* exportm = app.add_subcommand("export-matrix", "Write the sensing matrix as DDSM + JSON sidecar");
  auto* selftest = app.add_subcommand("selftest", "Fast invariant checks");
  for (auto* sub : {sweep, heatmap, single, exportm, selftest}) add_common(sub, args);
  selftest->add_option("--matrix", args.matrix_stem, "Verify an exported matrix (path without extension)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (sweep->parsed()) return cmd_sweep(args, out, err);
    if (heatmap->parsed()) return cmd_heatmap(args, out, err);
    if (single->parsed()) return cmd_single(args, out);
    if (exportm->parsed()) return cmd_export(args, out);
    if (selftest->parsed()) return cmd_selftest(args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ChecksumError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace ddest
