#include "ddest/harness.hpp"

#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <ostream>
#include <thread>

namespace ddest {

namespace {

constexpr Real kZ95 = 1.959963984540054;

// Runs fn(i) for i in [0, n) on a small pool. Results must be written to
// per-index slots; the caller does the ordered reduction.
void parallel_for(std::size_t n, const RunOptions& run, const std::function<void(std::size_t)>& fn) {
  unsigned threads = run.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : run.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (run.progress) {
        std::lock_guard lock(progress_mutex);
        run.progress(finished, n);
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

Real sigma_for_sbl(const Observation& obs) {
  if (obs.sigma_w_sq > 0) return obs.sigma_w_sq;
  const Real floor = kRssFloor * obs.y.squaredNorm() / static_cast<Real>(obs.y.size());
  return floor > 0 ? floor : std::numeric_limits<Real>::min();
}

}  // namespace

void ExperimentConfig::validate() const {
  grid.validate();
  if (n_p.empty()) throw ConfigError("n_p must not be empty");
  for (int v : n_p)
    if (v < 1) throw ConfigError("n_p entries must be >= 1");
  if (snr_db_list.empty()) throw ConfigError("snr_db_list must not be empty");
  for (Real s : snr_db_list)
    if (!std::isfinite(s)) throw ConfigError("snr_db_list entries must be finite");
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  if (!(lambda_reg > 0)) throw ConfigError("lambda_reg must be positive");
  sbl.validate();
}

const EstimatorMetrics& TrialMetrics::at(EstimatorKind kind) const {
  for (const auto& m : per_estimator)
    if (m.kind == kind) return m;
  throw RangeError("trial metrics: estimator " + to_string(kind) + " not run");
}

Real nmse(const VectorXc& alpha_hat, const VectorXc& alpha) {
  if (alpha_hat.size() != alpha.size()) throw DimensionError("nmse: length mismatch");
  const Real denom = alpha.squaredNorm();
  if (!(denom > 0)) throw UndefinedMetricError("nmse: true channel is zero");
  return (alpha_hat - alpha).squaredNorm() / denom;
}

bool exact_support_match(const SupportPattern& est, const SupportPattern& truth) {
  return est.delays == truth.delays && est.dopplers == truth.dopplers;
}

bool exact_support_match(const EstimationResult& est, const SupportPattern& truth, const GridConfig& cfg) {
  if (est.product_support) {
    // An empty product is empty however it is written.
    if (est.support.empty() && truth.empty()) return true;
    return exact_support_match(est.support, truth);
  }
  return est.columns == truth.columns(cfg);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng trial_stream(std::uint64_t master_seed, std::uint64_t trial_index) {
  const std::uint64_t a = splitmix64(master_seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(trial_index + 0x632BE59BD9B4E019ull));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return Rng(seq);
}

std::uint64_t hash_observation(const VectorXc& y) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(y.data());
  const std::size_t n = static_cast<std::size_t>(y.size()) * sizeof(Complex);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

TrialContext::TrialContext(const GridConfig& cfg, int n_p, PilotLayout layout, Real lambda_reg)
    : cfg_(cfg), pilot_(build_pilot_config(cfg, n_p, layout)) {
  Mp_ = std::make_unique<SensingMatrix>(build_sensing_matrix(cfg_, pilot_));
  est_ = std::make_unique<ChannelEstimator>(*Mp_, cfg_, lambda_reg);
}

TrialOutcome run_trial_detailed(const TrialContext& ctx, Real snr_db, std::uint64_t trial_index,
                                std::uint64_t master_seed, const TrialOptions& opts) {
  const GridConfig& cfg = ctx.grid();
  Rng rng = trial_stream(master_seed, trial_index);
  TrialOutcome out;
  out.channel = sample_gains(sample_support(cfg, rng, opts.require_nonempty), cfg, rng);
  out.observation =
      synthesize_observation(ctx.sensing(), out.channel.alpha, snr_db, cfg, ctx.pilot().n_p, rng, opts.noiseless);

  TrialMetrics& tm = out.metrics;
  tm.trial_index = trial_index;
  tm.snr_db = snr_db;
  tm.truth = out.channel.support;
  const VectorXc& y = out.observation.y;
  tm.y_hash = hash_observation(y);

  const ChannelEstimator& est = ctx.estimator();
  for (EstimatorKind kind : opts.estimators) {
    const auto start = std::chrono::steady_clock::now();
    EstimationResult res;
    switch (kind) {
      case EstimatorKind::proposed: res = est.proposed(y); break;
      case EstimatorKind::shared_mean: {
        const auto [d, r] = shared_mean_dims(cfg);
        res = est.fixed(y, d, r);
        break;
      }
      case EstimatorKind::shared_tolerant: {
        const auto [d, r] = shared_tolerant_dims(cfg);
        res = est.fixed(y, d, r);
        break;
      }
      case EstimatorKind::sbl: res = est.sbl(y, sigma_for_sbl(out.observation), opts.sbl); break;
      case EstimatorKind::oracle: res = est.oracle(y, out.channel.support); break;
    }
    const auto stop = std::chrono::steady_clock::now();

    EstimatorMetrics m;
    m.kind = kind;
    m.nmse = nmse(res.alpha_hat, out.channel.alpha);
    m.exact_support = exact_support_match(res, out.channel.support, cfg);
    m.d_hat = res.d_hat;
    m.r_hat = res.r_hat;
    m.rss = res.rss;
    m.wall_time_s = std::chrono::duration<double>(stop - start).count();
    tm.per_estimator.push_back(m);
    out.results.push_back(std::move(res));
  }
  return out;
}

TrialMetrics run_trial(const TrialContext& ctx, Real snr_db, std::uint64_t trial_index,
                       std::uint64_t master_seed, const TrialOptions& opts) {
  return run_trial_detailed(ctx, snr_db, trial_index, master_seed, opts).metrics;
}

SweepRow summarize(const std::vector<TrialMetrics>& trials, EstimatorKind kind, Real snr_db) {
  SweepRow row;
  row.snr_db = snr_db;
  row.estimator = kind;
  row.n_trials = static_cast<int>(trials.size());
  if (trials.empty()) return row;
  const Real n = static_cast<Real>(trials.size());
  Real sum = 0;
  Real hits = 0;
  for (const auto& t : trials) {
    const auto& m = t.at(kind);
    sum += m.nmse;
    hits += m.exact_support ? 1.0 : 0.0;
  }
  row.mean_nmse = sum / n;
  row.support_rate = hits / n;
  if (trials.size() > 1) {
    Real ss = 0;
    for (const auto& t : trials) {
      const Real dev = t.at(kind).nmse - row.mean_nmse;
      ss += dev * dev;
    }
    row.nmse_ci = kZ95 * std::sqrt(ss / (n - 1.0) / n);
    row.rate_ci = kZ95 * std::sqrt(row.support_rate * (1.0 - row.support_rate) / n);
  }
  return row;
}

namespace {

TrialOptions trial_options(const ExperimentConfig& config) {
  TrialOptions opts;
  opts.estimators = config.estimators;
  opts.require_nonempty = config.require_nonempty;
  opts.noiseless = config.noiseless;
  opts.sbl = config.sbl;
  return opts;
}

// trials[s][t] for every SNR point s and trial t.
std::vector<std::vector<TrialMetrics>> run_grid(const TrialContext& ctx, const ExperimentConfig& config,
                                                const RunOptions& run) {
  const std::size_t n_snr = config.snr_db_list.size();
  const std::size_t n_trials = static_cast<std::size_t>(config.n_trials);
  const TrialOptions opts = trial_options(config);
  std::vector<std::vector<TrialMetrics>> trials(n_snr, std::vector<TrialMetrics>(n_trials));
  parallel_for(n_snr * n_trials, run, [&](std::size_t task) {
    const std::size_t s = task / n_trials;
    const std::size_t t = task % n_trials;
    trials[s][t] = run_trial(ctx, config.snr_db_list[s], t, config.master_seed, opts);
  });
  return trials;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const RunOptions& run) {
  config.validate();
  if (config.n_p.size() != 1) throw ConfigError("sweep expects a single n_p value");
  const TrialContext ctx(config.grid, config.n_p.front(), config.pilot_layout, config.lambda_reg);
  const auto trials = run_grid(ctx, config, run);

  std::vector<SweepRow> rows;
  for (std::size_t s = 0; s < config.snr_db_list.size(); ++s)
    for (EstimatorKind kind : config.estimators) rows.push_back(summarize(trials[s], kind, config.snr_db_list[s]));
  return rows;
}

HeatmapResult run_heatmap(const ExperimentConfig& config, const RunOptions& run) {
  config.validate();
  HeatmapResult out;
  for (int n_p : config.n_p) {
    const TrialContext ctx(config.grid, n_p, config.pilot_layout, config.lambda_reg);
    const Index M = ctx.sensing().rows();
    HeatmapExclusion ex;
    ex.n_p = n_p;
    ex.observations = M;
    for (int r = 0; r <= config.grid.B(); ++r)
      for (int d = 0; d <= config.grid.L; ++d)
        if (static_cast<Index>(d) * r >= M) ++ex.excluded_cells;
    out.exclusions.push_back(ex);

    const auto trials = run_grid(ctx, config, run);
    for (std::size_t s = 0; s < config.snr_db_list.size(); ++s) {
      for (EstimatorKind kind : config.estimators) {
        const SweepRow agg = summarize(trials[s], kind, config.snr_db_list[s]);
        out.rows.push_back({n_p, agg.snr_db, kind, agg.support_rate, agg.rate_ci});
      }
    }
  }
  return out;
}

std::string format_real(Real v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "snr_db,estimator,mean_nmse,nmse_ci,support_rate,rate_ci,n_trials\n";
  for (const auto& r : rows)
    os << format_real(r.snr_db) << ',' << to_string(r.estimator) << ',' << format_real(r.mean_nmse) << ','
       << format_real(r.nmse_ci) << ',' << format_real(r.support_rate) << ',' << format_real(r.rate_ci) << ','
       << r.n_trials << '\n';
}

void write_heatmap_csv(std::ostream& os, const std::vector<HeatmapRow>& rows) {
  os << "n_p,snr_db,estimator,support_rate,rate_ci\n";
  for (const auto& r : rows)
    os << r.n_p << ',' << format_real(r.snr_db) << ',' << to_string(r.estimator) << ','
       << format_real(r.support_rate) << ',' << format_real(r.rate_ci) << '\n';
}

void write_exclusions_csv(std::ostream& os, const std::vector<HeatmapExclusion>& rows) {
  os << "n_p,observations,excluded_cells\n";
  for (const auto& r : rows) os << r.n_p << ',' << r.observations << ',' << r.excluded_cells << '\n';
}

}  // namespace ddest
