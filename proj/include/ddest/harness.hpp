// harness.hpp - seeded Monte Carlo trials, SNR sweeps and (N_p, SNR) heatmaps
//
// Every trial draws from its own stream derived from (master_seed,
// trial_index), so results do not depend on scheduling or thread count.
// A given trial index sees the same channel and the same unit noise draws at
// every SNR point and every pilot count.

#pragma once

#include <functional>
#include <iosfwd>
#include <memory>

#include "ddest/afdm_sensing.hpp"
#include "ddest/dd_channel.hpp"
#include "ddest/estimators.hpp"

namespace ddest {

struct ExperimentConfig {
  GridConfig grid = GridConfig::reference_profile();
  std::vector<int> n_p{8};
  PilotLayout pilot_layout = PilotLayout::spread;
  std::vector<Real> snr_db_list{0, 5, 10, 15, 20, 25, 30};
  int n_trials = 300;
  std::uint64_t master_seed = 1;
  std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
  Real lambda_reg = 1e-10;
  bool require_nonempty = true;
  bool noiseless = false;
  SblOptions sbl;

  /// Throws ConfigError.
  void validate() const;
};

struct EstimatorMetrics {
  EstimatorKind kind = EstimatorKind::proposed;
  Real nmse = 0;
  bool exact_support = false;
  int d_hat = 0;
  int r_hat = 0;
  Real rss = 0;
  double wall_time_s = 0;  ///< excluded from equality

  bool operator==(const EstimatorMetrics& o) const {
    return kind == o.kind && nmse == o.nmse && exact_support == o.exact_support && d_hat == o.d_hat &&
           r_hat == o.r_hat && rss == o.rss;
  }
};

struct TrialMetrics {
  std::uint64_t trial_index = 0;
  Real snr_db = 0;
  SupportPattern truth;
  std::uint64_t y_hash = 0;  ///< every estimator in the trial consumed this y
  std::vector<EstimatorMetrics> per_estimator;

  const EstimatorMetrics& at(EstimatorKind kind) const;
  bool operator==(const TrialMetrics&) const = default;
};

/// ||alpha_hat - alpha||^2 / ||alpha||^2. Throws UndefinedMetricError if alpha = 0.
Real nmse(const VectorXc& alpha_hat, const VectorXc& alpha);

/// Delay sets equal and Doppler sets equal.
bool exact_support_match(const SupportPattern& est, const SupportPattern& truth);

/// As above for product supports; unstructured (SBL) supports compare the raw
/// column set against the columns of the true product.
bool exact_support_match(const EstimationResult& est, const SupportPattern& truth, const GridConfig& cfg);

std::uint64_t splitmix64(std::uint64_t x);
Rng trial_stream(std::uint64_t master_seed, std::uint64_t trial_index);
/// FNV-1a over the raw bytes of y.
std::uint64_t hash_observation(const VectorXc& y);

/// Immutable per-(grid, N_p) state shared by all trials.
class TrialContext {
 public:
  TrialContext(const GridConfig& cfg, int n_p, PilotLayout layout, Real lambda_reg);

  const GridConfig& grid() const { return cfg_; }
  const PilotConfig& pilot() const { return pilot_; }
  const SensingMatrix& sensing() const { return *Mp_; }
  const ChannelEstimator& estimator() const { return *est_; }

 private:
  GridConfig cfg_;
  PilotConfig pilot_;
  std::unique_ptr<SensingMatrix> Mp_;
  std::unique_ptr<ChannelEstimator> est_;
};

struct TrialOptions {
  std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
  bool require_nonempty = true;
  bool noiseless = false;
  SblOptions sbl;
};

struct TrialOutcome {
  TrialMetrics metrics;
  ChannelRealization channel;
  Observation observation;
  std::vector<EstimationResult> results;  ///< same order as metrics.per_estimator
};

TrialOutcome run_trial_detailed(const TrialContext& ctx, Real snr_db, std::uint64_t trial_index,
                                std::uint64_t master_seed, const TrialOptions& opts);
TrialMetrics run_trial(const TrialContext& ctx, Real snr_db, std::uint64_t trial_index,
                       std::uint64_t master_seed, const TrialOptions& opts);

struct SweepRow {
  Real snr_db = 0;
  EstimatorKind estimator = EstimatorKind::proposed;
  Real mean_nmse = 0;
  Real nmse_ci = 0;  ///< 95% normal-approximation half width
  Real support_rate = 0;
  Real rate_ci = 0;
  int n_trials = 0;
};

struct HeatmapRow {
  int n_p = 0;
  Real snr_db = 0;
  EstimatorKind estimator = EstimatorKind::proposed;
  Real support_rate = 0;
  Real rate_ci = 0;
};

struct HeatmapExclusion {
  int n_p = 0;
  Index observations = 0;
  Index excluded_cells = 0;  ///< (d, r) grid cells with d*r >= M
};

struct HeatmapResult {
  std::vector<HeatmapRow> rows;
  std::vector<HeatmapExclusion> exclusions;
};

struct RunOptions {
  unsigned threads = 1;  ///< 0 = hardware concurrency
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Aggregates trials for one (snr, estimator) cell.
SweepRow summarize(const std::vector<TrialMetrics>& trials, EstimatorKind kind, Real snr_db);

/// Requires exactly one n_p.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const RunOptions& run = {});
HeatmapResult run_heatmap(const ExperimentConfig& config, const RunOptions& run = {});

/// Shortest round-trip decimal.
std::string format_real(Real v);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_heatmap_csv(std::ostream& os, const std::vector<HeatmapRow>& rows);
void write_exclusions_csv(std::ostream& os, const std::vector<HeatmapExclusion>& rows);

}  // namespace ddest
