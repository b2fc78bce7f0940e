// estimators.hpp - delay-Doppler channel estimators
//
// Proposed sparsity-agnostic estimator:
//   1. ridge proxy z = (M^H M + lambda I)^{-1} M^H y, reshaped to Z (L x B)
//   2. for r = 0..B, d = 0..L: Doppler candidates = top-r bins of the column
//      energies of |Z|^2; delay candidates = top-d rows of |Z|^2 restricted to
//      those bins; candidate support = delays x Dopplers
//   3. score every candidate with M log(RSS/M) + 2 d r log M and keep the
//      first strict minimum in (r outer, d inner) order
//   4. least squares on the winning support
//
// Baselines: fixed (d, r) on the same candidate rule, least squares on the
// true support, and EM sparse Bayesian learning.

#pragma once

#include <optional>
#include <string>
#include <utility>

#include "ddest/afdm_sensing.hpp"
#include "ddest/dd_channel.hpp"
#include "ddest/numerics.hpp"

namespace ddest {

enum class EstimatorKind { proposed, shared_mean, shared_tolerant, sbl, oracle };

inline constexpr EstimatorKind kAllEstimators[] = {
    EstimatorKind::proposed, EstimatorKind::shared_mean, EstimatorKind::shared_tolerant,
    EstimatorKind::sbl, EstimatorKind::oracle};

std::string to_string(EstimatorKind kind);
/// Throws ConfigError on unknown names.
EstimatorKind estimator_from_string(const std::string& name);

struct EstimationResult {
  SupportPattern support;       ///< for SBL: projections of the unstructured support
  bool product_support = true;  ///< false when columns is not support.columns()
  IndexSet columns;             ///< active columns, ascending
  int d_hat = 0;
  int r_hat = 0;
  VectorXc alpha_hat;  ///< length L*B, zero off-support
  Real rss = 0;
  Real bic = 0;
  bool rank_deficient = false;

  /// Score grid J(d, r), (L+1) x (B+1); +inf marks excluded cells (d*r >= M).
  std::optional<MatrixXr> score_table;
  Index excluded_cells = 0;

  // SBL diagnostics.
  bool converged = true;
  int iterations = 0;
};

struct SblOptions {
  int max_iters = 200;
  Real tol = 1e-4;               ///< max relative change of the prior variances
  Real prune_threshold = 1e-6;   ///< relative to the largest prior variance

  void validate() const;
};

/// |Z|^2 reshaped blockwise: row l, column q + Q.
MatrixXr dd_energy(const VectorXc& z, const GridConfig& cfg);

/// Z reshaped blockwise from the length-LB proxy.
MatrixXc reshape_blockwise(const VectorXc& z, const GridConfig& cfg);

/// Top-r Doppler bins by energy summed over delays, as signed indices.
std::vector<int> candidate_doppler(const MatrixXc& Z, int r);

/// Top-d delays by energy restricted to the given Doppler bins.
std::vector<int> candidate_delay(const MatrixXc& Z, const std::vector<int>& dopplers, int d);

/// M log(max(rss, floor) / M) + 2 d r log M.
Real bic_score(Real rss, Index M, Index d, Index r, Real floor);

/// Relative floor applied to the RSS inside the BIC.
inline constexpr Real kRssFloor = 1e-12;

/// (round(p_d L), round(p_D B)); (6, 3) for the reference profile.
std::pair<int, int> shared_mean_dims(const GridConfig& cfg);
/// Twice the mean dims, clamped to (L, B); (12, 6) for the reference profile.
std::pair<int, int> shared_tolerant_dims(const GridConfig& cfg);

/// Holds the sensing matrix reference and the cached ridge factorization.
/// The matrix must outlive the estimator. Methods are const and thread safe.
class ChannelEstimator {
 public:
  ChannelEstimator(const SensingMatrix& Mp, const GridConfig& cfg, Real lambda_reg);

  const SensingMatrix& sensing() const { return *Mp_; }
  const GridConfig& grid() const { return cfg_; }
  Real lambda_reg() const { return ridge_.lambda(); }

  VectorXc ridge_proxy(const VectorXc& y) const;

  EstimationResult proposed(const VectorXc& y) const;
  EstimationResult fixed(const VectorXc& y, int d, int r) const;
  EstimationResult oracle(const VectorXc& y, const SupportPattern& truth) const;
  EstimationResult sbl(const VectorXc& y, Real sigma_w_sq, const SblOptions& opts = {}) const;

 private:
  void check_observation(const VectorXc& y) const;
  SupportPattern candidate_support(const MatrixXr& energy, int d, int r) const;

  const SensingMatrix* Mp_;
  GridConfig cfg_;
  RidgeSolver<Complex> ridge_;
};

EstimationResult estimate_proposed(const SensingMatrix& Mp, const VectorXc& y, const GridConfig& cfg,
                                   Real lambda_reg);
EstimationResult estimate_fixed(const SensingMatrix& Mp, const VectorXc& y, const GridConfig& cfg,
                                Real lambda_reg, int d, int r);
EstimationResult estimate_oracle(const SensingMatrix& Mp, const VectorXc& y,
                                 const SupportPattern& truth);
EstimationResult estimate_sbl(const SensingMatrix& Mp, const VectorXc& y, Real sigma_w_sq,
                              const SblOptions& opts = {});

}  // namespace ddest
