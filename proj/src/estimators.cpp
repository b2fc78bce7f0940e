#include "ddest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddest {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

IndexSet product_columns(const SupportPattern& s, int Q, int B) {
  IndexSet cols;
  cols.reserve(static_cast<size_t>(s.size()));
  for (int l : s.delays)
    for (int q : s.dopplers) cols.push_back(dd_index(l, q, Q, B));
  return cols;
}

/// Least squares on a product support, scattered to full length.
EstimationResult fit_product(const SensingMatrix& Mp, const VectorXc& y, SupportPattern support) {
  EstimationResult res;
  res.support = std::move(support);
  res.d_hat = static_cast<int>(res.support.num_delays());
  res.r_hat = static_cast<int>(res.support.num_dopplers());
  res.alpha_hat = VectorXc::Zero(Mp.cols());
  if (!res.support.empty()) res.columns = product_columns(res.support, Mp.Q(), Mp.B());

  const auto ls = restricted_ls(Mp.entries(), y, res.columns, &Mp.partition());
  for (size_t i = 0; i < res.columns.size(); ++i) res.alpha_hat(res.columns[i]) = ls.coeffs(static_cast<Index>(i));
  res.rss = ls.rss;
  res.rank_deficient = ls.rank_deficient;
  res.bic = bic_score(ls.rss, Mp.rows(), res.d_hat, res.r_hat, kRssFloor * y.squaredNorm());
  return res;
}

std::vector<int> to_dopplers(const IndexSet& bins, int Q) {
  std::vector<int> out;
  out.reserve(bins.size());
  for (Index b : bins) out.push_back(static_cast<int>(b) - Q);
  return out;
}

std::vector<int> to_ints(const IndexSet& idx) { return {idx.begin(), idx.end()}; }

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::proposed: return "proposed";
    case EstimatorKind::shared_mean: return "shared_mean";
    case EstimatorKind::shared_tolerant: return "shared_tolerant";
    case EstimatorKind::sbl: return "sbl";
    case EstimatorKind::oracle: return "oracle";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(const std::string& name) {
  for (EstimatorKind k : kAllEstimators)
    if (to_string(k) == name) return k;
  throw ConfigError("unknown estimator '" + name + "'");
}

void SblOptions::validate() const {
  if (max_iters < 1) throw ConfigError("sbl: max_iters must be >= 1");
  if (!(tol > 0)) throw ConfigError("sbl: tol must be positive");
  if (!(prune_threshold >= 0)) throw ConfigError("sbl: prune_threshold must be non-negative");
}

MatrixXc reshape_blockwise(const VectorXc& z, const GridConfig& cfg) {
  if (z.size() != cfg.grid_size()) throw DimensionError("reshape_blockwise: length is not L*B");
  return Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      z.data(), cfg.L, cfg.B());
}

MatrixXr dd_energy(const VectorXc& z, const GridConfig& cfg) {
  return reshape_blockwise(z, cfg).cwiseAbs2();
}

std::vector<int> candidate_doppler(const MatrixXc& Z, int r) {
  const Index B = Z.cols();
  if (B % 2 != 1) throw DimensionError("candidate_doppler: Doppler dimension must be odd");
  if (r < 0 || r > B) throw RangeError("candidate_doppler: r out of range");
  const VectorXr energy = Z.cwiseAbs2().colwise().sum().transpose();
  return to_dopplers(top_k(energy, r), static_cast<int>(B / 2));
}

std::vector<int> candidate_delay(const MatrixXc& Z, const std::vector<int>& dopplers, int d) {
  const Index L = Z.rows();
  const int Q = static_cast<int>(Z.cols() / 2);
  if (d < 0 || d > L) throw RangeError("candidate_delay: d out of range");
  VectorXr energy = VectorXr::Zero(L);
  for (int q : dopplers) {
    if (q < -Q || q > Q) throw RangeError("candidate_delay: Doppler out of range");
    energy += Z.col(q + Q).cwiseAbs2();
  }
  return to_ints(top_k(energy, d));
}

Real bic_score(Real rss, Index M, Index d, Index r, Real floor) {
  const Real m = static_cast<Real>(M);
  return m * std::log(std::max(rss, floor) / m) + 2.0 * static_cast<Real>(d * r) * std::log(m);
}

std::pair<int, int> shared_mean_dims(const GridConfig& cfg) {
  return {static_cast<int>(std::lround(cfg.p_d * cfg.L)), static_cast<int>(std::lround(cfg.p_D * cfg.B()))};
}

std::pair<int, int> shared_tolerant_dims(const GridConfig& cfg) {
  const auto [d, r] = shared_mean_dims(cfg);
  return {std::min(2 * d, cfg.L), std::min(2 * r, cfg.B())};
}

ChannelEstimator::ChannelEstimator(const SensingMatrix& Mp, const GridConfig& cfg, Real lambda_reg)
    : Mp_(&Mp), cfg_(cfg), ridge_(Mp.entries(), lambda_reg) {
  if (Mp.L() != cfg.L || Mp.Q() != cfg.Q) throw DimensionError("estimator: sensing matrix does not match grid");
}

void ChannelEstimator::check_observation(const VectorXc& y) const {
  if (y.size() != Mp_->rows()) throw DimensionError("estimator: observation length mismatch");
}

VectorXc ChannelEstimator::ridge_proxy(const VectorXc& y) const {
  check_observation(y);
  return ridge_.solve(y);
}

SupportPattern ChannelEstimator::candidate_support(const MatrixXr& energy, int d, int r) const {
  SupportPattern s;
  const IndexSet bins = top_k(energy.colwise().sum().transpose(), r);
  VectorXr delay_energy = VectorXr::Zero(cfg_.L);
  for (Index b : bins) delay_energy += energy.col(b);
  s.dopplers = to_dopplers(bins, cfg_.Q);
  s.delays = to_ints(top_k(delay_energy, d));
  return s;
}

EstimationResult ChannelEstimator::proposed(const VectorXc& y) const {
  check_observation(y);
  const Index M = Mp_->rows();
  const int L = cfg_.L;
  const int B = cfg_.B();
  const Real floor = kRssFloor * y.squaredNorm();
  const MatrixXr energy = dd_energy(ridge_.solve(y), cfg_);
  const VectorXr doppler_energy = energy.colwise().sum().transpose();
  const Real empty_score = bic_score(y.squaredNorm(), M, 0, 0, floor);

  MatrixXr table(L + 1, B + 1);
  Index excluded = 0;
  Real best = kInf;
  SupportPattern winner;

  for (int r = 0; r <= B; ++r) {
    const IndexSet bins = top_k(doppler_energy, r);
    VectorXr delay_energy = VectorXr::Zero(L);
    for (Index b : bins) delay_energy += energy.col(b);
    for (int d = 0; d <= L; ++d) {
      if (static_cast<Index>(d) * r >= M) {
        table(d, r) = kInf;
        ++excluded;
        continue;
      }
      SupportPattern cand;
      Real score = empty_score;
      if (d > 0 && r > 0) {
        cand.dopplers = to_dopplers(bins, cfg_.Q);
        cand.delays = to_ints(top_k(delay_energy, d));
        const auto ls = restricted_ls(Mp_->entries(), y, product_columns(cand, cfg_.Q, B), &Mp_->partition());
        score = bic_score(ls.rss, M, d, r, floor);
      }
      table(d, r) = score;
      if (score < best) {
        best = score;
        winner = std::move(cand);
      }
    }
  }

  EstimationResult res = fit_product(*Mp_, y, std::move(winner));
  res.score_table = std::move(table);
  res.excluded_cells = excluded;
  return res;
}

EstimationResult ChannelEstimator::fixed(const VectorXc& y, int d, int r) const {
  check_observation(y);
  if (d < 0 || d > cfg_.L || r < 0 || r > cfg_.B()) throw RangeError("estimate_fixed: (d, r) out of range");
  if (static_cast<Index>(d) * r >= Mp_->rows()) throw DimensionError("estimate_fixed: d*r >= M");
  if (d == 0 || r == 0) return fit_product(*Mp_, y, {});
  const MatrixXr energy = dd_energy(ridge_.solve(y), cfg_);
  return fit_product(*Mp_, y, candidate_support(energy, d, r));
}

EstimationResult ChannelEstimator::oracle(const VectorXc& y, const SupportPattern& truth) const {
  return estimate_oracle(*Mp_, y, truth);
}

EstimationResult ChannelEstimator::sbl(const VectorXc& y, Real sigma_w_sq, const SblOptions& opts) const {
  return estimate_sbl(*Mp_, y, sigma_w_sq, opts);
}

EstimationResult estimate_proposed(const SensingMatrix& Mp, const VectorXc& y, const GridConfig& cfg,
                                   Real lambda_reg) {
  return ChannelEstimator(Mp, cfg, lambda_reg).proposed(y);
}

EstimationResult estimate_fixed(const SensingMatrix& Mp, const VectorXc& y, const GridConfig& cfg,
                                Real lambda_reg, int d, int r) {
  return ChannelEstimator(Mp, cfg, lambda_reg).fixed(y, d, r);
}

EstimationResult estimate_oracle(const SensingMatrix& Mp, const VectorXc& y, const SupportPattern& truth) {
  if (y.size() != Mp.rows()) throw DimensionError("estimate_oracle: observation length mismatch");
  if (truth.empty()) return fit_product(Mp, y, {});
  return fit_product(Mp, y, truth);
}

// EM sparse Bayesian learning with per-coefficient prior variances gamma.
// The posterior precision M^H M / s2 + diag(1/gamma) is block diagonal over
// the row-disjoint column groups, so each group is updated on its own.
EstimationResult estimate_sbl(const SensingMatrix& Mp, const VectorXc& y, Real sigma_w_sq,
                              const SblOptions& opts) {
  opts.validate();
  if (!(sigma_w_sq > 0)) throw RangeError("estimate_sbl: sigma_w_sq must be positive");
  if (y.size() != Mp.rows()) throw DimensionError("estimate_sbl: observation length mismatch");

  const MatrixXc& A = Mp.entries();
  const ColumnPartition& part = Mp.partition();
  const Index n = A.cols();

  std::vector<IndexSet> group_cols(static_cast<size_t>(part.num_groups()));
  for (Index j = 0; j < n; ++j) group_cols[part.group_of_column[j]].push_back(j);

  VectorXr gamma = VectorXr::Ones(n);
  std::vector<char> active(static_cast<size_t>(n), 1);
  VectorXc mu = VectorXc::Zero(n);

  // One posterior pass over every group; returns the max relative change of
  // gamma when update_gamma is set.
  auto posterior = [&](bool update_gamma) {
    Real max_rel = 0;
    for (size_t g = 0; g < group_cols.size(); ++g) {
      IndexSet cols;
      for (Index j : group_cols[g])
        if (active[j]) cols.push_back(j);
      if (cols.empty()) continue;
      const IndexSet& rows = part.group_rows[g];
      const MatrixXc Phi = A(rows, cols);
      MatrixXc precision = Phi.adjoint() * Phi / sigma_w_sq;
      for (size_t t = 0; t < cols.size(); ++t) precision(t, t) += 1.0 / gamma(cols[t]);
      Eigen::LLT<MatrixXc> llt(precision);
      if (llt.info() != Eigen::Success) throw NumericError("estimate_sbl: posterior precision not positive definite");
      const MatrixXc Sigma = llt.solve(MatrixXc::Identity(precision.rows(), precision.cols()));
      const VectorXc m = Sigma * (Phi.adjoint() * y(rows)) / sigma_w_sq;
      for (size_t t = 0; t < cols.size(); ++t) {
        const Index j = cols[t];
        mu(j) = m(static_cast<Index>(t));
        if (!update_gamma) continue;
        const Real updated = std::norm(m(static_cast<Index>(t))) + Sigma(t, t).real();
        max_rel = std::max(max_rel, std::abs(updated - gamma(j)) / gamma(j));
        gamma(j) = updated;
      }
    }
    return max_rel;
  };

  EstimationResult res;
  res.converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    const Real change = posterior(true);
    res.iterations = it;
    Real gmax = 0;
    for (Index j = 0; j < n; ++j)
      if (active[j]) gmax = std::max(gmax, gamma(j));
    for (Index j = 0; j < n; ++j) {
      if (active[j] && gamma(j) < opts.prune_threshold * gmax) {
        active[j] = 0;
        mu(j) = 0;
      }
    }
    if (change < opts.tol) {
      res.converged = true;
      break;
    }
  }
  posterior(false);

  res.product_support = false;
  res.alpha_hat = VectorXc::Zero(n);
  std::vector<char> delay_on(static_cast<size_t>(Mp.L()), 0);
  std::vector<char> doppler_on(static_cast<size_t>(Mp.B()), 0);
  for (Index j = 0; j < n; ++j) {
    if (!active[j]) continue;
    res.columns.push_back(j);
    res.alpha_hat(j) = mu(j);
    delay_on[j / Mp.B()] = 1;
    doppler_on[j % Mp.B()] = 1;
  }
  for (int l = 0; l < Mp.L(); ++l)
    if (delay_on[l]) res.support.delays.push_back(l);
  for (int b = 0; b < Mp.B(); ++b)
    if (doppler_on[b]) res.support.dopplers.push_back(b - Mp.Q());
  res.product_support = product_columns(res.support, Mp.Q(), Mp.B()) == res.columns;
  res.d_hat = static_cast<int>(res.support.num_delays());
  res.r_hat = static_cast<int>(res.support.num_dopplers());
  res.rss = (y - A * res.alpha_hat).squaredNorm();
  res.bic = bic_score(res.rss, Mp.rows(), static_cast<Index>(res.columns.size()), 1, kRssFloor * y.squaredNorm());
  return res;
}

}  // namespace ddest
