#include <gtest/gtest.h>

#include <cmath>

#include "ddest/estimators.hpp"
#include "ddest/family_size.hpp"

using namespace ddest;

namespace {

const GridConfig kRef = GridConfig::reference_profile();

struct Fixture {
  PilotConfig pilot = build_pilot_config(kRef, 8);
  SensingMatrix Mp = build_sensing_matrix(kRef, pilot);
  ChannelEstimator est{Mp, kRef, 1e-10};
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

ChannelRealization draw(Rng& rng) { return sample_gains(sample_support(kRef, rng, true), kRef, rng); }

VectorXc complex_noise(Index n, Real var, Rng& rng) {
  std::normal_distribution<Real> d(0.0, std::sqrt(var / 2));
  VectorXc w(n);
  for (Index i = 0; i < n; ++i) w(i) = Complex(d(rng), d(rng));
  return w;
}

}  // namespace

TEST(CandidateDoppler, ZeroProxyTieBreak) {
  const MatrixXc Z = MatrixXc::Zero(30, 15);
  EXPECT_EQ(candidate_doppler(Z, 3), (std::vector<int>{-7, -6, -5}));
  EXPECT_EQ(candidate_doppler(Z, 0), std::vector<int>{});
}

TEST(CandidateDoppler, SingleColumn) {
  MatrixXc Z = MatrixXc::Zero(30, 15);
  Z.col(2 + 7).setConstant(Complex(0.1, 0.2));
  EXPECT_EQ(candidate_doppler(Z, 1), std::vector<int>{2});
}

TEST(CandidateDoppler, HandComputed) {
  MatrixXc Z(2, 3);
  Z << 1.0, 0.0, 2.0, Complex(0, std::sqrt(2.0)), 0.0, 1.0;  // |Z|^2 = [1 0 4; 2 0 1]
  EXPECT_EQ(candidate_doppler(Z, 2), (std::vector<int>{-1, 1}));
  EXPECT_THROW(candidate_doppler(Z, 4), RangeError);
  EXPECT_THROW(candidate_doppler(Z, -1), RangeError);
}

TEST(CandidateDelay, Examples) {
  MatrixXc Z(2, 3);
  Z << 1.0, 0.0, 2.0, Complex(0, std::sqrt(2.0)), 0.0, 1.0;
  EXPECT_EQ(candidate_delay(Z, {1}, 1), std::vector<int>{0});
  EXPECT_EQ(candidate_delay(Z, {}, 2), (std::vector<int>{0, 1}));
  EXPECT_THROW(candidate_delay(Z, {1}, 3), RangeError);

  MatrixXc Y = MatrixXc::Zero(30, 15);
  Y.row(5).setConstant(1.0);
  EXPECT_EQ(candidate_delay(Y, {-1, 3}, 1), std::vector<int>{5});
  std::vector<int> all(30);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(candidate_delay(Y, {0}, 30), all);
}

TEST(Bic, Examples) {
  EXPECT_NEAR(bic_score(584, 584, 6, 3, 0), 36 * std::log(584.0), 1e-9);
  EXPECT_NEAR(bic_score(10, 584, 0, 5, 0), 584 * std::log(10 / 584.0), 1e-9);
  // 584 ln(0.01) + 36 ln(584) = -2689.419 + 229.316
  const long double want = 584.0L * std::log(0.01L) + 36.0L * std::log(584.0L);
  EXPECT_NEAR(bic_score(5.84, 584, 6, 3, 0), static_cast<double>(want), 1e-9);
  EXPECT_NEAR(bic_score(5.84, 584, 6, 3, 0), -2460.10, 0.01);
  EXPECT_EQ(bic_score(0.0, 584, 1, 1, 1e-6), bic_score(1e-6, 584, 1, 1, 0));
}

TEST(FixedDims, Reference) {
  EXPECT_EQ(shared_mean_dims(kRef), std::make_pair(6, 3));
  EXPECT_EQ(shared_tolerant_dims(kRef), std::make_pair(12, 6));
}

TEST(FamilySize, ReferenceIdentity) {
  EXPECT_EQ(binomial(30, 6), BigInt(593775));
  EXPECT_EQ(binomial(15, 3), BigInt(455));
  EXPECT_EQ(structured_family_size(30, 15, 6, 3), BigInt(270167625));
  EXPECT_LT(structured_family_size(30, 15, 6, 3), unstructured_family_size(30, 15, 6, 3));
  EXPECT_EQ(unstructured_family_size(30, 15, 6, 3), binomial(450, 18));
}

TEST(FamilySize, PascalTriangle) {
  std::vector<BigInt> row{1};
  for (int n = 1; n <= 120; ++n) {
    std::vector<BigInt> next(static_cast<size_t>(n + 1));
    next[0] = next[n] = 1;
    for (int k = 1; k < n; ++k) next[k] = row[k - 1] + row[k];
    row = std::move(next);
    for (int k = 0; k <= n; ++k) ASSERT_EQ(binomial(n, k), row[k]) << n << " " << k;
  }
  EXPECT_EQ(binomial(5, -1), BigInt(0));
  EXPECT_EQ(binomial(5, 6), BigInt(0));
}

TEST(Proposed, NoiselessRecovery) {
  const auto& f = fixture();
  Rng rng(100);
  for (int t = 0; t < 30; ++t) {
    const auto real = draw(rng);
    const VectorXc y = f.Mp.entries() * real.alpha;
    const auto res = f.est.proposed(y);
    ASSERT_EQ(res.support, real.support) << "trial " << t;
    EXPECT_LE((res.alpha_hat - real.alpha).norm(), 1e-8 * real.alpha.norm());
    const auto orc = f.est.oracle(y, real.support);
    EXPECT_TRUE(res.alpha_hat == orc.alpha_hat);
  }
}

TEST(Proposed, PureNoiseSelectsEmptyModel) {
  const auto& f = fixture();
  Rng rng(200);
  int empty = 0;
  for (int t = 0; t < 200; ++t) {
    const auto res = f.est.proposed(complex_noise(f.Mp.rows(), 1.0, rng));
    empty += res.d_hat == 0 && res.r_hat == 0;
  }
  EXPECT_GT(empty, 180);
}

TEST(Proposed, ScoreTableProperties) {
  const auto& f = fixture();
  Rng rng(300);
  const auto real = draw(rng);
  const VectorXc y = f.Mp.entries() * real.alpha + complex_noise(f.Mp.rows(), 1e-3, rng);
  const auto res = f.est.proposed(y);
  ASSERT_TRUE(res.score_table.has_value());
  const MatrixXr& T = *res.score_table;
  ASSERT_EQ(T.rows(), 31);
  ASSERT_EQ(T.cols(), 16);
  const Real M = 584;
  const Real empty = M * std::log(y.squaredNorm() / M);
  for (int r = 0; r <= 15; ++r) EXPECT_NEAR(T(0, r), empty, 1e-9 * std::abs(empty));
  for (int d = 0; d <= 30; ++d) EXPECT_NEAR(T(d, 0), empty, 1e-9 * std::abs(empty));
  EXPECT_EQ(T.minCoeff(), res.bic);
  EXPECT_EQ(res.excluded_cells, 0);

  // First strict minimum in (r outer, d inner) order.
  int fd = -1, fr = -1;
  for (int r = 0; r <= 15 && fd < 0; ++r)
    for (int d = 0; d <= 30; ++d)
      if (T(d, r) == res.bic) {
        fd = d;
        fr = r;
        break;
      }
  EXPECT_EQ(fd, res.d_hat);
  EXPECT_EQ(fr, res.r_hat);
}

TEST(Proposed, ResultInvariants) {
  const auto& f = fixture();
  Rng rng(301);
  for (int t = 0; t < 10; ++t) {
    const auto real = draw(rng);
    const VectorXc y = f.Mp.entries() * real.alpha + complex_noise(f.Mp.rows(), 1e-2, rng);
    const auto res = f.est.proposed(y);
    EXPECT_EQ(res.d_hat, res.support.num_delays());
    EXPECT_EQ(res.r_hat, res.support.num_dopplers());
    EXPECT_EQ(res.columns, res.support.columns(kRef));
    std::vector<char> on(450, 0);
    for (Index c : res.columns) on[c] = 1;
    for (Index j = 0; j < 450; ++j)
      if (!on[j]) EXPECT_EQ(res.alpha_hat(j), Complex(0));
    const Real want = 584 * std::log(std::max(res.rss, 1e-12 * y.squaredNorm()) / 584) +
                      2.0 * res.d_hat * res.r_hat * std::log(584.0);
    EXPECT_NEAR(res.bic, want, 1e-9 * std::abs(want));
    EXPECT_NEAR(res.rss, (y - f.Mp.entries() * res.alpha_hat).squaredNorm(), 1e-10 * y.squaredNorm());

    // The winner is the structured candidate of its own size.
    const MatrixXc Z = reshape_blockwise(f.est.ridge_proxy(y), kRef);
    const auto dop = candidate_doppler(Z, res.r_hat);
    if (res.r_hat > 0 && res.d_hat > 0) {
      EXPECT_EQ(res.support.dopplers, dop);
      EXPECT_EQ(res.support.delays, candidate_delay(Z, dop, res.d_hat));
    }
  }
}

TEST(Proposed, Deterministic) {
  const auto& f = fixture();
  Rng rng(302);
  const auto real = draw(rng);
  const VectorXc y = f.Mp.entries() * real.alpha + complex_noise(f.Mp.rows(), 1e-2, rng);
  const auto a = f.est.proposed(y);
  const auto b = estimate_proposed(f.Mp, y, kRef, 1e-10);
  EXPECT_TRUE(a.alpha_hat == b.alpha_hat);
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.bic, b.bic);
  EXPECT_TRUE(*a.score_table == *b.score_table);
}

TEST(Proposed, ExcludesOversizedCells) {
  const PilotConfig pc = build_pilot_config(kRef, 1);
  const SensingMatrix Mp = build_sensing_matrix(kRef, pc);
  Rng rng(303);
  const auto real = draw(rng);
  const VectorXc y = Mp.entries() * real.alpha + complex_noise(Mp.rows(), 1e-3, rng);
  const auto res = estimate_proposed(Mp, y, kRef, 1e-10);
  Index want = 0;
  for (int r = 0; r <= 15; ++r)
    for (int d = 0; d <= 30; ++d) want += d * r >= 73;
  EXPECT_EQ(res.excluded_cells, want);
  EXPECT_TRUE(std::isinf((*res.score_table)(30, 15)));
  EXPECT_LT(res.d_hat * res.r_hat, 73);
}

TEST(Fixed, ZeroDims) {
  const auto& f = fixture();
  Rng rng(400);
  const VectorXc y = complex_noise(584, 1.0, rng);
  const auto res = f.est.fixed(y, 0, 0);
  EXPECT_EQ(res.alpha_hat, VectorXc::Zero(450));
  EXPECT_EQ(res.rss, y.squaredNorm());
  EXPECT_TRUE(res.support.empty());
}

TEST(Fixed, CorrectDimsNoiseless) {
  const auto& f = fixture();
  Rng rng(401);
  for (int t = 0; t < 10; ++t) {
    const auto real = draw(rng);
    const VectorXc y = f.Mp.entries() * real.alpha;
    const auto res = f.est.fixed(y, real.support.num_delays(), real.support.num_dopplers());
    EXPECT_EQ(res.support, real.support);
    EXPECT_LE((res.alpha_hat - real.alpha).norm(), 1e-8 * real.alpha.norm());
  }
}

TEST(Fixed, BudgetTooSmall) {
  const auto& f = fixture();
  Rng rng(402);
  const SupportPattern truth{{1, 4, 7, 11, 15, 20, 25, 29}, {-5, 0, 3}};
  const auto real = sample_gains(truth, kRef, rng);
  const auto res = f.est.fixed(f.Mp.entries() * real.alpha, 6, 3);
  EXPECT_EQ(res.support.num_delays(), 6);
  int missing = 0;
  for (int l : truth.delays)
    missing += std::find(res.support.delays.begin(), res.support.delays.end(), l) == res.support.delays.end();
  EXPECT_GE(missing, 2);
}

TEST(Fixed, Errors) {
  const PilotConfig pc = build_pilot_config(kRef, 1);
  const SensingMatrix Mp = build_sensing_matrix(kRef, pc);
  const VectorXc y = VectorXc::Ones(Mp.rows());
  EXPECT_THROW(estimate_fixed(Mp, y, kRef, 1e-10, 12, 7), DimensionError);
  EXPECT_THROW(estimate_fixed(Mp, y, kRef, 1e-10, 31, 1), RangeError);
  EXPECT_NO_THROW(estimate_fixed(Mp, y, kRef, 1e-10, 6, 3));
}

TEST(Oracle, NoiselessAndEmpty) {
  const auto& f = fixture();
  Rng rng(500);
  const auto real = draw(rng);
  const auto res = f.est.oracle(f.Mp.entries() * real.alpha, real.support);
  EXPECT_LE((res.alpha_hat - real.alpha).norm(), 1e-8 * real.alpha.norm());
  EXPECT_EQ(res.d_hat, real.support.num_delays());

  const auto none = f.est.oracle(VectorXc::Ones(584), SupportPattern{});
  EXPECT_EQ(none.alpha_hat, VectorXc::Zero(450));
  EXPECT_EQ(none.rss, 584.0);
}

// E||alpha_hat - alpha||^2 = s2 tr((M_S^H M_S)^-1) for least squares on the
// true support.
TEST(Oracle, ErrorCovariance) {
  for (auto layout : {PilotLayout::spread, PilotLayout::contiguous}) {
    const PilotConfig pc = build_pilot_config(kRef, 8, layout);
    const SensingMatrix Mp = build_sensing_matrix(kRef, pc);
    Rng rng(501);
    const Real s2 = noise_variance(20, 8, 4096);
    double got = 0, want = 0, ratio = 0;
    for (int t = 0; t < 500; ++t) {
      const auto real = draw(rng);
      const IndexSet cols = real.support.columns(kRef);
      const MatrixXc As = Mp.entries()(Eigen::all, cols);
      const MatrixXc gram = As.adjoint() * As;
      const Real tr = gram.inverse().trace().real();
      const VectorXc y = Mp.entries() * real.alpha + complex_noise(584, s2, rng);
      const auto res = estimate_oracle(Mp, y, real.support);
      const Real err = (res.alpha_hat - real.alpha).squaredNorm();
      got += err / real.alpha.squaredNorm();
      want += s2 * tr / real.alpha.squaredNorm();
      ratio += err / (s2 * tr);
    }
    // The per-trial ratio has unit mean whatever the conditioning.
    EXPECT_NEAR(ratio / 500, 1.0, 0.2) << to_string(layout);
    // NMSE against its prediction; heavy tailed for ill-conditioned layouts.
    if (layout == PilotLayout::spread) EXPECT_NEAR(got / want, 1.0, 0.2);
  }
}

TEST(Sbl, ZeroObservation) {
  const auto& f = fixture();
  const auto res = f.est.sbl(VectorXc::Zero(584), 1e-3);
  EXPECT_EQ(res.alpha_hat, VectorXc::Zero(450));
}

TEST(Sbl, SingleStrongAtom) {
  const auto& f = fixture();
  Rng rng(600);
  const Real s2 = noise_variance(40, 8, 4096);
  std::uniform_int_distribution<Index> pick(0, 449);
  int hits = 0;
  for (int t = 0; t < 100; ++t) {
    const Index j = pick(rng);
    VectorXc alpha = VectorXc::Zero(450);
    alpha(j) = Complex(0.8, -0.6);
    const VectorXc y = f.Mp.entries() * alpha + complex_noise(584, s2, rng);
    const auto res = f.est.sbl(y, s2);
    hits += res.columns == IndexSet{j};
  }
  EXPECT_EQ(hits, 100);
}

TEST(Sbl, OptionsAndErrors) {
  SblOptions o;
  EXPECT_EQ(o.max_iters, 200);
  EXPECT_EQ(o.tol, 1e-4);
  EXPECT_EQ(o.prune_threshold, 1e-6);
  const auto& f = fixture();
  EXPECT_THROW(f.est.sbl(VectorXc::Zero(584), 0.0), RangeError);
  o.max_iters = 0;
  EXPECT_THROW(f.est.sbl(VectorXc::Zero(584), 1.0, o), ConfigError);
}

TEST(Sbl, NonConvergenceFlagged) {
  const auto& f = fixture();
  Rng rng(601);
  const auto real = draw(rng);
  const Real s2 = noise_variance(10, 8, 4096);
  SblOptions o;
  o.max_iters = 2;
  const auto res = f.est.sbl(f.Mp.entries() * real.alpha + complex_noise(584, s2, rng), s2, o);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 2);
}

TEST(Sbl, ReportsProjections) {
  const auto& f = fixture();
  Rng rng(602);
  const auto real = draw(rng);
  const Real s2 = noise_variance(30, 8, 4096);
  const auto res = f.est.sbl(f.Mp.entries() * real.alpha + complex_noise(584, s2, rng), s2);
  for (Index c : res.columns) {
    const auto [l, q] = dd_coords(kRef, c);
    EXPECT_NE(std::find(res.support.delays.begin(), res.support.delays.end(), l), res.support.delays.end());
    EXPECT_NE(std::find(res.support.dopplers.begin(), res.support.dopplers.end(), q), res.support.dopplers.end());
  }
  EXPECT_EQ(res.product_support, res.columns == res.support.columns(kRef));
}

TEST(EstimatorNames, RoundTrip) {
  for (EstimatorKind k : kAllEstimators) EXPECT_EQ(estimator_from_string(to_string(k)), k);
  EXPECT_THROW(estimator_from_string("omp"), ConfigError);
}
