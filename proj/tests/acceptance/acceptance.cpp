// Acceptance suite: one [PASS]/[FAIL] line per criterion, exit 1 if any fail.

#include <chrono>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "ddest/cli.hpp"
#include "ddest/family_size.hpp"
#include "ddest/harness.hpp"

using namespace ddest;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("[%s] AC%d %-28s %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(int id, const std::string& name, const std::function<bool(std::ostringstream&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, name, ok, detail.str(), s);
}

const SweepRow& row(const std::vector<SweepRow>& rows, Real snr, EstimatorKind k) {
  for (const auto& r : rows)
    if (r.snr_db == snr && r.estimator == k) return r;
  throw std::logic_error("missing sweep row");
}

// Strictly below, with the 95% intervals apart.
bool separated(const SweepRow& lo, const SweepRow& hi) { return lo.mean_nmse + lo.nmse_ci < hi.mean_nmse - hi.nmse_ci; }

using LComplex = std::complex<long double>;

// Normal equations A^H A x = A^H y solved by Gaussian elimination with partial
// pivoting in extended precision.
std::vector<LComplex> normal_equation_solve(const MatrixXc& A, const VectorXc& y, const IndexSet& cols) {
  const size_t n = cols.size();
  std::vector<std::vector<LComplex>> G(n, std::vector<LComplex>(n + 1));
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = 0; b < n; ++b) {
      LComplex s = 0;
      for (Index i = 0; i < A.rows(); ++i)
        s += std::conj(LComplex(A(i, cols[a]))) * LComplex(A(i, cols[b]));
      G[a][b] = s;
    }
    LComplex s = 0;
    for (Index i = 0; i < A.rows(); ++i) s += std::conj(LComplex(A(i, cols[a]))) * LComplex(y(i));
    G[a][n] = s;
  }
  for (size_t c = 0; c < n; ++c) {
    size_t piv = c;
    for (size_t r = c + 1; r < n; ++r)
      if (std::abs(G[r][c]) > std::abs(G[piv][c])) piv = r;
    std::swap(G[c], G[piv]);
    for (size_t r = c + 1; r < n; ++r) {
      const LComplex f = G[r][c] / G[c][c];
      for (size_t k = c; k <= n; ++k) G[r][k] -= f * G[c][k];
    }
  }
  std::vector<LComplex> x(n);
  for (size_t c = n; c-- > 0;) {
    LComplex s = G[c][n];
    for (size_t k = c + 1; k < n; ++k) s -= G[c][k] * x[k];
    x[c] = s / G[c][c];
  }
  return x;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ddest");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

}  // namespace

int main() {
  const GridConfig ref = GridConfig::reference_profile();
  const std::uint64_t seed = 20240601;

  criterion(1, "noiseless-exactness", [&](std::ostringstream& d) {
    const TrialContext ctx(ref, 8, PilotLayout::spread, 1e-10);
    TrialOptions opts;
    opts.estimators = {EstimatorKind::proposed, EstimatorKind::oracle};
    opts.noiseless = true;
    int exact = 0;
    bool identical = true;
    for (std::uint64_t t = 0; t < 100; ++t) {
      const auto o = run_trial_detailed(ctx, 20, t, seed, opts);
      const auto& p = o.results[0];
      const bool match = exact_support_match(p.support, o.channel.support);
      const Real rel = (p.alpha_hat - o.channel.alpha).norm() / o.channel.alpha.norm();
      if (match && rel <= 1e-8) ++exact;
      if (match && !(p.alpha_hat == o.results[1].alpha_hat)) identical = false;
    }
    d << "exact " << exact << "/100 (need >= 99), oracle bit-identical " << (identical ? "yes" : "no");
    return exact >= 99 && identical;
  });

  criterion(2, "dimensions", [&](std::ostringstream& d) {
    const PilotConfig pc = build_pilot_config(ref, 8);
    const SensingMatrix Mp = build_sensing_matrix(ref, pc);
    d << "|P| = " << pc.num_observations() << ", M_p " << Mp.rows() << "x" << Mp.cols();
    return pc.num_observations() == 584 && Mp.rows() == 584 && Mp.cols() == 450;
  });

  criterion(3, "family-size", [&](std::ostringstream& d) {
    const BigInt s = binomial(30, 6) * binomial(15, 3);
    const BigInt u = binomial(450, 18);
    d << "C(30,6)C(15,3) = " << s << ", C(450,18) = " << u;
    return s == BigInt(270167625) && s < u && s == structured_family_size(30, 15, 6, 3);
  });

  ExperimentConfig base;
  base.master_seed = seed;
  base.n_trials = 300;
  RunOptions run;
  run.threads = 0;

  std::vector<SweepRow> at30;
  criterion(4, "near-oracle-30dB", [&](std::ostringstream& d) {
    ExperimentConfig c = base;
    c.snr_db_list = {30};
    at30 = run_sweep(c, run);
    const Real p = row(at30, 30, EstimatorKind::proposed).mean_nmse;
    const Real o = row(at30, 30, EstimatorKind::oracle).mean_nmse;
    d << "proposed " << format_real(p) << ", oracle " << format_real(o) << ", ratio " << p / o
      << " (need <= 2, proposed <= 1e-3)";
    return p <= 2 * o && p <= 1e-3;
  });

  criterion(5, "baseline-ordering-30dB", [&](std::ostringstream& d) {
    if (at30.empty()) throw std::runtime_error("30 dB sweep unavailable");
    const auto& o = row(at30, 30, EstimatorKind::oracle);
    const auto& p = row(at30, 30, EstimatorKind::proposed);
    const auto& s = row(at30, 30, EstimatorKind::sbl);
    const auto& t = row(at30, 30, EstimatorKind::shared_tolerant);
    const auto& m = row(at30, 30, EstimatorKind::shared_mean);
    const bool ok = o.mean_nmse <= p.mean_nmse && separated(p, s) && separated(s, t) && separated(t, m) &&
                    m.mean_nmse >= 10 * p.mean_nmse;
    d << "oracle " << format_real(o.mean_nmse) << " <= proposed " << format_real(p.mean_nmse) << " < sbl "
      << format_real(s.mean_nmse) << "+-" << s.nmse_ci << " < tolerant " << format_real(t.mean_nmse) << "+-"
      << t.nmse_ci << " < mean " << format_real(m.mean_nmse) << "+-" << m.nmse_ci;
    return ok;
  });

  criterion(6, "support-recovery-20dB", [&](std::ostringstream& d) {
    ExperimentConfig c = base;
    c.snr_db_list = {20};
    c.estimators = {EstimatorKind::proposed, EstimatorKind::shared_mean};
    const auto rows = run_sweep(c, run);
    const Real p = row(rows, 20, EstimatorKind::proposed).support_rate;
    const Real m = row(rows, 20, EstimatorKind::shared_mean).support_rate;
    d << "proposed " << p << " (need >= 0.85), shared_mean " << m << " (need <= 0.2)";
    return p >= 0.85 && m <= 0.2;
  });

  criterion(7, "heatmap-monotone-in-Np", [&](std::ostringstream& d) {
    ExperimentConfig c = base;
    c.n_p = {2, 4, 6, 8};
    c.snr_db_list = {20};
    c.estimators = {EstimatorKind::proposed};
    const auto res = run_heatmap(c, run);
    bool ok = true;
    for (size_t i = 0; i < res.rows.size(); ++i) {
      d << (i ? ", " : "") << "N_p=" << res.rows[i].n_p << ": " << res.rows[i].support_rate;
      if (i > 0) {
        const auto& a = res.rows[i - 1];
        const auto& b = res.rows[i];
        // A decrease only counts when the intervals separate.
        if (b.support_rate + b.rate_ci < a.support_rate - a.rate_ci) ok = false;
      }
    }
    return ok;
  });

  criterion(8, "determinism", [&](std::ostringstream& d) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "ddest-acceptance";
    fs::remove_all(root);
    const std::vector<std::string> common{"--trials", "50", "--snr", "10,25", "--seed", std::to_string(seed)};
    std::vector<std::string> csv;
    for (const char* threads : {"1", "1", "8"}) {
      const fs::path out = root / ("run" + std::to_string(csv.size()));
      auto args = common;
      args.insert(args.begin(), {"sweep", "--out", out.string(), "--threads", threads});
      if (cli(args) != 0) throw std::runtime_error("sweep failed");
      csv.push_back(read_file(out / "sweep.csv"));
    }
    fs::remove_all(root);
    d << "run/run " << (csv[0] == csv[1] ? "identical" : "DIFFER") << ", 1 vs 8 threads "
      << (csv[0] == csv[2] ? "identical" : "DIFFER") << " (" << csv[0].size() << " bytes)";
    return csv[0] == csv[1] && csv[0] == csv[2] && csv[0].size() > 100;
  });

  criterion(9, "power-normalization", [&](std::ostringstream& d) {
    Rng rng = trial_stream(seed, 0);
    double acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample_gains(sample_support(ref, rng, false), ref, rng).alpha.squaredNorm();
    d << "E||alpha||^2 = " << acc / n << " (need [0.95, 1.05])";
    return acc / n >= 0.95 && acc / n <= 1.05;
  });

  criterion(10, "restricted-ls-vs-normal-eq", [&](std::ostringstream& d) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> g;
    std::uniform_int_distribution<int> size(1, 12);
    Real worst_coef = 0, worst_rss = 0;
    for (int inst = 0; inst < 50; ++inst) {
      MatrixXc A(20, 12);
      VectorXc y(20);
      for (Index i = 0; i < 20; ++i) {
        for (Index j = 0; j < 12; ++j) A(i, j) = Complex(g(rng), g(rng));
        y(i) = Complex(g(rng), g(rng));
      }
      IndexSet all(12);
      std::iota(all.begin(), all.end(), Index{0});
      std::shuffle(all.begin(), all.end(), rng);
      const IndexSet cols(all.begin(), all.begin() + size(rng));
      const auto got = restricted_ls(A, y, cols);
      const auto want = normal_equation_solve(A, y, cols);
      long double num = 0, den = 0;
      for (size_t k = 0; k < cols.size(); ++k) {
        num += std::norm(LComplex(got.coeffs(static_cast<Index>(k))) - want[k]);
        den += std::norm(want[k]);
      }
      long double rss = 0;
      for (Index i = 0; i < 20; ++i) {
        LComplex r = y(i);
        for (size_t k = 0; k < cols.size(); ++k) r -= LComplex(A(i, cols[k])) * want[k];
        rss += std::norm(r);
      }
      worst_coef = std::max(worst_coef, static_cast<Real>(std::sqrt(num / den)));
      worst_rss = std::max(worst_rss, static_cast<Real>(std::abs(got.rss - rss) / rss));
    }
    d << "max rel coef err " << worst_coef << ", max rel rss err " << worst_rss << " (need <= 1e-8)";
    return worst_coef <= 1e-8 && worst_rss <= 1e-8;
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
