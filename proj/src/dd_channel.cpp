#include "ddest/dd_channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ddest/afdm_sensing.hpp"

namespace ddest {

Real GridConfig::sigma_alpha_sq() const {
  return 1.0 / (p_d * p_D * static_cast<Real>(grid_size()));
}

void GridConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("grid config: " + what); };
  if (L < 1) fail("L must be >= 1");
  if (Q < 0) fail("Q must be >= 0");
  if (P_afdm < 0) fail("P_afdm must be >= 0");
  if (static_cast<Index>(N) <= grid_size()) fail("N must exceed L*B");
  if (!(p_d >= 0.0 && p_d <= 1.0)) fail("p_d must lie in [0, 1]");
  if (!(p_D >= 0.0 && p_D <= 1.0)) fail("p_D must lie in [0, 1]");
  if (!std::isfinite(c2)) fail("c2 must be finite");
  // 2 N c1 must be the integer -P_afdm for the index map to stay on-grid.
  const Real shift = 2.0 * N * c1;
  if (std::abs(shift + P_afdm) > 1e-9) {
    std::ostringstream msg;
    msg << "c1 must equal -P_afdm/(2N) (2*N*c1 = " << shift << ", P_afdm = " << P_afdm << ")";
    fail(msg.str());
  }
}

GridConfig GridConfig::reference_profile() { return make(4096, 30, 7, 2, 0.2, 0.2); }

GridConfig GridConfig::make(int N, int L, int Q, int P_afdm, Real p_d, Real p_D) {
  GridConfig cfg;
  cfg.N = N;
  cfg.L = L;
  cfg.Q = Q;
  cfg.P_afdm = P_afdm;
  cfg.c1 = -static_cast<Real>(P_afdm) / (2.0 * N);
  cfg.c2 = 1.0 / (20.0 * N);
  cfg.p_d = p_d;
  cfg.p_D = p_D;
  return cfg;
}

IndexSet SupportPattern::columns(const GridConfig& cfg) const {
  IndexSet cols;
  cols.reserve(static_cast<size_t>(size()));
  for (int l : delays)
    for (int q : dopplers) cols.push_back(dd_index(cfg, l, q));
  return cols;
}

void SupportPattern::validate(const GridConfig& cfg) const {
  auto check = [](const std::vector<int>& v, int lo, int hi, const char* name) {
    for (size_t i = 0; i < v.size(); ++i) {
      if (v[i] < lo || v[i] > hi)
        throw RangeError(std::string("support: ") + name + " index out of range");
      if (i > 0 && v[i] <= v[i - 1])
        throw RangeError(std::string("support: ") + name + " not strictly ascending");
    }
  };
  check(delays, 0, cfg.L - 1, "delay");
  check(dopplers, -cfg.Q, cfg.Q, "Doppler");
}

SupportPattern sample_support(const GridConfig& cfg, Rng& rng, bool require_nonempty) {
  if (require_nonempty && (cfg.p_d == 0.0 || cfg.p_D == 0.0))
    throw UnsatisfiableError("sample_support: nonempty support impossible with zero activity probability");
  std::bernoulli_distribution delay_on(cfg.p_d);
  std::bernoulli_distribution doppler_on(cfg.p_D);
  for (;;) {
    SupportPattern s;
    for (int l = 0; l < cfg.L; ++l)
      if (delay_on(rng)) s.delays.push_back(l);
    for (int q = -cfg.Q; q <= cfg.Q; ++q)
      if (doppler_on(rng)) s.dopplers.push_back(q);
    if (!require_nonempty || !s.empty()) return s;
  }
}

ChannelRealization sample_gains(const SupportPattern& support, const GridConfig& cfg, Rng& rng) {
  ChannelRealization real;
  real.support = support;
  real.sigma_alpha_sq = cfg.sigma_alpha_sq();
  real.alpha = VectorXc::Zero(cfg.grid_size());
  std::normal_distribution<Real> normal(0.0, 1.0);
  const Real scale = std::sqrt(real.sigma_alpha_sq / 2.0);
  for (Index col : support.columns(cfg)) {
    const Real re = normal(rng);
    const Real im = normal(rng);
    real.alpha(col) = scale * Complex(re, im);
  }
  return real;
}

Complex time_varying_gain(const ChannelRealization& real, const GridConfig& cfg, int l, Index n) {
  if (l < 0 || l >= cfg.L) throw RangeError("time_varying_gain: delay out of range");
  Complex h(0.0, 0.0);
  for (int q = -cfg.Q; q <= cfg.Q; ++q) {
    const Complex a = real.alpha(dd_index(cfg, l, q));
    if (a == Complex(0.0, 0.0)) continue;
    // Reduce n*q mod N in integers so the phase stays exact for large n.
    const long long nq = (static_cast<long long>(n % cfg.N) * q) % cfg.N;
    const Real phase = 2.0 * std::numbers::pi * static_cast<Real>(nq) / cfg.N;
    h += a * std::polar(1.0, phase);
  }
  return h;
}

}  // namespace ddest
