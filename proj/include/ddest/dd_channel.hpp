// dd_channel.hpp - on-grid delay-Doppler channel model
//
// A channel realization lives on an L x B grid (B = 2Q+1 Doppler bins per
// delay tap). Active coefficients form a Cartesian product of an active delay
// set and a shared active Doppler set; each active coefficient carries an
// independent CN(0, sigma_alpha^2) gain.

#pragma once

#include <random>

#include "ddest/common.hpp"

namespace ddest {

using Rng = std::mt19937_64;

/// Static grid and AFDM chirp parameters.
struct GridConfig {
  int N = 4096;       ///< frame length
  int L = 30;         ///< delay taps
  int Q = 7;          ///< max normalized Doppler index
  int P_afdm = 2;     ///< integer pilot/chirp parameter, 2*N*c1 == -P_afdm
  Real c1 = -2.0 / (2.0 * 4096.0);
  Real c2 = 1.0 / (20.0 * 4096.0);
  Real p_d = 0.2;     ///< delay activity probability
  Real p_D = 0.2;     ///< Doppler activity probability

  int B() const { return 2 * Q + 1; }
  Index grid_size() const { return static_cast<Index>(L) * B(); }

  /// Integer value of 2*N*c1 used for the modular index map.
  int index_shift() const { return -P_afdm; }

  /// Per-coefficient gain variance normalizing E[||alpha||^2] to one.
  Real sigma_alpha_sq() const;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// N=4096, L=30, Q=7, P_afdm=2, c1=-P_afdm/(2N), c2=1/(20N), p_d=p_D=0.2.
  static GridConfig reference_profile();

  /// Builds a config with c1 = -P_afdm/(2N) and c2 = 1/(20N).
  static GridConfig make(int N, int L, int Q, int P_afdm, Real p_d, Real p_D);

  bool operator==(const GridConfig&) const = default;
};

/// Delay set x Doppler set. Both sorted ascending, duplicate free.
struct SupportPattern {
  std::vector<int> delays;    ///< subset of {0, ..., L-1}
  std::vector<int> dopplers;  ///< subset of {-Q, ..., Q}

  Index num_delays() const { return static_cast<Index>(delays.size()); }
  Index num_dopplers() const { return static_cast<Index>(dopplers.size()); }
  Index size() const { return num_delays() * num_dopplers(); }
  bool empty() const { return delays.empty() || dopplers.empty(); }

  /// Column indices of the product support, ascending.
  IndexSet columns(const GridConfig& cfg) const;

  /// Throws RangeError if unsorted, duplicated, or out of range for cfg.
  void validate(const GridConfig& cfg) const;

  bool operator==(const SupportPattern&) const = default;
};

struct ChannelRealization {
  SupportPattern support;
  VectorXc alpha;           ///< length L*B, zero off-support
  Real sigma_alpha_sq = 0;  ///< per-coefficient gain variance
};

/// Independent Bernoulli(p_d) delays and Bernoulli(p_D) Dopplers. With
/// require_nonempty the whole pattern is redrawn until both sets are nonempty.
SupportPattern sample_support(const GridConfig& cfg, Rng& rng, bool require_nonempty);

/// Draws CN(0, sigma_alpha^2) gains on the product support.
ChannelRealization sample_gains(const SupportPattern& support, const GridConfig& cfg, Rng& rng);

/// h_{l,n} = sum_q alpha[iota(l,q)] exp(j 2 pi n q / N). Validation helper.
Complex time_varying_gain(const ChannelRealization& real, const GridConfig& cfg, int l, Index n);

}  // namespace ddest
