#include "ddest/afdm_sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ddest {

namespace {

int mod_n(long long v, int N) {
  long long r = v % N;
  return static_cast<int>(r < 0 ? r + N : r);
}

}  // namespace

Index dd_index(int l, int q, int Q, int B) {
  if (l < 0) throw RangeError("dd_index: delay out of range");
  if (q < -Q || q > Q) throw RangeError("dd_index: Doppler out of range");
  return static_cast<Index>(l) * B + (q + Q);
}

Index dd_index(const GridConfig& cfg, int l, int q) {
  if (l >= cfg.L) throw RangeError("dd_index: delay out of range");
  return dd_index(l, q, cfg.Q, cfg.B());
}

std::pair<int, int> dd_coords(const GridConfig& cfg, Index column) {
  if (column < 0 || column >= cfg.grid_size()) throw RangeError("dd_coords: column out of range");
  const int B = cfg.B();
  return {static_cast<int>(column / B), static_cast<int>(column % B) - cfg.Q};
}

std::string to_string(PilotLayout layout) {
  return layout == PilotLayout::spread ? "spread" : "contiguous";
}

PilotLayout pilot_layout_from_string(const std::string& name) {
  if (name == "spread") return PilotLayout::spread;
  if (name == "contiguous") return PilotLayout::contiguous;
  throw ConfigError("unknown pilot layout '" + name + "' (expected spread or contiguous)");
}

Complex PilotConfig::pilot_at(int m) const {
  auto it = std::lower_bound(pilot_positions.begin(), pilot_positions.end(), m);
  if (it == pilot_positions.end() || *it != m) return {0.0, 0.0};
  return pilot_values[static_cast<size_t>(it - pilot_positions.begin())];
}

PilotConfig build_pilot_config(const GridConfig& cfg, int n_p, PilotLayout layout) {
  cfg.validate();
  if (n_p < 1) throw ConfigError("pilot config: N_p must be >= 1");

  PilotConfig pc;
  pc.n_p = n_p;
  pc.layout = layout;
  pc.window_size = cfg.B() + cfg.P_afdm * (cfg.L - 1);
  const int W = pc.window_size;
  pc.spacing = layout == PilotLayout::spread ? cfg.N / n_p : W;
  if (pc.spacing < W || static_cast<long long>(n_p - 1) * pc.spacing + W > cfg.N)
    throw ConfigError("pilot config: " + std::to_string(n_p) + " windows of width " +
                      std::to_string(W) + " do not fit in N = " + std::to_string(cfg.N));

  for (int i = 0; i < n_p; ++i) {
    const int start = i * pc.spacing;
    pc.pilot_positions.push_back(start + cfg.Q);
    pc.pilot_values.emplace_back(1.0, 0.0);
    for (int o = 0; o < W; ++o) pc.obs_indices.push_back(start + o);
  }

  // Every transmit index whose symbol would land in an observation window
  // must carry a pilot or a zero.
  std::vector<char> reserved(static_cast<size_t>(cfg.N), 0);
  const int shift = cfg.index_shift();
  for (int k : pc.obs_indices)
    for (int l = 0; l < cfg.L; ++l)
      for (int q = -cfg.Q; q <= cfg.Q; ++q)
        reserved[mod_n(static_cast<long long>(k) - q + static_cast<long long>(shift) * l, cfg.N)] = 1;
  pc.guard_overhead = static_cast<int>(std::count(reserved.begin(), reserved.end(), 1));
  return pc;
}

Complex atom_entry(const GridConfig& cfg, const PilotConfig& pilot, int k, int l, int q) {
  const long long N = cfg.N;
  const int m = mod_n(static_cast<long long>(k) - q + static_cast<long long>(cfg.index_shift()) * l, cfg.N);
  const Complex x = pilot.pilot_at(m);
  if (x == Complex(0.0, 0.0)) return x;
  // Integer parts first; m*m and k*k are exact in 64 bits.
  const long long ml = static_cast<long long>(m) * l;
  const long long dsq = static_cast<long long>(m) * m - static_cast<long long>(k) * k;
  Real arg = cfg.c1 * static_cast<Real>(static_cast<long long>(l) * l) -
             static_cast<Real>(ml % N) / static_cast<Real>(N) + cfg.c2 * static_cast<Real>(dsq);
  arg -= std::round(arg);
  return std::polar(1.0, 2.0 * std::numbers::pi * arg) * x;
}

SensingMatrix::SensingMatrix(MatrixXc entries, std::vector<int> obs_indices, int L, int Q)
    : entries_(std::move(entries)), obs_indices_(std::move(obs_indices)), L_(L), Q_(Q) {
  if (static_cast<Index>(obs_indices_.size()) != entries_.rows())
    throw DimensionError("sensing matrix: row map size mismatch");
  if (static_cast<Index>(L_) * B() != entries_.cols())
    throw DimensionError("sensing matrix: column count is not L*B");
  column_rows_.resize(static_cast<size_t>(entries_.cols()));
  for (Index j = 0; j < entries_.cols(); ++j)
    for (Index i = 0; i < entries_.rows(); ++i)
      if (entries_(i, j) != Complex(0.0, 0.0)) column_rows_[j].push_back(i);
  partition_ = partition_columns(entries_);
}

Index SensingMatrix::row_of(int k) const {
  auto it = std::lower_bound(obs_indices_.begin(), obs_indices_.end(), k);
  if (it == obs_indices_.end() || *it != k) return -1;
  return static_cast<Index>(it - obs_indices_.begin());
}

SensingMatrix build_sensing_matrix(const GridConfig& cfg, const PilotConfig& pilot) {
  const Index M = pilot.num_observations();
  MatrixXc A = MatrixXc::Zero(M, cfg.grid_size());
  for (Index row = 0; row < M; ++row) {
    const int k = pilot.obs_indices[static_cast<size_t>(row)];
    for (int l = 0; l < cfg.L; ++l)
      for (int q = -cfg.Q; q <= cfg.Q; ++q) A(row, dd_index(cfg, l, q)) = atom_entry(cfg, pilot, k, l, q);
  }
  return SensingMatrix(std::move(A), pilot.obs_indices, cfg.L, cfg.Q);
}

Real noise_variance(Real snr_db, int n_p, int N) {
  return static_cast<Real>(n_p) / static_cast<Real>(N) * std::pow(10.0, -snr_db / 10.0);
}

Observation synthesize_observation(const SensingMatrix& Mp, const VectorXc& alpha, Real snr_db,
                                   const GridConfig& cfg, int n_p, Rng& rng, bool noiseless) {
  if (alpha.size() != Mp.cols()) throw DimensionError("synthesize_observation: alpha length mismatch");
  Observation obs;
  obs.snr_db = snr_db;
  obs.sigma_w_sq = noiseless ? 0.0 : noise_variance(snr_db, n_p, cfg.N);
  obs.y = Mp.entries() * alpha;
  if (noiseless) return obs;
  // Unit draws scaled afterwards: the same stream gives the same noise shape
  // at every SNR.
  std::normal_distribution<Real> normal(0.0, 1.0);
  const Real scale = std::sqrt(obs.sigma_w_sq / 2.0);
  for (Index i = 0; i < obs.y.size(); ++i) {
    const Real re = normal(rng);
    const Real im = normal(rng);
    obs.y(i) += scale * Complex(re, im);
  }
  return obs;
}

}  // namespace ddest
