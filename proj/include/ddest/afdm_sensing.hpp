// afdm_sensing.hpp - AFDM pilot layout, sensing matrix and observations
//
// A DD coefficient at (l, q) maps a pilot at DAFT index m onto receive index
// k = (m + q - 2 N c1 l) mod N with the chirp phase
//   exp(j 2 pi (c1 l^2 - m l / N + c2 (m^2 - k^2))).
// Each pilot therefore spreads over a window of W = B + P_afdm (L-1)
// consecutive receive indices; the observation set is the union of the
// pilot windows.
//
// Column convention: column iota(l, q) = l*B + (q + Q), i.e. 0-based.

#pragma once

#include <string>

#include "ddest/dd_channel.hpp"
#include "ddest/numerics.hpp"

namespace ddest {

/// 0-based column of DD point (l, q). Throws RangeError outside the grid.
Index dd_index(int l, int q, int Q, int B);
Index dd_index(const GridConfig& cfg, int l, int q);

/// Inverse of dd_index: (delay, doppler).
std::pair<int, int> dd_coords(const GridConfig& cfg, Index column);

enum class PilotLayout {
  spread,      ///< pilot i at Q + i*floor(N/N_p): windows spaced evenly over the frame
  contiguous,  ///< pilot i at Q + i*W: windows packed back to back from k = 0
};

std::string to_string(PilotLayout layout);
PilotLayout pilot_layout_from_string(const std::string& name);

struct PilotConfig {
  int n_p = 0;
  PilotLayout layout = PilotLayout::spread;
  int window_size = 0;   ///< W = B + P_afdm (L-1)
  int spacing = 0;       ///< distance between consecutive pilots
  std::vector<int> pilot_positions;
  std::vector<Complex> pilot_values;
  std::vector<int> obs_indices;  ///< receive indices P, ascending
  int guard_overhead = 0;        ///< transmit indices that must hold pilots or zeros

  Index num_observations() const { return static_cast<Index>(obs_indices.size()); }

  /// Pilot value at DAFT index m, zero if m is not a pilot position.
  Complex pilot_at(int m) const;
};

/// Throws ConfigError if N_p < 1 or the windows do not fit in the frame.
PilotConfig build_pilot_config(const GridConfig& cfg, int n_p,
                               PilotLayout layout = PilotLayout::spread);

/// Entry of atom a_{l,q} at receive index k.
Complex atom_entry(const GridConfig& cfg, const PilotConfig& pilot, int k, int l, int q);

/// Dense M x LB sensing matrix with row/column maps and the nonzero structure.
class SensingMatrix {
 public:
  SensingMatrix() = default;
  SensingMatrix(MatrixXc entries, std::vector<int> obs_indices, int L, int Q);

  const MatrixXc& entries() const { return entries_; }
  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }

  int L() const { return L_; }
  int Q() const { return Q_; }
  int B() const { return 2 * Q_ + 1; }

  /// Receive index k of row i.
  int obs_index(Index row) const { return obs_indices_[static_cast<size_t>(row)]; }
  const std::vector<int>& obs_indices() const { return obs_indices_; }
  /// Row holding receive index k, or -1.
  Index row_of(int k) const;

  /// Rows where column j is nonzero, ascending.
  const IndexSet& column_support(Index col) const { return column_rows_[static_cast<size_t>(col)]; }
  const ColumnPartition& partition() const { return partition_; }

 private:
  MatrixXc entries_;
  std::vector<int> obs_indices_;
  int L_ = 0;
  int Q_ = 0;
  std::vector<IndexSet> column_rows_;
  ColumnPartition partition_;
};

SensingMatrix build_sensing_matrix(const GridConfig& cfg, const PilotConfig& pilot);

struct Observation {
  VectorXc y;
  Real sigma_w_sq = 0;
  Real snr_db = 0;
};

/// Full-frame SNR convention: sigma_w^2 = (N_p / N) 10^(-snr_db/10).
Real noise_variance(Real snr_db, int n_p, int N);

/// y = M_p alpha + w, w ~ CN(0, sigma_w^2 I). With noiseless set, w = 0 and
/// sigma_w_sq = 0.
Observation synthesize_observation(const SensingMatrix& Mp, const VectorXc& alpha, Real snr_db,
                                   const GridConfig& cfg, int n_p, Rng& rng,
                                   bool noiseless = false);

}  // namespace ddest
