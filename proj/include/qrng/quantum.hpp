#pragma once

#include <complex>
#include <vector>

#include "qrng/rng.hpp"

namespace qrng {

using cd = std::complex<double>;

/// A single photon delocalised over m >= 2 spatial paths, described by one
/// complex amplitude per path.  The squared magnitudes must sum to 1
/// (within 1e-12).  Global phases are physical here and are never
/// normalised away: interference downstream depends on them.
class PathState {
 public:
  explicit PathState(std::vector<cd> amplitudes);

  /// Photon definitely in path `occupied` of m paths.
  static PathState basis(int m, int occupied);

  int paths() const { return static_cast<int>(amps_.size()); }
  const std::vector<cd>& amplitudes() const { return amps_; }
  cd amplitude(int path) const { return amps_.at(path); }

 private:
  std::vector<cd> amps_;
};

/// Mixed state over the m-path single-photon sector: an m x m density
/// matrix, Hermitian, trace 1, eigenvalues >= -1e-10.
class DensityState {
 public:
  DensityState(int paths, std::vector<cd> row_major);

  static DensityState from_pure(const PathState& state);

  int paths() const { return dim_; }
  cd at(int row, int col) const { return m_[row * dim_ + col]; }
  const std::vector<cd>& row_major() const { return m_; }

 private:
  int dim_;
  std::vector<cd> m_;
};

/// One beam splitter acting on a pair of paths.  theta in [0, pi/2];
/// theta = pi/4 is the balanced 50:50 case.  The convention used
/// throughout is the symmetric one with the i on the cross terms:
///   out_a = cos(theta) in_a + i sin(theta) in_b
///   out_b = i sin(theta) in_a + cos(theta) in_b
struct BeamSplitterSetting {
  double theta;
  int path_a;
  int path_b;
};

/// The four analyser angles of a CHSH measurement.
struct MeasurementSettings {
  double a;
  double a_prime;
  double b;
  double b_prime;
};

struct ChshResult {
  double s_max;
  MeasurementSettings settings;
};

/// Applies one beam splitter to the amplitude vector (identity elsewhere).
PathState apply_beam_splitter(const PathState& state,
                              const BeamSplitterSetting& setting);

/// The state after a balanced splitter with the photon entering its second
/// port: amplitudes (i, 1)/sqrt(2).  This is the canonical certification
/// state; its correlator is E = sin(phi_a - phi_b).
PathState balanced_split_state();

/// Photon split by a balanced splitter and then by one secondary splitter
/// of angle theta on each arm: amplitudes
/// (cos t, i sin t, i sin t, cos t)/sqrt(2) over four paths.  Detecting the
/// photon commits two bits at once.
PathState two_qubit_commitment_state(double theta);

/// |amplitude|^2 per path.
std::vector<double> born_probabilities(const PathState& state);
/// Diagonal of the density matrix.
std::vector<double> born_probabilities(const DensityState& state);

/// Samples a path index by inverse CDF over born_probabilities in
/// ascending path order (smallest index whose cumulative weight exceeds
/// the uniform draw).
int sample_path(const PathState& state, Xoshiro256pp& rng);
int sample_path(const DensityState& state, Xoshiro256pp& rng);

/// rho = p * |state><state| + (1-p) * I/m.  The identity is the one on the
/// m-path single-photon sector, not on a larger Fock space.
DensityState depolarize(const PathState& state, double p);

/// Correlator <M(phi_a) x M(phi_b)> with M(phi) = cos(phi) X + sin(phi) Y
/// acting on the two occupation-mode qubits of a 2-path state.  The
/// single-photon sector is invariant under the product observable, so the
/// correlator depends only on the off-diagonal coherence:
/// E = 2 Re(rho_10 e^{i(phi_a - phi_b)}).
double chsh_correlator(const DensityState& state, double phi_a, double phi_b);
double chsh_correlator(const PathState& state, double phi_a, double phi_b);

/// S = E(a,b) - E(a,b') + E(a',b) + E(a',b').
double chsh_parameter(const DensityState& state, const MeasurementSettings& s);
double chsh_parameter(const PathState& state, const MeasurementSettings& s);

/// Empirical S from `rounds_per_setting` sampled measurement rounds per
/// analyser pair.  Each round draws the +-1 outcome product from the
/// distribution the sector state assigns to it.
double sample_chsh(const DensityState& state, const MeasurementSettings& s,
                   uint64_t rounds_per_setting, Xoshiro256pp& rng);
double sample_chsh(const PathState& state, const MeasurementSettings& s,
                   uint64_t rounds_per_setting, Xoshiro256pp& rng);

/// Maximises S over all four analyser angles: coarse 1-degree grid search
/// followed by local pattern refinement to 1e-4 rad.  S is invariant under
/// a common shift of all four angles, so a = 0 is fixed without loss of
/// generality.
ChshResult max_chsh(const DensityState& state);
ChshResult max_chsh(const PathState& state);

/// Count visibility of a detector pair:
/// ((c1+c2) - |c1-c2|) / ((c1+c2) + |c1-c2|), i.e. min/max.
/// Balanced counts give 1, a dark port gives 0.
double visibility_from_counts(double c1, double c2);

/// Photon with a polarisation qubit attached: per-path amplitudes for the
/// H and V components.  Total norm across both blocks is 1.
class PolarizedPathState {
 public:
  PolarizedPathState(std::vector<cd> amplitudes_h, std::vector<cd> amplitudes_v);

  int paths() const { return static_cast<int>(h_.size()); }
  const std::vector<cd>& amplitudes_h() const { return h_; }
  const std::vector<cd>& amplitudes_v() const { return v_; }

 private:
  std::vector<cd> h_;
  std::vector<cd> v_;
};

/// Tensors a polarisation qubit (h|H> + v|V>, |h|^2+|v|^2 = 1) onto a path
/// state, doubling the outcome space.
PolarizedPathState extend_with_polarization(const PathState& state, cd h, cd v);

/// 2m outcome probabilities, H block first: index p is (path p, H),
/// index m+p is (path p, V).
std::vector<double> born_probabilities(const PolarizedPathState& state);

/// Eigenvalues of a Hermitian matrix (row-major, dim x dim), ascending.
/// Small dense problems only; used for state validation.
std::vector<double> hermitian_eigenvalues(std::vector<cd> matrix, int dim);

}  // namespace qrng
