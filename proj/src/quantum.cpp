#include "qrng/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

constexpr double kNormTolerance = 1e-12;
constexpr double kHermitianTolerance = 1e-9;
constexpr double kEigenvalueFloor = -1e-10;

double norm_sq(const std::vector<cd>& amps) {
  double total = 0.0;
  for (const cd& a : amps) total += std::norm(a);
  return total;
}

void check_pair(int m, int path_a, int path_b, const char* who) {
  if (path_a == path_b)
    throw ValidationError(std::string(who) + ": paths must be distinct");
  if (path_a < 0 || path_b < 0 || path_a >= m || path_b >= m)
    throw ValidationError(std::string(who) + ": path index out of range");
}

void check_theta(double theta, const char* who) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi / 2))
    throw ValidationError(std::string(who) + ": theta must lie in [0, pi/2]");
}

int sample_from_probabilities(const std::vector<double>& prob,
                              Xoshiro256pp& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (size_t i = 0; i < prob.size(); ++i) {
    cum += prob[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(prob.size()) - 1;  // guards rounding at cum ~ 1
}

}  // namespace

PathState::PathState(std::vector<cd> amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.size() < 2)
    throw ValidationError("PathState: need at least two paths");
  if (std::abs(norm_sq(amps_) - 1.0) > kNormTolerance)
    throw ValidationError("PathState: amplitudes are not normalised");
}

PathState PathState::basis(int m, int occupied) {
  if (m < 2) throw ValidationError("PathState::basis: need at least two paths");
  if (occupied < 0 || occupied >= m)
    throw ValidationError("PathState::basis: occupied path out of range");
  std::vector<cd> amps(m, cd(0.0, 0.0));
  amps[occupied] = cd(1.0, 0.0);
  return PathState(std::move(amps));
}

DensityState::DensityState(int paths, std::vector<cd> row_major)
    : dim_(paths), m_(std::move(row_major)) {
  if (dim_ < 2) throw ValidationError("DensityState: need at least two paths");
  if (m_.size() != static_cast<size_t>(dim_) * dim_)
    throw ValidationError("DensityState: matrix size does not match path count");
  double trace = 0.0;
  for (int i = 0; i < dim_; ++i) trace += m_[i * dim_ + i].real();
  if (std::abs(trace - 1.0) > kHermitianTolerance)
    throw ValidationError("DensityState: trace is not 1");
  for (int r = 0; r < dim_; ++r)
    for (int c = 0; c < dim_; ++c)
      if (std::abs(m_[r * dim_ + c] - std::conj(m_[c * dim_ + r])) >
          kHermitianTolerance)
        throw ValidationError("DensityState: matrix is not Hermitian");
  std::vector<double> eig = hermitian_eigenvalues(m_, dim_);
  if (eig.front() < kEigenvalueFloor)
    throw ValidationError("DensityState: matrix has a negative eigenvalue");
}

DensityState DensityState::from_pure(const PathState& state) {
  const int m = state.paths();
  std::vector<cd> rho(static_cast<size_t>(m) * m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      rho[r * m + c] = state.amplitude(r) * std::conj(state.amplitude(c));
  return DensityState(m, std::move(rho));
}

PathState apply_beam_splitter(const PathState& state,
                              const BeamSplitterSetting& s) {
  check_theta(s.theta, "apply_beam_splitter");
  check_pair(state.paths(), s.path_a, s.path_b, "apply_beam_splitter");
  std::vector<cd> amps = state.amplitudes();
  const cd in_a = amps[s.path_a];
  const cd in_b = amps[s.path_b];
  const double c = std::cos(s.theta);
  const cd is = cd(0.0, std::sin(s.theta));
  amps[s.path_a] = c * in_a + is * in_b;
  amps[s.path_b] = is * in_a + c * in_b;
  return PathState(std::move(amps));
}

PathState balanced_split_state() {
  return apply_beam_splitter(PathState::basis(2, 1),
                             {std::numbers::pi / 4, 0, 1});
}

PathState two_qubit_commitment_state(double theta) {
  check_theta(theta, "two_qubit_commitment_state");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double c = std::cos(theta) * inv_sqrt2;
  const double s = std::sin(theta) * inv_sqrt2;
  return PathState({cd(c, 0.0), cd(0.0, s), cd(0.0, s), cd(c, 0.0)});
}

std::vector<double> born_probabilities(const PathState& state) {
  std::vector<double> p(state.paths());
  for (int i = 0; i < state.paths(); ++i) p[i] = std::norm(state.amplitude(i));
  return p;
}

std::vector<double> born_probabilities(const DensityState& state) {
  std::vector<double> p(state.paths());
  for (int i = 0; i < state.paths(); ++i) p[i] = state.at(i, i).real();
  return p;
}

int sample_path(const PathState& state, Xoshiro256pp& rng) {
  return sample_from_probabilities(born_probabilities(state), rng);
}

int sample_path(const DensityState& state, Xoshiro256pp& rng) {
  return sample_from_probabilities(born_probabilities(state), rng);
}

DensityState depolarize(const PathState& state, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("depolarize: p must lie in [0, 1]");
  const int m = state.paths();
  std::vector<cd> rho(static_cast<size_t>(m) * m);
  const double mix = (1.0 - p) / m;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      cd pure = state.amplitude(r) * std::conj(state.amplitude(c));
      rho[r * m + c] = p * pure + (r == c ? cd(mix, 0.0) : cd(0.0, 0.0));
    }
  return DensityState(m, std::move(rho));
}

namespace {

cd sector_coherence(const DensityState& state, const char* who) {
  if (state.paths() != 2)
    throw ValidationError(std::string(who) +
                          ": CHSH analysis needs a two-path state");
  return state.at(1, 0);
}

double correlator_from_coherence(cd rho_10, double phi_a, double phi_b) {
  const cd phase = std::polar(1.0, phi_a - phi_b);
  return 2.0 * (rho_10 * phase).real();
}

}  // namespace

double chsh_correlator(const DensityState& state, double phi_a, double phi_b) {
  return correlator_from_coherence(sector_coherence(state, "chsh_correlator"),
                                   phi_a, phi_b);
}

double chsh_correlator(const PathState& state, double phi_a, double phi_b) {
  return chsh_correlator(DensityState::from_pure(state), phi_a, phi_b);
}

double chsh_parameter(const DensityState& state, const MeasurementSettings& s) {
  const cd z = sector_coherence(state, "chsh_parameter");
  return correlator_from_coherence(z, s.a, s.b) -
         correlator_from_coherence(z, s.a, s.b_prime) +
         correlator_from_coherence(z, s.a_prime, s.b) +
         correlator_from_coherence(z, s.a_prime, s.b_prime);
}

double chsh_parameter(const PathState& state, const MeasurementSettings& s) {
  return chsh_parameter(DensityState::from_pure(state), s);
}

double sample_chsh(const DensityState& state, const MeasurementSettings& s,
                   uint64_t rounds_per_setting, Xoshiro256pp& rng) {
  if (rounds_per_setting == 0)
    throw ValidationError("sample_chsh: need at least one round per setting");
  const cd z = sector_coherence(state, "sample_chsh");
  const double pairs[4][2] = {{s.a, s.b},
                              {s.a, s.b_prime},
                              {s.a_prime, s.b},
                              {s.a_prime, s.b_prime}};
  const double sign[4] = {1.0, -1.0, 1.0, 1.0};
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double e = correlator_from_coherence(z, pairs[k][0], pairs[k][1]);
    const double p_plus = 0.5 * (1.0 + e);
    int64_t sum = 0;
    for (uint64_t r = 0; r < rounds_per_setting; ++r)
      sum += rng.bernoulli(p_plus) ? 1 : -1;
    total += sign[k] * static_cast<double>(sum) /
             static_cast<double>(rounds_per_setting);
  }
  return total;
}

double sample_chsh(const PathState& state, const MeasurementSettings& s,
                   uint64_t rounds_per_setting, Xoshiro256pp& rng) {
  return sample_chsh(DensityState::from_pure(state), s, rounds_per_setting, rng);
}

namespace {

double chsh_of(cd z, double a, double ap, double b, double bp) {
  return correlator_from_coherence(z, a, b) -
         correlator_from_coherence(z, a, bp) +
         correlator_from_coherence(z, ap, b) +
         correlator_from_coherence(z, ap, bp);
}

}  // namespace

ChshResult max_chsh(const DensityState& state) {
  const cd z = sector_coherence(state, "max_chsh");
  constexpr int kSteps = 360;
  constexpr double kStep = 2.0 * std::numbers::pi / kSteps;

  // E depends on the analyser angles only through their difference, so
  // tabulate f(d) = E(d, 0) on the grid once.
  double f[kSteps];
  for (int d = 0; d < kSteps; ++d)
    f[d] = correlator_from_coherence(z, d * kStep, 0.0);

  // With a = 0 fixed, S(a', b, b') = [f(-b) + f(a'-b)] + [f(a'-b') - f(-b')]
  // and the two brackets can be maximised independently for each a'.
  auto wrap = [](int d) { return ((d % kSteps) + kSteps) % kSteps; };
  double best_s = -1e300;
  int best_ap = 0, best_b = 0, best_bp = 0;
  for (int ap = 0; ap < kSteps; ++ap) {
    double h1 = -1e300, h2 = -1e300;
    int arg1 = 0, arg2 = 0;
    for (int b = 0; b < kSteps; ++b) {
      const double v1 = f[wrap(-b)] + f[wrap(ap - b)];
      if (v1 > h1) { h1 = v1; arg1 = b; }
      const double v2 = f[wrap(ap - b)] - f[wrap(-b)];
      if (v2 > h2) { h2 = v2; arg2 = b; }
    }
    if (h1 + h2 > best_s) {
      best_s = h1 + h2;
      best_ap = ap;
      best_b = arg1;
      best_bp = arg2;
    }
  }

  // Local pattern refinement around the best grid point.
  double ap = best_ap * kStep, b = best_b * kStep, bp = best_bp * kStep;
  double s_now = chsh_of(z, 0.0, ap, b, bp);
  for (double step = kStep; step > 1e-4 / 2; ) {
    bool improved = false;
    double* coords[3] = {&ap, &b, &bp};
    for (double* c : coords) {
      for (double delta : {step, -step}) {
        *c += delta;
        const double s_try = chsh_of(z, 0.0, ap, b, bp);
        if (s_try > s_now) {
          s_now = s_try;
          improved = true;
        } else {
          *c -= delta;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {s_now, MeasurementSettings{0.0, ap, b, bp}};
}

ChshResult max_chsh(const PathState& state) {
  return max_chsh(DensityState::from_pure(state));
}

double visibility_from_counts(double c1, double c2) {
  if (c1 < 0.0 || c2 < 0.0)
    throw ValidationError("visibility_from_counts: counts must be non-negative");
  const double sum = c1 + c2;
  if (sum <= 0.0)
    throw ValidationError("visibility_from_counts: counts are both zero");
  const double diff = std::abs(c1 - c2);
  return (sum - diff) / (sum + diff);
}

PolarizedPathState::PolarizedPathState(std::vector<cd> amplitudes_h,
                                       std::vector<cd> amplitudes_v)
    : h_(std::move(amplitudes_h)), v_(std::move(amplitudes_v)) {
  if (h_.size() != v_.size())
    throw ValidationError("PolarizedPathState: H and V blocks differ in size");
  if (h_.size() < 2)
    throw ValidationError("PolarizedPathState: need at least two paths");
  if (std::abs(norm_sq(h_) + norm_sq(v_) - 1.0) > kNormTolerance)
    throw ValidationError("PolarizedPathState: amplitudes are not normalised");
}

PolarizedPathState extend_with_polarization(const PathState& state, cd h, cd v) {
  if (std::abs(std::norm(h) + std::norm(v) - 1.0) > kNormTolerance)
    throw ValidationError(
        "extend_with_polarization: polarisation qubit is not normalised");
  std::vector<cd> hb(state.paths()), vb(state.paths());
  for (int i = 0; i < state.paths(); ++i) {
    hb[i] = h * state.amplitude(i);
    vb[i] = v * state.amplitude(i);
  }
  return PolarizedPathState(std::move(hb), std::move(vb));
}

std::vector<double> born_probabilities(const PolarizedPathState& state) {
  const int m = state.paths();
  std::vector<double> p(2 * m);
  for (int i = 0; i < m; ++i) {
    p[i] = std::norm(state.amplitudes_h()[i]);
    p[m + i] = std::norm(state.amplitudes_v()[i]);
  }
  return p;
}

std::vector<double> hermitian_eigenvalues(std::vector<cd> a, int dim) {
  if (dim <= 0 || a.size() != static_cast<size_t>(dim) * dim)
    throw ValidationError("hermitian_eigenvalues: bad dimensions");
  auto at = [&](int r, int c) -> cd& { return a[r * dim + c]; };

  // Cyclic Jacobi: repeatedly zero the largest-magnitude off-diagonal
  // element with the exact 2x2 eigenbasis of its Hermitian block.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int r = 0; r < dim; ++r)
      for (int c = r + 1; c < dim; ++c) off += std::norm(at(r, c));
    if (off < 1e-26) break;
    for (int p = 0; p < dim; ++p) {
      for (int q = p + 1; q < dim; ++q) {
        const cd beta = at(p, q);
        if (std::abs(beta) < 1e-15) continue;
        const double alpha = at(p, p).real();
        const double gamma = at(q, q).real();
        const double half_gap = 0.5 * (alpha - gamma);
        const double radius = std::hypot(half_gap, std::abs(beta));
        const double lambda_hi = 0.5 * (alpha + gamma) + radius;
        // Eigenvector of [[alpha, beta], [conj(beta), gamma]] for lambda_hi.
        cd u0 = beta;
        cd u1 = cd(lambda_hi - alpha, 0.0);
        const double un = std::sqrt(std::norm(u0) + std::norm(u1));
        u0 /= un;
        u1 /= un;
        // Second column: orthogonal complement.
        const cd w0 = -std::conj(u1);
        const cd w1 = std::conj(u0);
        // A <- U^H A U applied to rows/columns p and q.
        for (int k = 0; k < dim; ++k) {
          const cd akp = at(k, p), akq = at(k, q);
          at(k, p) = akp * u0 + akq * u1;
          at(k, q) = akp * w0 + akq * w1;
        }
        for (int k = 0; k < dim; ++k) {
          const cd apk = at(p, k), aqk = at(q, k);
          at(p, k) = std::conj(u0) * apk + std::conj(u1) * aqk;
          at(q, k) = std::conj(w0) * apk + std::conj(w1) * aqk;
        }
        at(p, q) = at(q, p) = cd(0.0, 0.0);
      }
    }
  }
  std::vector<double> eig(dim);
  for (int i = 0; i < dim; ++i) eig[i] = at(i, i).real();
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace qrng
