#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qrng/errors.hpp"
#include "qrng/quantum.hpp"
#include "qrng/rng.hpp"

using namespace qrng;

namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kTsirelson = 2.8284271247461903;  // 2*sqrt(2)
const double kPi = std::numbers::pi;

bool close(cd a, cd b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("basis states put the photon in exactly one path") {
  const PathState s = PathState::basis(4, 2);
  CHECK(s.paths() == 4);
  CHECK(close(s.amplitude(2), cd(1.0, 0.0)));
  CHECK(close(s.amplitude(0), cd(0.0, 0.0)));
  CHECK(close(s.amplitude(1), cd(0.0, 0.0)));
  CHECK(close(s.amplitude(3), cd(0.0, 0.0)));
}

TEST_CASE("path states must be normalised and have at least two paths") {
  CHECK_THROWS_AS(PathState({cd(1.0, 0.0), cd(1.0, 0.0)}), ValidationError);
  CHECK_THROWS_AS(PathState({cd(0.5, 0.0), cd(0.5, 0.0)}), ValidationError);
  CHECK_THROWS_AS(PathState({cd(1.0, 0.0)}), ValidationError);
  CHECK_NOTHROW(PathState({cd(kInvSqrt2, 0.0), cd(0.0, kInvSqrt2)}));
}

TEST_CASE("a balanced splitter turns |0> into (1, i)/sqrt(2)") {
  const PathState in = PathState::basis(2, 0);
  const PathState out = apply_beam_splitter(in, {kPi / 4, 0, 1});
  CHECK(close(out.amplitude(0), cd(kInvSqrt2, 0.0)));
  CHECK(close(out.amplitude(1), cd(0.0, kInvSqrt2)));
}

TEST_CASE("balanced_split_state is (i, 1)/sqrt(2)") {
  const PathState s = balanced_split_state();
  CHECK(s.paths() == 2);
  CHECK(close(s.amplitude(0), cd(0.0, kInvSqrt2)));
  CHECK(close(s.amplitude(1), cd(kInvSqrt2, 0.0)));
}

TEST_CASE("beam splitters are unitary") {
  Xoshiro256pp rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = rng.uniform() * kPi / 2;
    const double beta = rng.uniform() * 2 * kPi;
    const PathState in({cd(std::cos(alpha), 0.0),
                        cd(std::sin(alpha) * std::cos(beta),
                           std::sin(alpha) * std::sin(beta))});
    const double theta = rng.uniform() * kPi / 2;
    const PathState out = apply_beam_splitter(in, {theta, 0, 1});
    double norm = 0.0;
    for (cd a : out.amplitudes()) norm += std::norm(a);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("splitters on the same pair compose additively") {
  Xoshiro256pp rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = rng.uniform() * kPi / 2;
    const PathState in({cd(std::cos(alpha), 0.0), cd(0.0, std::sin(alpha))});
    const double theta1 = rng.uniform() * kPi / 4;
    const double theta2 = rng.uniform() * kPi / 4;
    const PathState two_steps = apply_beam_splitter(
        apply_beam_splitter(in, {theta1, 0, 1}), {theta2, 0, 1});
    const PathState one_step = apply_beam_splitter(in, {theta1 + theta2, 0, 1});
    CHECK(close(two_steps.amplitude(0), one_step.amplitude(0), 1e-12));
    CHECK(close(two_steps.amplitude(1), one_step.amplitude(1), 1e-12));
  }
  CHECK_THROWS_AS(
      apply_beam_splitter(PathState::basis(2, 0), {-0.1, 0, 1}),
      ValidationError);
}

TEST_CASE("splitters touch only their own pair of paths") {
  const PathState in({cd(0.5, 0.0), cd(0.5, 0.0), cd(0.5, 0.0), cd(0.5, 0.0)});
  const PathState out = apply_beam_splitter(in, {kPi / 3, 1, 3});
  CHECK(close(out.amplitude(0), cd(0.5, 0.0)));
  CHECK(close(out.amplitude(2), cd(0.5, 0.0)));
  CHECK_THROWS_AS(apply_beam_splitter(in, {kPi / 4, 1, 4}), ValidationError);
  CHECK_THROWS_AS(apply_beam_splitter(in, {kPi / 4, 2, 2}), ValidationError);
}

TEST_CASE("two-bit commitment state probabilities follow the secondary angle") {
  SUBCASE("theta = 0 keeps everything on the outer detectors") {
    const auto p = born_probabilities(two_qubit_commitment_state(0.0));
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("theta = pi/6 gives the 3:1 split") {
    const auto p = born_probabilities(two_qubit_commitment_state(kPi / 6));
    CHECK(p[0] == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(0.375).epsilon(1e-12));
  }
  SUBCASE("theta = pi/4 is uniform over the four detectors") {
    const auto p = born_probabilities(two_qubit_commitment_state(kPi / 4));
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("born probabilities sum to one") {
  Xoshiro256pp rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double theta = rng.uniform() * kPi / 2;
    const auto p = born_probabilities(two_qubit_commitment_state(theta));
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sample_path never lands on a zero-probability path") {
  const PathState s = two_qubit_commitment_state(0.0);  // paths 1, 2 are dark
  Xoshiro256pp rng(5);
  for (int i = 0; i < 10000; ++i) {
    const int path = sample_path(s, rng);
    CHECK((path == 0 || path == 3));
  }
}

TEST_CASE("sample_path frequencies match the Born rule") {
  const PathState s = two_qubit_commitment_state(kPi / 4);
  Xoshiro256pp rng(6);
  const int n = 40000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[sample_path(s, rng)];
  // 4 sigma of a p = 0.25 count at n = 40000 is about 0.0087.
  for (int path = 0; path < 4; ++path)
    CHECK(static_cast<double>(counts[path]) / n ==
          doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("density state from a pure state has the Born diagonal") {
  const DensityState rho = DensityState::from_pure(balanced_split_state());
  CHECK(rho.at(0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rho.at(1, 1).real() == doctest::Approx(0.5).epsilon(1e-12));
  // rho_01 = psi_0 conj(psi_1) = i/2.
  CHECK(close(rho.at(0, 1), cd(0.0, 0.5)));
  CHECK(close(rho.at(1, 0), cd(0.0, -0.5)));
  const auto eig = hermitian_eigenvalues(rho.row_major(), 2);
  CHECK(eig[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(eig[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("depolarizing at p = 0.5 halves the coherence") {
  const DensityState rho = depolarize(balanced_split_state(), 0.5);
  CHECK(rho.at(0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rho.at(1, 1).real() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(rho.at(1, 0)) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(depolarize(balanced_split_state(), 1.5), ValidationError);
  CHECK_THROWS_AS(depolarize(balanced_split_state(), -0.1), ValidationError);
}

TEST_CASE("the balanced state's correlator is sin of the angle difference") {
  const PathState s = balanced_split_state();
  Xoshiro256pp rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const double a = rng.uniform() * 2 * kPi;
    const double b = rng.uniform() * 2 * kPi;
    CHECK(chsh_correlator(s, a, b) ==
          doctest::Approx(std::sin(a - b)).epsilon(1e-12));
  }
}

TEST_CASE("the textbook settings reach S = 2*sqrt(2) on the balanced state") {
  const MeasurementSettings settings{0.0, kPi / 2, -kPi / 4, kPi / 4};
  CHECK(chsh_parameter(balanced_split_state(), settings) ==
        doctest::Approx(kTsirelson).epsilon(1e-12));
}

TEST_CASE("a fully mixed state has no CHSH violation at all") {
  const DensityState mixed = depolarize(balanced_split_state(), 0.0);
  const MeasurementSettings settings{0.0, kPi / 2, -kPi / 4, kPi / 4};
  CHECK(chsh_parameter(mixed, settings) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(max_chsh(mixed).s_max == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("chsh_parameter is linear in the depolarization survival") {
  const PathState s = balanced_split_state();
  const MeasurementSettings settings{0.3, 1.7, -0.6, 0.9};
  const double pure = chsh_parameter(s, settings);
  for (double p : {0.2, 0.5, 0.8}) {
    CHECK(chsh_parameter(depolarize(s, p), settings) ==
          doctest::Approx(p * pure).epsilon(1e-12));
  }
}

TEST_CASE("the optimiser finds the Tsirelson value on the balanced state") {
  const ChshResult best = max_chsh(balanced_split_state());
  CHECK(best.s_max == doctest::Approx(kTsirelson).epsilon(1e-3 / kTsirelson));
  // The reported settings must reproduce the reported optimum.
  CHECK(chsh_parameter(balanced_split_state(), best.settings) ==
        doctest::Approx(best.s_max).epsilon(1e-9));
}

TEST_CASE("depolarization scales the optimum: 0.9 -> 2.546, 1/sqrt(2) -> 2") {
  const PathState s = balanced_split_state();
  CHECK(max_chsh(depolarize(s, 0.9)).s_max ==
        doctest::Approx(0.9 * kTsirelson).epsilon(1e-3));
  CHECK(max_chsh(depolarize(s, kInvSqrt2)).s_max ==
        doctest::Approx(2.0).epsilon(0.001));
}

TEST_CASE("no sector state beats the Tsirelson bound") {
  Xoshiro256pp rng(13);
  for (int trial = 0; trial < 12; ++trial) {
    const double alpha = rng.uniform() * kPi / 2;
    const double beta = rng.uniform() * 2 * kPi;
    const PathState s({cd(std::cos(alpha), 0.0),
                       cd(std::sin(alpha) * std::cos(beta),
                          std::sin(alpha) * std::sin(beta))});
    const double s_max = max_chsh(s).s_max;
    CHECK(s_max <= kTsirelson + 1e-6);
    // The sector optimum is 4*sqrt(2)*|rho_10| exactly.
    const double coherence = std::abs(std::cos(alpha) * std::sin(alpha));
    CHECK(s_max == doctest::Approx(2 * kTsirelson * coherence)
                       .epsilon(1e-3)
                       .scale(1.0));
  }
}

TEST_CASE("states without coherence never violate the classical bound") {
  for (double w : {0.0, 0.3, 0.5, 0.9, 1.0}) {
    const DensityState diag(
        2, {cd(w, 0.0), cd(0.0, 0.0), cd(0.0, 0.0), cd(1.0 - w, 0.0)});
    CHECK(max_chsh(diag).s_max <= 2.0);
  }
}

TEST_CASE("sampled CHSH converges to the exact value") {
  const PathState s = balanced_split_state();
  const MeasurementSettings settings{0.0, kPi / 2, -kPi / 4, kPi / 4};
  Xoshiro256pp rng(17);
  const double sampled = sample_chsh(s, settings, 1000000, rng);
  // Four correlators of a million rounds each: sigma(S) ~ 1.4e-3.
  CHECK(sampled == doctest::Approx(kTsirelson).epsilon(4e-3 / kTsirelson));
}

TEST_CASE("polarisation extension keeps the outcome distribution consistent") {
  const PathState base = balanced_split_state();
  SUBCASE("diagonal polarisation splits every path in half") {
    const PolarizedPathState ext =
        extend_with_polarization(base, cd(kInvSqrt2, 0.0), cd(kInvSqrt2, 0.0));
    const auto p = born_probabilities(ext);
    REQUIRE(p.size() == 4);
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("H block comes first in the outcome indexing") {
    const PolarizedPathState ext = extend_with_polarization(
        PathState::basis(2, 0), cd(0.6, 0.0), cd(0.8, 0.0));
    const auto p = born_probabilities(ext);
    CHECK(p[0] == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.64).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("unnormalised polarisation qubits are rejected") {
    CHECK_THROWS_AS(extend_with_polarization(base, cd(1.0, 0.0), cd(1.0, 0.0)),
                    ValidationError);
  }
}

TEST_CASE("count visibility is min over max") {
  CHECK(visibility_from_counts(1000, 1000) == doctest::Approx(1.0));
  CHECK(visibility_from_counts(300, 100) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(visibility_from_counts(100, 0) == doctest::Approx(0.0));
  CHECK(visibility_from_counts(100, 300) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(visibility_from_counts(-1, 10), ValidationError);
  CHECK_THROWS_AS(visibility_from_counts(0, 0), ValidationError);
}

TEST_CASE("hermitian_eigenvalues solves small known problems") {
  // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
  const auto eig = hermitian_eigenvalues(
      {cd(1.0, 0.0), cd(0.0, 1.0), cd(0.0, -1.0), cd(1.0, 0.0)}, 2);
  REQUIRE(eig.size() == 2);
  CHECK(eig[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(eig[1] == doctest::Approx(2.0).epsilon(1e-10));
}
