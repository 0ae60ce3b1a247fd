#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "qrng/quantum.hpp"
#include "qrng/rng.hpp"

namespace qrng {

/// Fibre type feeding the detection stage; fixes the default coupling
/// efficiency (single-mode 0.25, multi-mode 0.8) unless overridden.
enum class Coupling { SMF, MMF };

struct SourceConfig {
  double pump_power_mw = 1.0;
  /// Photon rate per mW of pump power before fibre coupling; the default
  /// puts the multi-mode single-detector curve into saturation near
  /// 28 Mcounts/s at 30 mW.
  double rate_coefficient_per_mw = 4.7e6;
  Coupling coupling = Coupling::SMF;
  std::optional<double> coupling_efficiency;  // override; otherwise by fibre

  double effective_coupling() const;
  /// Photon rate reaching the splitter network, linear in pump power.
  double incident_rate_hz() const;
};

struct DetectorConfig {
  double efficiency = 0.65;
  double dead_time_ns = 22.0;
  double dark_rate_hz = 100.0;
  double timestamp_resolution_ps = 4.0;
  /// Optical transmission of the arm feeding this detector (losses of the
  /// splitter network output coupling).  1.0 = lossless.
  double arm_transmission = 1.0;
};

/// One detection event.  `timestamp` counts in units of the detector's
/// timestamp resolution (4 ps by default and in all files).
struct TimeTag {
  uint8_t channel;
  uint64_t timestamp;
};

struct TimeTagStream {
  uint8_t channel_count = 0;
  double resolution_ps = 4.0;
  std::vector<TimeTag> tags;
};

/// Splitter network between source and detectors: an amplitude vector over
/// `path_count` final paths, built by applying `splitters` in order to a
/// photon entering at `input_path`.  `detector_map[leaf]` is the detector
/// channel watching that leaf (a permutation of 0..path_count-1).
struct NetworkTopology {
  int path_count = 1;
  int input_path = 0;
  std::vector<BeamSplitterSetting> splitters;
  std::vector<int> detector_map;

  /// No optics: source straight into one detector.
  static NetworkTopology single_detector();
  /// One splitter, two detectors (one random bit per photon).
  static NetworkTopology splitter_pair(double theta);
  /// Primary splitter followed by one splitter per arm, four detectors
  /// (two random bits per photon).  Channel order: primary reflected arm
  /// feeds channels 0,1; transmitted arm feeds channels 2,3.
  static NetworkTopology splitting_tree(double theta1, double theta2,
                                        double theta3);

  void validate() const;
  /// Composed pure state over the final paths (path_count >= 2).
  PathState network_state() const;
  /// Leaf detection probabilities with optional sector depolarization
  /// applied to the composed state.
  std::vector<double> leaf_probabilities(double depolarization_p) const;
};

/// Splitter angle that makes the two output-arm count rates show the given
/// min/max count visibility: probabilities v/(1+v) and 1/(1+v).
double splitting_theta_for_visibility(double visibility);

struct RunConfig {
  SourceConfig source;
  std::vector<DetectorConfig> detectors;  // one per channel
  NetworkTopology topology = NetworkTopology::splitting_tree(
      std::numbers::pi / 4, std::numbers::pi / 4, std::numbers::pi / 4);
  double duration_s = 1.0;
  /// Sector depolarization applied to the composed network state before
  /// routing (state-quality knob; does not change balanced-tree rates).
  double visibility_p = 1.0;
  uint64_t seed = 0;

  void validate() const;
};

/// Poisson arrival times on [0, duration): i.i.d. exponential gaps.
std::vector<double> generate_arrivals(double rate_hz, double duration_s,
                                      Xoshiro256pp& rng);

/// Samples the leaf a single photon exits from, via the Born probabilities
/// of the composed network state (depolarized when visibility_p < 1).
int route_photon(const NetworkTopology& topology, double visibility_p,
                 Xoshiro256pp& rng);

/// Applies the detector model to sorted photon arrival times (seconds):
///   1. each photon survives with probability arm_transmission*efficiency;
///   2. dark counts (Poisson at dark_rate_hz over [0, last arrival]) are
///      merged into the surviving stream in time order;
///   3. non-paralyzable dead time: an event earlier than dead_time after
///      the last *accepted* event is discarded;
///   4. accepted times are quantized to the timestamp resolution.
/// One thinning draw is consumed per photon regardless of dead-time state,
/// so runs with different dead times see identical thinning decisions.
/// Draw order: dark arrival times first, then per-photon thinning.
std::vector<TimeTag> detect(const std::vector<double>& arrivals_s,
                            const DetectorConfig& config, uint8_t channel,
                            Xoshiro256pp& rng);

/// Full run: Poisson source -> splitter network -> per-channel detector
/// models -> merged, time-sorted stream (ties broken by ascending
/// channel).  Deterministic in config.seed: every stage draws from its own
/// sub-seeded generator.  Memory stays bounded for long runs (processing
/// is chunked internally).
TimeTagStream simulate_experiment(const RunConfig& config);

/// Same simulation, but only counts detections per channel.
std::vector<uint64_t> simulate_counts(const RunConfig& config);

struct SaturationPoint {
  double power_mw;
  double incident_rate_hz;
  double single_counts_per_s;  // one detector, no splitters
  double pair_counts_per_s;    // two detectors after one splitter
  double pair_bits_per_s;      // one bit per detection
  double tree_counts_per_s;    // four detectors after the splitting tree
  double tree_bits_per_s;      // two bits per detection
};

/// Detected rates versus pump power for the three detector aggregations.
/// Simulation length per point is adapted so each cell sees enough events
/// for sub-percent statistics without unbounded memory.
std::vector<SaturationPoint> saturation_curve(
    const SourceConfig& base_source, const DetectorConfig& detector,
    const std::vector<double>& powers_mw, uint64_t seed);

}  // namespace qrng
