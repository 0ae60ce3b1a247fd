#include "qrng/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

// Sub-stream ids for derive_subseed: each stochastic stage owns one.
constexpr uint64_t kStreamArrivals = 0;
constexpr uint64_t kStreamRouting = 1;
constexpr uint64_t kStreamThinningBase = 0x100;  // + channel
constexpr uint64_t kStreamDarkBase = 0x200;      // + channel

constexpr double kNeverDead = -std::numeric_limits<double>::infinity();
constexpr double kNoDark = std::numeric_limits<double>::infinity();

/// Femtosecond slack on analog-time comparisons and binning.  Decimal
/// inputs (an arrival at 30 ns, a gap of exactly one dead time) are not
/// exactly representable, and without slack they can land one ulp on the
/// wrong side of a bin edge or a dead-time boundary.  A femtosecond is
/// three orders below the timestamp resolution, so real arrivals are
/// unaffected.
constexpr double kEdgeSlackS = 1e-15;

void validate_detector(const DetectorConfig& d) {
  if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0))
    throw ValidationError("detector: efficiency must lie in [0, 1]");
  if (!(d.dead_time_ns >= 0.0))
    throw ValidationError("detector: dead time must be non-negative");
  if (!(d.dark_rate_hz >= 0.0))
    throw ValidationError("detector: dark rate must be non-negative");
  if (!(d.timestamp_resolution_ps > 0.0))
    throw ValidationError("detector: timestamp resolution must be positive");
  if (!(d.arm_transmission >= 0.0 && d.arm_transmission <= 1.0))
    throw ValidationError("detector: arm transmission must lie in [0, 1]");
}

int sample_index(const std::vector<double>& prob, double u) {
  double cum = 0.0;
  for (size_t i = 0; i < prob.size(); ++i) {
    cum += prob[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(prob.size()) - 1;
}

/// Detector model with persistent state, so long runs can be processed in
/// time chunks.  Events are fed in ascending time order per channel.
class ChannelProcessor {
 public:
  ChannelProcessor(const DetectorConfig& cfg, uint8_t channel,
                   uint64_t thin_seed, uint64_t dark_seed)
      : channel_(channel),
        keep_p_(cfg.arm_transmission * cfg.efficiency),
        dead_s_(cfg.dead_time_ns * 1e-9),
        res_s_(cfg.timestamp_resolution_ps * 1e-12),
        dark_rate_(cfg.dark_rate_hz),
        thin_rng_(thin_seed),
        dark_rng_(dark_seed) {
    next_dark_ = dark_rate_ > 0.0 ? dark_rng_.exponential(dark_rate_) : kNoDark;
  }

  /// A photon reaching this detector at time t (seconds).
  void photon(double t, std::vector<TimeTag>& out) {
    emit_darks_before(t, out);
    const bool kept = thin_rng_.bernoulli(keep_p_);
    if (kept) candidate(t, out);
  }

  /// Flushes dark counts up to the given time (end of chunk or run).
  void advance_to(double t, std::vector<TimeTag>& out) {
    emit_darks_before(t, out);
  }

 private:
  void emit_darks_before(double t, std::vector<TimeTag>& out) {
    while (next_dark_ < t) {
      candidate(next_dark_, out);
      next_dark_ += dark_rng_.exponential(dark_rate_);
    }
  }

  void candidate(double t, std::vector<TimeTag>& out) {
    if (t >= dead_until_) {
      dead_until_ = t + dead_s_ - kEdgeSlackS;
      out.push_back(
          TimeTag{channel_, static_cast<uint64_t>((t + kEdgeSlackS) / res_s_)});
    }
  }

  uint8_t channel_;
  double keep_p_;
  double dead_s_;
  double res_s_;
  double dark_rate_;
  double dead_until_ = kNeverDead;
  double next_dark_ = kNoDark;
  Xoshiro256pp thin_rng_;
  Xoshiro256pp dark_rng_;
};

void merge_sorted_channels(std::vector<std::vector<TimeTag>>& per_channel,
                           std::vector<TimeTag>& out) {
  size_t total = 0;
  for (const auto& v : per_channel) total += v.size();
  out.reserve(out.size() + total);
  std::vector<size_t> pos(per_channel.size(), 0);
  for (size_t done = 0; done < total; ++done) {
    int best = -1;
    uint64_t best_ts = ~0ULL;
    // Ascending channel scan makes the tie-break stable by construction.
    for (size_t c = 0; c < per_channel.size(); ++c) {
      if (pos[c] >= per_channel[c].size()) continue;
      const uint64_t ts = per_channel[c][pos[c]].timestamp;
      if (best < 0 || ts < best_ts) {
        best = static_cast<int>(c);
        best_ts = ts;
      }
    }
    out.push_back(per_channel[best][pos[best]++]);
  }
  for (auto& v : per_channel) v.clear();
}

template <typename TagConsumer>
void run_pipeline(const RunConfig& config, TagConsumer&& consume) {
  config.validate();
  const int channels = static_cast<int>(config.detectors.size());
  const double incident = config.source.incident_rate_hz();
  const std::vector<double> leaf_prob =
      config.topology.leaf_probabilities(config.visibility_p);
  const bool routed = config.topology.path_count > 1;

  Xoshiro256pp arrival_rng(derive_subseed(config.seed, kStreamArrivals));
  Xoshiro256pp routing_rng(derive_subseed(config.seed, kStreamRouting));
  std::vector<ChannelProcessor> procs;
  procs.reserve(channels);
  for (int c = 0; c < channels; ++c)
    procs.emplace_back(config.detectors[c], static_cast<uint8_t>(c),
                       derive_subseed(config.seed, kStreamThinningBase + c),
                       derive_subseed(config.seed, kStreamDarkBase + c));

  std::vector<std::vector<TimeTag>> chunk_tags(channels);
  constexpr size_t kChunkEvents = 1u << 20;
  double t = arrival_rng.exponential(incident);
  bool more = t < config.duration_s;
  while (more) {
    size_t produced = 0;
    double chunk_end = config.duration_s;
    while (more && produced < kChunkEvents) {
      int leaf = routed ? sample_index(leaf_prob, routing_rng.uniform()) : 0;
      const int channel = config.topology.detector_map[leaf];
      procs[channel].photon(t, chunk_tags[channel]);
      ++produced;
      t += arrival_rng.exponential(incident);
      if (t >= config.duration_s) more = false;
    }
    if (more) chunk_end = t;  // all chunk events precede the next arrival
    for (int c = 0; c < channels; ++c)
      procs[c].advance_to(chunk_end, chunk_tags[c]);
    consume(chunk_tags);
  }
  // Runs with no arrivals still see their dark counts.
  for (int c = 0; c < channels; ++c)
    procs[c].advance_to(config.duration_s, chunk_tags[c]);
  consume(chunk_tags);
}

}  // namespace

double SourceConfig::effective_coupling() const {
  if (coupling_efficiency) return *coupling_efficiency;
  return coupling == Coupling::SMF ? 0.25 : 0.8;
}

double SourceConfig::incident_rate_hz() const {
  return pump_power_mw * rate_coefficient_per_mw * effective_coupling();
}

NetworkTopology NetworkTopology::single_detector() {
  NetworkTopology t;
  t.path_count = 1;
  t.input_path = 0;
  t.detector_map = {0};
  return t;
}

NetworkTopology NetworkTopology::splitter_pair(double theta) {
  NetworkTopology t;
  t.path_count = 2;
  t.input_path = 1;
  t.splitters = {{theta, 0, 1}};
  t.detector_map = {0, 1};
  return t;
}

NetworkTopology NetworkTopology::splitting_tree(double theta1, double theta2,
                                                double theta3) {
  NetworkTopology t;
  t.path_count = 4;
  t.input_path = 2;
  t.splitters = {{theta1, 0, 2}, {theta2, 0, 1}, {theta3, 2, 3}};
  t.detector_map = {0, 1, 2, 3};
  return t;
}

void NetworkTopology::validate() const {
  if (path_count < 1)
    throw ValidationError("topology: need at least one path");
  if (input_path < 0 || input_path >= path_count)
    throw ValidationError("topology: input path out of range");
  for (const auto& s : splitters) {
    if (s.path_a == s.path_b || s.path_a < 0 || s.path_b < 0 ||
        s.path_a >= path_count || s.path_b >= path_count)
      throw ValidationError("topology: splitter paths out of range");
    if (!(s.theta >= 0.0 && s.theta <= std::numbers::pi / 2))
      throw ValidationError("topology: splitter theta must lie in [0, pi/2]");
  }
  if (detector_map.size() != static_cast<size_t>(path_count))
    throw ValidationError("topology: detector map must cover every leaf");
  std::vector<bool> seen(path_count, false);
  for (int ch : detector_map) {
    if (ch < 0 || ch >= path_count || seen[ch])
      throw ValidationError(
          "topology: detector map must be a permutation of the channels");
    seen[ch] = true;
  }
}

PathState NetworkTopology::network_state() const {
  validate();
  if (path_count < 2)
    throw ValidationError("topology: no quantum state over a single path");
  PathState state = PathState::basis(path_count, input_path);
  for (const auto& s : splitters) state = apply_beam_splitter(state, s);
  return state;
}

std::vector<double> NetworkTopology::leaf_probabilities(
    double depolarization_p) const {
  validate();
  if (!(depolarization_p >= 0.0 && depolarization_p <= 1.0))
    throw ValidationError("topology: depolarization must lie in [0, 1]");
  if (path_count == 1) return {1.0};
  const PathState state = network_state();
  if (depolarization_p == 1.0) return born_probabilities(state);
  return born_probabilities(depolarize(state, depolarization_p));
}

double splitting_theta_for_visibility(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw ValidationError(
        "splitting_theta_for_visibility: visibility must lie in [0, 1]");
  return std::atan(std::sqrt(visibility));
}

void RunConfig::validate() const {
  if (!(source.pump_power_mw >= 0.0))
    throw ValidationError("source: pump power must be non-negative");
  if (!(source.rate_coefficient_per_mw > 0.0))
    throw ValidationError("source: rate coefficient must be positive");
  const double coupling = source.effective_coupling();
  if (!(coupling > 0.0 && coupling <= 1.0))
    throw ValidationError("source: coupling efficiency must lie in (0, 1]");
  if (!(duration_s > 0.0))
    throw ValidationError("run: duration must be positive");
  if (!(visibility_p >= 0.0 && visibility_p <= 1.0))
    throw ValidationError("run: visibility must lie in [0, 1]");
  topology.validate();
  if (detectors.size() != static_cast<size_t>(topology.path_count))
    throw ValidationError("run: need one detector per topology leaf");
  for (const auto& d : detectors) validate_detector(d);
  for (const auto& d : detectors)
    if (d.timestamp_resolution_ps != detectors.front().timestamp_resolution_ps)
      throw ValidationError("run: detectors must share a timestamp resolution");
}

std::vector<double> generate_arrivals(double rate_hz, double duration_s,
                                      Xoshiro256pp& rng) {
  if (!(rate_hz > 0.0))
    throw ValidationError("generate_arrivals: rate must be positive");
  if (!(duration_s > 0.0))
    throw ValidationError("generate_arrivals: duration must be positive");
  std::vector<double> times;
  times.reserve(static_cast<size_t>(rate_hz * duration_s * 1.1) + 16);
  for (double t = rng.exponential(rate_hz); t < duration_s;
       t += rng.exponential(rate_hz))
    times.push_back(t);
  return times;
}

int route_photon(const NetworkTopology& topology, double visibility_p,
                 Xoshiro256pp& rng) {
  const std::vector<double> prob = topology.leaf_probabilities(visibility_p);
  return sample_index(prob, rng.uniform());
}

std::vector<TimeTag> detect(const std::vector<double>& arrivals_s,
                            const DetectorConfig& config, uint8_t channel,
                            Xoshiro256pp& rng) {
  validate_detector(config);
  for (size_t i = 1; i < arrivals_s.size(); ++i)
    if (arrivals_s[i] < arrivals_s[i - 1])
      throw ValidationError("detect: arrivals must be sorted ascending");

  // Dark arrival times first (documented draw order).
  std::vector<double> darks;
  if (config.dark_rate_hz > 0.0 && !arrivals_s.empty()) {
    const double end = arrivals_s.back();
    for (double t = rng.exponential(config.dark_rate_hz); t <= end;
         t += rng.exponential(config.dark_rate_hz))
      darks.push_back(t);
  }

  const double keep_p = config.arm_transmission * config.efficiency;
  const double dead_s = config.dead_time_ns * 1e-9;
  const double res_s = config.timestamp_resolution_ps * 1e-12;
  std::vector<TimeTag> out;
  double dead_until = kNeverDead;
  auto candidate = [&](double t) {
    if (t >= dead_until) {
      dead_until = t + dead_s - kEdgeSlackS;
      out.push_back(
          TimeTag{channel, static_cast<uint64_t>((t + kEdgeSlackS) / res_s)});
    }
  };

  size_t d = 0;
  for (double t : arrivals_s) {
    while (d < darks.size() && darks[d] <= t) candidate(darks[d++]);
    if (rng.bernoulli(keep_p)) candidate(t);
  }
  while (d < darks.size()) candidate(darks[d++]);
  return out;
}

TimeTagStream simulate_experiment(const RunConfig& config) {
  TimeTagStream stream;
  stream.channel_count = static_cast<uint8_t>(config.detectors.size());
  stream.resolution_ps = config.detectors.empty()
                             ? 4.0
                             : config.detectors.front().timestamp_resolution_ps;
  run_pipeline(config, [&](std::vector<std::vector<TimeTag>>& chunk) {
    merge_sorted_channels(chunk, stream.tags);
  });
  return stream;
}

std::vector<uint64_t> simulate_counts(const RunConfig& config) {
  std::vector<uint64_t> counts(config.detectors.size(), 0);
  run_pipeline(config, [&](std::vector<std::vector<TimeTag>>& chunk) {
    for (size_t c = 0; c < chunk.size(); ++c) {
      counts[c] += chunk[c].size();
      chunk[c].clear();
    }
  });
  return counts;
}

std::vector<SaturationPoint> saturation_curve(
    const SourceConfig& base_source, const DetectorConfig& detector,
    const std::vector<double>& powers_mw, uint64_t seed) {
  if (powers_mw.empty())
    throw ValidationError("saturation_curve: power grid is empty");
  constexpr double kTargetEvents = 2e6;
  const double quarter_pi = std::numbers::pi / 4;

  std::vector<SaturationPoint> table;
  table.reserve(powers_mw.size());
  for (size_t i = 0; i < powers_mw.size(); ++i) {
    SourceConfig source = base_source;
    source.pump_power_mw = powers_mw[i];
    const double incident = source.incident_rate_hz();
    const double duration =
        std::clamp(kTargetEvents / incident, 1e-3, 1.0);

    SaturationPoint point{};
    point.power_mw = powers_mw[i];
    point.incident_rate_hz = incident;
    const NetworkTopology topologies[3] = {
        NetworkTopology::single_detector(),
        NetworkTopology::splitter_pair(quarter_pi),
        NetworkTopology::splitting_tree(quarter_pi, quarter_pi, quarter_pi)};
    double rates[3];
    for (int mode = 0; mode < 3; ++mode) {
      RunConfig run;
      run.source = source;
      run.topology = topologies[mode];
      run.detectors.assign(run.topology.path_count, detector);
      run.duration_s = duration;
      run.seed = derive_subseed(seed, i * 4 + mode);
      const std::vector<uint64_t> counts = simulate_counts(run);
      uint64_t total = 0;
      for (uint64_t c : counts) total += c;
      rates[mode] = static_cast<double>(total) / duration;
    }
    point.single_counts_per_s = rates[0];
    point.pair_counts_per_s = rates[1];
    point.pair_bits_per_s = rates[1];
    point.tree_counts_per_s = rates[2];
    point.tree_bits_per_s = 2.0 * rates[2];
    table.push_back(point);
  }
  return table;
}

}  // namespace qrng
