#include "qrng/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "qrng/errors.hpp"
#include "qrng/stats.hpp"

namespace qrng {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) {
          return key == k;
        }) == keys.end())
      throw ValidationError("config: unknown key \"" + key + "\" in " + where);
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ValidationError("config: " + std::string(key) + " must be a number");
  return obj[key].get<double>();
}

void parse_source(const json& section, SourceConfig& source) {
  reject_unknown(section,
                 {"pump_power_mw", "rate_coefficient_per_mw", "coupling",
                  "coupling_efficiency"},
                 "source");
  source.pump_power_mw =
      get_number(section, "pump_power_mw", source.pump_power_mw);
  source.rate_coefficient_per_mw = get_number(
      section, "rate_coefficient_per_mw", source.rate_coefficient_per_mw);
  if (section.contains("coupling")) {
    const std::string coupling = section["coupling"].get<std::string>();
    if (coupling == "SMF")
      source.coupling = Coupling::SMF;
    else if (coupling == "MMF")
      source.coupling = Coupling::MMF;
    else
      throw ValidationError("config: coupling must be \"SMF\" or \"MMF\"");
  }
  if (section.contains("coupling_efficiency"))
    source.coupling_efficiency =
        get_number(section, "coupling_efficiency", 0.0);
}

DetectorConfig parse_detector(const json& section) {
  reject_unknown(section,
                 {"efficiency", "dead_time_ns", "dark_rate_hz",
                  "timestamp_resolution_ps", "arm_transmission"},
                 "detectors");
  DetectorConfig d;
  d.efficiency = get_number(section, "efficiency", d.efficiency);
  d.dead_time_ns = get_number(section, "dead_time_ns", d.dead_time_ns);
  d.dark_rate_hz = get_number(section, "dark_rate_hz", d.dark_rate_hz);
  d.timestamp_resolution_ps =
      get_number(section, "timestamp_resolution_ps", d.timestamp_resolution_ps);
  d.arm_transmission =
      get_number(section, "arm_transmission", d.arm_transmission);
  return d;
}

NetworkTopology build_topology(const std::string& kind,
                               const std::vector<double>& thetas) {
  const double quarter = std::numbers::pi / 4;
  if (kind == "single") {
    if (!thetas.empty())
      throw ValidationError("config: single topology takes no thetas");
    return NetworkTopology::single_detector();
  }
  if (kind == "pair") {
    if (thetas.size() > 1)
      throw ValidationError("config: pair topology takes one theta");
    return NetworkTopology::splitter_pair(thetas.empty() ? quarter : thetas[0]);
  }
  if (kind == "tree") {
    if (!thetas.empty() && thetas.size() != 3)
      throw ValidationError("config: tree topology takes three thetas");
    if (thetas.empty())
      return NetworkTopology::splitting_tree(quarter, quarter, quarter);
    return NetworkTopology::splitting_tree(thetas[0], thetas[1], thetas[2]);
  }
  throw ValidationError("config: topology kind must be single, pair or tree");
}

json entropy_to_json(const MinEntropyEstimate& est) {
  return {{"p_g", est.p_g},
          {"h_per_symbol", est.h_per_symbol},
          {"symbol_width", est.symbol_width},
          {"sample_count", est.sample_count}};
}

/// Counts aggregated over the two first-splitter arms.  Channel order
/// follows the detector map: leaves {0,1} form one arm, {2,3} the other.
std::pair<uint64_t, uint64_t> arm_totals(const std::vector<uint64_t>& counts) {
  if (counts.size() == 2) return {counts[0], counts[1]};
  if (counts.size() == 4) return {counts[0] + counts[1], counts[2] + counts[3]};
  throw ValidationError("certification needs a 2- or 4-channel stream");
}

}  // namespace

void PipelineConfig::set_visibility(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw ValidationError("run: visibility must lie in [0, 1]");
  run.visibility_p = visibility;
  if (thetas_explicit || topology_kind == "single") return;
  const double theta = splitting_theta_for_visibility(visibility);
  const double quarter = std::numbers::pi / 4;
  run.topology = topology_kind == "pair"
                     ? NetworkTopology::splitter_pair(theta)
                     : NetworkTopology::splitting_tree(theta, quarter, quarter);
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config: root must be an object");
  reject_unknown(root,
                 {"source", "detectors", "topology", "run", "commitment",
                  "extractor", "tests", "seed", "output"},
                 "config root");

  PipelineConfig config;

  if (root.contains("source")) parse_source(root["source"], config.run.source);

  std::vector<double> thetas;
  if (root.contains("topology")) {
    const json& topo = root["topology"];
    reject_unknown(topo, {"kind", "thetas"}, "topology");
    if (topo.contains("kind"))
      config.topology_kind = topo["kind"].get<std::string>();
    if (topo.contains("thetas")) {
      if (!topo["thetas"].is_array())
        throw ValidationError("config: thetas must be an array");
      for (const json& t : topo["thetas"]) thetas.push_back(t.get<double>());
      config.thetas_explicit = true;
    }
  }
  config.run.topology = build_topology(config.topology_kind, thetas);

  DetectorConfig detector;
  std::vector<DetectorConfig> per_channel;
  if (root.contains("detectors")) {
    const json& det = root["detectors"];
    if (det.is_array()) {
      for (const json& d : det) per_channel.push_back(parse_detector(d));
    } else {
      detector = parse_detector(det);
    }
  }
  if (per_channel.empty()) {
    config.run.detectors.assign(config.run.topology.path_count, detector);
  } else {
    if (per_channel.size() !=
        static_cast<size_t>(config.run.topology.path_count))
      throw ValidationError(
          "config: detectors array must match the topology's channel count");
    config.run.detectors = std::move(per_channel);
  }

  double visibility = 1.0;
  if (root.contains("run")) {
    const json& run = root["run"];
    reject_unknown(run, {"duration_s", "visibility"}, "run");
    config.run.duration_s = get_number(run, "duration_s", config.run.duration_s);
    visibility = get_number(run, "visibility", 1.0);
  }
  config.set_visibility(visibility);

  if (root.contains("commitment")) {
    const json& commitment = root["commitment"];
    reject_unknown(commitment, {"bits", "window_ps"}, "commitment");
    if (commitment.contains("bits")) {
      if (!commitment["bits"].is_number_integer())
        throw ValidationError("config: commitment bits must be an integer");
      config.commitment_bits = commitment["bits"].get<int>();
    }
    if (config.commitment_bits != 1 && config.commitment_bits != 2)
      throw ValidationError("config: commitment bits must be 1 or 2");
    config.coincidence_window_ps =
        get_number(commitment, "window_ps", config.coincidence_window_ps);
  }

  if (root.contains("extractor")) {
    const json& ext = root["extractor"];
    reject_unknown(ext, {"method", "mode", "n", "epsilon"}, "extractor");
    if (ext.contains("method")) {
      config.extract_method = ext["method"].get<std::string>();
      if (config.extract_method != "xor" && config.extract_method != "toeplitz")
        throw ValidationError(
            "config: extractor method must be \"xor\" or \"toeplitz\"");
    }
    if (ext.contains("mode")) {
      const std::string mode = ext["mode"].get<std::string>();
      if (mode == "lhl")
        config.extractor.sizing_mode = SizingMode::LHL;
      else if (mode == "paper")
        config.extractor.sizing_mode = SizingMode::PAPER_MATCH;
      else
        throw ValidationError(
            "config: extractor mode must be \"lhl\" or \"paper\"");
    }
    if (ext.contains("n")) {
      if (!ext["n"].is_number_integer() || ext["n"].get<int64_t>() < 2)
        throw ValidationError("config: extractor n must be an integer >= 2");
      config.extractor.n = ext["n"].get<size_t>();
    }
    config.extractor.epsilon_hash =
        get_number(ext, "epsilon", config.extractor.epsilon_hash);
    config.extractor.validate();
  }

  if (root.contains("tests")) {
    const json& tests = root["tests"];
    reject_unknown(tests, {"alpha"}, "tests");
    config.alpha = get_number(tests, "alpha", config.alpha);
    if (!(config.alpha > 0.0 && config.alpha < 1.0))
      throw ValidationError("config: alpha must lie in (0, 1)");
  }

  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer())
      throw ValidationError("config: seed must be an integer");
    config.run.seed = root["seed"].get<uint64_t>();
  }

  if (root.contains("output")) {
    const json& output = root["output"];
    reject_unknown(output, {"directory"}, "output");
    if (output.contains("directory"))
      config.output_directory = output["directory"].get<std::string>();
  }

  config.run.validate();
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

CommitmentMap commitment_for(const PipelineConfig& config) {
  const int channels = config.run.topology.path_count;
  if (config.commitment_bits == 2) {
    if (channels != 4)
      throw ValidationError("two-bit commitment needs the 4-channel tree");
    return CommitmentMap::two_bit();
  }
  return CommitmentMap::one_bit(channels);
}

CertificationReport certify_simulated(const PipelineConfig& config) {
  if (config.run.topology.path_count < 2)
    throw ValidationError("certification needs a splitting topology");

  CertificationReport report;
  report.mode = "simulated";
  report.has_depolarization = true;
  report.depolarization_p = config.run.visibility_p;

  // CHSH side: the depolarized balanced split state, optimal settings.
  const PathState state = balanced_split_state();
  const ChshResult chsh = config.run.visibility_p == 1.0
                              ? max_chsh(state)
                              : max_chsh(depolarize(state, config.run.visibility_p));
  report.has_s = true;
  report.s_max = chsh.s_max;
  report.settings = chsh.settings;

  // Counts side: a short deterministic slice of the configured run.
  RunConfig slice = config.run;
  slice.duration_s = std::min(slice.duration_s, 0.2);
  const TimeTagStream tags = simulate_experiment(slice);
  std::vector<uint64_t> counts(slice.detectors.size(), 0);
  for (const TimeTag& tag : tags.tags) ++counts[tag.channel];
  const auto [arm1, arm2] = arm_totals(counts);
  report.visibility_eq8 = visibility_from_counts(arm1, arm2);

  const BitBuffer bits = assign_bits(
      tags, commitment_for(config), CoincidenceWindow{config.coincidence_window_ps});
  report.has_entropy = true;
  report.entropy = min_entropy(bits, 1);

  report.verdict =
      report.s_max > 2.0 ? "QUANTUM_CERTIFIED" : "UNCERTIFIED";
  return report;
}

CertificationReport certify_ingest(const TimeTagStream& stream) {
  CertificationReport report;
  report.mode = "ingest";

  std::vector<uint64_t> counts(stream.channel_count, 0);
  for (const TimeTag& tag : stream.tags) {
    if (tag.channel >= stream.channel_count)
      throw ValidationError("stream: channel out of range");
    ++counts[tag.channel];
  }
  const auto [arm1, arm2] = arm_totals(counts);
  report.visibility_eq8 = visibility_from_counts(arm1, arm2);

  const CommitmentMap map = counts.size() == 4
                                ? CommitmentMap::two_bit()
                                : CommitmentMap::one_bit(2);
  const BitBuffer bits = assign_bits(stream, map);
  report.has_entropy = true;
  report.entropy = min_entropy(bits, 1);

  // No CHSH sweep in a plain time-tag capture: no S, no certification.
  report.verdict = "UNCERTIFIED";
  return report;
}

std::string certification_to_json(const CertificationReport& report) {
  json j;
  j["mode"] = report.mode;
  if (report.has_s) {
    j["s_max"] = report.s_max;
    j["settings"] = {{"a", report.settings.a},
                     {"a_prime", report.settings.a_prime},
                     {"b", report.settings.b},
                     {"b_prime", report.settings.b_prime}};
  } else {
    j["s_max"] = nullptr;
    j["settings"] = nullptr;
  }
  j["visibility_eq8"] = report.visibility_eq8;
  j["depolarization_p"] =
      report.has_depolarization ? json(report.depolarization_p) : json(nullptr);
  j["min_entropy"] =
      report.has_entropy ? entropy_to_json(report.entropy) : json(nullptr);
  j["verdict"] = report.verdict;
  return j.dump(2);
}

std::string sweep_power_csv(const PipelineConfig& config,
                            const std::vector<double>& powers_mw) {
  if (powers_mw.empty()) throw ValidationError("sweep: empty power grid");
  const std::vector<SaturationPoint> table = saturation_curve(
      config.run.source, config.run.detectors.front(), powers_mw,
      config.run.seed);
  std::ostringstream out;
  out << "power_mw,incident_rate_hz,single_counts_per_s,pair_counts_per_s,"
         "pair_bits_per_s,tree_counts_per_s,tree_bits_per_s\n";
  out.precision(10);
  for (const SaturationPoint& point : table) {
    out << point.power_mw << ',' << point.incident_rate_hz << ','
        << point.single_counts_per_s << ',' << point.pair_counts_per_s << ','
        << point.pair_bits_per_s << ',' << point.tree_counts_per_s << ','
        << point.tree_bits_per_s << '\n';
  }
  return out.str();
}

std::string sweep_visibility_csv(const std::vector<double>& visibilities) {
  if (visibilities.empty())
    throw ValidationError("sweep: empty visibility grid");
  const PathState state = balanced_split_state();
  std::ostringstream out;
  out << "visibility,s_max\n";
  out.precision(10);
  for (double v : visibilities) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("sweep: visibility values must lie in [0, 1]");
    const ChshResult chsh =
        v == 1.0 ? max_chsh(state) : max_chsh(depolarize(state, v));
    out << v << ',' << chsh.s_max << '\n';
  }
  return out.str();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> values;
  if (text.empty()) return values;

  const auto parse_one = [](const std::string& token) {
    try {
      size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("grid: cannot parse number \"" + token + "\"");
    }
  };

  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3)
      throw ValidationError("grid: range syntax is start:stop:count");
    const double start = parse_one(parts[0]);
    const double stop = parse_one(parts[1]);
    const double count_d = parse_one(parts[2]);
    const int count = static_cast<int>(count_d);
    if (count < 1 || count_d != count)
      throw ValidationError("grid: count must be a positive integer");
    for (int i = 0; i < count; ++i)
      values.push_back(
          count == 1 ? start
                     : start + (stop - start) * static_cast<double>(i) /
                           static_cast<double>(count - 1));
    return values;
  }

  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty())
      throw ValidationError("grid: empty entry in list");
    values.push_back(parse_one(token));
  }
  return values;
}

}  // namespace qrng
