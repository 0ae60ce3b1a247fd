#pragma once

#include <string>
#include <vector>

#include "qrng/bitstream.hpp"
#include "qrng/extractors.hpp"
#include "qrng/photonics.hpp"
#include "qrng/quantum.hpp"

namespace qrng {

/// Fully parsed run description.  The JSON schema is strict: every section
/// and key is known in advance and anything unrecognized is rejected, so a
/// typo cannot silently fall back to a default.
struct PipelineConfig {
  RunConfig run;
  std::string topology_kind = "tree";  // "single" | "pair" | "tree"
  bool thetas_explicit = false;        // topology angles given literally
  int commitment_bits = 2;             // 1 or 2
  double coincidence_window_ps = 0.0;
  std::string extract_method = "toeplitz";  // "toeplitz" | "xor"
  ExtractorConfig extractor;
  double alpha = 0.01;
  std::string output_directory = ".";

  /// The single visibility knob: sets the sector depolarization used by the
  /// CHSH model and, unless the splitter angles were pinned explicitly,
  /// tilts the first splitter so the two arms show the same count-balance
  /// visibility (theta = atan(sqrt(v))).
  void set_visibility(double visibility);
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

/// Commitment map matching the config width and the run topology.
CommitmentMap commitment_for(const PipelineConfig& config);

struct CertificationReport {
  std::string mode;  // "simulated" | "ingest"
  bool has_s = false;
  double s_max = 0.0;
  MeasurementSettings settings{};
  double visibility_eq8 = 0.0;
  bool has_depolarization = false;
  double depolarization_p = 0.0;
  bool has_entropy = false;
  MinEntropyEstimate entropy{};
  std::string verdict;  // "QUANTUM_CERTIFIED" iff S_max > 2
};

/// Simulated certification: CHSH optimum of the (depolarized) balanced split
/// state, plus count-balance visibility and a min-entropy estimate from a
/// short simulated slice (at most 0.2 s of simulated time).
CertificationReport certify_simulated(const PipelineConfig& config);

/// File-based certification: count-balance visibility and min-entropy only.
/// Without a CHSH sweep in the data there is no S, hence no certification.
CertificationReport certify_ingest(const TimeTagStream& stream);

std::string certification_to_json(const CertificationReport& report);

/// CSV tables for the two sweep figures: detected rates and bit rates over
/// pump power, and the CHSH optimum over the visibility parameter.
std::string sweep_power_csv(const PipelineConfig& config,
                            const std::vector<double>& powers_mw);
std::string sweep_visibility_csv(const std::vector<double>& visibilities);

/// "0.1,0.2,0.5" or linspace syntax "start:stop:count".
std::vector<double> parse_grid(const std::string& text);

}  // namespace qrng
