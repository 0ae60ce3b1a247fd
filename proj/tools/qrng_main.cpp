// Command-line front end: simulate the optical chain, turn time tags into
// bits, extract, test, and certify — each stage reads what the previous one
// wrote, so stages can also be fed captured data.
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qrng/bitstream.hpp"
#include "qrng/errors.hpp"
#include "qrng/extractors.hpp"
#include "qrng/pipeline.hpp"
#include "qrng/stats.hpp"

namespace {

using namespace qrng;

bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

TimeTagStream read_tags_any(const std::string& path) {
  return has_csv_extension(path) ? read_timetags_csv(path) : read_timetags(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file " + path);
  out << text;
  if (!out) throw IoError("cannot write output file " + path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text << (text.empty() || text.back() == '\n' ? "" : "\n");
  else
    write_text(out_path, text);
}

struct SimulateOptions {
  std::string config_path;
  std::string out_path;
  uint64_t seed = 0;
  double duration = 0.0;
  double visibility = 1.0;
  bool seed_set = false;
  bool duration_set = false;
  bool visibility_set = false;
};

void run_simulate(const SimulateOptions& opt) {
  PipelineConfig config = opt.config_path.empty() ? parse_config("{}")
                                                  : load_config(opt.config_path);
  if (opt.seed_set) config.run.seed = opt.seed;
  if (opt.duration_set) config.run.duration_s = opt.duration;
  if (opt.visibility_set) config.set_visibility(opt.visibility);
  config.run.validate();

  const TimeTagStream stream = simulate_experiment(config.run);
  if (has_csv_extension(opt.out_path))
    write_timetags_csv(opt.out_path, stream);
  else
    write_timetags(opt.out_path, stream);

  std::vector<uint64_t> counts(stream.channel_count, 0);
  for (const TimeTag& tag : stream.tags) ++counts[tag.channel];
  std::cout << "simulated " << config.run.duration_s << " s, "
            << stream.tags.size() << " detections\n";
  std::cout << std::fixed << std::setprecision(1);
  for (int ch = 0; ch < stream.channel_count; ++ch)
    std::cout << "channel " << ch << ": "
              << static_cast<double>(counts[ch]) / config.run.duration_s
              << " counts/s\n";
  std::cout.unsetf(std::ios::fixed);
}

struct BitsOptions {
  std::string tags_path;
  std::string out_path;
  std::string commitment = "two";
  double window_ps = 0.0;
};

void run_bits(const BitsOptions& opt) {
  const TimeTagStream stream = read_tags_any(opt.tags_path);
  CommitmentMap map;
  if (opt.commitment == "two")
    map = CommitmentMap::two_bit();
  else if (opt.commitment == "one")
    map = CommitmentMap::one_bit(stream.channel_count);
  else
    throw ValidationError("--commitment must be \"one\" or \"two\"");
  const BitBuffer bits = assign_bits(stream, map, CoincidenceWindow{opt.window_ps});
  write_bits(opt.out_path, bits);
  std::cout << stream.tags.size() << " time tags -> " << bits.size()
            << " bits\n";
}

struct ExtractOptions {
  std::string bits_path;
  std::string out_path;
  std::string method = "toeplitz";
  std::string mode = "lhl";
  std::string key_file;
  bool generate_key = false;
  uint64_t seed = 0;
  double epsilon = 0x1p-50;
  size_t block_n = 256;
};

void run_extract(const ExtractOptions& opt) {
  const BitBuffer bits = read_bits(opt.bits_path);
  BitBuffer out;
  std::ostringstream summary;
  summary << "input bits: " << bits.size() << '\n';

  if (opt.method == "xor") {
    out = xor_extract(bits);
  } else if (opt.method == "toeplitz") {
    std::string key_path = opt.key_file;
    ToeplitzSeed master;
    if (opt.generate_key) {
      if (key_path.empty()) key_path = "qrng_key.hex";
      master = ToeplitzSeed::random(opt.seed);
      write_key_file(key_path, master);
      summary << "wrote key file " << key_path << '\n';
    } else {
      if (key_path.empty())
        throw ValidationError(
            "toeplitz extraction needs a key: --key-file, QRNG_KEY_FILE, or "
            "--generate-key");
      master = read_key_file(key_path);
    }
    ExtractorConfig config;
    config.n = opt.block_n;
    config.epsilon_hash = opt.epsilon;
    if (opt.mode == "lhl")
      config.sizing_mode = SizingMode::LHL;
    else if (opt.mode == "paper")
      config.sizing_mode = SizingMode::PAPER_MATCH;
    else
      throw ValidationError("--mode must be \"lhl\" or \"paper\"");
    config.validate();

    ToeplitzStreamResult result = toeplitz_stream(bits, master, config);
    out = std::move(result.bits);
    summary << "min-entropy/bit: " << result.entropy.h_per_symbol
            << " (p_g = " << result.entropy.p_g << ")\n"
            << "blocks: " << result.block_count << " x " << result.block_length
            << " bits -> " << result.output_per_block << " bits each\n";
  } else {
    throw ValidationError("--method must be \"xor\" or \"toeplitz\"");
  }

  write_bits(opt.out_path, out);
  const double loss =
      bits.size() == 0
          ? 0.0
          : 100.0 * (1.0 - static_cast<double>(out.size()) /
                               static_cast<double>(bits.size()));
  summary << "output bits: " << out.size() << '\n'
          << "loss: " << std::fixed << std::setprecision(2) << loss << "%\n";
  std::cout << summary.str();
}

struct TestOptions {
  std::string bits_path;
  std::string out_path;
  double alpha = 0.01;
};

void run_test(const TestOptions& opt) {
  const BitBuffer bits = read_bits(opt.bits_path);
  const TestReport report = run_battery(bits, opt.alpha);
  const std::string json = report_to_json(report);
  if (opt.out_path.empty()) {
    std::cout << json << '\n';
  } else {
    write_text(opt.out_path, json);
    std::cout << "passed " << report.passed << " of " << report.total
              << " tests (alpha = " << report.alpha << ")\n";
  }
}

struct AutocorrOptions {
  std::string bits_path;
  std::string out_path;
  std::string csv_path;
  int max_lag = 100;
};

void run_autocorr(const AutocorrOptions& opt) {
  const BitBuffer bits = read_bits(opt.bits_path);
  const AutocorrResult result = autocorrelation(bits, opt.max_lag);

  nlohmann::json j;
  j["max_lag"] = opt.max_lag;
  j["coefficients"] = result.coefficients;
  j["mean"] = result.mean;
  j["std_dev"] = result.std_dev;
  j["expected_std"] = result.expected_std;
  emit(opt.out_path, j.dump(2));

  if (!opt.csv_path.empty()) {
    std::ostringstream csv;
    csv << "lag,coefficient\n";
    csv.precision(10);
    for (size_t k = 0; k < result.coefficients.size(); ++k)
      csv << (k + 1) << ',' << result.coefficients[k] << '\n';
    write_text(opt.csv_path, csv.str());
  }
}

struct CertifyOptions {
  std::string config_path;
  std::string tags_path;
  std::string out_path;
  uint64_t seed = 0;
  double visibility = 1.0;
  bool seed_set = false;
  bool visibility_set = false;
};

void run_certify(const CertifyOptions& opt) {
  CertificationReport report;
  if (!opt.tags_path.empty()) {
    if (opt.visibility_set)
      throw ValidationError("--visibility only applies to simulated runs");
    report = certify_ingest(read_tags_any(opt.tags_path));
  } else {
    PipelineConfig config = opt.config_path.empty()
                                ? parse_config("{}")
                                : load_config(opt.config_path);
    if (opt.seed_set) config.run.seed = opt.seed;
    if (opt.visibility_set) config.set_visibility(opt.visibility);
    report = certify_simulated(config);
  }
  emit(opt.out_path, certification_to_json(report));
  if (!opt.out_path.empty()) std::cout << report.verdict << '\n';
}

struct SweepOptions {
  std::string config_path;
  std::string power_grid;
  std::string visibility_grid;
  std::string out_path;
  uint64_t seed = 0;
  bool seed_set = false;
};

void run_sweep(const SweepOptions& opt) {
  if (opt.power_grid.empty() == opt.visibility_grid.empty())
    throw ValidationError(
        "sweep needs exactly one of --power-grid or --visibility-grid");
  std::string csv;
  if (!opt.power_grid.empty()) {
    PipelineConfig config = opt.config_path.empty()
                                ? parse_config("{}")
                                : load_config(opt.config_path);
    if (opt.seed_set) config.run.seed = opt.seed;
    csv = sweep_power_csv(config, parse_grid(opt.power_grid));
  } else {
    csv = sweep_visibility_csv(parse_grid(opt.visibility_grid));
  }
  emit(opt.out_path, csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"path-split photon randomness toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the optical simulation and write time tags");
  simulate->add_option("--config", sim.config_path, "JSON config file");
  CLI::Option* sim_seed = simulate->add_option("--seed", sim.seed, "RNG seed");
  CLI::Option* sim_dur =
      simulate->add_option("--duration", sim.duration, "Run length in seconds");
  CLI::Option* sim_vis = simulate->add_option(
      "--visibility", sim.visibility, "Interference visibility in [0, 1]");
  simulate->add_option("--out", sim.out_path, "Time-tag output (.csv for text)")
      ->required();
  simulate->callback([&] {
    sim.seed_set = sim_seed->count() > 0;
    sim.duration_set = sim_dur->count() > 0;
    sim.visibility_set = sim_vis->count() > 0;
    run_simulate(sim);
  });

  BitsOptions bits;
  CLI::App* bits_cmd = app.add_subcommand(
      "bits", "Map time tags to raw bits via the channel commitment");
  bits_cmd->add_option("tags", bits.tags_path, "Time-tag file (.pttg or .csv)")
      ->required();
  bits_cmd->add_option("--commitment", bits.commitment,
                       "Bits per detection: one | two");
  bits_cmd->add_option("--window", bits.window_ps,
                       "Coincidence window in ps (0 keeps every event)");
  bits_cmd->add_option("--out", bits.out_path, "Bit file to write")->required();
  bits_cmd->callback([&] { run_bits(bits); });

  ExtractOptions ext;
  CLI::App* extract =
      app.add_subcommand("extract", "Run a randomness extractor over raw bits");
  extract->add_option("bits", ext.bits_path, "Raw bit file")->required();
  extract->add_option("--method", ext.method, "xor | toeplitz");
  extract->add_option("--mode", ext.mode, "Output sizing: lhl | paper");
  extract->add_option("--epsilon", ext.epsilon, "Extractor error bound");
  extract->add_option("--block-n", ext.block_n, "Toeplitz input block length");
  extract->add_option("--key-file", ext.key_file, "Toeplitz master key file")
      ->envname("QRNG_KEY_FILE");
  extract->add_flag("--generate-key", ext.generate_key,
                    "Create a key from --seed and write it to --key-file");
  extract->add_option("--seed", ext.seed, "Seed for --generate-key");
  extract->add_option("--out", ext.out_path, "Extracted bit file")->required();
  extract->callback([&] { run_extract(ext); });

  TestOptions test;
  CLI::App* test_cmd =
      app.add_subcommand("test", "Run the statistical battery over a bit file");
  test_cmd->add_option("bits", test.bits_path, "Bit file")->required();
  test_cmd->add_option("--alpha", test.alpha, "Significance level");
  test_cmd->add_option("--out", test.out_path,
                       "Write the JSON report here instead of stdout");
  test_cmd->callback([&] { run_test(test); });

  AutocorrOptions autoc;
  CLI::App* autocorr =
      app.add_subcommand("autocorr", "Serial autocorrelation of a bit file");
  autocorr->add_option("bits", autoc.bits_path, "Bit file")->required();
  autocorr->add_option("--max-lag", autoc.max_lag, "Largest lag to evaluate");
  autocorr->add_option("--out", autoc.out_path,
                       "Write the JSON summary here instead of stdout");
  autocorr->add_option("--csv", autoc.csv_path, "Also write lag,coefficient CSV");
  autocorr->callback([&] { run_autocorr(autoc); });

  CertifyOptions cert;
  CLI::App* certify = app.add_subcommand(
      "certify", "Certify a source from simulation or captured time tags");
  certify->add_option("--config", cert.config_path, "JSON config file");
  CLI::Option* cert_seed =
      certify->add_option("--seed", cert.seed, "RNG seed");
  CLI::Option* cert_vis = certify->add_option(
      "--visibility", cert.visibility, "Interference visibility in [0, 1]");
  certify->add_option("--tags", cert.tags_path,
                      "Certify this capture instead of simulating");
  certify->add_option("--out", cert.out_path,
                      "Write the JSON report here instead of stdout");
  certify->callback([&] {
    cert.seed_set = cert_seed->count() > 0;
    cert.visibility_set = cert_vis->count() > 0;
    run_certify(cert);
  });

  SweepOptions sweep;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Tabulate rates versus power or CHSH versus visibility");
  sweep_cmd->add_option("--config", sweep.config_path, "JSON config file");
  CLI::Option* sweep_seed =
      sweep_cmd->add_option("--seed", sweep.seed, "RNG seed");
  sweep_cmd->add_option("--power-grid", sweep.power_grid,
                        "Pump powers in mW: a,b,c or start:stop:count");
  sweep_cmd->add_option("--visibility-grid", sweep.visibility_grid,
                        "Visibilities: a,b,c or start:stop:count");
  sweep_cmd->add_option("--out", sweep.out_path,
                        "Write the CSV here instead of stdout");
  sweep_cmd->callback([&] {
    sweep.seed_set = sweep_seed->count() > 0;
    run_sweep(sweep);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
