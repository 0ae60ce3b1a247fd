#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qrng/bitbuffer.hpp"

namespace qrng {

/// SKIPPED marks inputs below a test's minimum length; a short sequence must
/// not masquerade as a non-random one.
enum class TestStatus { PASS, FAIL, SKIPPED };

struct TestResult {
  std::string name;
  std::vector<double> p_values;  // empty when skipped
  TestStatus status = TestStatus::SKIPPED;
};

struct TestReport {
  double alpha = 0.01;
  size_t bit_length = 0;
  std::vector<TestResult> results;
  int passed = 0;  // results with status PASS
  int total = 0;   // all results, skipped included
};

/// The ten SP 800-22 statistics.  Each returns the published p-value and
/// throws ValidationError when the input is shorter than the statistic can
/// meaningfully evaluate (the battery converts that into SKIPPED instead).
double frequency_test(const BitBuffer& bits);
double block_frequency_test(const BitBuffer& bits, size_t block_length = 128);
double runs_test(const BitBuffer& bits);
double longest_run_test(const BitBuffer& bits);
double rank_test(const BitBuffer& bits);
double dft_test(const BitBuffer& bits);
std::pair<double, double> cumulative_sums_test(const BitBuffer& bits);
double approximate_entropy_test(const BitBuffer& bits, int m = 10);
std::pair<double, double> serial_test(const BitBuffer& bits, int m = 16);
double universal_test(const BitBuffer& bits);

/// Battery order and naming used in reports.
const std::vector<std::string>& battery_test_names();

/// Runs one named test at its battery parameters; multi-part tests pass only
/// when every part clears alpha.
TestResult run_test(const std::string& name, const BitBuffer& bits,
                    double alpha = 0.01);

/// All ten tests in battery order over the same buffer.
TestReport run_battery(const BitBuffer& bits, double alpha = 0.01);

/// Schema: {alpha, bit_length, results: [{name, p_values, status}], passed,
/// total} with status one of PASS | FAIL | SKIPPED.
std::string report_to_json(const TestReport& report);

struct AutocorrResult {
  std::vector<double> coefficients;  // lags 1..max_lag
  double mean = 0.0;
  double std_dev = 0.0;
  double expected_std = 0.0;  // 1/sqrt(N) sampling reference
};

/// Autocorrelation of the +/-1-mapped sequence, mean-subtracted and
/// normalized by the lag-0 variance.  Requires at least 10 x max_lag bits and
/// a non-constant input.
AutocorrResult autocorrelation(const BitBuffer& bits, int max_lag = 100);

/// Kolmogorov-Smirnov distance of a p-value sample against Uniform[0,1].
double ks_uniform_statistic(std::vector<double> p_values);

}  // namespace qrng
