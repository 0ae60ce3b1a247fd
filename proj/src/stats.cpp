#include "qrng/stats.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>

#include <fftw3.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_gamma.h>

#include "json.hpp"
#include "qrng/errors.hpp"

namespace qrng {

namespace {

// Battery parameters and minimum lengths (SP 800-22 rev. 1a defaults).
constexpr size_t kBlockFrequencyM = 128;
constexpr int kApEnBlock = 10;
constexpr int kSerialBlock = 16;
constexpr size_t kMinFrequency = 100;
constexpr size_t kMinBlockFrequency = 128;
constexpr size_t kMinRuns = 100;
constexpr size_t kMinLongestRun = 128;
constexpr size_t kMinRank = 38 * 1024;
constexpr size_t kMinDft = 1000;
constexpr size_t kMinCusum = 100;
constexpr size_t kMinApEn = 65536;     // block length 10 needs m < log2(n)-5
constexpr size_t kMinSerial = 524288;  // block length 16 needs m < log2(n)-2
constexpr size_t kMinUniversal = 387840;

double igamc(double a, double x) {
  // The default GSL handler aborts the process; a statistic that underflows
  // to zero is a perfectly good p-value.
  [[maybe_unused]] static const auto previous_handler =
      gsl_set_error_handler_off();
  gsl_sf_result res;
  const int status = gsl_sf_gamma_inc_Q_e(a, x, &res);
  if (status != GSL_SUCCESS && status != GSL_EUNDRFLW)
    return x > a ? 0.0 : 1.0;
  return std::clamp(res.val, 0.0, 1.0);
}

double phi_gauss(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

uint64_t mask_top(unsigned take) {
  return take >= 64 ? ~uint64_t{0} : ~uint64_t{0} << (64 - take);
}

/// Popcount of bits [start, start + length) via 64-bit fetches.
size_t count_ones_range(const BitBuffer& bits, size_t start, size_t length) {
  size_t total = 0;
  for (size_t pos = 0; pos < length; pos += 64) {
    const unsigned take = static_cast<unsigned>(std::min<size_t>(64, length - pos));
    total += std::popcount(bits.fetch64(start + pos) & mask_top(take));
  }
  return total;
}

/// Counts of all m-bit patterns over the circularly extended sequence.
std::vector<uint64_t> pattern_counts(const BitBuffer& bits, int m) {
  const size_t n = bits.size();
  std::vector<uint64_t> counts(size_t{1} << m, 0);
  const uint64_t mask = (uint64_t{1} << m) - 1;
  uint64_t w = 0;
  for (int i = 0; i < m - 1; ++i) w = w << 1 | bits.bit(i);
  for (size_t i = 0; i < n; ++i) {
    size_t next = i + m - 1;
    if (next >= n) next -= n;
    w = (w << 1 | bits.bit(next)) & mask;
    ++counts[w];
  }
  return counts;
}

double psi_squared(const BitBuffer& bits, int m) {
  if (m <= 0) return 0.0;
  const std::vector<uint64_t> counts = pattern_counts(bits, m);
  double sum = 0.0;
  for (uint64_t c : counts) sum += static_cast<double>(c) * static_cast<double>(c);
  const double n = static_cast<double>(bits.size());
  return std::ldexp(1.0, m) / n * sum - n;
}

int gf2_rank32(std::array<uint32_t, 32>& rows) {
  int rank = 0;
  for (int col = 0; col < 32 && rank < 32; ++col) {
    const uint32_t mask = 1u << (31 - col);
    int pivot = -1;
    for (int r = rank; r < 32; ++r)
      if (rows[r] & mask) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(rows[rank], rows[pivot]);
    for (int r = rank + 1; r < 32; ++r)
      if (rows[r] & mask) rows[r] ^= rows[rank];
    ++rank;
  }
  return rank;
}

double rank32_probability(int r) {
  // P(rank = r) for a random 32x32 GF(2) matrix, closed form.
  const double log2p = r * (64.0 - r) - 1024.0;
  double prod = 1.0;
  for (int i = 0; i < r; ++i) {
    const double q = 1.0 - std::ldexp(1.0, i - 32);
    prod *= q * q / (1.0 - std::ldexp(1.0, i - r));
  }
  return std::exp2(log2p) * prod;
}

double cusum_p_value(size_t n, int64_t z) {
  const double nd = static_cast<double>(n);
  const double zd = static_cast<double>(z);
  const double sq = std::sqrt(nd);
  double total = 1.0;
  const auto lo1 = static_cast<int64_t>(std::floor((-nd / zd + 1.0) / 4.0));
  const auto hi = static_cast<int64_t>(std::floor((nd / zd - 1.0) / 4.0));
  for (int64_t k = lo1; k <= hi; ++k)
    total -= phi_gauss((4 * k + 1) * zd / sq) - phi_gauss((4 * k - 1) * zd / sq);
  const auto lo2 = static_cast<int64_t>(std::floor((-nd / zd - 3.0) / 4.0));
  for (int64_t k = lo2; k <= hi; ++k)
    total += phi_gauss((4 * k + 3) * zd / sq) - phi_gauss((4 * k + 1) * zd / sq);
  return std::clamp(total, 0.0, 1.0);
}

struct LongestRunTable {
  size_t block;
  int classes;             // number of chi-squared cells (K+1)
  std::array<int, 6> edges;  // "longest <= edge" class boundaries
  std::array<double, 7> pi;
};

const LongestRunTable& longest_run_table(size_t n) {
  static const LongestRunTable k8{
      8, 4, {1, 2, 3, 0, 0, 0}, {0.2148, 0.3672, 0.2305, 0.1875, 0, 0, 0}};
  static const LongestRunTable k128{128,
                                    6,
                                    {4, 5, 6, 7, 8, 0},
                                    {0.1174, 0.2430, 0.2493, 0.1752, 0.1027,
                                     0.1124, 0}};
  static const LongestRunTable k10000{
      10000,
      7,
      {10, 11, 12, 13, 14, 15},
      {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727}};
  if (n >= 750000) return k10000;
  if (n >= 6272) return k128;
  return k8;
}

struct UniversalParams {
  int L;
  double expected;
  double variance;
};

UniversalParams universal_params(size_t n) {
  struct Row {
    size_t threshold;
    int L;
    double expected;
    double variance;
  };
  static const Row kRows[] = {
      {387840, 6, 5.2177052, 2.954},      {904960, 7, 6.1962507, 3.125},
      {2068480, 8, 7.1836656, 3.238},     {4654080, 9, 8.1764248, 3.311},
      {10342400, 10, 9.1723243, 3.356},   {22753280, 11, 10.170032, 3.384},
      {49643520, 12, 11.168765, 3.401},   {107560960, 13, 12.168070, 3.410},
      {231669760, 14, 13.167693, 3.416},  {496435200, 15, 14.167488, 3.419},
      {1059061760, 16, 15.167379, 3.421},
  };
  UniversalParams params{0, 0.0, 0.0};
  for (const Row& row : kRows)
    if (n >= row.threshold) params = {row.L, row.expected, row.variance};
  return params;
}

}  // namespace

double frequency_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n == 0) throw ValidationError("frequency: empty input");
  const double s =
      2.0 * static_cast<double>(bits.count_ones()) - static_cast<double>(n);
  return std::erfc(std::abs(s) / std::sqrt(2.0 * static_cast<double>(n)));
}

double block_frequency_test(const BitBuffer& bits, size_t block_length) {
  const size_t n = bits.size();
  if (block_length < 2)
    throw ValidationError("block frequency: block length must be >= 2");
  const size_t blocks = n / block_length;
  if (blocks == 0)
    throw ValidationError("block frequency: input shorter than one block");
  double chi2 = 0.0;
  for (size_t b = 0; b < blocks; ++b) {
    size_t ones = 0;
    const size_t base = b * block_length;
    for (size_t pos = 0; pos < block_length; pos += 64) {
      const unsigned take =
          static_cast<unsigned>(std::min<size_t>(64, block_length - pos));
      ones += std::popcount(bits.fetch64(base + pos) & mask_top(take));
    }
    const double pi =
        static_cast<double>(ones) / static_cast<double>(block_length);
    chi2 += (pi - 0.5) * (pi - 0.5);
  }
  chi2 *= 4.0 * static_cast<double>(block_length);
  return igamc(static_cast<double>(blocks) / 2.0, chi2 / 2.0);
}

double runs_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n < 2) throw ValidationError("runs: need at least 2 bits");
  const double nd = static_cast<double>(n);
  const double pi = static_cast<double>(bits.count_ones()) / nd;
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(nd)) return 0.0;
  size_t transitions = 0;
  for (size_t pos = 0; pos + 1 < n; pos += 64) {
    const unsigned take =
        static_cast<unsigned>(std::min<size_t>(64, n - 1 - pos));
    const uint64_t x = bits.fetch64(pos) ^ bits.fetch64(pos + 1);
    transitions += std::popcount(x & mask_top(take));
  }
  const double v = 1.0 + static_cast<double>(transitions);
  const double num = std::abs(v - 2.0 * nd * pi * (1.0 - pi));
  const double den = 2.0 * std::sqrt(2.0 * nd) * pi * (1.0 - pi);
  return std::erfc(num / den);
}

double longest_run_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n < kMinLongestRun)
    throw ValidationError("longest run: need at least 128 bits");
  const LongestRunTable& table = longest_run_table(n);
  const size_t blocks = n / table.block;
  std::array<uint64_t, 7> counts{};
  for (size_t b = 0; b < blocks; ++b) {
    const size_t base = b * table.block;
    int longest = 0;
    int run = 0;
    for (size_t i = 0; i < table.block; ++i) {
      run = bits.bit(base + i) ? run + 1 : 0;
      longest = std::max(longest, run);
    }
    int cls = table.classes - 1;
    for (int e = 0; e < table.classes - 1; ++e)
      if (longest <= table.edges[e]) {
        cls = e;
        break;
      }
    ++counts[cls];
  }
  double chi2 = 0.0;
  for (int c = 0; c < table.classes; ++c) {
    const double expect = static_cast<double>(blocks) * table.pi[c];
    const double diff = static_cast<double>(counts[c]) - expect;
    chi2 += diff * diff / expect;
  }
  return igamc((table.classes - 1) / 2.0, chi2 / 2.0);
}

double rank_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n < kMinRank)
    throw ValidationError("rank: need at least 38912 bits (38 matrices)");
  const size_t matrices = n / 1024;
  const double p32 = rank32_probability(32);
  const double p31 = rank32_probability(31);
  const double p30 = 1.0 - p32 - p31;
  size_t f32 = 0;
  size_t f31 = 0;
  for (size_t m = 0; m < matrices; ++m) {
    std::array<uint32_t, 32> rows;
    for (int r = 0; r < 32; ++r)
      rows[r] = static_cast<uint32_t>(bits.fetch64(m * 1024 + 32 * r) >> 32);
    const int rank = gf2_rank32(rows);
    if (rank == 32)
      ++f32;
    else if (rank == 31)
      ++f31;
  }
  const double nm = static_cast<double>(matrices);
  const double f30 = nm - static_cast<double>(f32) - static_cast<double>(f31);
  const auto cell = [&](double observed, double p) {
    const double diff = observed - nm * p;
    return diff * diff / (nm * p);
  };
  const double chi2 =
      cell(static_cast<double>(f32), p32) + cell(static_cast<double>(f31), p31) +
      cell(f30, p30);
  return std::exp(-chi2 / 2.0);
}

double dft_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n < kMinDft) throw ValidationError("dft: need at least 1000 bits");

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  if (!in || !out) {
    fftw_free(in);
    fftw_free(out);
    throw std::runtime_error("dft: allocation failure");
  }
  for (size_t i = 0; i < n; ++i) in[i] = bits.bit(i) ? 1.0 : -1.0;

  // FFTW planning mutates global state; execution does not.
  static std::mutex plan_mutex;
  fftw_plan plan = nullptr;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  if (!plan) {
    fftw_free(in);
    fftw_free(out);
    throw std::runtime_error("dft: planner failure");
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }

  const double threshold = std::sqrt(std::log(1.0 / 0.05) * static_cast<double>(n));
  size_t below = 0;
  for (size_t i = 0; i < n / 2; ++i) {
    const double mag = std::sqrt(out[i][0] * out[i][0] + out[i][1] * out[i][1]);
    if (mag < threshold) ++below;
  }
  fftw_free(in);
  fftw_free(out);

  const double n0 = 0.95 * static_cast<double>(n) / 2.0;
  const double d = (static_cast<double>(below) - n0) /
                   std::sqrt(static_cast<double>(n) * 0.95 * 0.05 / 4.0);
  return std::erfc(std::abs(d) / std::numbers::sqrt2);
}

std::pair<double, double> cumulative_sums_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  if (n < 2) throw ValidationError("cumulative sums: need at least 2 bits");
  int64_t sum = 0;
  int64_t peak_fwd = 0;
  for (size_t i = 0; i < n; ++i) {
    sum += bits.bit(i) ? 1 : -1;
    peak_fwd = std::max(peak_fwd, std::abs(sum));
  }
  sum = 0;
  int64_t peak_bwd = 0;
  for (size_t i = n; i-- > 0;) {
    sum += bits.bit(i) ? 1 : -1;
    peak_bwd = std::max(peak_bwd, std::abs(sum));
  }
  return {cusum_p_value(n, peak_fwd), cusum_p_value(n, peak_bwd)};
}

double approximate_entropy_test(const BitBuffer& bits, int m) {
  const size_t n = bits.size();
  if (m < 1) throw ValidationError("approximate entropy: block length >= 1");
  if (n < size_t{1} << (m + 2))
    throw ValidationError("approximate entropy: input too short for block length");
  const auto phi = [&](int mm) {
    const std::vector<uint64_t> counts = pattern_counts(bits, mm);
    double total = 0.0;
    const double nd = static_cast<double>(n);
    for (uint64_t c : counts) {
      if (c == 0) continue;
      const double f = static_cast<double>(c) / nd;
      total += f * std::log(f);
    }
    return total;
  };
  const double apen = phi(m) - phi(m + 1);
  const double chi2 = 2.0 * static_cast<double>(n) * (std::numbers::ln2 - apen);
  return igamc(std::ldexp(1.0, m - 1), chi2 / 2.0);
}

std::pair<double, double> serial_test(const BitBuffer& bits, int m) {
  const size_t n = bits.size();
  if (m < 2) throw ValidationError("serial: block length must be >= 2");
  if (n < size_t{1} << (m + 2))
    throw ValidationError("serial: input too short for block length");
  const double psi_m = psi_squared(bits, m);
  const double psi_m1 = psi_squared(bits, m - 1);
  const double psi_m2 = psi_squared(bits, m - 2);
  const double d1 = psi_m - psi_m1;
  const double d2 = psi_m - 2.0 * psi_m1 + psi_m2;
  return {igamc(std::ldexp(1.0, m - 2), d1 / 2.0),
          igamc(std::ldexp(1.0, m - 3), d2 / 2.0)};
}

double universal_test(const BitBuffer& bits) {
  const size_t n = bits.size();
  const UniversalParams params = universal_params(n);
  if (params.L == 0)
    throw ValidationError("universal: need at least 387840 bits");
  const int L = params.L;
  const size_t q = size_t{10} << L;
  const size_t total_blocks = n / static_cast<size_t>(L);
  const size_t k = total_blocks - q;

  std::vector<int64_t> last_seen(size_t{1} << L, 0);
  size_t pos = 0;
  const auto next_block = [&] {
    uint64_t value = 0;
    for (int b = 0; b < L; ++b) value = value << 1 | bits.bit(pos++);
    return value;
  };
  for (size_t i = 0; i < q; ++i)
    last_seen[next_block()] = static_cast<int64_t>(i) + 1;
  double total = 0.0;
  for (size_t i = q; i < q + k; ++i) {
    const uint64_t block = next_block();
    total += std::log2(static_cast<double>(static_cast<int64_t>(i) + 1 -
                                           last_seen[block]));
    last_seen[block] = static_cast<int64_t>(i) + 1;
  }
  const double fn = total / static_cast<double>(k);
  const double c = 0.7 - 0.8 / L +
                   (4.0 + 32.0 / L) *
                       std::pow(static_cast<double>(k), -3.0 / L) / 15.0;
  const double sigma = c * std::sqrt(params.variance / static_cast<double>(k));
  return std::erfc(std::abs(fn - params.expected) /
                   (std::numbers::sqrt2 * sigma));
}

const std::vector<std::string>& battery_test_names() {
  static const std::vector<std::string> kNames = {
      "frequency",       "block_frequency",
      "runs",            "longest_run",
      "rank",            "dft",
      "cumulative_sums", "approximate_entropy",
      "serial",          "universal"};
  return kNames;
}

TestResult run_test(const std::string& name, const BitBuffer& bits,
                    double alpha) {
  struct Entry {
    const char* name;
    size_t min_bits;
    std::vector<double> (*run)(const BitBuffer&);
  };
  static const Entry kEntries[] = {
      {"frequency", kMinFrequency,
       [](const BitBuffer& b) { return std::vector<double>{frequency_test(b)}; }},
      {"block_frequency", kMinBlockFrequency,
       [](const BitBuffer& b) {
         return std::vector<double>{block_frequency_test(b, kBlockFrequencyM)};
       }},
      {"runs", kMinRuns,
       [](const BitBuffer& b) { return std::vector<double>{runs_test(b)}; }},
      {"longest_run", kMinLongestRun,
       [](const BitBuffer& b) { return std::vector<double>{longest_run_test(b)}; }},
      {"rank", kMinRank,
       [](const BitBuffer& b) { return std::vector<double>{rank_test(b)}; }},
      {"dft", kMinDft,
       [](const BitBuffer& b) { return std::vector<double>{dft_test(b)}; }},
      {"cumulative_sums", kMinCusum,
       [](const BitBuffer& b) {
         const auto [fwd, bwd] = cumulative_sums_test(b);
         return std::vector<double>{fwd, bwd};
       }},
      {"approximate_entropy", kMinApEn,
       [](const BitBuffer& b) {
         return std::vector<double>{approximate_entropy_test(b, kApEnBlock)};
       }},
      {"serial", kMinSerial,
       [](const BitBuffer& b) {
         const auto [p1, p2] = serial_test(b, kSerialBlock);
         return std::vector<double>{p1, p2};
       }},
      {"universal", kMinUniversal,
       [](const BitBuffer& b) { return std::vector<double>{universal_test(b)}; }},
  };

  for (const Entry& entry : kEntries) {
    if (name != entry.name) continue;
    TestResult result;
    result.name = name;
    if (bits.size() < entry.min_bits) {
      result.status = TestStatus::SKIPPED;
      return result;
    }
    result.p_values = entry.run(bits);
    const double lowest =
        *std::min_element(result.p_values.begin(), result.p_values.end());
    result.status = lowest >= alpha ? TestStatus::PASS : TestStatus::FAIL;
    return result;
  }
  throw ValidationError("unknown test: " + name);
}

TestReport run_battery(const BitBuffer& bits, double alpha) {
  if (bits.empty()) throw ValidationError("battery: empty input");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("battery: alpha must lie in (0, 1)");
  TestReport report;
  report.alpha = alpha;
  report.bit_length = bits.size();
  for (const std::string& name : battery_test_names())
    report.results.push_back(run_test(name, bits, alpha));
  report.total = static_cast<int>(report.results.size());
  for (const TestResult& r : report.results)
    if (r.status == TestStatus::PASS) ++report.passed;
  return report;
}

std::string report_to_json(const TestReport& report) {
  nlohmann::json j;
  j["alpha"] = report.alpha;
  j["bit_length"] = report.bit_length;
  j["results"] = nlohmann::json::array();
  for (const TestResult& r : report.results) {
    const char* status = r.status == TestStatus::PASS     ? "PASS"
                         : r.status == TestStatus::FAIL   ? "FAIL"
                                                          : "SKIPPED";
    j["results"].push_back({{"name", r.name},
                            {"p_values", r.p_values},
                            {"status", status}});
  }
  j["passed"] = report.passed;
  j["total"] = report.total;
  return j.dump(2);
}

AutocorrResult autocorrelation(const BitBuffer& bits, int max_lag) {
  const size_t n = bits.size();
  if (max_lag < 1)
    throw ValidationError("autocorrelation: max lag must be >= 1");
  if (n < 10 * static_cast<size_t>(max_lag))
    throw ValidationError("autocorrelation: need at least 10 x max_lag bits");
  const size_t ones = bits.count_ones();
  if (ones == 0 || ones == n)
    throw ValidationError("autocorrelation: constant input has no variance");

  const double nd = static_cast<double>(n);
  const double mean_x = (2.0 * static_cast<double>(ones) - nd) / nd;
  const double denom = nd * (1.0 - mean_x * mean_x);

  AutocorrResult result;
  result.expected_std = 1.0 / std::sqrt(nd);
  result.coefficients.reserve(max_lag);
  for (int k = 1; k <= max_lag; ++k) {
    const size_t overlap = n - static_cast<size_t>(k);
    size_t mismatches = 0;
    for (size_t pos = 0; pos < overlap; pos += 64) {
      const unsigned take =
          static_cast<unsigned>(std::min<size_t>(64, overlap - pos));
      const uint64_t x = bits.fetch64(pos) ^ bits.fetch64(pos + k);
      mismatches += std::popcount(x & mask_top(take));
    }
    const double od = static_cast<double>(overlap);
    const double s_k = od - 2.0 * static_cast<double>(mismatches);
    // Head/tail one-counts differ from the total only by k edge bits.
    const double ones_head =
        static_cast<double>(ones - count_ones_range(bits, overlap, k));
    const double ones_tail =
        static_cast<double>(ones - count_ones_range(bits, 0, k));
    const double t_head = 2.0 * ones_head - od;
    const double t_tail = 2.0 * ones_tail - od;
    const double gamma_k = s_k - mean_x * (t_head + t_tail) + od * mean_x * mean_x;
    result.coefficients.push_back(gamma_k / denom);
  }

  double sum = 0.0;
  for (double c : result.coefficients) sum += c;
  result.mean = sum / static_cast<double>(max_lag);
  double var = 0.0;
  for (double c : result.coefficients) var += (c - result.mean) * (c - result.mean);
  result.std_dev = std::sqrt(var / static_cast<double>(max_lag));
  return result;
}

double ks_uniform_statistic(std::vector<double> p_values) {
  if (p_values.empty())
    throw ValidationError("ks statistic: empty sample");
  std::sort(p_values.begin(), p_values.end());
  const double n = static_cast<double>(p_values.size());
  double d = 0.0;
  for (size_t i = 0; i < p_values.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - p_values[i]);
    d = std::max(d, p_values[i] - static_cast<double>(i) / n);
  }
  return d;
}

}  // namespace qrng
