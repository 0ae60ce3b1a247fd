#include "qrng/extractors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <vector>

#include "qrng/errors.hpp"
#include "qrng/rng.hpp"

namespace qrng {

namespace {

using uint128 = unsigned __int128;

/// Carry-less 64x64 -> 128 multiply via a 4-bit window table (no PCLMUL
/// dependence; correctness is what the reference multiply checks).
uint128 clmul64(uint64_t a, uint64_t b) {
  uint128 tab[16];
  tab[0] = 0;
  tab[1] = a;
  for (int i = 2; i < 16; i += 2) {
    tab[i] = tab[i >> 1] << 1;
    tab[i + 1] = tab[i] ^ tab[1];
  }
  uint128 acc = 0;
  for (int k = 0; k < 16; ++k)
    acc ^= tab[(b >> (4 * k)) & 0xF] << (4 * k);
  return acc;
}

/// Bits of the buffer as GF(2)[x] coefficient words: bit i of the buffer is
/// the coefficient of x^i, stored LSB-first within each word.
std::vector<uint64_t> poly_words(const BitBuffer& bits) {
  const size_t words = (bits.size() + 63) / 64;
  std::vector<uint64_t> out(words);
  for (size_t w = 0; w < words; ++w)
    out[w] = bitreverse64(bits.fetch64(64 * w));
  return out;
}

/// 64 coefficients starting at `pos`, LSB-first.
uint64_t poly_window(const std::vector<uint64_t>& words, size_t pos) {
  const size_t q = pos / 64;
  const unsigned r = pos % 64;
  uint64_t w = q < words.size() ? words[q] >> r : 0;
  if (r != 0 && q + 1 < words.size()) w |= words[q + 1] << (64 - r);
  return w;
}

BitBuffer slice(const BitBuffer& bits, size_t start, size_t length) {
  BitBuffer out;
  out.reserve_bits(length);
  for (size_t i = 0; i < length; i += 64) {
    const unsigned take = static_cast<unsigned>(std::min<size_t>(64, length - i));
    out.append_msb_word(bits.fetch64(start + i), take);
  }
  return out;
}

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

MinEntropyEstimate min_entropy(const BitBuffer& bits, int symbol_width,
                               EntropyFormula formula) {
  if (symbol_width != 1 && symbol_width != 8)
    throw ValidationError("min_entropy: symbol width must be 1 or 8");
  const size_t samples = bits.size() / symbol_width;
  if (samples < 100)
    throw ValidationError("min_entropy: too few samples (need at least 100)");

  double p_g = 0.0;
  if (symbol_width == 1) {
    const double ones = static_cast<double>(bits.count_ones());
    const double p1 = ones / static_cast<double>(samples);
    p_g = std::max(p1, 1.0 - p1);
  } else {
    std::array<uint64_t, 256> counts{};
    for (size_t i = 0; i < samples; ++i) ++counts[bits.bytes()[i]];
    const uint64_t top = *std::max_element(counts.begin(), counts.end());
    p_g = static_cast<double>(top) / static_cast<double>(samples);
  }

  MinEntropyEstimate est;
  est.p_g = p_g;
  est.symbol_width = symbol_width;
  est.sample_count = samples;
  const double h = -std::log2(p_g);
  est.h_per_symbol = formula == EntropyFormula::STANDARD ? h : 2.0 * h;
  return est;
}

void ExtractorConfig::validate() const {
  if (n < 2) throw ValidationError("extractor: block length must be >= 2");
  if (!(epsilon_hash > 0.0 && epsilon_hash < 1.0))
    throw ValidationError("extractor: epsilon must lie in (0, 1)");
}

size_t output_length(const ExtractorConfig& config, double h_per_bit) {
  config.validate();
  if (!(h_per_bit >= 0.0 && h_per_bit <= 1.0))
    throw ValidationError("output_length: entropy rate must lie in [0, 1]");
  const double budget = static_cast<double>(config.n) * h_per_bit;
  double m = 0.0;
  switch (config.sizing_mode) {
    case SizingMode::LHL:
      m = std::floor(budget - 2.0 * std::log2(1.0 / config.epsilon_hash));
      break;
    case SizingMode::PAPER_MATCH:
      m = std::floor(budget);
      break;
  }
  m = std::clamp(m, 0.0, static_cast<double>(config.n));
  return static_cast<size_t>(m);
}

BitBuffer xor_extract(const BitBuffer& bits) {
  BitBuffer out = bits;
  if (out.size() % 2 == 1) out.truncate(out.size() - 1);
  const size_t n = out.size();
  out.xor_with(out.reversed());
  out.truncate(n / 2);
  return out;
}

BitBuffer toeplitz_extract(const BitBuffer& block, const BitBuffer& seed,
                           size_t m) {
  const size_t n = block.size();
  if (m > n) throw ValidationError("toeplitz: m must not exceed n");
  if (seed.size() != n + m - 1 || n == 0)
    throw ValidationError("toeplitz: seed must hold exactly n+m-1 bits");

  // out[i] = sum_j seed[n-1+i-j] * block[j] is coefficient n-1+i of the
  // polynomial product seed(x) * block(x) over GF(2).
  const std::vector<uint64_t> a = poly_words(seed);
  const std::vector<uint64_t> b = poly_words(block);
  std::vector<uint64_t> conv(a.size() + b.size(), 0);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    for (size_t j = 0; j < b.size(); ++j) {
      if (b[j] == 0) continue;
      const uint128 p = clmul64(a[i], b[j]);
      conv[i + j] ^= static_cast<uint64_t>(p);
      conv[i + j + 1] ^= static_cast<uint64_t>(p >> 64);
    }
  }

  BitBuffer out;
  out.reserve_bits(m);
  for (size_t taken = 0; taken < m; taken += 64) {
    const uint64_t w = poly_window(conv, n - 1 + taken);
    const unsigned take = static_cast<unsigned>(std::min<size_t>(64, m - taken));
    out.append_msb_word(bitreverse64(w), take);
  }
  return out;
}

BitBuffer toeplitz_extract_reference(const BitBuffer& block,
                                     const BitBuffer& seed, size_t m) {
  const size_t n = block.size();
  if (m > n) throw ValidationError("toeplitz: m must not exceed n");
  if (seed.size() != n + m - 1 || n == 0)
    throw ValidationError("toeplitz: seed must hold exactly n+m-1 bits");
  BitBuffer out;
  for (size_t i = 0; i < m; ++i) {
    bool acc = false;
    for (size_t j = 0; j < n; ++j)
      acc ^= seed.bit(n - 1 + i - j) && block.bit(j);
    out.append_bit(acc);
  }
  return out;
}

ToeplitzSeed ToeplitzSeed::from_bits(BitBuffer bits) {
  if (bits.size() != kKeyBits)
    throw ValidationError("toeplitz key must hold exactly 511 bits");
  ToeplitzSeed seed;
  seed.key = std::move(bits);
  return seed;
}

ToeplitzSeed ToeplitzSeed::from_hex(const std::string& hex) {
  std::string clean;
  clean.reserve(hex.size());
  for (char c : hex)
    if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean += c;
  if (clean.size() != 128)
    throw ValidationError("toeplitz key: expected 128 hex characters");
  std::vector<uint8_t> bytes(64);
  for (size_t i = 0; i < 64; ++i) {
    const int hi = hex_nibble(clean[2 * i]);
    const int lo = hex_nibble(clean[2 * i + 1]);
    if (hi < 0 || lo < 0)
      throw ValidationError("toeplitz key: invalid hex character");
    bytes[i] = static_cast<uint8_t>(hi << 4 | lo);
  }
  if (bytes[63] & 1)
    throw ValidationError("toeplitz key: the 512th bit must be zero");
  return from_bits(BitBuffer::from_packed(std::move(bytes), kKeyBits));
}

ToeplitzSeed ToeplitzSeed::random(uint64_t seed_value) {
  Xoshiro256pp rng(derive_subseed(seed_value, 0x5EED));
  BitBuffer bits;
  for (int w = 0; w < 8; ++w)
    bits.append_msb_word(rng(), w == 7 ? 63 : 64);
  return from_bits(std::move(bits));
}

std::string ToeplitzSeed::to_hex() const {
  static const char* kDigits = "0123456789abcdef";
  std::string out;
  out.reserve(128);
  for (uint8_t b : key.bytes()) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xF];
  }
  return out;
}

ToeplitzSeed read_key_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open key file " + path);
  std::string line;
  std::getline(in, line);
  return ToeplitzSeed::from_hex(line);
}

void write_key_file(const std::string& path, const ToeplitzSeed& seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open key file " + path + " for writing");
  out << seed.to_hex() << '\n';
  out.flush();
  if (!out) throw IoError("write failure on key file " + path);
}

ToeplitzStreamResult toeplitz_stream(const BitBuffer& bits,
                                     const ToeplitzSeed& master,
                                     const ExtractorConfig& config,
                                     int threads) {
  config.validate();
  if (master.key.size() != ToeplitzSeed::kKeyBits)
    throw ValidationError("toeplitz key must hold exactly 511 bits");
  const size_t n = config.n;
  const size_t blocks = bits.size() / n;
  if (blocks == 0)
    throw ValidationError("toeplitz_stream: input shorter than one block");

  ToeplitzStreamResult result;
  result.entropy = min_entropy(bits, 1, EntropyFormula::STANDARD);
  result.block_length = n;
  result.output_per_block = output_length(config, result.entropy.h_per_symbol);
  result.block_count = blocks;
  const size_t m = result.output_per_block;
  if (m == 0)
    throw ValidationError(
        "toeplitz_stream: non-extractable stream (estimated min-entropy too "
        "low for the configured epsilon)");
  if (n + m - 1 > ToeplitzSeed::kKeyBits)
    throw ValidationError(
        "toeplitz_stream: block length needs more key bits than the 511-bit "
        "master provides");

  const BitBuffer seed = slice(master.key, 0, n + m - 1);

  int workers = threads > 0 ? threads
                            : static_cast<int>(std::max(
                                  1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(std::clamp(workers, 1, 8)), blocks));

  std::vector<BitBuffer> partial(workers);
  auto run_range = [&](int worker, size_t begin, size_t end) {
    BitBuffer& local = partial[worker];
    local.reserve_bits((end - begin) * m);
    for (size_t k = begin; k < end; ++k) {
      const BitBuffer block = slice(bits, k * n, n);
      local.append(toeplitz_extract(block, seed, m));
    }
  };

  if (workers == 1) {
    run_range(0, 0, blocks);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const size_t per = (blocks + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const size_t begin = per * w;
      const size_t end = std::min(blocks, begin + per);
      if (begin >= end) break;
      pool.emplace_back(run_range, w, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  result.bits.reserve_bits(blocks * m);
  for (const BitBuffer& part : partial) result.bits.append(part);
  return result;
}

}  // namespace qrng
