#pragma once

#include <cstdint>
#include <string>

#include "qrng/bitbuffer.hpp"

namespace qrng {

/// How the guessing probability turns into an entropy figure.  STANDARD is
/// h = -log2(p_g); PAPER_FORMULA doubles it (kept for comparison runs, it can
/// exceed one bit per bit and must not drive extraction sizing).
enum class EntropyFormula { STANDARD, PAPER_FORMULA };

struct MinEntropyEstimate {
  double p_g = 1.0;          // max empirical symbol frequency
  double h_per_symbol = 0.0;  // bits of min-entropy per symbol
  int symbol_width = 1;       // bits per symbol (1 or 8)
  size_t sample_count = 0;
};

/// Estimates p_g as the largest empirical symbol frequency.  Requires at
/// least 100 symbols; width 1 matches the per-bit rate the sizing rule needs,
/// width 8 is a byte-level diagnostic.
MinEntropyEstimate min_entropy(const BitBuffer& bits, int symbol_width,
                               EntropyFormula formula = EntropyFormula::STANDARD);

/// LHL sizes the output with the full leftover-hash penalty; PAPER_MATCH
/// keeps every estimated entropy bit and reproduces the ~0.5% loss figure on
/// near-ideal streams.
enum class SizingMode { LHL, PAPER_MATCH };

struct ExtractorConfig {
  size_t n = 256;                    // input block length in bits
  double epsilon_hash = 0x1p-50;     // statistical distance bound
  SizingMode sizing_mode = SizingMode::LHL;

  void validate() const;
};

/// Output bits per block for a given per-bit min-entropy rate (0..1):
/// LHL: floor(n*h - 2*log2(1/eps)), clamped to [0, n]; PAPER_MATCH:
/// floor(n*h).
size_t output_length(const ExtractorConfig& config, double h_per_bit);

/// Folds the sequence onto itself: out[i] = in[i] XOR in[N-1-i] for the first
/// half; an odd trailing bit is dropped first.  Halves the length and squares
/// the bias (delta -> 2*delta^2 for i.i.d. input).
BitBuffer xor_extract(const BitBuffer& bits);

/// Multiplies the block by the m x n Toeplitz matrix T[i][j] = seed[n-1+i-j]
/// over GF(2).  `seed` must hold exactly n+m-1 bits.  The fast path runs a
/// carry-less convolution; `toeplitz_extract_reference` is the plain
/// row-by-row multiply the fast path must match bit for bit.
BitBuffer toeplitz_extract(const BitBuffer& block, const BitBuffer& seed,
                           size_t m);
BitBuffer toeplitz_extract_reference(const BitBuffer& block,
                                     const BitBuffer& seed, size_t m);

/// Fixed 511-bit master key; each stream uses its first (n-1)+m bits.
struct ToeplitzSeed {
  static constexpr size_t kKeyBits = 511;

  BitBuffer key;

  static ToeplitzSeed from_bits(BitBuffer bits);
  /// One line of 128 hex characters = 512 bits, most-significant digit
  /// first; the final (512th) bit must be zero and is not part of the key.
  static ToeplitzSeed from_hex(const std::string& hex);
  static ToeplitzSeed random(uint64_t seed);

  std::string to_hex() const;
};

ToeplitzSeed read_key_file(const std::string& path);
void write_key_file(const std::string& path, const ToeplitzSeed& seed);

struct ToeplitzStreamResult {
  BitBuffer bits;
  MinEntropyEstimate entropy;  // width-1 estimate that fixed the sizing
  size_t block_length = 0;     // n
  size_t output_per_block = 0; // m
  size_t block_count = 0;      // full blocks processed (partial tail dropped)
};

/// Splits the input into n-bit blocks (dropping a partial tail), sizes m once
/// from the stream-level min-entropy estimate, and extracts every block with
/// the shared seed prefix.  Blocks are processed in parallel; the output
/// order always matches the input block order.
ToeplitzStreamResult toeplitz_stream(const BitBuffer& bits,
                                     const ToeplitzSeed& master,
                                     const ExtractorConfig& config,
                                     int threads = 0);

}  // namespace qrng
