#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <cstring>
#include <vector>

#include "qrng/errors.hpp"

namespace qrng {

/// Reverses the bit order of a 64-bit word (bit 63 <-> bit 0).
inline uint64_t bitreverse64(uint64_t x) {
  x = __builtin_bswap64(x);
  x = ((x & 0x0F0F0F0F0F0F0F0FULL) << 4) | ((x >> 4) & 0x0F0F0F0F0F0F0F0FULL);
  x = ((x & 0x3333333333333333ULL) << 2) | ((x >> 2) & 0x3333333333333333ULL);
  x = ((x & 0x5555555555555555ULL) << 1) | ((x >> 1) & 0x5555555555555555ULL);
  return x;
}

/// Growable bit string, packed MSB-first within each byte: bit i of the
/// stream lives in byte i/8 at bit position 7-(i%8).  Unused trailing bits
/// of the last byte are always zero, so equal buffers compare byte-equal
/// and the packed bytes can be written to disk as-is.
class BitBuffer {
 public:
  BitBuffer() = default;

  /// Takes ownership of packed bytes.  Preconditions (caller-checked):
  /// bytes.size() == (bit_length+7)/8 and trailing pad bits are zero.
  static BitBuffer from_packed(std::vector<uint8_t> bytes, size_t bit_length) {
    assert(bytes.size() == (bit_length + 7) / 8);
    BitBuffer b;
    b.data_ = std::move(bytes);
    b.len_ = bit_length;
    return b;
  }

  size_t size() const { return len_; }
  bool empty() const { return len_ == 0; }
  const std::vector<uint8_t>& bytes() const { return data_; }

  void reserve_bits(size_t bits) { data_.reserve((bits + 7) / 8); }

  bool bit(size_t i) const {
    assert(i < len_);
    return (data_[i >> 3] >> (7 - (i & 7))) & 1;
  }

  void append_bit(bool b) { append_msb_word(uint64_t(b) << 63, 1); }

  /// Appends the low `width` bits of value, most significant of those first.
  void append_bits(uint64_t value, unsigned width) {
    assert(width >= 1 && width <= 64);
    append_msb_word(value << (64 - width), width);
  }

  /// Appends the top `nbits` of w, bit 63 first.
  void append_msb_word(uint64_t w, unsigned nbits) {
    assert(nbits <= 64);
    if (nbits < 64) w &= ~0ULL << (64 - nbits);
    while (nbits > 0) {
      unsigned off = len_ & 7;
      if (off == 0) data_.push_back(0);
      unsigned take = std::min(8u - off, nbits);
      uint8_t chunk = static_cast<uint8_t>(w >> (64 - take));
      data_.back() |= static_cast<uint8_t>(chunk << (8 - off - take));
      w <<= take;
      len_ += take;
      nbits -= take;
    }
  }

  /// Bit-level concatenation (other may be unaligned relative to *this).
  void append(const BitBuffer& other) {
    size_t i = 0;
    for (; i + 64 <= other.len_; i += 64) append_msb_word(other.fetch64(i), 64);
    if (i < other.len_)
      append_msb_word(other.fetch64(i), static_cast<unsigned>(other.len_ - i));
  }

  /// The 64 bits starting at bitpos, MSB-aligned; reads past the end
  /// yield zeros.
  uint64_t fetch64(size_t bitpos) const {
    size_t byte = bitpos >> 3;
    unsigned shift = bitpos & 7;
    uint64_t hi = load_be8(byte);
    if (shift == 0) return hi;
    uint64_t next = (byte + 8 < data_.size()) ? data_[byte + 8] : 0;
    return (hi << shift) | (next >> (8 - shift));
  }

  /// Number of one bits.  Pad bits are zero, so whole-word counting is exact.
  size_t count_ones() const {
    size_t total = 0;
    size_t b = 0;
    for (; b + 8 <= data_.size(); b += 8) {
      uint64_t w;
      std::memcpy(&w, data_.data() + b, 8);
      total += __builtin_popcountll(w);
    }
    for (; b < data_.size(); ++b) total += __builtin_popcount(data_[b]);
    return total;
  }

  /// New buffer with the bits in reverse order.
  BitBuffer reversed() const {
    BitBuffer out;
    out.len_ = len_;
    out.data_.assign((len_ + 7) / 8, 0);
    size_t i = 0;
    for (; i + 64 <= len_; i += 64)
      out.store64_aligned(i, bitreverse64(fetch64(len_ - i - 64)));
    for (; i < len_; ++i)
      if (bit(len_ - 1 - i)) out.data_[i >> 3] |= uint8_t(1u << (7 - (i & 7)));
    return out;
  }

  /// In-place XOR with another buffer of the same length.
  void xor_with(const BitBuffer& other) {
    if (other.len_ != len_)
      throw ValidationError("BitBuffer::xor_with: length mismatch");
    for (size_t b = 0; b < data_.size(); ++b) data_[b] ^= other.data_[b];
  }

  /// Drops all bits at index >= new_length.
  void truncate(size_t new_length) {
    if (new_length >= len_) return;
    len_ = new_length;
    data_.resize((len_ + 7) / 8);
    unsigned tail = len_ & 7;
    if (tail != 0) data_.back() &= static_cast<uint8_t>(0xFF << (8 - tail));
  }

  /// One byte (0 or 1) per bit; convenient for scan-heavy statistics.
  std::vector<uint8_t> unpacked() const {
    std::vector<uint8_t> out(len_);
    for (size_t i = 0; i < len_; ++i) out[i] = bit(i) ? 1 : 0;
    return out;
  }

  friend bool operator==(const BitBuffer& a, const BitBuffer& b) {
    return a.len_ == b.len_ && a.data_ == b.data_;
  }
  friend bool operator!=(const BitBuffer& a, const BitBuffer& b) {
    return !(a == b);
  }

 private:
  uint64_t load_be8(size_t byte) const {
    if (byte + 8 <= data_.size()) {
      uint64_t w;
      std::memcpy(&w, data_.data() + byte, 8);
      return __builtin_bswap64(w);
    }
    uint64_t w = 0;
    for (size_t i = 0; i < 8; ++i) {
      uint8_t b = (byte + i < data_.size()) ? data_[byte + i] : 0;
      w = (w << 8) | b;
    }
    return w;
  }

  void store64_aligned(size_t bitpos, uint64_t w) {
    assert((bitpos & 7) == 0 && bitpos + 64 <= data_.size() * 8);
    w = __builtin_bswap64(w);
    std::memcpy(data_.data() + (bitpos >> 3), &w, 8);
  }

  std::vector<uint8_t> data_;
  size_t len_ = 0;
};

}  // namespace qrng
