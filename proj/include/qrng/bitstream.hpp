#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrng/bitbuffer.hpp"
#include "qrng/photonics.hpp"

namespace qrng {

/// Fixed assignment of a bit pattern (width 1..3) to each detector channel.
///
/// Patterns are emitted most-significant bit first, so channel 2 in the
/// default two-bit map contributes "10" to the output stream.
struct CommitmentMap {
  int width = 2;
  /// pattern_by_channel[ch] is the pattern value for channel ch, or -1 when
  /// the channel has no assignment (clicks on it are a validation error).
  std::vector<int> pattern_by_channel;

  /// Four channels -> 00, 01, 10, 11.  The leading bit distinguishes the two
  /// second-stage splitter branches, the trailing bit the detector within a
  /// branch, i.e. the tree-path reading of the network.
  static CommitmentMap two_bit();

  /// One output bit per click.  Two channels map to 0 and 1 directly; four
  /// channels map to their branch bit (channels 0,1 -> 0; channels 2,3 -> 1).
  static CommitmentMap one_bit(int channel_count);

  static CommitmentMap from_patterns(int width, std::vector<int> patterns);

  bool maps(int channel) const {
    return channel >= 0 &&
           channel < static_cast<int>(pattern_by_channel.size()) &&
           pattern_by_channel[channel] >= 0;
  }

  void validate() const;
};

/// Multi-detection guard.  Events whose timestamps fall within `width_ps` of
/// the first event of the current group are treated as one detection group;
/// groups with two or more events are discarded entirely.  Width 0 disables
/// the guard.
struct CoincidenceWindow {
  double width_ps = 0.0;
};

/// Converts a sorted time-tag stream into packed bits via the commitment map.
/// Throws ValidationError (with the record index) on a click from a channel
/// the map does not cover, or if the stream is not sorted.
BitBuffer assign_bits(const TimeTagStream& stream, const CommitmentMap& map,
                      CoincidenceWindow window = {});

/// Binary time-tag interchange format ("PTTG", version 1): header with the
/// channel count and record count, then (u8 channel, u64 timestamp) records,
/// little-endian, timestamps in 4-ps units.
void write_timetags(const std::string& path, const TimeTagStream& stream);
TimeTagStream read_timetags(const std::string& path);

/// CSV flavour of the same data: header line "channel,timestamp_4ps", one
/// record per line.  The channel count is inferred from the data.
void write_timetags_csv(const std::string& path, const TimeTagStream& stream);
TimeTagStream read_timetags_csv(const std::string& path);

/// Packed bit file ("QBIT", version 1): u64 bit length header followed by the
/// MSB-first payload; pad bits in the final byte must be zero.
void write_bits(const std::string& path, const BitBuffer& bits);
BitBuffer read_bits(const std::string& path);

}  // namespace qrng
