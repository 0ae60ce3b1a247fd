#include "qrng/bitstream.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

#include "qrng/errors.hpp"

namespace qrng {

namespace {

constexpr char kTagMagic[4] = {'P', 'T', 'T', 'G'};
constexpr char kBitMagic[4] = {'Q', 'B', 'I', 'T'};
constexpr uint8_t kFormatVersion = 1;
constexpr double kTagResolutionPs = 4.0;

void store_le64(uint64_t v, unsigned char* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

uint64_t load_le64(const unsigned char* in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in[i]) << (8 * i);
  return v;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> data(static_cast<size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(data.data()), size);
  if (!in) throw IoError("read failure on " + path);
  return data;
}

void write_file(const std::string& path, const unsigned char* data,
                size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data), size);
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

void check_stream(const TimeTagStream& stream) {
  for (size_t i = 0; i < stream.tags.size(); ++i) {
    if (stream.tags[i].channel >= stream.channel_count)
      throw ValidationError("record " + std::to_string(i) +
                            ": channel out of range");
    if (i > 0 && stream.tags[i].timestamp < stream.tags[i - 1].timestamp)
      throw ValidationError("record " + std::to_string(i) +
                            ": timestamps not sorted");
  }
}

}  // namespace

CommitmentMap CommitmentMap::two_bit() {
  return from_patterns(2, {0b00, 0b01, 0b10, 0b11});
}

CommitmentMap CommitmentMap::one_bit(int channel_count) {
  if (channel_count == 2) return from_patterns(1, {0, 1});
  if (channel_count == 4) return from_patterns(1, {0, 0, 1, 1});
  throw ValidationError(
      "one-bit commitment needs 2 or 4 channels, got " +
      std::to_string(channel_count));
}

CommitmentMap CommitmentMap::from_patterns(int width,
                                           std::vector<int> patterns) {
  CommitmentMap map;
  map.width = width;
  map.pattern_by_channel = std::move(patterns);
  map.validate();
  return map;
}

void CommitmentMap::validate() const {
  if (width < 1 || width > 3)
    throw ValidationError("commitment map: pattern width must be 1..3");
  bool any_mapped = false;
  for (int p : pattern_by_channel) {
    if (p == -1) continue;
    if (p < 0 || p >= (1 << width))
      throw ValidationError("commitment map: pattern does not fit the width");
    any_mapped = true;
  }
  if (!any_mapped)
    throw ValidationError("commitment map: no channels mapped");
}

BitBuffer assign_bits(const TimeTagStream& stream, const CommitmentMap& map,
                      CoincidenceWindow window) {
  map.validate();
  if (window.width_ps < 0.0)
    throw ValidationError("coincidence window must be non-negative");

  BitBuffer out;
  out.reserve_bits(stream.tags.size() * map.width);
  auto pattern_for = [&](size_t index) {
    const TimeTag& tag = stream.tags[index];
    if (!map.maps(tag.channel))
      throw ValidationError("record " + std::to_string(index) + ": channel " +
                            std::to_string(tag.channel) +
                            " not in commitment map");
    return map.pattern_by_channel[tag.channel];
  };

  if (window.width_ps == 0.0) {
    for (size_t i = 0; i < stream.tags.size(); ++i) {
      if (i > 0 && stream.tags[i].timestamp < stream.tags[i - 1].timestamp)
        throw ValidationError("record " + std::to_string(i) +
                              ": timestamps not sorted");
      out.append_bits(static_cast<uint64_t>(pattern_for(i)), map.width);
    }
    return out;
  }

  // Groups anchor at their first event; a group of one survives, larger
  // groups are dropped whole (keeping any member would bias the output).
  size_t group_start = 0;
  size_t group_size = 0;
  uint64_t group_ts = 0;
  auto flush = [&] {
    if (group_size == 1)
      out.append_bits(static_cast<uint64_t>(pattern_for(group_start)),
                      map.width);
  };
  for (size_t i = 0; i < stream.tags.size(); ++i) {
    const uint64_t ts = stream.tags[i].timestamp;
    if (i > 0 && ts < stream.tags[i - 1].timestamp)
      throw ValidationError("record " + std::to_string(i) +
                            ": timestamps not sorted");
    pattern_for(i);  // unknown channels are an error even when discarded
    const double gap_ps =
        group_size == 0
            ? 0.0
            : static_cast<double>(ts - group_ts) * stream.resolution_ps;
    if (group_size > 0 && gap_ps <= window.width_ps) {
      ++group_size;
      continue;
    }
    flush();
    group_start = i;
    group_size = 1;
    group_ts = ts;
  }
  flush();
  return out;
}

void write_timetags(const std::string& path, const TimeTagStream& stream) {
  check_stream(stream);
  if (stream.resolution_ps != kTagResolutionPs)
    throw ValidationError(
        "time-tag files store 4-ps units; stream resolution differs");
  std::vector<unsigned char> data(14 + 9 * stream.tags.size());
  std::memcpy(data.data(), kTagMagic, 4);
  data[4] = kFormatVersion;
  data[5] = stream.channel_count;
  store_le64(stream.tags.size(), data.data() + 6);
  size_t off = 14;
  for (const TimeTag& tag : stream.tags) {
    data[off] = tag.channel;
    store_le64(tag.timestamp, data.data() + off + 1);
    off += 9;
  }
  write_file(path, data.data(), data.size());
}

TimeTagStream read_timetags(const std::string& path) {
  const std::vector<unsigned char> data = read_file(path);
  if (data.size() < 14) throw IoError(path + ": truncated header");
  if (std::memcmp(data.data(), kTagMagic, 4) != 0)
    throw IoError(path + ": bad magic");
  if (data[4] != kFormatVersion)
    throw IoError(path + ": unsupported version " + std::to_string(data[4]));

  TimeTagStream stream;
  stream.channel_count = data[5];
  stream.resolution_ps = kTagResolutionPs;
  const uint64_t records = load_le64(data.data() + 6);
  if (data.size() != 14 + 9 * records)
    throw IoError(path + ": record payload size mismatch");

  stream.tags.reserve(records);
  size_t off = 14;
  for (uint64_t i = 0; i < records; ++i, off += 9) {
    TimeTag tag{data[off], load_le64(data.data() + off + 1)};
    if (tag.channel >= stream.channel_count)
      throw IoError(path + ": record " + std::to_string(i) +
                    ": channel out of range");
    if (i > 0 && tag.timestamp < stream.tags.back().timestamp)
      throw IoError(path + ": record " + std::to_string(i) +
                    ": timestamps not sorted");
    stream.tags.push_back(tag);
  }
  return stream;
}

void write_timetags_csv(const std::string& path,
                        const TimeTagStream& stream) {
  check_stream(stream);
  if (stream.resolution_ps != kTagResolutionPs)
    throw ValidationError(
        "time-tag files store 4-ps units; stream resolution differs");
  std::string text = "channel,timestamp_4ps\n";
  text.reserve(text.size() + stream.tags.size() * 16);
  for (const TimeTag& tag : stream.tags) {
    text += std::to_string(tag.channel);
    text += ',';
    text += std::to_string(tag.timestamp);
    text += '\n';
  }
  write_file(path, reinterpret_cast<const unsigned char*>(text.data()),
             text.size());
}

TimeTagStream read_timetags_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::string line;
  if (!std::getline(in, line) || line != "channel,timestamp_4ps")
    throw IoError(path + ": missing channel,timestamp_4ps header");

  TimeTagStream stream;
  stream.resolution_ps = kTagResolutionPs;
  int max_channel = -1;
  for (uint64_t index = 0; std::getline(in, line); ++index) {
    if (line.empty()) {
      // A single trailing newline is fine; blank lines elsewhere are not.
      if (in.peek() == std::ifstream::traits_type::eof()) break;
      throw IoError(path + ": record " + std::to_string(index) +
                    ": blank line");
    }
    const char* begin = line.data();
    const char* end = begin + line.size();
    unsigned channel = 0;
    auto [comma, ec1] = std::from_chars(begin, end, channel);
    uint64_t timestamp = 0;
    if (ec1 != std::errc() || comma == end || *comma != ',' || channel > 255)
      throw IoError(path + ": record " + std::to_string(index) +
                    ": malformed line");
    auto [stop, ec2] = std::from_chars(comma + 1, end, timestamp);
    if (ec2 != std::errc() || stop != end)
      throw IoError(path + ": record " + std::to_string(index) +
                    ": malformed line");
    if (!stream.tags.empty() && timestamp < stream.tags.back().timestamp)
      throw IoError(path + ": record " + std::to_string(index) +
                    ": timestamps not sorted");
    stream.tags.push_back(TimeTag{static_cast<uint8_t>(channel), timestamp});
    max_channel = std::max(max_channel, static_cast<int>(channel));
  }
  stream.channel_count = static_cast<uint8_t>(max_channel + 1);
  return stream;
}

void write_bits(const std::string& path, const BitBuffer& bits) {
  std::vector<unsigned char> data(13 + bits.bytes().size());
  std::memcpy(data.data(), kBitMagic, 4);
  data[4] = kFormatVersion;
  store_le64(bits.size(), data.data() + 5);
  std::memcpy(data.data() + 13, bits.bytes().data(), bits.bytes().size());
  write_file(path, data.data(), data.size());
}

BitBuffer read_bits(const std::string& path) {
  const std::vector<unsigned char> data = read_file(path);
  if (data.size() < 13) throw IoError(path + ": truncated header");
  if (std::memcmp(data.data(), kBitMagic, 4) != 0)
    throw IoError(path + ": bad magic");
  if (data[4] != kFormatVersion)
    throw IoError(path + ": unsupported version " + std::to_string(data[4]));
  const uint64_t bit_length = load_le64(data.data() + 5);
  const uint64_t payload = (bit_length + 7) / 8;
  if (data.size() < 13 + payload) throw IoError(path + ": truncated payload");
  if (data.size() > 13 + payload) throw IoError(path + ": trailing data");
  if (bit_length % 8 != 0 && payload > 0) {
    const unsigned char tail = data[13 + payload - 1];
    if (tail & ((1u << (8 - bit_length % 8)) - 1))
      throw IoError(path + ": nonzero pad bits");
  }
  return BitBuffer::from_packed(
      std::vector<uint8_t>(data.begin() + 13, data.end()), bit_length);
}

}  // namespace qrng
