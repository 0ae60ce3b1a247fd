#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qrng/bitbuffer.hpp"
#include "qrng/bitstream.hpp"
#include "qrng/errors.hpp"
#include "qrng/rng.hpp"

using namespace qrng;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("qrng_bitstream_" + name))
      .string();
}

TimeTagStream make_stream(uint8_t channels,
                          std::vector<TimeTag> tags) {
  TimeTagStream s;
  s.channel_count = channels;
  s.tags = std::move(tags);
  return s;
}

std::string bit_string(const BitBuffer& bits) {
  std::string s;
  for (size_t i = 0; i < bits.size(); ++i) s += bits.bit(i) ? '1' : '0';
  return s;
}

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

void dump(const std::string& path, const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST_CASE("two-bit commitment encodes channels in click order") {
  const auto stream = make_stream(
      4, {{0, 100}, {3, 200}, {1, 300}});
  const BitBuffer bits = assign_bits(stream, CommitmentMap::two_bit());
  CHECK(bit_string(bits) == "001101");
}

TEST_CASE("one-bit commitment maps pairs and tree branches") {
  const auto two_ch = make_stream(2, {{0, 1}, {1, 2}, {1, 3}, {0, 4}});
  CHECK(bit_string(assign_bits(two_ch, CommitmentMap::one_bit(2))) == "0110");

  const auto four_ch = make_stream(4, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  CHECK(bit_string(assign_bits(four_ch, CommitmentMap::one_bit(4))) == "0011");

  CHECK_THROWS_AS(CommitmentMap::one_bit(3), ValidationError);
}

TEST_CASE("custom patterns emit their full width per click") {
  const CommitmentMap map = CommitmentMap::from_patterns(3, {0b101, 0b010});
  const auto stream = make_stream(2, {{0, 10}, {1, 20}});
  CHECK(bit_string(assign_bits(stream, map)) == "101010");
}

TEST_CASE("complementing the patterns complements the bits") {
  const auto stream = make_stream(4, {{2, 5}, {0, 9}, {3, 12}, {1, 30}});
  const BitBuffer plain = assign_bits(stream, CommitmentMap::two_bit());
  const BitBuffer flipped =
      assign_bits(stream, CommitmentMap::from_patterns(2, {3, 2, 1, 0}));
  REQUIRE(plain.size() == flipped.size());
  for (size_t i = 0; i < plain.size(); ++i)
    CHECK(plain.bit(i) != flipped.bit(i));
}

TEST_CASE("commitment maps are validated") {
  CHECK_THROWS_AS(CommitmentMap::from_patterns(0, {0}), ValidationError);
  CHECK_THROWS_AS(CommitmentMap::from_patterns(4, {0}), ValidationError);
  CHECK_THROWS_AS(CommitmentMap::from_patterns(2, {4, 0}), ValidationError);
  CHECK_THROWS_AS(CommitmentMap::from_patterns(1, {-1, -1}), ValidationError);
}

TEST_CASE("a zero window keeps simultaneous clicks") {
  const auto stream = make_stream(4, {{0, 500}, {1, 500}, {2, 500}});
  const BitBuffer bits = assign_bits(stream, CommitmentMap::two_bit(),
                                     CoincidenceWindow{0.0});
  CHECK(bit_string(bits) == "000110");
}

TEST_CASE("clicks two ticks apart die inside a 20 ps window") {
  const auto stream = make_stream(4, {{0, 1000}, {1, 1002}});
  const BitBuffer bits = assign_bits(stream, CommitmentMap::two_bit(),
                                     CoincidenceWindow{20.0});
  CHECK(bits.size() == 0);
}

TEST_CASE("coincidence groups are anchored at their first click") {
  // 0 ps, 16 ps, 36 ps: the third click is 20 ps after the second but
  // 36 ps after the group anchor, so it starts a fresh group and survives.
  const auto stream = make_stream(4, {{0, 0}, {1, 4}, {2, 9}});
  const BitBuffer bits = assign_bits(stream, CommitmentMap::two_bit(),
                                     CoincidenceWindow{20.0});
  CHECK(bit_string(bits) == "10");
}

TEST_CASE("discarded clicks are still validated") {
  TimeTagStream stream = make_stream(4, {{0, 1000}, {1, 1002}});
  stream.tags[1].channel = 9;
  stream.channel_count = 10;
  try {
    assign_bits(stream, CommitmentMap::two_bit(), CoincidenceWindow{20.0});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
}

TEST_CASE("unsorted streams and negative windows are rejected") {
  const auto unsorted = make_stream(4, {{0, 10}, {1, 5}});
  CHECK_THROWS_AS(assign_bits(unsorted, CommitmentMap::two_bit()),
                  ValidationError);
  const auto ok = make_stream(4, {{0, 10}});
  CHECK_THROWS_AS(
      assign_bits(ok, CommitmentMap::two_bit(), CoincidenceWindow{-1.0}),
      ValidationError);
}

TEST_CASE("an empty stream produces no bits") {
  const auto stream = make_stream(4, {});
  CHECK(assign_bits(stream, CommitmentMap::two_bit()).size() == 0);
}

TEST_CASE("binary time-tag files round-trip") {
  Xoshiro256pp rng(42);
  TimeTagStream stream;
  stream.channel_count = 4;
  uint64_t ts = 0;
  for (int i = 0; i < 10000; ++i) {
    ts += 1 + (rng() % 1000);
    stream.tags.push_back({static_cast<uint8_t>(rng() % 4), ts});
  }
  const std::string path = temp_path("roundtrip.pttg");
  write_timetags(path, stream);
  const TimeTagStream loaded = read_timetags(path);
  CHECK(loaded.channel_count == 4);
  CHECK(loaded.resolution_ps == doctest::Approx(4.0));
  REQUIRE(loaded.tags.size() == stream.tags.size());
  for (size_t i = 0; i < stream.tags.size(); ++i) {
    CHECK(loaded.tags[i].channel == stream.tags[i].channel);
    CHECK(loaded.tags[i].timestamp == stream.tags[i].timestamp);
  }
  std::filesystem::remove(path);
}

TEST_CASE("binary time-tag files are validated on read") {
  const auto stream = make_stream(2, {{0, 100}, {1, 200}});
  const std::string path = temp_path("corrupt.pttg");
  write_timetags(path, stream);
  const std::vector<unsigned char> good = slurp(path);

  SUBCASE("bad magic") {
    auto bad = good;
    bad[0] = 'X';
    dump(path, bad);
    CHECK_THROWS_AS(read_timetags(path), IoError);
  }
  SUBCASE("unsupported version") {
    auto bad = good;
    bad[4] = 2;
    dump(path, bad);
    CHECK_THROWS_AS(read_timetags(path), IoError);
  }
  SUBCASE("truncated record payload") {
    auto bad = good;
    bad.pop_back();
    dump(path, bad);
    CHECK_THROWS_AS(read_timetags(path), IoError);
  }
  SUBCASE("trailing bytes") {
    auto bad = good;
    bad.push_back(0);
    dump(path, bad);
    CHECK_THROWS_AS(read_timetags(path), IoError);
  }
  SUBCASE("channel beyond the declared count") {
    auto bad = good;
    bad[14] = 7;  // first record's channel byte
    dump(path, bad);
    CHECK_THROWS_AS(read_timetags(path), IoError);
  }
  SUBCASE("timestamps out of order") {
    auto bad = good;
    bad[15] = 0xFF;  // bump the first timestamp above the second
    bad[16] = 0xFF;
    dump(path, bad);
    try {
      read_timetags(path);
      FAIL("expected an I/O error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("record 1") != std::string::npos);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("missing files raise I/O errors") {
  CHECK_THROWS_AS(read_timetags(temp_path("nonexistent.pttg")), IoError);
  CHECK_THROWS_AS(read_timetags_csv(temp_path("nonexistent.csv")), IoError);
  CHECK_THROWS_AS(read_bits(temp_path("nonexistent.qbit")), IoError);
}

TEST_CASE("writers pin the 4 ps resolution") {
  TimeTagStream stream = make_stream(2, {{0, 1}});
  stream.resolution_ps = 8.0;
  CHECK_THROWS_AS(write_timetags(temp_path("res.pttg"), stream),
                  ValidationError);
  CHECK_THROWS_AS(write_timetags_csv(temp_path("res.csv"), stream),
                  ValidationError);
}

TEST_CASE("CSV time tags round-trip and parse plain records") {
  const auto stream = make_stream(3, {{0, 100}, {2, 1250}, {1, 2000}});
  const std::string path = temp_path("tags.csv");
  write_timetags_csv(path, stream);

  const TimeTagStream loaded = read_timetags_csv(path);
  CHECK(loaded.channel_count == 3);
  REQUIRE(loaded.tags.size() == 3);
  CHECK(loaded.tags[1].channel == 2);
  CHECK(loaded.tags[1].timestamp == 1250);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "channel,timestamp_4ps");
  std::string first;
  std::getline(in, first);
  CHECK(first == "0,100");
  std::filesystem::remove(path);
}

TEST_CASE("CSV parsing reports malformed rows") {
  const std::string path = temp_path("bad.csv");
  SUBCASE("wrong header") {
    std::ofstream(path) << "channel,timestamp\n0,100\n";
    CHECK_THROWS_AS(read_timetags_csv(path), IoError);
  }
  SUBCASE("non-numeric field") {
    std::ofstream(path) << "channel,timestamp_4ps\n0,abc\n";
    CHECK_THROWS_AS(read_timetags_csv(path), IoError);
  }
  SUBCASE("missing column") {
    std::ofstream(path) << "channel,timestamp_4ps\n0\n";
    CHECK_THROWS_AS(read_timetags_csv(path), IoError);
  }
  SUBCASE("unsorted timestamps") {
    std::ofstream(path) << "channel,timestamp_4ps\n0,100\n1,50\n";
    CHECK_THROWS_AS(read_timetags_csv(path), IoError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("bit files store whole bytes with zero padding") {
  BitBuffer bits;
  for (int i = 0; i < 9; ++i) bits.append_bit(i % 2 == 0);  // 101010101
  const std::string path = temp_path("nine.qbit");
  write_bits(path, bits);

  const std::vector<unsigned char> data = slurp(path);
  REQUIRE(data.size() == 15);  // 4 magic + 1 version + 8 length + 2 payload
  CHECK(data[0] == 'Q');
  CHECK(data[13] == 0xAA);
  CHECK(data[14] == 0x80);

  const BitBuffer loaded = read_bits(path);
  CHECK(loaded == bits);
  std::filesystem::remove(path);
}

TEST_CASE("random bit buffers round-trip exactly") {
  Xoshiro256pp rng(77);
  for (size_t length : {0ULL, 1ULL, 7ULL, 64ULL, 10000ULL}) {
    BitBuffer bits;
    for (size_t i = 0; i < length; ++i) bits.append_bit(rng.bernoulli(0.5));
    const std::string path = temp_path("rand.qbit");
    write_bits(path, bits);
    CHECK(read_bits(path) == bits);
    std::filesystem::remove(path);
  }
}

TEST_CASE("bit files are validated on read") {
  BitBuffer bits;
  for (int i = 0; i < 12; ++i) bits.append_bit(true);
  const std::string path = temp_path("corrupt.qbit");
  write_bits(path, bits);
  const std::vector<unsigned char> good = slurp(path);

  SUBCASE("bad magic") {
    auto bad = good;
    bad[1] = 'x';
    dump(path, bad);
    CHECK_THROWS_AS(read_bits(path), IoError);
  }
  SUBCASE("unsupported version") {
    auto bad = good;
    bad[4] = 9;
    dump(path, bad);
    CHECK_THROWS_AS(read_bits(path), IoError);
  }
  SUBCASE("truncated payload") {
    auto bad = good;
    bad.pop_back();
    dump(path, bad);
    CHECK_THROWS_AS(read_bits(path), IoError);
  }
  SUBCASE("trailing data") {
    auto bad = good;
    bad.push_back(0);
    dump(path, bad);
    CHECK_THROWS_AS(read_bits(path), IoError);
  }
  SUBCASE("nonzero padding") {
    auto bad = good;
    bad.back() |= 0x01;  // 12 data bits leave 4 pad bits in the last byte
    dump(path, bad);
    CHECK_THROWS_AS(read_bits(path), IoError);
  }
  std::filesystem::remove(path);
}
