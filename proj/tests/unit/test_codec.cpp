#include <gtest/gtest.h>

#include <variant>

#include "support/generators.hpp"
#include "traitwave/codec.hpp"

using namespace traitwave;
using namespace traitwave::codec;
using tw_test::random_bytes;
using tw_test::random_rows;

namespace {

DecodeResult decode_all(const Bytes& bytes) { return decode_stream(bytes, {}); }

}  // namespace

TEST(Checksum, ComplementOfLowByteOfSum) {
  const Bytes payload{0x02, 0x14};
  EXPECT_EQ(checksum(payload), tw_test::oracle_checksum(payload));
  EXPECT_EQ(checksum(payload), 0xE9);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_bytes(rng, 1 + rng.below(169));
    EXPECT_EQ(checksum(p), tw_test::oracle_checksum(p));
  }
}

TEST(Encode, PoorSignalPacketBytes) {
  const DataRow row{kCodePoorSignal, 0, {0x14}};
  EXPECT_EQ(encode_packet(row), (Bytes{0xAA, 0xAA, 0x02, 0x02, 0x14, 0xE9}));
}

TEST(Encode, EmptyRowListRejected) {
  try {
    encode_packet(std::span<const DataRow>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PayloadTooSmall);
  }
}

TEST(Encode, EegPowerBigEndianLayout) {
  BandPowerRow bands;
  bands.bands[0] = 42;
  const auto payload = encode_payload(std::vector{eeg_power_row(bands)});
  ASSERT_EQ(payload.size(), 26u);
  EXPECT_EQ(payload[0], 0x83);
  EXPECT_EQ(payload[1], 0x18);
  EXPECT_EQ(payload[2], 0x00);
  EXPECT_EQ(payload[3], 0x00);
  EXPECT_EQ(payload[4], 0x2A);
  for (std::size_t i = 5; i < payload.size(); ++i) EXPECT_EQ(payload[i], 0) << i;
}

TEST(Encode, PayloadTooLarge) {
  std::vector<DataRow> rows(2, DataRow{0x90, 0, Bytes(90, 1)});
  try {
    encode_packet(rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PayloadTooLarge);
  }
  // 169 bytes is the largest legal payload: code + length + 167 value bytes.
  const DataRow fits{0x90, 0, Bytes(167, 7)};
  const auto packet = encode_packet(fits);
  EXPECT_EQ(packet[2], 169);
  const DataRow over{0x90, 0, Bytes(168, 7)};
  EXPECT_THROW(encode_packet(over), Error);
}

TEST(Encode, InvalidRowsRejected) {
  EXPECT_THROW(encode_packet(DataRow{0x02, 0, {1, 2}}), Error);
  EXPECT_THROW(encode_packet(DataRow{0x55, 0, {1}}), Error);
}

TEST(Decode, RoundTripRandomPackets) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto rows = random_rows(rng);
    const auto r = decode_all(encode_packet(rows));
    EXPECT_TRUE(r.errors.empty());
    EXPECT_EQ(rows_of(r.events), rows);
  }
}

TEST(Decode, InterpretsKnownCodes) {
  BandPowerRow bands;
  for (std::size_t b = 0; b < kNumBands; ++b) bands.bands[b] = static_cast<std::uint32_t>(1000 * b + 7);
  bands.bands[7] = kMaxBandValue;
  const std::vector<DataRow> rows{{kCodePoorSignal, 0, {200}}, {kCodeAttention, 0, {55}},
                                  {kCodeMeditation, 0, {100}}, {kCodeRawWave, 0, {0xFF, 0x38}},
                                  eeg_power_row(bands)};
  const auto r = decode_all(encode_packet(rows));
  ASSERT_EQ(r.events.size(), 5u);
  EXPECT_EQ(std::get<event::PoorSignal>(r.events[0]).level, 200);
  EXPECT_EQ(std::get<event::Attention>(r.events[1]).value, 55);
  EXPECT_EQ(std::get<event::Meditation>(r.events[2]).value, 100);
  EXPECT_EQ(std::get<event::RawWave>(r.events[3]).sample, -200);
  EXPECT_EQ(std::get<event::EegPower>(r.events[4]).row.bands, bands.bands);
}

TEST(Decode, OutOfRangeAndUnknownCodesKeptVerbatim) {
  const std::vector<DataRow> rows{{kCodePoorSignal, 0, {201}}, {kCodeAttention, 0, {101}},
                                  {0x16, 0, {9}}, {kCodeEegPower, 0, Bytes(5, 1)}, {0x02, 1, {3}}};
  const auto r = decode_all(encode_packet(rows));
  ASSERT_EQ(r.events.size(), rows.size());
  for (const auto& ev : r.events) EXPECT_TRUE(std::holds_alternative<event::Unknown>(ev));
  EXPECT_EQ(rows_of(r.events), rows);
}

TEST(Decode, LastByteFlippedIsBadChecksum) {
  auto packet = encode_packet(DataRow{kCodePoorSignal, 0, {0x14}});
  packet.back() ^= 0xFF;
  const auto r = decode_all(packet);
  EXPECT_TRUE(r.events.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0], (FrameError{FrameErrorKind::BadChecksum, 0}));
}

TEST(Decode, EverySingleBitFlipInPayloadOrChecksumDetected) {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto rows = random_rows(rng);
    const auto packet = encode_packet(rows);
    for (std::size_t byte = 3; byte < packet.size(); ++byte)
      for (int bit = 0; bit < 8; ++bit) {
        auto bad = packet;
        bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
        const auto r = decode_all(bad);
        ASSERT_FALSE(r.errors.empty());
        EXPECT_EQ(r.errors[0], (FrameError{FrameErrorKind::BadChecksum, 0}));
        EXPECT_NE(rows_of(r.events), rows);
      }
  }
}

TEST(Decode, BadLengthThenResync) {
  const auto good = encode_packet(DataRow{kCodeAttention, 0, {40}});
  Bytes stream{0xAA, 0xAA, 0xC8, 0x01, 0x02};
  stream.insert(stream.end(), good.begin(), good.end());
  const auto r = decode_all(stream);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0], (FrameError{FrameErrorKind::BadLength, 0}));
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(std::get<event::Attention>(r.events[0]).value, 40);
}

TEST(Decode, MalformedPayloadReported) {
  // Valid checksum, but the 0x90 row claims 5 value bytes and only 1 follows.
  const Bytes payload{0x90, 0x05, 0x01};
  Bytes stream{0xAA, 0xAA, 0x03};
  stream.insert(stream.end(), payload.begin(), payload.end());
  stream.push_back(tw_test::oracle_checksum(payload));
  const auto r = decode_all(stream);
  EXPECT_TRUE(r.events.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].kind, FrameErrorKind::MalformedPayload);
}

TEST(Decode, ZeroLengthFrameYieldsNothing) {
  const auto r = decode_all(Bytes{0xAA, 0xAA, 0x00, 0xFF});
  EXPECT_TRUE(r.events.empty());
  EXPECT_TRUE(r.errors.empty());
}

TEST(Decode, LongSyncRunsAccepted) {
  const auto good = encode_packet(DataRow{kCodeMeditation, 0, {12}});
  Bytes stream{0xAA, 0xAA, 0xAA};
  stream.insert(stream.end(), good.begin(), good.end());
  const auto r = decode_all(stream);
  EXPECT_TRUE(r.errors.empty());
  ASSERT_EQ(r.events.size(), 1u);
}

TEST(Decode, PacketInNoiseMatchesBruteForceScan) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto rows = random_rows(rng);
    const auto packet = encode_packet(rows);
    auto stream = random_bytes(rng, 100);
    const std::size_t at = stream.size();
    stream.insert(stream.end(), packet.begin(), packet.end());
    const auto tail = random_bytes(rng, 100);
    stream.insert(stream.end(), tail.begin(), tail.end());

    const auto frames = tw_test::oracle_scan(stream);
    bool oracle_found = false;
    for (const auto& f : frames) oracle_found |= f.offset == at;
    ASSERT_TRUE(oracle_found);

    const auto got = rows_of(decode_all(stream).events);
    EXPECT_NE(std::search(got.begin(), got.end(), rows.begin(), rows.end()), got.end());
  }
}

TEST(Decode, ChunkedEqualsWhole) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Bytes stream;
    for (int k = 0; k < 20; ++k) {
      const auto p = encode_packet(random_rows(rng));
      stream.insert(stream.end(), p.begin(), p.end());
      if (rng.bernoulli(0.3)) {
        const auto noise = random_bytes(rng, rng.below(30));
        stream.insert(stream.end(), noise.begin(), noise.end());
      }
    }
    const auto whole = decode_all(stream);
    for (std::size_t chunk : {std::size_t{1}, std::size_t{2}, std::size_t{7}, 1 + rng.below(64)}) {
      StreamDecoder dec;
      std::vector<ParsedEvent> events;
      std::vector<FrameError> errors;
      for (std::size_t pos = 0; pos < stream.size(); pos += chunk) {
        const auto n = std::min(chunk, stream.size() - pos);
        auto r = dec.feed(std::span(stream).subspan(pos, n));
        events.insert(events.end(), r.events.begin(), r.events.end());
        errors.insert(errors.end(), r.errors.begin(), r.errors.end());
      }
      EXPECT_EQ(events, whole.events) << "chunk " << chunk;
      EXPECT_EQ(errors, whole.errors) << "chunk " << chunk;
      EXPECT_EQ(dec.state(), whole.state);
    }
  }
}

TEST(Decode, TruncatedFrameReportedByFinish) {
  const auto packet = encode_packet(DataRow{kCodeAttention, 0, {9}});
  Bytes stream{0x01, 0x02};
  stream.insert(stream.end(), packet.begin(), packet.end() - 2);
  const auto r = decode_all(stream);
  EXPECT_TRUE(r.events.empty());
  EXPECT_TRUE(r.errors.empty());
  const auto tail = finish(r.state);
  ASSERT_EQ(tail.size(), 1u);
  EXPECT_EQ(tail[0], (FrameError{FrameErrorKind::Truncated, 2}));

  // Completing the frame later recovers it.
  const auto rest = decode_stream(std::span(packet).subspan(packet.size() - 2), r.state);
  EXPECT_EQ(rest.events.size(), 1u);
  EXPECT_TRUE(finish(rest.state).empty());
}

TEST(Decode, ErrorOffsetsAreStreamPositions) {
  const auto good = encode_packet(DataRow{kCodeAttention, 0, {1}});
  auto bad = good;
  bad.back() ^= 1;
  Bytes stream = good;
  stream.push_back(0x00);
  stream.insert(stream.end(), bad.begin(), bad.end());
  StreamDecoder dec;
  std::vector<FrameError> errors;
  for (auto b : stream) {
    auto r = dec.feed(std::span(&b, 1));
    errors.insert(errors.end(), r.errors.begin(), r.errors.end());
  }
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].offset, good.size() + 1);
}

TEST(Capture, FileRoundTrip) {
  const auto dir = tw_test::scratch_dir("codec_capture");
  Rng rng(2);
  Bytes stream;
  for (int i = 0; i < 10; ++i) {
    const auto p = encode_packet(random_rows(rng));
    stream.insert(stream.end(), p.begin(), p.end());
  }
  write_capture(dir / "a.tgr", stream);
  EXPECT_EQ(read_capture(dir / "a.tgr"), stream);
  EXPECT_THROW(read_capture(dir / "missing.tgr"), Error);
}
