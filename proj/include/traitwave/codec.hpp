#pragma once

// ThinkGear-style packet framing.
//
//   [0xAA] [0xAA] [PLENGTH] [PAYLOAD ... PLENGTH bytes] [CHKSUM]
//
// PLENGTH is 0..169 (170 is the sync value; 171..255 are invalid). CHKSUM is
// the bitwise complement of the low 8 bits of the payload byte sum. The
// payload is a run of data rows:
//
//   [0x55 x EXCODE] [CODE] [VLENGTH if CODE >= 0x80] [VALUE ...]
//
// Codes below 0x80 carry exactly one value byte. The decoder is incremental
// and never fails: corrupt regions are reported as FrameError values and the
// scan resumes at the byte after the offending sync run.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "traitwave/core.hpp"

namespace traitwave::codec {

inline constexpr std::uint8_t kSync = 0xAA;
inline constexpr std::uint8_t kExcode = 0x55;
inline constexpr std::size_t kMaxPayload = 169;

inline constexpr std::uint8_t kCodePoorSignal = 0x02;
inline constexpr std::uint8_t kCodeAttention = 0x04;
inline constexpr std::uint8_t kCodeMeditation = 0x05;
inline constexpr std::uint8_t kCodeRawWave = 0x80;
inline constexpr std::uint8_t kCodeEegPower = 0x83;
inline constexpr std::size_t kEegPowerLength = 3 * kNumBands;

using Bytes = std::vector<std::uint8_t>;

struct DataRow {
  std::uint8_t code = 0;
  std::uint8_t excode_count = 0;
  Bytes value;

  bool operator==(const DataRow&) const = default;
};

inline std::uint8_t checksum(std::span<const std::uint8_t> payload) {
  unsigned sum = 0;
  for (auto b : payload) sum += b;
  return static_cast<std::uint8_t>(~sum & 0xFFu);
}

namespace event {
struct PoorSignal {
  std::uint8_t level;
  bool operator==(const PoorSignal&) const = default;
};
struct Attention {
  std::uint8_t value;
  bool operator==(const Attention&) const = default;
};
struct Meditation {
  std::uint8_t value;
  bool operator==(const Meditation&) const = default;
};
struct RawWave {
  std::int16_t sample;
  bool operator==(const RawWave&) const = default;
};
struct EegPower {
  BandPowerRow row;  // timestamp is assigned by the consumer, not the wire
  bool operator==(const EegPower&) const = default;
};
/// Any row the decoder does not interpret. Kept verbatim so captures replay
/// losslessly.
struct Unknown {
  DataRow row;
  bool operator==(const Unknown&) const = default;
};
}  // namespace event

using ParsedEvent = std::variant<event::PoorSignal, event::Attention, event::Meditation,
                                 event::RawWave, event::EegPower, event::Unknown>;

enum class FrameErrorKind { BadChecksum, BadLength, MalformedPayload, Truncated };

inline std::string_view name_of(FrameErrorKind k) {
  switch (k) {
    case FrameErrorKind::BadChecksum: return "BadChecksum";
    case FrameErrorKind::BadLength: return "BadLength";
    case FrameErrorKind::MalformedPayload: return "MalformedPayload";
    case FrameErrorKind::Truncated: return "Truncated";
  }
  return "?";
}

struct FrameError {
  FrameErrorKind kind;
  std::uint64_t offset;  // stream offset of the sync pair that opened the frame

  bool operator==(const FrameError&) const = default;
};

/// Bytes not yet consumed plus the stream offset of the first of them.
struct DecoderState {
  Bytes pending;
  std::uint64_t offset = 0;

  bool operator==(const DecoderState&) const = default;
};

struct DecodeResult {
  std::vector<ParsedEvent> events;
  std::vector<FrameError> errors;
  DecoderState state;
};

// ---------------------------------------------------------------------------
// Rows <-> events

inline void validate_row(const DataRow& row) {
  if (row.code == kExcode)
    throw Error(ErrorCode::InvalidRow, "code 0x55 is reserved for extended-code prefixes");
  if (row.code < 0x80) {
    if (row.value.size() != 1)
      throw Error(ErrorCode::InvalidRow, "single-byte code with value length " +
                                             std::to_string(row.value.size()));
  } else if (row.value.size() > 0xFF) {
    throw Error(ErrorCode::InvalidRow, "value longer than 255 bytes");
  }
}

inline DataRow eeg_power_row(const BandPowerRow& bands) {
  DataRow row{kCodeEegPower, 0, {}};
  row.value.reserve(kEegPowerLength);
  for (auto v : bands.bands) {
    const auto clamped = std::min(v, kMaxBandValue);
    row.value.push_back(static_cast<std::uint8_t>(clamped >> 16));
    row.value.push_back(static_cast<std::uint8_t>(clamped >> 8));
    row.value.push_back(static_cast<std::uint8_t>(clamped));
  }
  return row;
}

inline ParsedEvent interpret(const DataRow& row) {
  if (row.excode_count == 0) {
    switch (row.code) {
      case kCodePoorSignal:
        if (row.value.size() == 1 && row.value[0] <= 200) return event::PoorSignal{row.value[0]};
        break;
      case kCodeAttention:
        if (row.value.size() == 1 && row.value[0] <= 100) return event::Attention{row.value[0]};
        break;
      case kCodeMeditation:
        if (row.value.size() == 1 && row.value[0] <= 100) return event::Meditation{row.value[0]};
        break;
      case kCodeRawWave:
        if (row.value.size() == 2) {
          const auto raw = static_cast<std::uint16_t>((row.value[0] << 8) | row.value[1]);
          return event::RawWave{static_cast<std::int16_t>(raw)};
        }
        break;
      case kCodeEegPower:
        if (row.value.size() == kEegPowerLength) {
          event::EegPower ev{};
          for (std::size_t b = 0; b < kNumBands; ++b) {
            const auto* p = &row.value[3 * b];
            ev.row.bands[b] = (std::uint32_t{p[0]} << 16) | (std::uint32_t{p[1]} << 8) | p[2];
          }
          return ev;
        }
        break;
      default:
        break;
    }
  }
  return event::Unknown{row};
}

inline DataRow to_data_row(const ParsedEvent& ev) {
  struct Visitor {
    DataRow operator()(const event::PoorSignal& e) const { return {kCodePoorSignal, 0, {e.level}}; }
    DataRow operator()(const event::Attention& e) const { return {kCodeAttention, 0, {e.value}}; }
    DataRow operator()(const event::Meditation& e) const { return {kCodeMeditation, 0, {e.value}}; }
    DataRow operator()(const event::RawWave& e) const {
      const auto u = static_cast<std::uint16_t>(e.sample);
      return {kCodeRawWave, 0, {static_cast<std::uint8_t>(u >> 8), static_cast<std::uint8_t>(u)}};
    }
    DataRow operator()(const event::EegPower& e) const { return eeg_power_row(e.row); }
    DataRow operator()(const event::Unknown& e) const { return e.row; }
  };
  return std::visit(Visitor{}, ev);
}

// ---------------------------------------------------------------------------
// Encoding

inline Bytes encode_payload(std::span<const DataRow> rows) {
  Bytes payload;
  for (const auto& row : rows) {
    validate_row(row);
    payload.insert(payload.end(), row.excode_count, kExcode);
    payload.push_back(row.code);
    if (row.code >= 0x80) payload.push_back(static_cast<std::uint8_t>(row.value.size()));
    payload.insert(payload.end(), row.value.begin(), row.value.end());
    if (payload.size() > kMaxPayload) break;
  }
  return payload;
}

inline Bytes encode_packet(std::span<const DataRow> rows) {
  Bytes payload = encode_payload(rows);
  if (payload.empty()) throw Error(ErrorCode::PayloadTooSmall, "packet needs at least one data row");
  if (payload.size() > kMaxPayload)
    throw Error(ErrorCode::PayloadTooLarge,
                "serialized payload exceeds " + std::to_string(kMaxPayload) + " bytes");
  Bytes out;
  out.reserve(payload.size() + 4);
  out.push_back(kSync);
  out.push_back(kSync);
  out.push_back(static_cast<std::uint8_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  out.push_back(checksum(payload));
  return out;
}

inline Bytes encode_packet(const DataRow& row) { return encode_packet(std::span(&row, 1)); }

// ---------------------------------------------------------------------------
// Decoding

/// Splits a checksum-verified payload into rows; false if the rows overrun it.
inline bool parse_payload(std::span<const std::uint8_t> payload, std::vector<DataRow>& rows) {
  std::size_t pos = 0;
  const std::size_t n = payload.size();
  while (pos < n) {
    DataRow row;
    while (pos < n && payload[pos] == kExcode) {
      ++row.excode_count;
      ++pos;
    }
    if (pos >= n) return false;
    row.code = payload[pos++];
    std::size_t vlen = 1;
    if (row.code >= 0x80) {
      if (pos >= n) return false;
      vlen = payload[pos++];
    }
    if (pos + vlen > n) return false;
    row.value.assign(payload.begin() + static_cast<std::ptrdiff_t>(pos),
                     payload.begin() + static_cast<std::ptrdiff_t>(pos + vlen));
    pos += vlen;
    rows.push_back(std::move(row));
  }
  return true;
}

inline DecodeResult decode_stream(std::span<const std::uint8_t> bytes, DecoderState state) {
  DecodeResult out;
  Bytes& buf = state.pending;
  buf.insert(buf.end(), bytes.begin(), bytes.end());

  const std::size_t size = buf.size();
  std::size_t pos = 0;   // next byte to scan
  std::size_t keep = 0;  // first byte that must be retained for the next call
  std::vector<DataRow> rows;

  while (true) {
    std::size_t i = pos;
    while (i + 1 < size && !(buf[i] == kSync && buf[i + 1] == kSync)) ++i;
    if (i + 1 >= size) {
      // No complete sync pair; a trailing 0xAA may be the first half of one.
      keep = (i < size && buf[i] == kSync) ? i : size;
      break;
    }
    std::size_t len_at = i + 2;
    while (len_at < size && buf[len_at] == kSync) ++len_at;
    if (len_at >= size) {
      keep = i;
      break;
    }
    const std::uint64_t frame_offset = state.offset + (len_at - 2);
    const std::size_t len = buf[len_at];
    if (len > kMaxPayload) {
      out.errors.push_back({FrameErrorKind::BadLength, frame_offset});
      pos = len_at;
      continue;
    }
    const std::size_t end = len_at + 1 + len + 1;
    if (end > size) {
      keep = i;
      break;
    }
    const std::span<const std::uint8_t> payload(buf.data() + len_at + 1, len);
    if (checksum(payload) != buf[end - 1]) {
      out.errors.push_back({FrameErrorKind::BadChecksum, frame_offset});
      pos = len_at;
      continue;
    }
    rows.clear();
    if (!parse_payload(payload, rows)) {
      out.errors.push_back({FrameErrorKind::MalformedPayload, frame_offset});
      pos = len_at;
      continue;
    }
    for (const auto& row : rows) out.events.push_back(interpret(row));
    pos = end;
  }

  buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(keep));
  state.offset += keep;
  out.state = std::move(state);
  return out;
}

/// Reports a frame left incomplete at end of stream, if any. After
/// decode_stream the pending bytes either start at an open sync pair or hold
/// at most one byte.
inline std::vector<FrameError> finish(const DecoderState& state) {
  const auto& buf = state.pending;
  if (buf.size() < 2 || buf[0] != kSync || buf[1] != kSync) return {};
  std::size_t len_at = 2;
  while (len_at < buf.size() && buf[len_at] == kSync) ++len_at;
  return {FrameError{FrameErrorKind::Truncated, state.offset + (len_at - 2)}};
}

/// Stateful convenience wrapper around decode_stream.
class StreamDecoder {
 public:
  DecodeResult feed(std::span<const std::uint8_t> bytes) {
    auto result = decode_stream(bytes, std::move(state_));
    state_ = result.state;
    return result;
  }
  std::vector<FrameError> finish() const { return codec::finish(state_); }
  const DecoderState& state() const { return state_; }

 private:
  DecoderState state_;
};

inline std::vector<DataRow> rows_of(std::span<const ParsedEvent> events) {
  std::vector<DataRow> rows;
  rows.reserve(events.size());
  for (const auto& ev : events) rows.push_back(to_data_row(ev));
  return rows;
}

// ---------------------------------------------------------------------------
// Capture files (.tgr): raw concatenated packet bytes.

inline Bytes read_capture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open capture " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_capture(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write capture " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace traitwave::codec
