#pragma once

// Command/feedback framing and a simulated lossy link.
//
// Wire layout (big-endian):
//   magic BC 1F | version 01 | msg_type | seq (2) | payload_len (2) | payload | crc32 (4)
// The CRC is the reflected 0x04C11DB7 CRC-32 (init and final xor 0xFFFFFFFF)
// over every byte before it.

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/crc.hpp>

#include "mindlink/common.hpp"

namespace mindlink {

enum class MsgType : std::uint8_t { Command = 0x01, Feedback = 0x02, Ack = 0x03, AgentEvent = 0x04 };

inline constexpr std::uint8_t kMagic0 = 0xBC;
inline constexpr std::uint8_t kMagic1 = 0x1F;
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::size_t kMaxPayload = 1024;

using Bytes = std::vector<std::uint8_t>;

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline Bytes encode_frame(MsgType type, std::uint16_t seq, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload)
    throw InvalidArgument("encode_frame: payload of " + std::to_string(payload.size()) + " bytes exceeds 1024");
  const auto len = static_cast<std::uint16_t>(payload.size());
  Bytes out(kHeaderSize + payload.size() + kCrcSize);
  out[0] = kMagic0;
  out[1] = kMagic1;
  out[2] = kFrameVersion;
  out[3] = static_cast<std::uint8_t>(type);
  out[4] = static_cast<std::uint8_t>(seq >> 8);
  out[5] = static_cast<std::uint8_t>(seq & 0xFF);
  out[6] = static_cast<std::uint8_t>(len >> 8);
  out[7] = static_cast<std::uint8_t>(len & 0xFF);
  std::copy(payload.begin(), payload.end(), out.begin() + kHeaderSize);
  const std::size_t body = kHeaderSize + payload.size();
  const std::uint32_t crc = crc32(std::span<const std::uint8_t>(out).first(body));
  for (std::size_t i = 0; i < kCrcSize; ++i) out[body + i] = static_cast<std::uint8_t>(crc >> (24 - 8 * i));
  return out;
}

inline Bytes encode_frame(MsgType type, std::uint16_t seq, std::string_view payload) {
  return encode_frame(type, seq,
                      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

enum class FrameError { BadMagic, BadVersion, Truncated, BadLength, ChecksumMismatch, UnknownType };

inline std::string_view to_string(FrameError e) {
  switch (e) {
    case FrameError::BadMagic: return "bad-magic";
    case FrameError::BadVersion: return "bad-version";
    case FrameError::Truncated: return "truncated";
    case FrameError::BadLength: return "bad-length";
    case FrameError::ChecksumMismatch: return "checksum-mismatch";
    case FrameError::UnknownType: return "unknown-type";
  }
  return "?";
}

struct DecodedFrame {
  MsgType type = MsgType::Command;
  std::uint16_t seq = 0;
  Bytes payload;
  bool operator==(const DecodedFrame&) const = default;

  std::string payload_text() const { return {payload.begin(), payload.end()}; }
};

using DecodeResult = std::variant<DecodedFrame, FrameError>;

/// Checks magic, version, length and CRC in that order and reports the
/// first failure. A declared length over 1024 or bytes beyond the declared
/// frame end are BadLength; fewer bytes than declared are Truncated.
inline DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) {
    if (!bytes.empty() && bytes[0] != kMagic0) return FrameError::BadMagic;
    return FrameError::Truncated;
  }
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) return FrameError::BadMagic;
  if (bytes.size() < 3) return FrameError::Truncated;
  if (bytes[2] != kFrameVersion) return FrameError::BadVersion;
  if (bytes.size() < kHeaderSize) return FrameError::Truncated;
  const std::size_t len = (static_cast<std::size_t>(bytes[6]) << 8) | bytes[7];
  if (len > kMaxPayload) return FrameError::BadLength;
  const std::size_t total = kHeaderSize + len + kCrcSize;
  if (bytes.size() < total) return FrameError::Truncated;
  if (bytes.size() > total) return FrameError::BadLength;
  std::uint32_t wire = 0;
  for (std::size_t i = 0; i < kCrcSize; ++i) wire = (wire << 8) | bytes[kHeaderSize + len + i];
  if (crc32(bytes.first(kHeaderSize + len)) != wire) return FrameError::ChecksumMismatch;
  const std::uint8_t type = bytes[3];
  if (type < 0x01 || type > 0x04) return FrameError::UnknownType;
  DecodedFrame f;
  f.type = static_cast<MsgType>(type);
  f.seq = static_cast<std::uint16_t>((bytes[4] << 8) | bytes[5]);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + len));
  return f;
}

struct LinkModel {
  double drop_prob = 0.0;
  double latency_ms_min = 5.0;
  double latency_ms_max = 20.0;
  double bit_flip_prob = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw InvalidArgument("link: drop_prob must lie in [0, 1]");
    if (!(bit_flip_prob >= 0.0 && bit_flip_prob <= 1.0))
      throw InvalidArgument("link: bit_flip_prob must lie in [0, 1]");
    if (!(latency_ms_min >= 0.0 && latency_ms_min <= latency_ms_max))
      throw InvalidArgument("link: need 0 <= latency_ms_min <= latency_ms_max");
  }

  static LinkModel lossless() { return LinkModel{0.0, 0.0, 0.0, 0.0, 1}; }
};

struct DeliveryOutcome {
  bool delivered = false;
  double at_ms = 0.0;
  Bytes bytes;
};

/// One direction of the simulated link. Single-owner: every call advances
/// the generator, so outcomes depend on the seed and the call sequence.
class LinkSimulator {
 public:
  explicit LinkSimulator(LinkModel model) : model_(model), rng_(mix64(model.seed)) { model_.validate(); }

  DeliveryOutcome transmit(std::span<const std::uint8_t> frame, double now_ms) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng_) < model_.drop_prob) return {};
    DeliveryOutcome out;
    out.delivered = true;
    out.at_ms = now_ms + model_.latency_ms_min + (model_.latency_ms_max - model_.latency_ms_min) * unit(rng_);
    out.bytes.assign(frame.begin(), frame.end());
    if (unit(rng_) < model_.bit_flip_prob && !out.bytes.empty()) {
      std::uniform_int_distribution<std::size_t> bit(0, out.bytes.size() * 8 - 1);
      const std::size_t b = bit(rng_);
      out.bytes[b / 8] ^= static_cast<std::uint8_t>(1u << (b % 8));
    }
    return out;
  }

  const LinkModel& model() const noexcept { return model_; }

 private:
  LinkModel model_;
  std::mt19937_64 rng_;
};

inline Bytes ack_payload(std::uint16_t seq) {
  return {static_cast<std::uint8_t>(seq >> 8), static_cast<std::uint8_t>(seq & 0xFF)};
}

/// Receiving endpoint: acknowledges every valid non-ack frame and hands each
/// sequence number to the application at most once.
class Receiver {
 public:
  struct Result {
    std::optional<DecodedFrame> deliver;  // first arrival of this seq
    std::optional<Bytes> ack;
    std::optional<FrameError> error;
  };

  Result receive(std::span<const std::uint8_t> bytes) {
    Result r;
    auto decoded = decode_frame(bytes);
    if (auto* err = std::get_if<FrameError>(&decoded)) {
      r.error = *err;
      return r;
    }
    auto& frame = std::get<DecodedFrame>(decoded);
    if (frame.type == MsgType::Ack) return r;
    r.ack = encode_frame(MsgType::Ack, frame.seq, ack_payload(frame.seq));
    if (!seen_.test(frame.seq)) {
      seen_.set(frame.seq);
      ++delivered_count_;
      r.deliver = std::move(frame);
    } else {
      ++duplicate_count_;
    }
    return r;
  }

  std::size_t delivered_count() const noexcept { return delivered_count_; }
  std::size_t duplicate_count() const noexcept { return duplicate_count_; }

 private:
  std::bitset<65536> seen_;
  std::size_t delivered_count_ = 0;
  std::size_t duplicate_count_ = 0;
};

struct SendOutcome {
  bool acked = false;
  int attempts = 0;
  /// Ack arrival when acked; otherwise the final timeout expiry.
  double completed_at_ms = 0.0;
  /// What the receiving application got (absent if no copy got through).
  std::optional<DecodedFrame> delivered;
  double delivered_at_ms = 0.0;
};

/// Stop-and-wait delivery of one frame: send, wait `ack_timeout_ms` for an
/// ack, retransmit up to `max_retries` times. An ack from any earlier attempt
/// that lands inside the current wait window completes the send.
inline SendOutcome reliable_send(std::span<const std::uint8_t> frame, LinkSimulator& forward, LinkSimulator& reverse,
                                 Receiver& receiver, int max_retries, double ack_timeout_ms, double now_ms) {
  if (max_retries < 0) throw InvalidArgument("reliable_send: max_retries must be >= 0");
  if (!(ack_timeout_ms > 0.0)) throw InvalidArgument("reliable_send: ack_timeout_ms must be > 0");
  auto sent = decode_frame(frame);
  if (!std::holds_alternative<DecodedFrame>(sent)) throw InvalidArgument("reliable_send: frame does not decode");
  const std::uint16_t seq = std::get<DecodedFrame>(sent).seq;

  SendOutcome out;
  std::optional<double> first_ack;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const double start = now_ms + attempt * ack_timeout_ms;
    out.attempts = attempt + 1;
    auto fwd = forward.transmit(frame, start);
    if (fwd.delivered) {
      auto rx = receiver.receive(fwd.bytes);
      if (rx.deliver && !out.delivered) {
        out.delivered = std::move(rx.deliver);
        out.delivered_at_ms = fwd.at_ms;
      }
      if (rx.ack) {
        auto back = reverse.transmit(*rx.ack, fwd.at_ms);
        if (back.delivered) {
          auto ack = decode_frame(back.bytes);
          if (auto* f = std::get_if<DecodedFrame>(&ack); f && f->type == MsgType::Ack && f->seq == seq)
            first_ack = std::min(first_ack.value_or(back.at_ms), back.at_ms);
        }
      }
    }
    if (first_ack && *first_ack <= start + ack_timeout_ms) {
      out.acked = true;
      out.completed_at_ms = std::max(*first_ack, start);
      return out;
    }
  }
  out.completed_at_ms = now_ms + (max_retries + 1) * ack_timeout_ms;
  return out;
}

}  // namespace mindlink
