#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tfx/capture.hpp"
#include "tfx/g711.hpp"

namespace tfx::media {

// ---------------------------------------------------------------------------
// ACDR debug-recording encapsulation
//
// Canonical layout, all integers big-endian:
//   u8   version (=1)
//   u64  timestamp, microseconds since the epoch
//   u8   session id length N, then N bytes of session id
//   u8   trace point
//   u8   source id
//   u8   media type (0 = other, 1 = RTP)
//   ...  payload (the encapsulated packet, e.g. an RTP datagram)

inline constexpr std::uint8_t kAcdrVersion = 1;
inline constexpr std::uint16_t kDefaultAcdrPort = 925;

enum class MediaType : std::uint8_t { OTHER = 0, RTP = 1 };

struct AcdrFrame {
  TimestampUs ts_us = 0;       // from the ACDR header
  TimestampUs arrival_us = 0;  // capture time of the carrying packet
  std::uint8_t trace_pt = 0;
  std::uint8_t src_id = 0;
  std::string full_session_id;
  MediaType media_type = MediaType::OTHER;
  Bytes payload;
  std::uint64_t packet_index = 0;
};

Bytes encode_acdr(const AcdrFrame& frame);
/// nullopt when the header does not validate. Fills everything except
/// arrival_us and packet_index.
std::optional<AcdrFrame> decode_acdr(std::span<const std::uint8_t> bytes);

/// Decoder seam for other vendor layouts.
using AcdrDecoder = std::function<std::optional<AcdrFrame>(std::span<const std::uint8_t>)>;

struct AcdrParse {
  std::vector<AcdrFrame> frames;
  std::uint64_t skipped = 0;
};

AcdrParse parse_acdr(const std::vector<capture::PacketRecord>& packets,
                     std::uint16_t listen_port = kDefaultAcdrPort,
                     const AcdrDecoder& decoder = decode_acdr);

// ---------------------------------------------------------------------------
// RTP

struct RtpPacket {
  std::uint16_t seq = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;
  std::uint8_t payload_type = 0;
  bool marker = false;
  Bytes payload;
  TimestampUs arrival_ts_us = 0;
  /// Sequence number extended across 16-bit wraps; set by enumerate_streams.
  std::int64_t ext_seq = 0;
};

/// Parses an RTP datagram. nullopt unless version is 2 and the header,
/// CSRC list, extension and padding fit.
std::optional<RtpPacket> parse_rtp(std::span<const std::uint8_t> bytes);
Bytes encode_rtp(const RtpPacket& p);

struct StreamKey {
  std::uint32_t ssrc = 0;
  std::uint8_t trace_pt = 0;
  std::uint8_t src_id = 0;
  std::uint8_t payload_type = 0;

  auto operator<=>(const StreamKey&) const = default;
  std::string to_string() const;
};

struct Gap {
  std::uint16_t after_seq = 0;
  std::uint32_t missing_count = 0;
  bool operator==(const Gap&) const = default;
};

struct RtpStream {
  StreamKey key;
  std::vector<RtpPacket> packets;  // arrival order, duplicates removed
  std::uint64_t duplicates_removed = 0;
  std::vector<Gap> gaps;
};

/// Set of (trace point, source id) pairs. Text form "(35,36)|(21,38)"; the
/// equivalent display filter is
/// "(acdr.trace_pt == 35 and acdr.src_id == 36) or (acdr.trace_pt == 21 and acdr.src_id == 38)".
class Selector {
 public:
  static Selector all();
  /// Throws Error(InvalidArgument).
  static Selector parse(std::string_view text);
  explicit Selector(std::vector<std::pair<int, int>> pairs);

  bool operator()(int trace_pt, int src_id) const;
  std::string to_string() const;
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

 private:
  Selector() = default;
  bool match_all_ = false;
  std::vector<std::pair<int, int>> pairs_;
};

struct RtpError {
  std::uint64_t packet_index = 0;
  std::string message;
};

struct StreamSet {
  std::vector<RtpStream> streams;  // ordered by key
  std::vector<RtpError> errors;
};

StreamSet enumerate_streams(const std::vector<AcdrFrame>& frames, const Selector& selector);

std::string codec_name(std::uint8_t payload_type);

// ---------------------------------------------------------------------------
// Audio

struct MonoBuffer {
  std::uint32_t sample_rate = 8000;
  std::vector<std::int16_t> samples;
  /// Arrival time of the first sample.
  TimestampUs start_us = 0;
  std::optional<StreamKey> source;
  std::uint64_t received_samples = 0;
  std::uint64_t gap_fill_samples = 0;
};

/// Orders packets by extended sequence number and places each payload at its
/// RTP timestamp offset; missing spans stay silent. Only G.711 (payload type
/// 0 and 8) decodes; anything else throws Error(UnsupportedCodec).
MonoBuffer reassemble(const RtpStream& stream);

struct AudioArtifact {
  std::uint32_t sample_rate = 8000;
  std::uint16_t channels = 2;
  std::vector<std::int16_t> samples;  // interleaved L/R
  std::pair<std::optional<StreamKey>, std::optional<StreamKey>> channel_sources;
  double alignment_offset_s = 0.0;
  std::int64_t offset_samples = 0;
  /// 0 when channel A was delayed, 1 for channel B.
  int delayed_channel = 1;

  std::size_t frames() const { return samples.size() / 2; }
  std::vector<std::int16_t> channel(int index) const;
};

/// Channel A is the first argument. The later-starting buffer is delayed by
/// the arrival difference rounded to whole samples; the shorter channel is
/// padded with silence. Throws Error(RateMismatch).
AudioArtifact merge_stereo(const MonoBuffer& a, const MonoBuffer& b);

/// RIFF/WAVE, 16-bit little-endian PCM.
void write_wav(std::ostream& out, const AudioArtifact& audio);

}  // namespace tfx::media
