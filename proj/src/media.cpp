#include "tfx/media.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_set>

#include "tfx/text.hpp"

namespace tfx::media {

namespace {

void put_be(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> b, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[pos + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ACDR

Bytes encode_acdr(const AcdrFrame& f) {
  if (f.full_session_id.size() > 255)
    throw Error(ErrorCode::InvalidArgument, "ACDR session id longer than 255 bytes");
  Bytes out;
  out.reserve(13 + f.full_session_id.size() + f.payload.size());
  out.push_back(kAcdrVersion);
  put_be(out, static_cast<std::uint64_t>(f.ts_us), 8);
  out.push_back(static_cast<std::uint8_t>(f.full_session_id.size()));
  out.insert(out.end(), f.full_session_id.begin(), f.full_session_id.end());
  out.push_back(f.trace_pt);
  out.push_back(f.src_id);
  out.push_back(static_cast<std::uint8_t>(f.media_type));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

std::optional<AcdrFrame> decode_acdr(std::span<const std::uint8_t> b) {
  if (b.size() < 10 || b[0] != kAcdrVersion) return std::nullopt;
  AcdrFrame f;
  f.ts_us = static_cast<TimestampUs>(get_be(b, 1, 8));
  const std::size_t sid_len = b[9];
  std::size_t pos = 10;
  if (b.size() < pos + sid_len + 3) return std::nullopt;
  f.full_session_id.assign(reinterpret_cast<const char*>(&b[pos]), sid_len);
  pos += sid_len;
  f.trace_pt = b[pos++];
  f.src_id = b[pos++];
  const std::uint8_t media = b[pos++];
  if (media > 1) return std::nullopt;
  f.media_type = static_cast<MediaType>(media);
  f.payload.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  if (f.media_type == MediaType::RTP && f.payload.empty()) return std::nullopt;
  return f;
}

AcdrParse parse_acdr(const std::vector<capture::PacketRecord>& packets,
                     std::uint16_t listen_port, const AcdrDecoder& decoder) {
  AcdrParse out;
  for (const auto& p : packets) {
    if (p.ip_proto != capture::IpProto::UDP || !p.dst_port || *p.dst_port != listen_port)
      continue;
    auto frame = p.payload.empty() ? std::nullopt : decoder(p.payload);
    if (!frame) {
      ++out.skipped;
      continue;
    }
    frame->arrival_us = p.ts_us;
    frame->packet_index = p.index;
    out.frames.push_back(std::move(*frame));
  }
  return out;
}

// ---------------------------------------------------------------------------
// RTP

std::optional<RtpPacket> parse_rtp(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || (b[0] >> 6) != 2) return std::nullopt;
  const bool padding = (b[0] & 0x20) != 0;
  const bool extension = (b[0] & 0x10) != 0;
  const std::size_t csrc = b[0] & 0x0f;
  RtpPacket p;
  p.marker = (b[1] & 0x80) != 0;
  p.payload_type = b[1] & 0x7f;
  p.seq = static_cast<std::uint16_t>(get_be(b, 2, 2));
  p.timestamp = static_cast<std::uint32_t>(get_be(b, 4, 4));
  p.ssrc = static_cast<std::uint32_t>(get_be(b, 8, 4));
  std::size_t pos = 12 + 4 * csrc;
  if (pos > b.size()) return std::nullopt;
  if (extension) {
    if (pos + 4 > b.size()) return std::nullopt;
    pos += 4 + 4 * static_cast<std::size_t>(get_be(b, pos + 2, 2));
    if (pos > b.size()) return std::nullopt;
  }
  std::size_t end = b.size();
  if (padding) {
    const std::size_t pad = b.back();
    if (pad == 0 || pad > end - pos) return std::nullopt;
    end -= pad;
  }
  p.payload.assign(b.begin() + static_cast<std::ptrdiff_t>(pos),
                   b.begin() + static_cast<std::ptrdiff_t>(end));
  return p;
}

Bytes encode_rtp(const RtpPacket& p) {
  Bytes out;
  out.reserve(12 + p.payload.size());
  out.push_back(0x80);
  out.push_back(static_cast<std::uint8_t>((p.marker ? 0x80 : 0) | (p.payload_type & 0x7f)));
  put_be(out, p.seq, 2);
  put_be(out, p.timestamp, 4);
  put_be(out, p.ssrc, 4);
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

std::string StreamKey::to_string() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ssrc=0x%08x tp=%u sid=%u pt=%u", ssrc, trace_pt, src_id,
                payload_type);
  return buf;
}

std::string codec_name(std::uint8_t pt) {
  switch (pt) {
    case 0: return "PCMU";
    case 8: return "PCMA";
    case 9: return "G722";
    case 18: return "G729";
    default: return pt >= 96 ? "dynamic(" + std::to_string(pt) + ")" : "pt" + std::to_string(pt);
  }
}

Selector::Selector(std::vector<std::pair<int, int>> pairs) : pairs_(std::move(pairs)) {}

Selector Selector::all() {
  Selector s;
  s.match_all_ = true;
  return s;
}

Selector Selector::parse(std::string_view text) {
  std::vector<std::pair<int, int>> pairs;
  for (auto term : text::split(text, '|')) {
    term = text::trim(term);
    if (term.size() < 5 || term.front() != '(' || term.back() != ')')
      throw Error(ErrorCode::InvalidArgument, "bad selector term '" + std::string(term) + "'");
    auto inner = term.substr(1, term.size() - 2);
    auto parts = text::split(inner, ',');
    if (parts.size() != 2)
      throw Error(ErrorCode::InvalidArgument, "bad selector term '" + std::string(term) + "'");
    int v[2];
    for (int i = 0; i < 2; ++i) {
      const auto num = text::trim(parts[static_cast<std::size_t>(i)]);
      if (num.empty() || num.size() > 3 ||
          !std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw Error(ErrorCode::InvalidArgument, "bad selector number '" + std::string(num) + "'");
      v[i] = std::stoi(std::string(num));
      if (v[i] > 255) throw Error(ErrorCode::InvalidArgument, "selector value above 255");
    }
    pairs.emplace_back(v[0], v[1]);
  }
  return Selector(std::move(pairs));
}

bool Selector::operator()(int trace_pt, int src_id) const {
  if (match_all_) return true;
  return std::find(pairs_.begin(), pairs_.end(), std::make_pair(trace_pt, src_id)) != pairs_.end();
}

std::string Selector::to_string() const {
  if (match_all_) return "*";
  std::string out;
  for (const auto& [tp, sid] : pairs_) {
    if (!out.empty()) out += '|';
    out += "(" + std::to_string(tp) + "," + std::to_string(sid) + ")";
  }
  return out;
}

StreamSet enumerate_streams(const std::vector<AcdrFrame>& frames, const Selector& selector) {
  struct Acc {
    RtpStream stream;
    std::unordered_set<std::int64_t> seen;
    std::int64_t max_ext = -1;
  };
  std::map<StreamKey, Acc> accs;
  StreamSet out;
  for (const auto& f : frames) {
    if (f.media_type != MediaType::RTP || !selector(f.trace_pt, f.src_id)) continue;
    auto rtp = parse_rtp(f.payload);
    if (!rtp) {
      out.errors.push_back({f.packet_index, "invalid RTP header"});
      continue;
    }
    rtp->arrival_ts_us = f.arrival_us;
    const StreamKey key{rtp->ssrc, f.trace_pt, f.src_id, rtp->payload_type};
    Acc& acc = accs[key];
    acc.stream.key = key;
    std::int64_t ext;
    if (acc.max_ext < 0) {
      // Start one cycle up so early reordering cannot go negative.
      ext = std::int64_t{1 << 16} + rtp->seq;
    } else {
      const std::int64_t base = acc.max_ext & ~std::int64_t{0xffff};
      ext = base + rtp->seq;
      if (ext - acc.max_ext > 0x8000) ext -= 0x10000;
      else if (acc.max_ext - ext > 0x8000) ext += 0x10000;
    }
    if (!acc.seen.insert(ext).second) {
      ++acc.stream.duplicates_removed;
      continue;
    }
    acc.max_ext = std::max(acc.max_ext, ext);
    rtp->ext_seq = ext;
    acc.stream.packets.push_back(std::move(*rtp));
  }
  for (auto& [key, acc] : accs) {
    std::vector<std::int64_t> seqs(acc.seen.begin(), acc.seen.end());
    std::sort(seqs.begin(), seqs.end());
    for (std::size_t i = 1; i < seqs.size(); ++i) {
      const std::int64_t d = seqs[i] - seqs[i - 1];
      if (d > 1)
        acc.stream.gaps.push_back({static_cast<std::uint16_t>(seqs[i - 1] & 0xffff),
                                   static_cast<std::uint32_t>(d - 1)});
    }
    out.streams.push_back(std::move(acc.stream));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audio

MonoBuffer reassemble(const RtpStream& stream) {
  const std::uint8_t pt = stream.key.payload_type;
  if (pt != 0 && pt != 8)
    throw Error(ErrorCode::UnsupportedCodec,
                "payload type " + std::to_string(pt) + " (" + codec_name(pt) +
                    ") is not decodable; stream " + stream.key.to_string() + ", " +
                    std::to_string(stream.packets.size()) + " packets");
  const G711Law law = pt == 0 ? G711Law::MU : G711Law::A;
  MonoBuffer out;
  out.source = stream.key;
  if (stream.packets.empty()) return out;

  std::vector<const RtpPacket*> ordered;
  ordered.reserve(stream.packets.size());
  for (const auto& p : stream.packets) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const RtpPacket* a, const RtpPacket* b) { return a->ext_seq < b->ext_seq; });

  // Unwrap the 32-bit RTP clock relative to the first packet.
  std::vector<std::int64_t> offsets(ordered.size());
  std::int64_t offset = 0;
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    offset += static_cast<std::int32_t>(ordered[i]->timestamp - ordered[i - 1]->timestamp);
    offsets[i] = offset;
  }
  std::int64_t length = 0;
  for (std::size_t i = 0; i < ordered.size(); ++i)
    if (offsets[i] >= 0)
      length = std::max(length, offsets[i] + static_cast<std::int64_t>(ordered[i]->payload.size()));
  out.samples.assign(static_cast<std::size_t>(length), 0);
  std::vector<bool> covered(static_cast<std::size_t>(length), false);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (offsets[i] < 0) continue;
    const auto pcm = decode_g711(ordered[i]->payload, law);
    for (std::size_t k = 0; k < pcm.size(); ++k) {
      const auto at = static_cast<std::size_t>(offsets[i]) + k;
      out.samples[at] = pcm[k];
      covered[at] = true;
    }
    out.received_samples += pcm.size();
  }
  out.gap_fill_samples = static_cast<std::uint64_t>(std::count(covered.begin(), covered.end(), false));
  out.start_us = ordered.front()->arrival_ts_us;
  return out;
}

std::vector<std::int16_t> AudioArtifact::channel(int index) const {
  std::vector<std::int16_t> out;
  out.reserve(frames());
  for (std::size_t i = static_cast<std::size_t>(index); i < samples.size(); i += 2)
    out.push_back(samples[i]);
  return out;
}

AudioArtifact merge_stereo(const MonoBuffer& a, const MonoBuffer& b) {
  if (a.sample_rate != b.sample_rate)
    throw Error(ErrorCode::RateMismatch, "sample rates differ: " + std::to_string(a.sample_rate) +
                                             " vs " + std::to_string(b.sample_rate));
  AudioArtifact out;
  out.sample_rate = a.sample_rate;
  out.channel_sources = {a.source, b.source};
  const double delta_s = static_cast<double>(b.start_us - a.start_us) / 1e6;
  const auto shift = static_cast<std::int64_t>(std::llround(delta_s * a.sample_rate));
  std::size_t lead_a = 0, lead_b = 0;
  if (shift >= 0) {
    lead_b = static_cast<std::size_t>(shift);
    out.delayed_channel = 1;
  } else {
    lead_a = static_cast<std::size_t>(-shift);
    out.delayed_channel = 0;
  }
  out.offset_samples = shift >= 0 ? shift : -shift;
  out.alignment_offset_s = static_cast<double>(out.offset_samples) / a.sample_rate;
  const std::size_t frames = std::max(lead_a + a.samples.size(), lead_b + b.samples.size());
  out.samples.assign(frames * 2, 0);
  for (std::size_t i = 0; i < a.samples.size(); ++i) out.samples[2 * (lead_a + i)] = a.samples[i];
  for (std::size_t i = 0; i < b.samples.size(); ++i) out.samples[2 * (lead_b + i) + 1] = b.samples[i];
  return out;
}

void write_wav(std::ostream& out, const AudioArtifact& audio) {
  auto le = [&](std::uint32_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.samples.size() * 2);
  const std::uint32_t block_align = audio.channels * 2u;
  out.write("RIFF", 4);
  le(36 + data_len, 4);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  le(16, 4);
  le(1, 2);  // PCM
  le(audio.channels, 2);
  le(audio.sample_rate, 4);
  le(audio.sample_rate * block_align, 4);
  le(block_align, 2);
  le(16, 2);
  out.write("data", 4);
  le(data_len, 4);
  for (std::int16_t s : audio.samples) le(static_cast<std::uint16_t>(s), 2);
}

}  // namespace tfx::media
