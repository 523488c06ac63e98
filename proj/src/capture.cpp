#include "tfx/capture.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>

#include "tfx/text.hpp"

namespace tfx::capture {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kRecordHeaderLen = 16;
// Sanity bound on a single record; larger values mean a corrupt header.
constexpr std::uint32_t kMaxRecordLen = 256 * 1024;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;

std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

std::uint32_t le32(const std::uint8_t* p) {
  return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[1]} << 8) | std::uint32_t{p[0]};
}

std::size_t read_fully(std::istream& in, std::uint8_t* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

void decode_ipv4(std::span<const std::uint8_t> ip, PacketRecord& rec,
                 CaptureStats* stats) {
  if (ip.size() < 20 || (ip[0] >> 4) != 4) {
    if (stats) ++stats->ip_absent;
    return;
  }
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  std::size_t total = be16(&ip[2]);
  if (ihl < 20 || ip.size() < ihl) {
    if (stats) ++stats->ip_absent;
    return;
  }
  // Ethernet trailers pad short frames; the IP length is authoritative.
  total = std::clamp(total, ihl, ip.size());
  rec.src_ip = Ipv4{be32(&ip[12])};
  rec.dst_ip = Ipv4{be32(&ip[16])};
  const std::uint8_t proto = ip[9];
  const bool later_fragment = (be16(&ip[6]) & 0x1fff) != 0;
  auto l4 = ip.subspan(ihl, total - ihl);
  if (later_fragment) return;
  if (proto == 17 && l4.size() >= 8) {
    rec.ip_proto = IpProto::UDP;
    rec.src_port = be16(&l4[0]);
    rec.dst_port = be16(&l4[2]);
    std::size_t udp_len = std::clamp<std::size_t>(be16(&l4[4]), 8, l4.size());
    auto payload = l4.subspan(8, udp_len - 8);
    rec.payload.assign(payload.begin(), payload.end());
  } else if (proto == 6 && l4.size() >= 20) {
    const std::size_t off = static_cast<std::size_t>(l4[12] >> 4) * 4;
    if (off < 20 || off > l4.size()) return;
    rec.ip_proto = IpProto::TCP;
    rec.src_port = be16(&l4[0]);
    rec.dst_port = be16(&l4[2]);
    rec.tcp_flags = l4[13];
    auto payload = l4.subspan(off);
    rec.payload.assign(payload.begin(), payload.end());
  }
}

void decode_network(std::uint16_t ethertype, std::span<const std::uint8_t> rest,
                    PacketRecord& rec, CaptureStats* stats) {
  if (ethertype == kEtherVlan) {
    if (rest.size() < 4) {
      if (stats) ++stats->ip_absent;
      return;
    }
    ethertype = be16(&rest[2]);
    rest = rest.subspan(4);
  }
  if (ethertype == kEtherIpv4) {
    decode_ipv4(rest, rec, stats);
    return;
  }
  if (stats) {
    ++stats->ip_absent;
    if (ethertype == kEtherIpv6) ++stats->ipv6;
  }
}

}  // namespace

std::string_view to_string(IpProto proto) {
  switch (proto) {
    case IpProto::TCP: return "TCP";
    case IpProto::UDP: return "UDP";
    case IpProto::OTHER: return "OTHER";
  }
  return "OTHER";
}

PacketRecord reversed(const PacketRecord& p) {
  PacketRecord r = p;
  std::swap(r.src_mac, r.dst_mac);
  std::swap(r.src_ip, r.dst_ip);
  std::swap(r.src_port, r.dst_port);
  return r;
}

PacketRecord decode_frame(std::uint32_t link_type,
                          std::span<const std::uint8_t> frame,
                          std::uint32_t wire_len, CaptureStats* stats) {
  PacketRecord rec;
  rec.wire_len = std::max<std::uint32_t>(wire_len, static_cast<std::uint32_t>(frame.size()));
  if (link_type == kLinkEthernet) {
    if (frame.size() < 14) {
      if (stats) ++stats->ip_absent;
      return rec;
    }
    std::memcpy(rec.dst_mac.data(), &frame[0], 6);
    std::memcpy(rec.src_mac.data(), &frame[6], 6);
    decode_network(be16(&frame[12]), frame.subspan(14), rec, stats);
  } else if (link_type == kLinkLinuxSll) {
    if (frame.size() < 16) {
      if (stats) ++stats->ip_absent;
      return rec;
    }
    // Cooked header: packet type, ARPHRD, address length, 8 address bytes,
    // protocol. Only the sender address is recorded.
    const std::size_t addr_len = std::min<std::size_t>(be16(&frame[4]), 6);
    std::memcpy(rec.src_mac.data(), &frame[6], addr_len);
    decode_network(be16(&frame[14]), frame.subspan(16), rec, stats);
  } else {
    if (stats) {
      ++stats->ip_absent;
      ++stats->unsupported_link;
    }
  }
  return rec;
}

PcapReader::PcapReader(std::istream& in) : in_(in) {
  std::uint8_t hdr[kGlobalHeaderLen];
  const std::size_t got = read_fully(in_, hdr, sizeof hdr);
  if (got >= 4) {
    const std::uint32_t magic = le32(hdr);
    if (magic == kMagicMicro || magic == kMagicNano) {
      swapped_ = false;
      nano_ = magic == kMagicNano;
    } else if (be32(hdr) == kMagicMicro || be32(hdr) == kMagicNano) {
      swapped_ = true;
      nano_ = be32(hdr) == kMagicNano;
    } else {
      throw Error(ErrorCode::BadMagic, "not a pcap file (bad magic number)");
    }
  }
  if (got < kGlobalHeaderLen)
    throw Error(ErrorCode::TruncatedHeader,
                "pcap global header truncated (" + std::to_string(got) +
                    " of 24 bytes)");
  link_type_ = read32(&hdr[20]);
}

std::uint32_t PcapReader::read32(const std::uint8_t* p) const {
  return swapped_ ? be32(p) : le32(p);
}

std::uint16_t PcapReader::read16(const std::uint8_t* p) const {
  return swapped_ ? be16(p)
                  : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::optional<PacketRecord> PcapReader::next() {
  std::uint8_t hdr[kRecordHeaderLen];
  const std::size_t got = read_fully(in_, hdr, sizeof hdr);
  if (got == 0) return std::nullopt;
  if (got < kRecordHeaderLen) {
    stats_.truncated = true;
    throw Error(ErrorCode::TruncatedPacket,
                "record header truncated after packet " +
                    std::to_string(next_index_));
  }
  const std::uint32_t sec = read32(&hdr[0]);
  const std::uint32_t frac = read32(&hdr[4]);
  const std::uint32_t incl = read32(&hdr[8]);
  const std::uint32_t orig = read32(&hdr[12]);
  if (incl > kMaxRecordLen) {
    stats_.truncated = true;
    throw Error(ErrorCode::TruncatedPacket,
                "record length " + std::to_string(incl) + " exceeds limit");
  }
  frame_.resize(incl);
  if (read_fully(in_, frame_.data(), incl) < incl) {
    stats_.truncated = true;
    throw Error(ErrorCode::TruncatedPacket,
                "record " + std::to_string(next_index_) +
                    " length exceeds remaining bytes");
  }
  PacketRecord rec = decode_frame(link_type_, frame_, orig, &stats_);
  rec.index = next_index_++;
  rec.ts_us = static_cast<TimestampUs>(sec) * 1'000'000 +
              (nano_ ? frac / 1000 : frac);
  ++stats_.packets;
  return rec;
}

Capture load_capture(std::istream& in) {
  Capture cap;
  PcapReader reader(in);
  try {
    while (auto p = reader.next()) cap.packets.push_back(std::move(*p));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TruncatedPacket) throw;
  }
  cap.stats = reader.stats();
  return cap;
}

Capture load_capture_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return load_capture(in);
}

// ---------------------------------------------------------------------------
// Flow keys and conversations

namespace {

struct QuadText {
  char buf[16];
  std::size_t len;
};

QuadText quad_text(Ipv4 a) {
  QuadText t{};
  char* p = t.buf;
  char* end = t.buf + sizeof t.buf;
  for (int shift = 24; shift >= 0; shift -= 8) {
    p = std::to_chars(p, end, (a.value >> shift) & 0xff).ptr;
    if (shift) *p++ = '.';
  }
  t.len = static_cast<std::size_t>(p - t.buf);
  return t;
}

}  // namespace

bool endpoint_less(Ipv4 a, std::uint16_t pa, Ipv4 b, std::uint16_t pb) {
  if (a == b) return pa < pb;
  const QuadText ta = quad_text(a);
  const QuadText tb = quad_text(b);
  return std::string_view(ta.buf, ta.len) < std::string_view(tb.buf, tb.len);
}

FlowKey FlowKey::canonical(Ipv4 a, std::uint16_t pa, Ipv4 b, std::uint16_t pb,
                           IpProto proto) {
  if (endpoint_less(b, pb, a, pa)) return FlowKey{b, pb, a, pa, proto};
  return FlowKey{a, pa, b, pb, proto};
}

std::optional<FlowKey> FlowKey::of(const PacketRecord& p) {
  if (!p.has_five_tuple()) return std::nullopt;
  return canonical(*p.src_ip, *p.src_port, *p.dst_ip, *p.dst_port, p.ip_proto);
}

std::size_t FlowKeyHash::operator()(const FlowKey& k) const noexcept {
  std::uint64_t h = (std::uint64_t{k.addr_a.value} << 32) | k.addr_b.value;
  h ^= (std::uint64_t{k.port_a} << 24) ^ (std::uint64_t{k.port_b} << 8) ^
       static_cast<std::uint64_t>(k.proto);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return static_cast<std::size_t>(h);
}

std::optional<double> ConversationStats::bits_per_second_ab() const {
  if (duration_us <= 0) return std::nullopt;
  return static_cast<double>(bytes_ab) * 8.0 / duration();
}

std::optional<double> ConversationStats::bits_per_second_ba() const {
  if (duration_us <= 0) return std::nullopt;
  return static_cast<double>(bytes_ba) * 8.0 / duration();
}

ConversationBuilder::ConversationBuilder(PacketFilter filter)
    : filter_(std::move(filter)) {}

void ConversationBuilder::add(const PacketRecord& p) {
  if (!capture_start_ || p.ts_us < *capture_start_) capture_start_ = p.ts_us;
  if (filter_ && !filter_(p)) return;
  auto key = FlowKey::of(p);
  if (!key) return;
  auto [it, inserted] = index_.try_emplace(*key, accs_.size());
  if (inserted) {
    Acc acc;
    acc.stats.key = *key;
    acc.stats.first_ts_us = p.ts_us;
    acc.last_ts = p.ts_us;
    accs_.push_back(acc);
  }
  Acc& acc = accs_[it->second];
  ConversationStats& s = acc.stats;
  s.first_ts_us = std::min(s.first_ts_us, p.ts_us);
  acc.last_ts = std::max(acc.last_ts, p.ts_us);
  ++s.packets_total;
  s.bytes_total += p.wire_len;
  if (*p.src_ip == key->addr_a && *p.src_port == key->port_a) {
    ++s.packets_ab;
    s.bytes_ab += p.wire_len;
  } else {
    ++s.packets_ba;
    s.bytes_ba += p.wire_len;
  }
}

std::vector<ConversationStats> ConversationBuilder::finish() const {
  std::vector<ConversationStats> out;
  out.reserve(accs_.size());
  for (const Acc& acc : accs_) {
    ConversationStats s = acc.stats;
    s.rel_start_us = s.first_ts_us - capture_start_.value_or(s.first_ts_us);
    s.duration_us = acc.last_ts - s.first_ts_us;
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.rel_start_us != b.rel_start_us) return a.rel_start_us < b.rel_start_us;
    return a.key < b.key;
  });
  return out;
}

std::vector<ConversationStats> build_conversations(
    const std::vector<PacketRecord>& packets, const PacketFilter& filter) {
  ConversationBuilder builder(filter);
  for (const auto& p : packets) builder.add(p);
  return builder.finish();
}

const std::vector<std::string>& conversation_columns() {
  static const std::vector<std::string> cols = {
      "Address A",       "Port A",          "Address B",
      "Port B",          "Packets",         "Bytes",
      "Packets A→B", "Bytes A→B",  "Packets B→A",
      "Bytes B→A",  "Rel Start",       "Duration"};
  return cols;
}

void write_conversations_csv(std::ostream& out,
                             const std::vector<ConversationStats>& convs) {
  out << text::csv_row(conversation_columns()) << '\n';
  for (const auto& c : convs) {
    out << text::csv_row({c.key.addr_a.to_string(), std::to_string(c.key.port_a),
                          c.key.addr_b.to_string(), std::to_string(c.key.port_b),
                          std::to_string(c.packets_total),
                          std::to_string(c.bytes_total),
                          std::to_string(c.packets_ab), std::to_string(c.bytes_ab),
                          std::to_string(c.packets_ba), std::to_string(c.bytes_ba),
                          format_seconds(c.rel_start_us, 6),
                          format_seconds(c.duration_us, 4)})
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// CIDR

CidrRange CidrRange::make(Ipv4 base, int prefix_len) {
  if (prefix_len < 0 || prefix_len > 32)
    throw Error(ErrorCode::FormatError,
                "prefix length out of range: " + std::to_string(prefix_len));
  CidrRange r;
  r.prefix_len = static_cast<std::uint8_t>(prefix_len);
  r.base = Ipv4{base.value & r.mask()};
  return r;
}

CidrRange CidrRange::parse(std::string_view s) {
  s = text::trim(s);
  const auto slash = s.find('/');
  const Ipv4 base = Ipv4::must_parse(s.substr(0, slash));
  if (slash == std::string_view::npos) return make(base, 32);
  auto len_text = s.substr(slash + 1);
  int len = -1;
  auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (ec != std::errc{} || ptr != len_text.data() + len_text.size() || len_text.empty())
    throw Error(ErrorCode::FormatError, "bad CIDR prefix: '" + std::string(s) + "'");
  return make(base, len);
}

std::string CidrRange::to_string() const {
  return base.to_string() + "/" + std::to_string(prefix_len);
}

bool cidr_contains(const CidrRange& range, Ipv4 addr) {
  return (addr.value & range.mask()) == range.base.value;
}

}  // namespace tfx::capture
