#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tfx/common.hpp"

namespace tfx::capture {

enum class IpProto : std::uint8_t { TCP, UDP, OTHER };

std::string_view to_string(IpProto proto);

/// Link-layer header types understood by the reader.
inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::uint32_t kLinkLinuxSll = 113;

/// One captured frame. Ports are present iff ip_proto is TCP or UDP; the IP
/// fields are absent when the link layer or network layer could not be
/// decoded (IPv6, ARP, unsupported link types).
struct PacketRecord {
  std::uint64_t index = 0;
  TimestampUs ts_us = 0;
  MacAddress src_mac{};
  MacAddress dst_mac{};
  std::optional<Ipv4> src_ip;
  std::optional<Ipv4> dst_ip;
  IpProto ip_proto = IpProto::OTHER;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::uint8_t tcp_flags = 0;
  std::uint32_t wire_len = 0;
  Bytes payload;

  bool has_ip() const { return src_ip.has_value() && dst_ip.has_value(); }
  bool has_five_tuple() const {
    return has_ip() && src_port.has_value() && dst_port.has_value();
  }
  bool involves(Ipv4 addr) const {
    return has_ip() && (*src_ip == addr || *dst_ip == addr);
  }
};

/// Same packet with source and destination swapped at every layer.
PacketRecord reversed(const PacketRecord& p);

struct CaptureStats {
  std::uint64_t packets = 0;
  std::uint64_t ip_absent = 0;
  std::uint64_t ipv6 = 0;
  std::uint64_t unsupported_link = 0;
  bool truncated = false;
};

/// Streaming reader for classic pcap files (both byte orders, microsecond and
/// nanosecond magics). Only the current record is held in memory.
class PcapReader {
 public:
  /// Reads the global header. Throws Error(BadMagic | TruncatedHeader).
  explicit PcapReader(std::istream& in);

  /// Next packet, or nullopt at a clean end of file. Throws
  /// Error(TruncatedPacket) when a record runs past the end of the input; all
  /// complete records before it have already been returned.
  std::optional<PacketRecord> next();

  std::uint32_t link_type() const { return link_type_; }
  bool nanosecond() const { return nano_; }
  const CaptureStats& stats() const { return stats_; }

 private:
  std::uint32_t read32(const std::uint8_t* p) const;
  std::uint16_t read16(const std::uint8_t* p) const;

  std::istream& in_;
  bool swapped_ = false;
  bool nano_ = false;
  std::uint32_t link_type_ = 0;
  std::uint64_t next_index_ = 0;
  CaptureStats stats_;
  Bytes frame_;
};

/// Decodes one link-layer frame into the packet model. Exposed for tests and
/// for callers that obtain frames from another container format.
PacketRecord decode_frame(std::uint32_t link_type, std::span<const std::uint8_t> frame,
                          std::uint32_t wire_len, CaptureStats* stats = nullptr);

struct Capture {
  std::vector<PacketRecord> packets;
  CaptureStats stats;
};

/// Reads a whole capture. A trailing TruncatedPacket condition is reported
/// through stats.truncated with the packets parsed before it; header errors
/// propagate.
Capture load_capture(std::istream& in);
Capture load_capture_file(const std::string& path);

struct FlowKey {
  Ipv4 addr_a;
  std::uint16_t port_a = 0;
  Ipv4 addr_b;
  std::uint16_t port_b = 0;
  IpProto proto = IpProto::OTHER;

  /// Endpoint order follows the dotted-quad text of the addresses, then the
  /// port number. This is the order in which conversation tables list
  /// endpoints (a private 192.168.x.x client sorts before 52.x.x.x).
  static FlowKey canonical(Ipv4 a, std::uint16_t pa, Ipv4 b, std::uint16_t pb,
                           IpProto proto);
  static std::optional<FlowKey> of(const PacketRecord& p);

  bool operator==(const FlowKey&) const = default;
  auto operator<=>(const FlowKey&) const = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept;
};

/// Text-order comparison of (address, port) endpoints used by FlowKey.
bool endpoint_less(Ipv4 a, std::uint16_t pa, Ipv4 b, std::uint16_t pb);

struct ConversationStats {
  FlowKey key;
  std::uint64_t packets_total = 0;
  std::uint64_t bytes_total = 0;
  std::uint64_t packets_ab = 0;
  std::uint64_t bytes_ab = 0;
  std::uint64_t packets_ba = 0;
  std::uint64_t bytes_ba = 0;
  TimestampUs rel_start_us = 0;
  TimestampUs duration_us = 0;
  /// Absolute timestamp of the first packet (not serialized in the table).
  TimestampUs first_ts_us = 0;

  double rel_start() const { return static_cast<double>(rel_start_us) / 1e6; }
  double duration() const { return static_cast<double>(duration_us) / 1e6; }
  std::optional<double> bits_per_second_ab() const;
  std::optional<double> bits_per_second_ba() const;
};

using PacketFilter = std::function<bool(const PacketRecord&)>;

/// Incremental conversation table. Feed every packet of the capture: packets
/// rejected by the filter still define the capture start used for Rel Start.
class ConversationBuilder {
 public:
  explicit ConversationBuilder(PacketFilter filter = {});

  void add(const PacketRecord& p);
  /// Conversations ordered by relative start, then key.
  std::vector<ConversationStats> finish() const;

 private:
  struct Acc {
    ConversationStats stats;
    TimestampUs last_ts = 0;
  };
  PacketFilter filter_;
  std::optional<TimestampUs> capture_start_;
  std::vector<Acc> accs_;
  std::unordered_map<FlowKey, std::size_t, FlowKeyHash> index_;
};

std::vector<ConversationStats> build_conversations(
    const std::vector<PacketRecord>& packets, const PacketFilter& filter = {});

/// Table columns in display order.
const std::vector<std::string>& conversation_columns();

/// Header plus one row per conversation. Rel Start carries six decimals and
/// Duration four.
void write_conversations_csv(std::ostream& out,
                             const std::vector<ConversationStats>& convs);

struct CidrRange {
  Ipv4 base;
  std::uint8_t prefix_len = 0;

  /// Host bits of base are cleared.
  static CidrRange make(Ipv4 base, int prefix_len);
  /// "52.112.0.0/14"; a bare address means /32. Throws Error(FormatError).
  static CidrRange parse(std::string_view text);

  std::uint32_t mask() const {
    return prefix_len == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix_len);
  }
  std::string to_string() const;

  bool operator==(const CidrRange&) const = default;
};

bool cidr_contains(const CidrRange& range, Ipv4 addr);

}  // namespace tfx::capture
