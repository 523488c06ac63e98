#pragma once

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfx/capture.hpp"

namespace tfx::classify {

using capture::CidrRange;
using capture::ConversationStats;
using capture::FlowKey;
using capture::PacketRecord;

struct LabeledRange {
  std::string label;
  CidrRange range;
};

/// Non-empty list of labeled CIDR ranges with unique labels.
class RangeSet {
 public:
  explicit RangeSet(std::vector<LabeledRange> ranges);

  /// The published Teams media ranges 52.112.0.0/14 and 52.120.0.0/14.
  static RangeSet teams_default();
  /// One "label cidr" pair per line; '#' starts a comment.
  static RangeSet parse(std::istream& in);
  static RangeSet load_file(const std::string& path);

  const LabeledRange* match(Ipv4 addr) const;
  bool contains(Ipv4 addr) const { return match(addr) != nullptr; }
  const std::vector<LabeledRange>& ranges() const { return ranges_; }

 private:
  std::vector<LabeledRange> ranges_;
};

// ---------------------------------------------------------------------------
// DNS

struct DnsResourceRecord {
  std::string name;
  std::uint16_t type = 0;
  std::uint16_t klass = 0;
  std::uint32_t ttl = 0;
  std::optional<Ipv4> a;         // type A
  std::optional<std::string> target;  // type CNAME
};

struct DnsMessage {
  std::uint16_t txid = 0;
  bool response = false;
  std::uint8_t rcode = 0;
  std::string question;  // lowercase, no trailing dot; empty when qdcount=0
  std::uint16_t qtype = 0;
  std::vector<DnsResourceRecord> answers;
};

inline constexpr std::uint16_t kDnsTypeA = 1;
inline constexpr std::uint16_t kDnsTypeCname = 5;

/// Parses a DNS message (RFC 1035, with name compression). nullopt on any
/// structural error.
std::optional<DnsMessage> parse_dns(std::span<const std::uint8_t> payload);

struct DnsObservation {
  TimestampUs ts_us = 0;
  std::string query_name;
  std::vector<Ipv4> answers;
  std::vector<std::string> aliases;
  std::uint16_t txid = 0;
  bool answered = false;
  /// Address that issued the query (or received the response).
  std::optional<Ipv4> client;
  std::uint64_t packet_index = 0;
};

struct DnsExtraction {
  std::vector<DnsObservation> observations;
  std::uint64_t malformed = 0;
};

/// Pairs port-53 queries and responses by transaction id and name.
/// Observations are ordered by query time.
DnsExtraction extract_dns(const std::vector<PacketRecord>& packets);

// ---------------------------------------------------------------------------
// Flow labels

enum class FlowClass { TEAMS_SERVICE, LOCAL_GATEWAY, THIRD_PARTY, UNKNOWN };

std::string_view to_string(FlowClass c);

struct FlowLabel {
  FlowKey key;
  FlowClass label = FlowClass::UNKNOWN;
  std::optional<std::string> matched_range;
  std::vector<std::string> dns_names;
  std::optional<Ipv4> remote;
  /// UDP flow into a service range; media transport is not asserted.
  bool media_candidate = false;
};

struct ClassifyOptions {
  std::optional<Ipv4> client;
  std::optional<Ipv4> gateway;
};

std::vector<FlowLabel> classify_flows(const std::vector<ConversationStats>& convs,
                                      const RangeSet& ranges,
                                      const std::vector<DnsObservation>& dns,
                                      const ClassifyOptions& options = {});

// ---------------------------------------------------------------------------
// SIP presence

/// True when the payload starts with a SIP request line
/// (METHOD SP Request-URI SP "SIP/2.0") or a status line ("SIP/2.0" SP code).
bool starts_with_sip_line(std::string_view payload);

struct SipScan {
  std::uint64_t count = 0;
  std::vector<std::uint64_t> exemplars;  // packet indices, at most 10
};

SipScan detect_sip(const std::vector<PacketRecord>& packets);

// ---------------------------------------------------------------------------
// Walkie-Talkie

struct WtOptions {
  /// Exact names, or "*.suffix" patterns when suffix_wildcard is set.
  std::vector<std::string> names{"walkietalkie.teams.microsoft.com"};
  bool suffix_wildcard = false;
  TimestampUs idle_gap_us = 30'000'000;
  std::optional<Ipv4> peer;
  std::uint16_t tls_port = 443;
};

bool wt_name_matches(const WtOptions& options, std::string_view name);

struct WtSession {
  TimestampUs start_ts_us = 0;
  TimestampUs end_ts_us = 0;
  std::vector<FlowKey> flows;
  std::vector<Ipv4> wt_hub_addrs;
  std::uint64_t dns_hits = 0;
};

enum class WtVerdict { DETECTED, NOT_DETECTED, INCONSISTENT };

std::string_view to_string(WtVerdict v);

struct WtReport {
  Ipv4 client_addr;
  std::vector<WtSession> sessions;
  std::uint64_t sip_packets_found = 0;
  std::vector<std::uint64_t> sip_exemplars;
  bool peer_direct_traffic_found = false;
  WtVerdict verdict = WtVerdict::NOT_DETECTED;
  std::uint64_t dns_hits = 0;
  std::vector<Ipv4> resolved_wt_addrs;
  std::vector<FlowKey> media_candidates;
  std::vector<std::string> notes;
};

/// Throws Error(ClientNotSeen) when client_addr is in no packet.
WtReport detect_walkie_talkie(const std::vector<PacketRecord>& packets,
                              Ipv4 client_addr, const RangeSet& ranges,
                              const WtOptions& options = {});

}  // namespace tfx::classify
