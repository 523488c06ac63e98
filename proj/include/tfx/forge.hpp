#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tfx/capture.hpp"
#include "tfx/cdr.hpp"
#include "tfx/sip.hpp"
#include "tfx/usage.hpp"

namespace tfx::forge {

/// Portable generator: std::mt19937_64 raw output only (its sequence is fixed
/// by the standard), with our own reductions to ranges and doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform in [0, 1) from the top 53 bits.
  double unit();
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Frame building and pcap output

struct Endpoint {
  MacAddress mac{};
  Ipv4 ip;
  std::uint16_t port = 0;
};

inline constexpr std::size_t kEthIpTcpHeader = 14 + 20 + 20;
inline constexpr std::size_t kEthIpUdpHeader = 14 + 20 + 8;

inline constexpr std::uint8_t kTcpFin = 0x01;
inline constexpr std::uint8_t kTcpRst = 0x04;
inline constexpr std::uint8_t kTcpPsh = 0x08;
inline constexpr std::uint8_t kTcpAck = 0x10;

/// Ethernet/IPv4/TCP with valid checksums. options must be a multiple of four
/// bytes. A frame shorter than pad_to gets a zero Ethernet trailer.
Bytes build_tcp_frame(const Endpoint& src, const Endpoint& dst, std::uint8_t flags,
                      std::uint32_t seq, std::uint32_t ack, const Bytes& payload,
                      const Bytes& options = {}, std::size_t pad_to = 0);
Bytes build_udp_frame(const Endpoint& src, const Endpoint& dst, const Bytes& payload,
                      std::size_t pad_to = 0);

/// Classic little-endian microsecond pcap, Ethernet link type.
class PcapWriter {
 public:
  explicit PcapWriter(std::ostream& out, std::uint32_t snaplen = 65535);
  void write(TimestampUs ts_us, const Bytes& frame);
  std::uint64_t packets() const { return packets_; }

 private:
  std::ostream& out_;
  std::uint64_t packets_ = 0;
};

/// A query for name of type A.
Bytes encode_dns_query(std::uint16_t txid, const std::string& name);
/// Response carrying the question, a CNAME chain (owner, target pairs built
/// from name -> aliases[0] -> aliases[1] ...) and one A record for the last
/// name. Suffixes already written are compressed.
Bytes encode_dns_response(std::uint16_t txid, const std::string& name,
                          const std::vector<std::string>& cname_chain, Ipv4 address);

// ---------------------------------------------------------------------------
// PSTN call through the SBC, recorded as ACDR over UDP

struct GapSpec {
  std::size_t stream = 0;       // index into the four streams
  std::size_t first_packet = 0; // packet position within the stream
  std::size_t count = 0;
};

struct PstnCallSpec {
  std::uint64_t seed = 1;
  double duration_s = 1.0;
  double duplicate_rate = 0.0;
  std::vector<GapSpec> gaps;
  /// First RTP sequence number of every stream; random when absent.
  std::optional<std::uint16_t> start_seq;
  /// Ringing tone before the far-end audio on the PSTN side.
  double ringing_s = 0.5;
  TimestampUs start_us = 1626786000000000;  // 2021-07-20T13:00:00Z
  /// Arrival delay of the PSTN-side streams against the Teams-side ones.
  TimestampUs pstn_offset_us = 5000;
  double amplitude = 8000.0;
};

struct StreamTruth {
  std::string label;  // e.g. "Teams->SBC"
  int trace_pt = 0;
  int src_id = 0;
  std::uint8_t payload_type = 0;
  std::uint32_t ssrc = 0;
  std::uint16_t first_seq = 0;
  double tone_hz = 0.0;
  double ring_hz = 0.0;
  std::size_t ring_samples = 0;
  std::size_t packets = 0;  // distinct packets generated, before drops
  std::size_t packets_sent = 0;
  std::size_t duplicates_injected = 0;
  std::vector<std::size_t> dropped_packets;  // positions
  TimestampUs first_arrival_us = 0;
};

struct PstnCallFixture {
  Bytes pcap;
  std::string session_id;
  std::uint32_t sample_rate = 8000;
  std::size_t samples_per_packet = 160;
  double amplitude = 0.0;
  std::vector<StreamTruth> streams;
};

/// Throws Error(InvalidSpec).
PstnCallFixture gen_pstn_call_capture(const PstnCallSpec& spec);

/// Linear waveform the generator encoded for a stream; with zero_dropped the
/// samples of dropped packets are silenced as a receiver would render them.
std::vector<std::int16_t> source_waveform(const PstnCallFixture& fx, const StreamTruth& s,
                                          bool zero_dropped);

// ---------------------------------------------------------------------------
// Walkie-Talkie session capture

struct FlowRow {
  Ipv4 addr_a;
  std::uint16_t port_a = 0;
  Ipv4 addr_b;
  std::uint16_t port_b = 0;
  std::uint64_t packets_ab = 0;
  std::uint64_t bytes_ab = 0;
  std::uint64_t packets_ba = 0;
  std::uint64_t bytes_ba = 0;
  TimestampUs rel_start_us = 0;
  TimestampUs duration_us = 0;

  std::uint64_t packets() const { return packets_ab + packets_ba; }
  std::uint64_t bytes() const { return bytes_ab + bytes_ba; }
};

/// The nine client/Teams-range conversations of the observed session.
const std::vector<FlowRow>& wt_reference_rows();

struct WtSpec {
  std::uint64_t seed = 1;
  bool include_sip = false;
  /// Adds direct UDP traffic between the client and this address.
  std::optional<Ipv4> peer;
  TimestampUs base_us = 1626786000000000;
};

struct DnsTruth {
  TimestampUs rel_query_us = 0;
  TimestampUs rel_response_us = 0;
  std::uint16_t txid = 0;
  std::string name;
  std::vector<std::string> cname_chain;
  Ipv4 address;
};

struct WtFixture {
  Bytes pcap;
  Ipv4 client;
  Ipv4 gateway;
  MacAddress client_mac{};
  std::vector<FlowRow> teams_flows;
  std::vector<FlowRow> other_flows;
  std::vector<DnsTruth> dns;
  std::uint64_t sip_packets = 0;
  bool peer_traffic = false;
  std::string expected_verdict;
};

WtFixture gen_wt_capture(const WtSpec& spec);

// ---------------------------------------------------------------------------
// SBC syslog

struct SipLogSpec {
  std::uint64_t seed = 1;
  std::size_t dialogs = 100;
  std::size_t min_messages = 5;
  std::size_t max_messages = 12;
  /// Dialogs open at the same time.
  std::size_t interleave = 8;
  /// Approximate total output size, reached with 200-byte diagnostic
  /// records (within half a record). 0 means no filler.
  std::uint64_t byte_target = 0;
  TimestampUs start_us = 1626786000000000;
  std::string host = "sbc01";
};

struct DialogTruth {
  std::string call_id;
  std::size_t messages = 0;
  std::string caller;
  std::string callee;
  TimestampUs start_us = 0;
  TimestampUs end_us = 0;
  sip::Completeness completeness = sip::Completeness::COMPLETE;
};

struct SipLogManifest {
  std::vector<DialogTruth> dialogs;  // in order of first message
  std::uint64_t bytes = 0;
  std::uint64_t sip_records = 0;
  std::uint64_t filler_records = 0;
};

/// Streams the log to out. Throws Error(InvalidSpec).
SipLogManifest gen_sip_log(const SipLogSpec& spec, std::ostream& out);

// ---------------------------------------------------------------------------
// SBC CDR export

struct CdrSpec {
  std::uint64_t seed = 1;
  /// Emit the ten-row reference history instead of random calls.
  bool reference = false;
  std::size_t calls = 50;
  /// Relative weights of the generated outcomes.
  std::map<cdr::Outcome, double> mix{{cdr::Outcome::COMPLETED, 0.6},
                                     {cdr::Outcome::NO_ANSWER, 0.2},
                                     {cdr::Outcome::BUSY, 0.1},
                                     {cdr::Outcome::FAILED, 0.1}};
};

struct CdrCallTruth {
  std::string session_id;
  cdr::Outcome outcome = cdr::Outcome::OTHER;
  cdr::CallDirection direction = cdr::CallDirection::UNDETERMINED;
  std::optional<std::int64_t> duration_s;
  std::string caller;
  std::string callee;
};

struct CdrFixture {
  std::string csv;
  std::size_t legs = 0;
  std::vector<CdrCallTruth> calls;  // ordered by session id
};

CdrFixture gen_cdr(const CdrSpec& spec);

// ---------------------------------------------------------------------------
// Tenant usage exports

/// Published per-window totals.
struct UsageTotals {
  usage::Window window = usage::Window::D7;
  std::uint64_t users = 0;
  std::uint64_t one_to_one_calls = 0;
  std::string audio;
  std::string video;
  std::int64_t avg_audio_hours = 0;
  std::int64_t avg_video_hours = 0;
  std::map<usage::DeviceClass, std::uint64_t> devices;
  std::uint64_t pstn_calls = 0;
  std::string pstn_time;
};

const std::vector<UsageTotals>& usage_reference_totals();

struct TopTalker {
  std::string audio;
  std::string video;
};

/// Ten heaviest audio users of the last seven days, rank order.
const std::vector<TopTalker>& usage_reference_top();

struct UsageSpec {
  std::uint64_t seed = 1;
  /// Reproduce the reference totals and top-ten list; otherwise random.
  bool reference = true;
  std::size_t users = 50;
};

struct UsageFixture {
  std::string activity_csv;
  std::string device_csv;
  std::string pstn_csv;
  std::map<usage::Window, usage::UsageSummary> expected;
  std::vector<usage::RankedUser> expected_top_audio;  // D7
};

UsageFixture gen_usage(const UsageSpec& spec);

// ---------------------------------------------------------------------------
// Manifests

std::string manifest_json(const PstnCallFixture& fx);
std::string manifest_json(const WtFixture& fx);
std::string manifest_json(const SipLogManifest& m);
std::string manifest_json(const CdrFixture& fx);
std::string manifest_json(const UsageFixture& fx);

}  // namespace tfx::forge
