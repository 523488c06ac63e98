#include "tfx/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "tfx/g711.hpp"
#include "tfx/media.hpp"
#include "tfx/text.hpp"

namespace tfx::forge {

using nlohmann::json;

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Rng::below(0)");
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % n;
  }
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "Rng::between with hi < lo");
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); }

void put16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

void put32(Bytes& b, std::uint32_t v) {
  put16(b, static_cast<std::uint16_t>(v >> 16));
  put16(b, static_cast<std::uint16_t>(v));
}

void set16(Bytes& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v >> 8);
  b[at + 1] = static_cast<std::uint8_t>(v);
}

std::uint32_t sum16(const std::uint8_t* p, std::size_t n, std::uint32_t acc = 0) {
  for (std::size_t i = 0; i + 1 < n; i += 2) acc += (std::uint32_t{p[i]} << 8) | p[i + 1];
  if (n % 2) acc += std::uint32_t{p[n - 1]} << 8;
  return acc;
}

std::uint16_t fold(std::uint32_t acc) {
  while (acc >> 16) acc = (acc & 0xffff) + (acc >> 16);
  return static_cast<std::uint16_t>(~acc);
}

Bytes ip_frame(const Endpoint& src, const Endpoint& dst, std::uint8_t proto, const Bytes& l4) {
  Bytes f;
  f.reserve(34 + l4.size());
  f.insert(f.end(), dst.mac.begin(), dst.mac.end());
  f.insert(f.end(), src.mac.begin(), src.mac.end());
  put16(f, 0x0800);
  const std::size_t ip = f.size();
  f.push_back(0x45);
  f.push_back(0);
  put16(f, static_cast<std::uint16_t>(20 + l4.size()));
  put16(f, 0);
  put16(f, 0x4000);
  f.push_back(64);
  f.push_back(proto);
  put16(f, 0);
  put32(f, src.ip.value);
  put32(f, dst.ip.value);
  set16(f, ip + 10, fold(sum16(&f[ip], 20)));

  // Transport checksum over the pseudo header.
  Bytes seg = l4;
  const std::size_t ck = proto == 6 ? 16 : 6;
  seg[ck] = seg[ck + 1] = 0;
  std::uint32_t acc = sum16(&f[ip + 12], 8);
  acc += proto;
  acc += static_cast<std::uint32_t>(seg.size());
  std::uint16_t c = fold(sum16(seg.data(), seg.size(), acc));
  if (proto == 17 && c == 0) c = 0xffff;
  set16(seg, ck, c);
  f.insert(f.end(), seg.begin(), seg.end());
  return f;
}

void pad(Bytes& f, std::size_t to) {
  if (f.size() < to) f.resize(to, 0);
}

}  // namespace

Bytes build_tcp_frame(const Endpoint& src, const Endpoint& dst, std::uint8_t flags,
                      std::uint32_t seq, std::uint32_t ack, const Bytes& payload,
                      const Bytes& options, std::size_t pad_to) {
  if (options.size() % 4 || options.size() > 40)
    throw Error(ErrorCode::InvalidArgument, "TCP options must be 0-40 bytes in words");
  Bytes t;
  put16(t, src.port);
  put16(t, dst.port);
  put32(t, seq);
  put32(t, ack);
  t.push_back(static_cast<std::uint8_t>((5 + options.size() / 4) << 4));
  t.push_back(flags);
  put16(t, 502);
  put16(t, 0);
  put16(t, 0);
  t.insert(t.end(), options.begin(), options.end());
  t.insert(t.end(), payload.begin(), payload.end());
  Bytes f = ip_frame(src, dst, 6, t);
  pad(f, pad_to);
  return f;
}

Bytes build_udp_frame(const Endpoint& src, const Endpoint& dst, const Bytes& payload,
                      std::size_t pad_to) {
  Bytes u;
  put16(u, src.port);
  put16(u, dst.port);
  put16(u, static_cast<std::uint16_t>(8 + payload.size()));
  put16(u, 0);
  u.insert(u.end(), payload.begin(), payload.end());
  Bytes f = ip_frame(src, dst, 17, u);
  pad(f, pad_to);
  return f;
}

PcapWriter::PcapWriter(std::ostream& out, std::uint32_t snaplen) : out_(out) {
  auto le = [&](std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  le(0xa1b2c3d4, 4);
  le(2, 2);
  le(4, 2);
  le(0, 4);
  le(0, 4);
  le(snaplen, 4);
  le(capture::kLinkEthernet, 4);
}

void PcapWriter::write(TimestampUs ts_us, const Bytes& frame) {
  auto le = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  le(static_cast<std::uint32_t>(ts_us / 1'000'000));
  le(static_cast<std::uint32_t>(ts_us % 1'000'000));
  le(static_cast<std::uint32_t>(frame.size()));
  le(static_cast<std::uint32_t>(frame.size()));
  out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  ++packets_;
}

// ---------------------------------------------------------------------------
// DNS

namespace {

class NameWriter {
 public:
  explicit NameWriter(Bytes& out) : out_(out) {}

  void write(const std::string& name) {
    std::vector<std::string> labels;
    std::stringstream ss(name);
    for (std::string l; std::getline(ss, l, '.');) labels.push_back(l);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::string suffix;
      for (std::size_t k = i; k < labels.size(); ++k) suffix += (k > i ? "." : "") + labels[k];
      if (auto it = seen_.find(suffix); it != seen_.end()) {
        put16(out_, static_cast<std::uint16_t>(0xc000 | it->second));
        return;
      }
      if (out_.size() < 0x3fff) seen_.emplace(suffix, static_cast<std::uint16_t>(out_.size()));
      out_.push_back(static_cast<std::uint8_t>(labels[i].size()));
      out_.insert(out_.end(), labels[i].begin(), labels[i].end());
    }
    out_.push_back(0);
  }

 private:
  Bytes& out_;
  std::unordered_map<std::string, std::uint16_t> seen_;
};

void dns_header(Bytes& b, std::uint16_t txid, std::uint16_t flags, std::uint16_t an) {
  put16(b, txid);
  put16(b, flags);
  put16(b, 1);
  put16(b, an);
  put16(b, 0);
  put16(b, 0);
}

}  // namespace

Bytes encode_dns_query(std::uint16_t txid, const std::string& name) {
  Bytes b;
  dns_header(b, txid, 0x0100, 0);
  NameWriter w(b);
  w.write(name);
  put16(b, 1);
  put16(b, 1);
  return b;
}

Bytes encode_dns_response(std::uint16_t txid, const std::string& name,
                          const std::vector<std::string>& cname_chain, Ipv4 address) {
  Bytes b;
  dns_header(b, txid, 0x8180, static_cast<std::uint16_t>(cname_chain.size() + 1));
  NameWriter w(b);
  w.write(name);
  put16(b, 1);
  put16(b, 1);
  std::string owner = name;
  auto record = [&](std::uint16_t type, std::uint32_t ttl) {
    w.write(owner);
    put16(b, type);
    put16(b, 1);
    put32(b, ttl);
    const std::size_t len_at = b.size();
    put16(b, 0);
    return len_at;
  };
  for (const auto& target : cname_chain) {
    const std::size_t len_at = record(5, 300);
    const std::size_t start = b.size();
    w.write(target);
    set16(b, len_at, static_cast<std::uint16_t>(b.size() - start));
    owner = target;
  }
  const std::size_t len_at = record(1, 10);
  put32(b, address.value);
  set16(b, len_at, 4);
  return b;
}

// ---------------------------------------------------------------------------
// PSTN call capture

namespace {

struct StreamPlan {
  const char* label;
  int trace_pt;
  int src_id;
  std::uint8_t pt;
  double tone_hz;
  bool ringing;
  bool pstn_side;
};

// Teams-side legs carry PCMU, PSTN-side legs PCMA. The PSTN side opens with
// the ringing tone heard before the callee answers.
constexpr StreamPlan kStreams[4] = {
    {"Teams->SBC", 35, 36, 0, 1000.0, false, false},
    {"SBC->PSTN", 36, 37, 8, 1000.0, false, false},
    {"PSTN->SBC", 21, 38, 8, 600.0, true, true},
    {"SBC->Teams", 22, 39, 0, 600.0, true, true},
};
constexpr double kRingHz = 425.0;

std::int16_t tone_sample(double amplitude, double hz, std::size_t n, std::uint32_t rate) {
  return static_cast<std::int16_t>(
      std::lround(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(n) / rate)));
}

std::vector<std::int16_t> synth(const PstnCallFixture& fx, const StreamTruth& s) {
  std::vector<std::int16_t> out(s.packets * fx.samples_per_packet);
  for (std::size_t n = 0; n < out.size(); ++n)
    out[n] = tone_sample(fx.amplitude, n < s.ring_samples ? s.ring_hz : s.tone_hz, n, fx.sample_rate);
  return out;
}

struct Timed {
  TimestampUs ts;
  std::uint64_t order;
  Bytes frame;
};

Bytes write_pcap(std::vector<Timed>& frames) {
  std::stable_sort(frames.begin(), frames.end(), [](const Timed& a, const Timed& b) {
    return std::tie(a.ts, a.order) < std::tie(b.ts, b.order);
  });
  std::ostringstream out;
  PcapWriter w(out);
  for (const auto& f : frames) w.write(f.ts, f.frame);
  const std::string s = out.str();
  return Bytes(s.begin(), s.end());
}

}  // namespace

std::vector<std::int16_t> source_waveform(const PstnCallFixture& fx, const StreamTruth& s,
                                          bool zero_dropped) {
  auto out = synth(fx, s);
  if (zero_dropped)
    for (std::size_t k : s.dropped_packets)
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(k * fx.samples_per_packet),
                  fx.samples_per_packet, std::int16_t{0});
  return out;
}

PstnCallFixture gen_pstn_call_capture(const PstnCallSpec& spec) {
  if (!(spec.duration_s > 0) || spec.duration_s > 3600) invalid("duration must be in (0, 3600] s");
  if (!(spec.duplicate_rate >= 0) || spec.duplicate_rate > 1) invalid("duplicate rate must be in [0, 1]");
  if (!(spec.ringing_s >= 0) || spec.ringing_s >= spec.duration_s)
    invalid("ringing must be shorter than the call");
  if (spec.pstn_offset_us < 0) invalid("negative PSTN offset");
  if (!(spec.amplitude > 0) || spec.amplitude > 32767) invalid("amplitude out of range");

  PstnCallFixture fx;
  fx.session_id = "db01ef9:65";
  fx.amplitude = spec.amplitude;
  const auto packets = static_cast<std::size_t>(std::llround(spec.duration_s * 50));
  if (packets == 0) invalid("call shorter than one packet");

  std::vector<std::vector<bool>> dropped(4, std::vector<bool>(packets, false));
  for (const auto& g : spec.gaps) {
    if (g.stream >= 4 || g.count == 0 || g.first_packet + g.count > packets)
      invalid("gap outside the stream");
    for (std::size_t k = 0; k < g.count; ++k) dropped[g.stream][g.first_packet + k] = true;
  }

  Rng rng(spec.seed);
  const Endpoint sbc{{0x00, 0x0d, 0x3a, 0x51, 0x20, 0x04}, Ipv4(10, 15, 4, 20), 40925};
  const Endpoint collector{{0x00, 0x0d, 0x3a, 0x51, 0x20, 0x64}, Ipv4(10, 15, 4, 100),
                           media::kDefaultAcdrPort};
  std::vector<Timed> frames;
  std::uint64_t order = 0;

  auto emit = [&](TimestampUs ts, int tp, int sid, media::MediaType type, Bytes payload) {
    media::AcdrFrame a;
    a.ts_us = ts;
    a.trace_pt = static_cast<std::uint8_t>(tp);
    a.src_id = static_cast<std::uint8_t>(sid);
    a.full_session_id = fx.session_id;
    a.media_type = type;
    a.payload = std::move(payload);
    frames.push_back({ts, order++, build_udp_frame(sbc, collector, media::encode_acdr(a))});
  };

  // Signalling trace records ride the same collector port.
  const std::string note = "INVITE sip:+390421364@10.15.4.30 SIP/2.0";
  emit(spec.start_us - 2000, 0, 1, media::MediaType::OTHER, Bytes(note.begin(), note.end()));

  for (std::size_t s = 0; s < 4; ++s) {
    const StreamPlan& plan = kStreams[s];
    StreamTruth t;
    t.label = plan.label;
    t.trace_pt = plan.trace_pt;
    t.src_id = plan.src_id;
    t.payload_type = plan.pt;
    t.ssrc = static_cast<std::uint32_t>(rng.next());
    t.first_seq = spec.start_seq ? *spec.start_seq : static_cast<std::uint16_t>(rng.below(65536));
    const auto ts0 = static_cast<std::uint32_t>(rng.next());
    t.tone_hz = plan.tone_hz;
    if (plan.ringing) {
      t.ring_hz = kRingHz;
      t.ring_samples = static_cast<std::size_t>(std::llround(spec.ringing_s * fx.sample_rate));
    }
    t.packets = packets;
    t.first_arrival_us = spec.start_us + (plan.pstn_side ? spec.pstn_offset_us : 0);
    for (std::size_t k = 0; k < packets; ++k)
      if (dropped[s][k]) t.dropped_packets.push_back(k);

    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < packets; ++k)
      if (!dropped[s][k]) kept.push_back(k);
    const auto dup_count = static_cast<std::size_t>(std::floor(spec.duplicate_rate * static_cast<double>(packets)));
    if (dup_count > kept.size()) invalid("more duplicates than delivered packets");
    for (std::size_t i = 0; i < dup_count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(kept.size() - i));
      std::swap(kept[i], kept[j]);
    }
    std::vector<bool> duplicate(packets, false);
    for (std::size_t i = 0; i < dup_count; ++i) duplicate[kept[i]] = true;
    t.duplicates_injected = dup_count;

    const auto pcm = synth(fx, t);
    const auto law = plan.pt == 0 ? media::G711Law::MU : media::G711Law::A;
    for (std::size_t k = 0; k < packets; ++k) {
      const TimestampUs jitter = k == 0 ? 0 : static_cast<TimestampUs>(rng.below(1500));
      const TimestampUs arrival = t.first_arrival_us + static_cast<TimestampUs>(k) * 20000 + jitter;
      if (dropped[s][k]) continue;
      media::RtpPacket p;
      p.seq = static_cast<std::uint16_t>(t.first_seq + k);
      p.timestamp = ts0 + static_cast<std::uint32_t>(k * fx.samples_per_packet);
      p.ssrc = t.ssrc;
      p.payload_type = plan.pt;
      p.marker = k == 0;
      p.payload = media::encode_g711(
          std::span<const std::int16_t>(pcm.data() + k * fx.samples_per_packet, fx.samples_per_packet), law);
      const Bytes rtp = media::encode_rtp(p);
      emit(arrival, plan.trace_pt, plan.src_id, media::MediaType::RTP, rtp);
      ++t.packets_sent;
      if (duplicate[k]) {
        emit(arrival + 100 + static_cast<TimestampUs>(rng.below(3000)), plan.trace_pt, plan.src_id,
             media::MediaType::RTP, rtp);
        ++t.packets_sent;
      }
    }
    fx.streams.push_back(std::move(t));
  }
  fx.pcap = write_pcap(frames);
  return fx;
}

// ---------------------------------------------------------------------------
// Walkie-Talkie capture

const std::vector<FlowRow>& wt_reference_rows() {
  static const std::vector<FlowRow> rows = [] {
    const Ipv4 client(192, 168, 1, 5);
    auto row = [&](std::uint16_t pa, Ipv4 b, std::uint64_t pab, std::uint64_t bab, std::uint64_t pba,
                   std::uint64_t bba, TimestampUs start, TimestampUs dur) {
      return FlowRow{client, pa, b, 443, pab, bab, pba, bba, start, dur};
    };
    // The 38078 row shows its A->B bytes only as "20k"; 20095 follows from its
    // 6535 bit/s over 24.5994 s.
    return std::vector<FlowRow>{
        row(48851, Ipv4(52, 114, 104, 172), 3, 433, 2, 250, 727369, 77900),
        row(38078, Ipv4(52, 114, 77, 33), 21, 20095, 13, 2538, 945041, 24599400),
        row(42429, Ipv4(52, 114, 74, 99), 4, 354, 3, 225, 8592562, 77700),
        row(42428, Ipv4(52, 114, 74, 99), 15, 2501, 18, 3528, 8633261, 14328200),
        row(37038, Ipv4(52, 114, 74, 97), 4, 620, 2, 624, 8637498, 14218100),
        row(42472, Ipv4(52, 114, 74, 99), 17, 4186, 14, 7265, 8988481, 13799600),
        row(42473, Ipv4(52, 114, 74, 99), 14, 3944, 13, 7214, 22991771, 15823600),
        row(46095, Ipv4(52, 114, 74, 181), 1, 330, 2, 443, 28710377, 177500),
        row(42433, Ipv4(52, 114, 74, 211), 2, 172, 1, 101, 30795856, 31600),
    };
  }();
  return rows;
}

namespace {

struct WtBuilder {
  TimestampUs base;
  std::vector<Timed> frames;
  std::uint64_t order = 0;

  void add(TimestampUs rel, Bytes frame) { frames.push_back({base + rel, order++, std::move(frame)}); }
};

// Sizes of n packets summing to total, as even as possible.
std::vector<std::uint64_t> spread(std::uint64_t total, std::uint64_t n) {
  std::vector<std::uint64_t> out(n, total / n);
  for (std::uint64_t i = 0; i < total % n; ++i) ++out[i];
  return out;
}

Bytes filler(Rng& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(256));
  return b;
}

Bytes tcp_timestamps(std::uint32_t tsval) {
  Bytes o{0x01, 0x01, 0x08, 0x0a};
  put32(o, tsval);
  put32(o, 0);
  return o;
}

FlowRow oriented(Ipv4 x, std::uint16_t px, Ipv4 y, std::uint16_t py) {
  FlowRow r;
  const bool x_first = capture::endpoint_less(x, px, y, py);
  r.addr_a = x_first ? x : y;
  r.port_a = x_first ? px : py;
  r.addr_b = x_first ? y : x;
  r.port_b = x_first ? py : px;
  return r;
}

void count(FlowRow& r, Ipv4 src, std::uint16_t sport, TimestampUs rel, std::size_t len, bool first) {
  if (src == r.addr_a && sport == r.port_a) {
    ++r.packets_ab;
    r.bytes_ab += len;
  } else {
    ++r.packets_ba;
    r.bytes_ba += len;
  }
  if (first) r.rel_start_us = rel;
  r.duration_us = rel - r.rel_start_us;
}

}  // namespace

WtFixture gen_wt_capture(const WtSpec& spec) {
  WtFixture fx;
  fx.client = Ipv4(192, 168, 1, 5);
  fx.gateway = Ipv4(192, 168, 1, 1);
  fx.client_mac = {0x80, 0x58, 0xf8, 0x13, 0x2b, 0x5c};
  const MacAddress gw_mac{0x00, 0x1e, 0x8c, 0x4a, 0x11, 0x07};
  Rng rng(spec.seed);
  WtBuilder b{spec.base_us, {}, 0};

  auto client_ep = [&](std::uint16_t port) { return Endpoint{fx.client_mac, fx.client, port}; };
  auto remote_ep = [&](Ipv4 ip, std::uint16_t port) { return Endpoint{gw_mac, ip, port}; };

  // Teams-range conversations.
  for (const FlowRow& row : wt_reference_rows()) {
    const auto ab = spread(row.bytes_ab, row.packets_ab);
    const auto ba = spread(row.bytes_ba, row.packets_ba);
    const std::uint64_t n = row.packets();
    std::size_t ia = 0, ib = 0;
    std::uint32_t seq_a = static_cast<std::uint32_t>(rng.next());
    std::uint32_t seq_b = static_cast<std::uint32_t>(rng.next());
    const Endpoint a = client_ep(row.port_a);
    const Endpoint bb = remote_ep(row.addr_b, row.port_b);
    for (std::uint64_t k = 0; k < n; ++k) {
      const TimestampUs rel =
          row.rel_start_us + (n == 1 ? 0 : row.duration_us * static_cast<TimestampUs>(k) / static_cast<TimestampUs>(n - 1));
      const bool from_a = ia < ab.size() && (k % 2 == 0 || ib >= ba.size());
      const std::uint64_t len = from_a ? ab[ia++] : ba[ib++];
      const Bytes payload = filler(rng, len - kEthIpTcpHeader);
      if (from_a) {
        b.add(rel, build_tcp_frame(a, bb, kTcpPsh | kTcpAck, seq_a, seq_b, payload));
        seq_a += static_cast<std::uint32_t>(payload.size());
      } else {
        b.add(rel, build_tcp_frame(bb, a, kTcpPsh | kTcpAck, seq_b, seq_a, payload));
        seq_b += static_cast<std::uint32_t>(payload.size());
      }
    }
    fx.teams_flows.push_back(row);
  }

  // Third-party TLS sessions being torn down: alert, FIN and two resets.
  struct Teardown {
    Ipv4 server;
    std::uint16_t port;
    TimestampUs alert, fin, rst1, rst2;
    std::uint32_t tsval;
  };
  const Teardown teardowns[] = {
      {Ipv4(142, 250, 184, 35), 48485, 2202191, 2204140, 2218230, 2220126, 2244925},
      {Ipv4(142, 250, 184, 67), 46017, 9742844, 9748244, 9758433, 9764018, 2247189},
      {Ipv4(142, 250, 180, 131), 37518, 20591318, 20593493, 20609358, 20611238, 2250446},
  };
  bool first_google = true;
  for (const auto& t : teardowns) {
    const Endpoint c = client_ep(t.port);
    const Endpoint g = remote_ep(t.server, 443);
    FlowRow r = oriented(fx.client, t.port, t.server, 443);
    std::uint32_t seq = static_cast<std::uint32_t>(rng.next());
    const std::uint32_t ack = static_cast<std::uint32_t>(rng.next());
    bool first = true;
    if (first_google) {
      // Earlier application data opens the capture.
      const Bytes data = filler(rng, 120 - kEthIpTcpHeader);
      b.add(0, build_tcp_frame(c, g, kTcpPsh | kTcpAck, seq, ack, data));
      count(r, fx.client, t.port, 0, 120, true);
      seq += static_cast<std::uint32_t>(data.size());
      first = false;
      first_google = false;
    }
    const Bytes alert = filler(rng, 97 - kEthIpTcpHeader);
    b.add(t.alert, build_tcp_frame(c, g, kTcpPsh | kTcpAck, seq, ack, alert));
    count(r, fx.client, t.port, t.alert, 97, first);
    seq += static_cast<std::uint32_t>(alert.size());
    b.add(t.fin, build_tcp_frame(c, g, kTcpFin | kTcpAck, seq, ack, {}, tcp_timestamps(t.tsval)));
    count(r, fx.client, t.port, t.fin, 66, false);
    for (TimestampUs ts : {t.rst1, t.rst2}) {
      b.add(ts, build_tcp_frame(g, c, kTcpRst, ack, 0, {}, {}, 60));
      count(r, t.server, 443, ts, 60, false);
    }
    fx.other_flows.push_back(r);
  }

  // Name resolution through the home gateway.
  const std::string wt_name = "walkietalkie.teams.microsoft.com";
  const std::vector<std::string> chain = {
      "rtlswt-prod-global.trafficmanager.net",
      "ip-byoip-rtlclstr-prod-weu-01-rtls-wt-hub.westeurope.cloudapp.azure.com"};
  const Ipv4 hub(52, 114, 74, 99);
  struct Lookup {
    std::uint16_t txid;
    std::uint16_t port;
    TimestampUs query, response;
  };
  const Lookup lookups[] = {{0x0ed9, 51334, 8874450, 8973114}, {0x683f, 40127, 22924822, 22986687}};
  for (const auto& l : lookups) {
    const Endpoint c = client_ep(l.port);
    const Endpoint gw{gw_mac, fx.gateway, 53};
    const Bytes q = build_udp_frame(c, gw, encode_dns_query(l.txid, wt_name));
    const Bytes r = build_udp_frame(gw, c, encode_dns_response(l.txid, wt_name, chain, hub));
    b.add(l.query, q);
    b.add(l.response, r);
    FlowRow f = oriented(fx.client, l.port, fx.gateway, 53);
    count(f, fx.client, l.port, l.query, q.size(), true);
    count(f, fx.gateway, 53, l.response, r.size(), false);
    fx.other_flows.push_back(f);
    fx.dns.push_back({l.query, l.response, l.txid, wt_name, chain, hub});
  }

  if (spec.peer) {
    const Endpoint c = client_ep(50000);
    const Endpoint p = remote_ep(*spec.peer, 50002);
    FlowRow f = oriented(fx.client, 50000, *spec.peer, 50002);
    for (int k = 0; k < 4; ++k) {
      const TimestampUs rel = 12'000'000 + k * 20'000;
      const bool out = k % 2 == 0;
      const Bytes frame = out ? build_udp_frame(c, p, filler(rng, 160)) : build_udp_frame(p, c, filler(rng, 160));
      b.add(rel, frame);
      count(f, out ? fx.client : *spec.peer, out ? 50000 : 50002, rel, frame.size(), k == 0);
    }
    fx.other_flows.push_back(f);
    fx.peer_traffic = true;
  }

  if (spec.include_sip) {
    const std::string sip =
        "OPTIONS sip:192.168.1.1 SIP/2.0\r\n"
        "Via: SIP/2.0/UDP 192.168.1.5:5060;branch=z9hG4bK7a1c\r\n"
        "From: <sip:client@192.168.1.5>;tag=41c2\r\n"
        "To: <sip:192.168.1.1>\r\n"
        "Call-ID: 5d1f0c2a@192.168.1.5\r\n"
        "CSeq: 1 OPTIONS\r\n"
        "Content-Length: 0\r\n\r\n";
    const Bytes frame = build_udp_frame(client_ep(5060), Endpoint{gw_mac, fx.gateway, 5060},
                                        Bytes(sip.begin(), sip.end()));
    b.add(40'000'000, frame);
    FlowRow f = oriented(fx.client, 5060, fx.gateway, 5060);
    count(f, fx.client, 5060, 40'000'000, frame.size(), true);
    fx.other_flows.push_back(f);
    fx.sip_packets = 1;
  }

  fx.expected_verdict = (fx.sip_packets > 0 || fx.peer_traffic) ? "INCONSISTENT" : "DETECTED";
  fx.pcap = write_pcap(b.frames);
  return fx;
}

// ---------------------------------------------------------------------------
// SBC syslog

namespace {

struct MessagePlan {
  bool request = true;
  std::string method;  // request method
  int code = 0;
  std::string reason;
  std::uint32_t cseq = 1;
  std::string cseq_method;
  bool from_callee = false;  // sent by the called side
  bool sdp = false;
  bool to_tag = false;
};

struct DialogPlan {
  DialogTruth truth;
  std::string from_tag;
  std::string to_tag;
  std::vector<MessagePlan> messages;
  std::size_t next = 0;
};

std::string hex(Rng& rng, int digits) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < digits; ++i) s += kHex[rng.below(16)];
  return s;
}

std::string digits(Rng& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += static_cast<char>('0' + rng.below(10));
  return s;
}

DialogPlan plan_dialog(Rng& rng, const SipLogSpec& spec, std::size_t index) {
  DialogPlan d;
  char id[32];
  std::snprintf(id, sizeof id, "%06zx", index);
  d.truth.call_id = hex(rng, 10) + id + "@10.15.4.20";
  d.truth.caller = "+39041" + digits(rng, 7);
  d.truth.callee = "+390421" + digits(rng, 3 + static_cast<int>(rng.below(4)));
  d.from_tag = hex(rng, 8);
  d.to_tag = hex(rng, 8);
  const auto n = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_messages),
                                                      static_cast<std::int64_t>(spec.max_messages)));

  auto req = [](std::string m, std::uint32_t cseq, bool from_callee, bool sdp, bool to_tag) {
    MessagePlan p;
    p.method = m;
    p.cseq = cseq;
    p.cseq_method = std::move(m);
    p.from_callee = from_callee;
    p.sdp = sdp;
    p.to_tag = to_tag;
    return p;
  };
  auto resp = [](int code, std::string reason, std::uint32_t cseq, std::string method, bool sdp) {
    MessagePlan p;
    p.request = false;
    p.code = code;
    p.reason = std::move(reason);
    p.cseq = cseq;
    p.cseq_method = std::move(method);
    p.from_callee = true;
    p.sdp = sdp;
    p.to_tag = code != 100;
    return p;
  };

  auto& m = d.messages;
  m.push_back(req("INVITE", 1, false, true, false));
  m.push_back(resp(100, "Trying", 1, "INVITE", false));
  const double pick = rng.unit();
  if (n >= 7 && pick < 0.7) {
    // Answered: provisional responses, 200, ACK, BYE, 200.
    for (std::size_t k = 0; k < n - 6; ++k)
      m.push_back(k % 2 ? resp(183, "Session Progress", 1, "INVITE", true) : resp(180, "Ringing", 1, "INVITE", false));
    m.push_back(resp(200, "OK", 1, "INVITE", true));
    m.push_back(req("ACK", 1, false, false, true));
    const bool callee_hangs_up = rng.chance(0.5);
    MessagePlan bye = req("BYE", callee_hangs_up ? 1 : 2, callee_hangs_up, false, true);
    m.push_back(bye);
    MessagePlan ok = resp(200, "OK", bye.cseq, "BYE", false);
    ok.from_callee = !callee_hangs_up;
    m.push_back(ok);
    d.truth.completeness = sip::Completeness::COMPLETE;
  } else if (pick < 0.9 || n < 3) {
    // Rejected: provisional responses, a final failure, ACK.
    for (std::size_t k = 0; k < n - 4; ++k) m.push_back(resp(180, "Ringing", 1, "INVITE", false));
    static const std::pair<int, const char*> kFailures[] = {
        {486, "Busy Here"}, {480, "Temporarily Unavailable"}, {404, "Not Found"}, {503, "Service Unavailable"}, {603, "Decline"}};
    const auto& f = kFailures[rng.below(std::size(kFailures))];
    m.push_back(resp(f.first, f.second, 1, "INVITE", false));
    m.push_back(req("ACK", 1, false, false, true));
    d.truth.completeness = sip::Completeness::COMPLETE;
  } else {
    // Still ringing when the log ends.
    for (std::size_t k = 0; k < n - 2; ++k) m.push_back(resp(180, "Ringing", 1, "INVITE", false));
    d.truth.completeness = sip::Completeness::NO_FINAL_RESPONSE;
  }
  d.truth.messages = m.size();
  return d;
}

constexpr const char* kSbc = "10.15.4.20";
constexpr const char* kPbx = "10.15.4.30";

std::string render_sip_record(const SipLogSpec& spec, const DialogPlan& d, const MessagePlan& m,
                              TimestampUs ts, Rng& rng) {
  const std::string caller_uri = "sip:" + d.truth.caller + "@" + kSbc;
  const std::string callee_uri = "sip:" + d.truth.callee + "@" + kPbx;
  std::vector<std::string> lines;
  if (m.request) {
    const std::string target = m.from_callee ? caller_uri : callee_uri;
    lines.push_back(m.method + " " + target + " SIP/2.0");
  } else {
    lines.push_back("SIP/2.0 " + std::to_string(m.code) + " " + m.reason);
  }
  // Responses mirror the From/To of the request they answer.
  const bool caller_side = m.request ? !m.from_callee : m.from_callee;
  const char* via_host = m.request ? (m.from_callee ? kPbx : kSbc) : kSbc;
  lines.push_back(std::string("Via: SIP/2.0/UDP ") + via_host + ":5060;branch=z9hG4bK" + hex(rng, 12));
  // In-dialog requests from the callee swap the From and To roles.
  const std::string from = "<" + caller_uri + ">;tag=" + d.from_tag;
  const std::string to = "<" + callee_uri + ">" + (m.to_tag ? ";tag=" + d.to_tag : "");
  const std::string callee_from = "<" + callee_uri + ">;tag=" + d.to_tag;
  const std::string caller_to = "<" + caller_uri + ">;tag=" + d.from_tag;
  if (caller_side) {
    lines.push_back("From: " + from);
    lines.push_back("To: " + to);
  } else {
    lines.push_back("From: " + callee_from);
    lines.push_back("To: " + caller_to);
  }
  lines.push_back("Call-ID: " + d.truth.call_id);
  lines.push_back("CSeq: " + std::to_string(m.cseq) + " " + m.cseq_method);
  if (m.request) lines.push_back("Max-Forwards: 70");
  lines.push_back("User-Agent: Mediant SW/v.7.40A.250.001");
  std::vector<std::string> body;
  if (m.sdp) {
    const std::string host = m.request ? kSbc : kPbx;
    body = {"v=0",
            "o=AudiocodesGW 1 1 IN IP4 " + host,
            "s=Phone-Call",
            "c=IN IP4 " + host,
            "t=0 0",
            "m=audio " + std::to_string(6000 + 2 * rng.below(500)) + " RTP/AVP 8 0 101",
            "a=rtpmap:8 PCMA/8000",
            "a=rtpmap:0 PCMU/8000",
            "a=ptime:20",
            "a=sendrecv"};
    std::size_t len = 0;
    for (const auto& l : body) len += l.size() + 2;
    lines.push_back("Content-Type: application/sdp");
    lines.push_back("Content-Length: " + std::to_string(len));
  } else {
    lines.push_back("Content-Length: 0");
  }

  std::string out = format_iso8601(ts) + " " + spec.host + " local0: " + lines[0] + "\n";
  for (std::size_t i = 1; i < lines.size(); ++i) out += "    " + lines[i] + "\n";
  if (!body.empty()) {
    out += "    \n";
    for (const auto& l : body) out += "    " + l + "\n";
  }
  out += "\n";
  return out;
}

constexpr std::size_t kFillerBytes = 200;

std::string render_filler(const SipLogSpec& spec, TimestampUs ts, Rng& rng) {
  static const char* kTexts[] = {
      "[S=%u] (N %u) RTP statistics: packets lost 0, jitter %u ms",
      "[S=%u] (N %u) CPU usage %u%%, DSP resources available",
      "[S=%u] (N %u) Keep-alive sent to proxy set %u",
      "[S=%u] (N %u) Classification: source matched IP group %u",
  };
  char buf[160];
  std::snprintf(buf, sizeof buf, kTexts[rng.below(std::size(kTexts))],
                static_cast<unsigned>(rng.below(10'000'000)), static_cast<unsigned>(rng.below(1'000'000)),
                static_cast<unsigned>(rng.below(100)));
  std::string line = format_iso8601(ts) + " " + spec.host + " local1: " + buf;
  if (line.size() + 1 > kFillerBytes) line.resize(kFillerBytes - 1);
  line.append(kFillerBytes - 1 - line.size(), ' ');
  // Trailing blanks would vanish in editors; end with a visible marker.
  line.back() = '.';
  line += '\n';
  return line;
}

// One pass of the generator; filler records are spread evenly after SIP
// records. Returns the SIP byte count.
template <typename Sink>
std::uint64_t run_sip_log(const SipLogSpec& spec, std::uint64_t filler_total, SipLogManifest& m,
                          Sink&& sink) {
  Rng rng(spec.seed);
  Rng filler_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<DialogPlan> open;
  std::size_t planned = 0;
  std::uint64_t records = 0;
  std::uint64_t sip_bytes = 0;
  std::uint64_t fillers = 0;
  TimestampUs clock = spec.start_us;
  m.dialogs.clear();
  std::unordered_map<std::string, std::size_t> truth_index;

  // The number of SIP records is known only after the dry pass; the second
  // pass receives it through m.sip_records.
  const std::uint64_t sip_total = m.sip_records;
  while (planned < spec.dialogs || !open.empty()) {
    while (open.size() < spec.interleave && planned < spec.dialogs)
      open.push_back(plan_dialog(rng, spec, planned++));
    const std::size_t pick = static_cast<std::size_t>(rng.below(open.size()));
    DialogPlan& d = open[pick];
    clock += rng.between(1000, 40000);
    if (d.next == 0) {
      d.truth.start_us = clock;
      truth_index[d.truth.call_id] = m.dialogs.size();
      m.dialogs.push_back(d.truth);
    }
    const std::string rec = render_sip_record(spec, d, d.messages[d.next], clock, rng);
    sink(rec);
    sip_bytes += rec.size();
    ++d.next;
    if (filler_total > 0 && sip_total > 0) {
      const std::uint64_t due = (records + 1) * filler_total / sip_total - records * filler_total / sip_total;
      for (std::uint64_t k = 0; k < due; ++k) {
        sink(render_filler(spec, clock, filler_rng));
        ++fillers;
      }
    }
    ++records;
    if (d.next == d.messages.size()) {
      auto& t = m.dialogs[truth_index[d.truth.call_id]];
      t.end_us = clock;
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  m.sip_records = records;
  m.filler_records = fillers;
  return sip_bytes;
}

}  // namespace

SipLogManifest gen_sip_log(const SipLogSpec& spec, std::ostream& out) {
  if (spec.dialogs == 0) invalid("at least one dialog");
  if (spec.min_messages < 3 || spec.min_messages > spec.max_messages)
    invalid("message counts need 3 <= min <= max");
  if (spec.interleave == 0) invalid("interleave must be positive");
  if (spec.host.empty() || spec.host.find(' ') != std::string::npos) invalid("bad host name");

  SipLogManifest dry;
  const std::uint64_t sip_bytes = run_sip_log(spec, 0, dry, [](const std::string&) {});
  std::uint64_t fillers = 0;
  if (spec.byte_target > 0) {
    if (spec.byte_target < sip_bytes) invalid("byte target below the size of the dialogs");
    fillers = (spec.byte_target - sip_bytes + kFillerBytes / 2) / kFillerBytes;
  }
  SipLogManifest m;
  m.sip_records = dry.sip_records;
  std::uint64_t written = 0;
  run_sip_log(spec, fillers, m, [&](const std::string& s) {
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    written += s.size();
  });
  m.bytes = written;
  return m;
}

// ---------------------------------------------------------------------------
// CDR

namespace {

std::string time_of_day(TimestampUs us) {
  const std::int64_t ms = (us / 1000) % 86'400'000;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld", static_cast<long long>(ms / 3'600'000),
                static_cast<long long>(ms / 60'000 % 60), static_cast<long long>(ms / 1000 % 60),
                static_cast<long long>(ms % 1000));
  return buf;
}

const char* kCdrHeader =
    "CALL END TIME,ENDPOINT TYPE,IP GROUP,CALLER,CALLEE,DIRECTION,REMOTE IP,DURATION,TERMINATION REASON,SESSION ID\n";

const char* reason_for(cdr::Outcome o) {
  switch (o) {
    case cdr::Outcome::COMPLETED: return "NORMAL_CALL_CLEAR";
    case cdr::Outcome::NO_ANSWER: return "NO_ANSWER";
    case cdr::Outcome::BUSY: return "BUSY";
    case cdr::Outcome::FAILED: return "GENERAL_FAILED";
    case cdr::Outcome::OTHER: return "RELEASE_BECAUSE_UNKNOWN_REASON";
  }
  return "RELEASE_BECAUSE_UNKNOWN_REASON";
}

}  // namespace

CdrFixture gen_cdr(const CdrSpec& spec) {
  CdrFixture fx;
  if (spec.reference) {
    // Each pair keeps its published fields; the session ids are made unique
    // so that every pair reads as one call.
    fx.csv = std::string(kCdrHeader) +
             "13:10:18.408,SBC,IPG_PBX,+39041220444,+390421364,Outgoing,132.100.50,00:06:50,NORMAL_CALL_CLEAR,db01ef9:65\n"
             "13:10:18.408,SBC,IPG_TEAMS,+39041220444,+390421364,Incoming,52.114.75.24,00:06:50,NORMAL_CALL_CLEAR,db01ef9:65\n"
             "13:04:28.658,SBC,IPG_TEAMS,4102,+390412207,Outgoing,52.114.75.24,,NO_ANSWER,db01ef9:65-2\n"
             "13:04:28.650,SBC,IPG_PBX,4102,+390412207,Incoming,132.100.50,,NO_ANSWER,db01ef9:65-2\n"
             "13:01:18.588,SBC,IPG_PBX,+39041220444,+390421365,Outgoing,132.100.50,,GENERAL_FAILED,db01ef9:65-3\n"
             "13:01:18.588,SBC,IPG_TEAMS,+39041220444,+390721365,Incoming,52.114.75.24,,GENERAL_FAILED,db01ef9:65-3\n"
             "12:54:25.078,SBC,IPG_TEAMS,+3904122043,+390412203,Incoming,52.114.75.24,,BUSY,db01ef9:65-4\n"
             "12:54:25.078,SBC,IPG_PBX,+3904122043,+390712203,Outgoing,132.100.50,,BUSY,db01ef9:65-4\n"
             "12:20:36.392,SBC,IPG_TEAMS,4112,+390412207,Outgoing,52.114.75.24,,NO_ANSWER,db01ef9:64\n"
             "12:20:36.383,SBC,IPG_PBX,4112,+390712207,Incoming,132.100.50,,NO_ANSWER,db01ef9:64\n";
    fx.legs = 10;
    using cdr::CallDirection;
    using cdr::Outcome;
    fx.calls = {
        {"db01ef9:64", Outcome::NO_ANSWER, CallDirection::PSTN_TO_TEAMS, std::nullopt, "4112", "+390712207"},
        {"db01ef9:65", Outcome::COMPLETED, CallDirection::TEAMS_TO_PSTN, 410, "+39041220444", "+390421364"},
        {"db01ef9:65-2", Outcome::NO_ANSWER, CallDirection::PSTN_TO_TEAMS, std::nullopt, "4102", "+390412207"},
        {"db01ef9:65-3", Outcome::FAILED, CallDirection::TEAMS_TO_PSTN, std::nullopt, "+39041220444", "+390421365"},
        {"db01ef9:65-4", Outcome::BUSY, CallDirection::TEAMS_TO_PSTN, std::nullopt, "+3904122043", "+390712203"},
    };
    return fx;
  }

  if (spec.calls == 0 || spec.calls > 100000) invalid("call count must be in [1, 100000]");
  double total_weight = 0;
  for (const auto& [o, w] : spec.mix) {
    if (!(w >= 0)) invalid("negative outcome weight");
    total_weight += w;
  }
  if (!(total_weight > 0)) invalid("outcome mix is empty");

  Rng rng(spec.seed);
  const std::string prefix = hex(rng, 7);
  struct Row {
    TimestampUs end;
    std::string text;
  };
  std::vector<Row> rows;
  TimestampUs clock = 8LL * 3600 * 1'000'000;
  for (std::size_t i = 0; i < spec.calls; ++i) {
    CdrCallTruth call;
    call.session_id = prefix + ":" + std::to_string(i + 1);
    double pick = rng.unit() * total_weight;
    call.outcome = spec.mix.rbegin()->first;
    for (const auto& [o, w] : spec.mix) {
      if (pick < w) {
        call.outcome = o;
        break;
      }
      pick -= w;
    }
    const bool teams_origin = rng.chance(0.5);
    call.direction = teams_origin ? cdr::CallDirection::TEAMS_TO_PSTN : cdr::CallDirection::PSTN_TO_TEAMS;
    call.caller = teams_origin ? "+39041" + digits(rng, 7) : "+3906" + digits(rng, 8);
    call.callee = teams_origin ? "+39" + digits(rng, 9) : "+39041" + digits(rng, 7);
    if (call.outcome == cdr::Outcome::COMPLETED) call.duration_s = rng.between(5, 3600);
    clock += rng.between(5, 120) * 1'000'000 + rng.between(0, 999) * 1000;
    const TimestampUs end = clock;
    const std::string dur = call.duration_s ? cdr::format_hms(*call.duration_s) : "";
    const char* reason = reason_for(call.outcome);
    const std::string teams_ip = "52.114." + std::to_string(rng.between(0, 255)) + "." + std::to_string(rng.between(1, 254));
    const std::string pbx_ip = "10.20.30." + std::to_string(rng.between(1, 254));
    const TimestampUs teams_end = end + rng.between(0, 9) * 1000;
    auto row = [&](TimestampUs t, const char* group, bool incoming, const std::string& ip) {
      return Row{t, text::csv_row({time_of_day(t), "SBC", group, call.caller, call.callee,
                                   incoming ? "Incoming" : "Outgoing", ip, dur, reason, call.session_id})};
    };
    Row teams = row(teams_end, "IPG_TEAMS", teams_origin, teams_ip);
    Row pbx = row(end, "IPG_PBX", !teams_origin, pbx_ip);
    if (rng.chance(0.5)) std::swap(teams, pbx);
    rows.push_back(std::move(teams));
    rows.push_back(std::move(pbx));
    fx.calls.push_back(std::move(call));
  }
  // Newest first, as the history view lists them.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.end > b.end; });
  fx.csv = kCdrHeader;
  for (const auto& r : rows) fx.csv += r.text + "\n";
  fx.legs = rows.size();
  std::sort(fx.calls.begin(), fx.calls.end(),
            [](const CdrCallTruth& a, const CdrCallTruth& b) { return a.session_id < b.session_id; });
  return fx;
}

// ---------------------------------------------------------------------------
// Usage exports

const std::vector<UsageTotals>& usage_reference_totals() {
  using usage::DeviceClass;
  using usage::Window;
  auto devices = [](std::uint64_t w, std::uint64_t m, std::uint64_t i, std::uint64_t a, std::uint64_t l,
                    std::uint64_t web) {
    return std::map<DeviceClass, std::uint64_t>{{DeviceClass::WINDOWS_PC, w}, {DeviceClass::MAC, m},
                                                {DeviceClass::IOS, i},        {DeviceClass::ANDROID, a},
                                                {DeviceClass::LINUX, l},      {DeviceClass::WEB, web}};
  };
  static const std::vector<UsageTotals> totals = {
      {Window::D7, 1171, 36368, "570 days 23 hours 12 minutes", "225 days 9 hours 56 minutes", 12, 5,
       devices(1141, 4, 247, 252, 0, 15), 6536, "12 days 1 hours 12 minutes"},
      {Window::D30, 1224, 139960, "2251 days 7 hours 6 minutes", "881 days 1 hours 56 minutes", 44, 17,
       devices(1183, 9, 270, 280, 0, 64), 28706, "53 days 21 hours 49 minutes"},
      {Window::D90, 1272, 419001, "6882 days 4 hours 2 minutes", "2587 days 12 hours 1 minutes", 130, 49,
       devices(1222, 13, 294, 304, 1, 139), 96394, "180 days 4 hours 49 minutes"},
  };
  return totals;
}

const std::vector<TopTalker>& usage_reference_top() {
  static const std::vector<TopTalker> top = {
      {"2 days 3 hours 10 minutes", "0 days 5 hours 23 minutes"},
      {"2 days 2 hours 37 minutes", "1 days 2 hours 38 minutes"},
      {"1 days 23 hours 27 minutes", "0 days 5 hours 37 minutes"},
      {"1 days 21 hours 58 minutes", "0 days 1 hours 5 minutes"},
      {"1 days 18 hours 30 minutes", "0 days 6 hours 2 minutes"},
      {"1 days 17 hours 52 minutes", "0 days 5 hours 56 minutes"},
      {"1 days 14 hours 27 minutes", "0 days 14 hours 52 minutes"},
      {"1 days 13 hours 34 minutes", "0 days 12 hours 25 minutes"},
      {"1 days 13 hours 26 minutes", "0 days 5 hours 52 minutes"},
      {"1 days 13 hours 2 minutes", "0 days 7 hours 48 minutes"},
  };
  return top;
}

namespace {

/// n non-negative parts summing to total, each at most cap.
std::vector<std::int64_t> split_total(Rng& rng, std::int64_t total, std::size_t n, std::int64_t cap) {
  if (n == 0) {
    if (total != 0) invalid("cannot split a non-zero total over no users");
    return {};
  }
  if (cap * static_cast<std::int64_t>(n) < total) invalid("total does not fit under the cap");
  std::vector<double> w(n);
  double sum = 0;
  for (auto& x : w) sum += (x = 0.25 + rng.unit());
  std::vector<std::int64_t> out(n);
  std::int64_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::min(cap, static_cast<std::int64_t>(std::floor(static_cast<double>(total) * w[i] / sum)));
    used += out[i];
  }
  for (std::size_t i = 0; used < total; i = (i + 1) % n)
    if (out[i] < cap) {
      ++out[i];
      ++used;
    }
  return out;
}

std::string user_name(std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "user%04zu@contoso.example", i + 1);
  return buf;
}

std::string minutes_text(std::int64_t minutes) { return usage::format_duration_text(minutes * 60); }

}  // namespace

UsageFixture gen_usage(const UsageSpec& spec) {
  using usage::DeviceClass;
  using usage::Window;
  UsageFixture fx;
  Rng rng(spec.seed);
  std::string activity = "User,Window,One-to-one calls,Audio time,Video time\n";
  std::string devices = "User,Window,Windows,Mac,iOS,Android,Linux,Web\n";
  std::string pstn = "User,Window,PSTN calls,PSTN time\n";

  std::vector<UsageTotals> plan;
  if (spec.reference) {
    plan = usage_reference_totals();
  } else {
    if (spec.users == 0 || spec.users > 100000) invalid("user count must be in [1, 100000]");
    for (Window w : {Window::D7, Window::D30, Window::D90}) {
      UsageTotals t;
      t.window = w;
      t.users = spec.users;
      t.one_to_one_calls = static_cast<std::uint64_t>(rng.between(0, 50)) * spec.users;
      t.audio = minutes_text(rng.between(0, 600) * static_cast<std::int64_t>(spec.users));
      t.video = minutes_text(rng.between(0, 300) * static_cast<std::int64_t>(spec.users));
      for (DeviceClass d : usage::kAllDevices)
        t.devices[d] = static_cast<std::uint64_t>(rng.below(spec.users + 1));
      t.pstn_calls = static_cast<std::uint64_t>(rng.between(0, 10)) * spec.users;
      t.pstn_time = minutes_text(rng.between(0, 60) * static_cast<std::int64_t>(spec.users));
      plan.push_back(t);
    }
  }

  for (const auto& t : plan) {
    const std::size_t n = t.users;
    const std::string window(usage::to_string(t.window));
    const std::int64_t audio_min = usage::parse_duration_text(t.audio) / 60;
    const std::int64_t video_min = usage::parse_duration_text(t.video) / 60;
    std::vector<std::int64_t> audio, video;
    const bool pinned_top = spec.reference && t.window == Window::D7;
    if (pinned_top) {
      // The ten heaviest talkers are fixed; everybody else stays below them.
      const auto& top = usage_reference_top();
      std::int64_t top_audio = 0, top_video = 0;
      for (const auto& u : top) {
        audio.push_back(usage::parse_duration_text(u.audio) / 60);
        video.push_back(usage::parse_duration_text(u.video) / 60);
        top_audio += audio.back();
        top_video += video.back();
      }
      const std::int64_t floor_audio = audio.back();
      auto rest_a = split_total(rng, audio_min - top_audio, n - top.size(), floor_audio - 1);
      auto rest_v = split_total(rng, video_min - top_video, n - top.size(), video_min);
      audio.insert(audio.end(), rest_a.begin(), rest_a.end());
      video.insert(video.end(), rest_v.begin(), rest_v.end());
    } else {
      audio = split_total(rng, audio_min, n, audio_min);
      video = split_total(rng, video_min, n, video_min);
    }
    const auto calls = split_total(rng, static_cast<std::int64_t>(t.one_to_one_calls), n,
                                   static_cast<std::int64_t>(t.one_to_one_calls));
    const std::int64_t pstn_min = usage::parse_duration_text(t.pstn_time) / 60;
    const auto pstn_calls = split_total(rng, static_cast<std::int64_t>(t.pstn_calls), n,
                                        static_cast<std::int64_t>(t.pstn_calls));
    const auto pstn_time = split_total(rng, pstn_min, n, pstn_min);

    std::map<DeviceClass, std::vector<bool>> uses;
    for (DeviceClass d : usage::kAllDevices) {
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      const std::size_t k = t.devices.at(d);
      if (k > n) invalid("more device users than users");
      for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
      auto& flags = uses[d];
      flags.assign(n, false);
      for (std::size_t i = 0; i < k; ++i) flags[idx[i]] = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
      const std::string user = user_name(i);
      activity += text::csv_row({user, window, std::to_string(calls[i]), minutes_text(audio[i]),
                                 minutes_text(video[i])}) + "\n";
      std::vector<std::string> row{user, window};
      for (DeviceClass d : usage::kAllDevices) row.push_back(uses[d][i] ? "Yes" : "No");
      devices += text::csv_row(row) + "\n";
      pstn += text::csv_row({user, window, std::to_string(pstn_calls[i]), minutes_text(pstn_time[i])}) + "\n";
    }

    usage::UsageSummary s;
    s.window = t.window;
    s.total_users = t.users;
    s.total_one_to_one_calls = t.one_to_one_calls;
    s.total_audio_s = audio_min * 60;
    s.total_video_s = video_min * 60;
    s.avg_audio_hours_per_user = spec.reference ? t.avg_audio_hours : usage::round_half_up_hours(s.total_audio_s, t.users);
    s.avg_video_hours_per_user = spec.reference ? t.avg_video_hours : usage::round_half_up_hours(s.total_video_s, t.users);
    s.device_counts = t.devices;
    s.pstn_calls_total = t.pstn_calls;
    s.pstn_duration_total_s = pstn_min * 60;
    fx.expected[t.window] = s;

    if (t.window == Window::D7) {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (audio[a] != audio[b]) return audio[a] > audio[b];
        return user_name(a) < user_name(b);
      });
      for (std::size_t r = 0; r < std::min<std::size_t>(10, n); ++r) {
        usage::RankedUser u;
        u.rank = r + 1;
        u.user_id = user_name(order[r]);
        u.audio_seconds = audio[order[r]] * 60;
        u.video_seconds = video[order[r]] * 60;
        u.audio_text = minutes_text(audio[order[r]]);
        u.video_text = minutes_text(video[order[r]]);
        fx.expected_top_audio.push_back(std::move(u));
      }
    }
  }
  fx.activity_csv = std::move(activity);
  fx.device_csv = std::move(devices);
  fx.pstn_csv = std::move(pstn);
  return fx;
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

json flow_json(const FlowRow& r) {
  return {{"address_a", r.addr_a.to_string()}, {"port_a", r.port_a},
          {"address_b", r.addr_b.to_string()}, {"port_b", r.port_b},
          {"packets", r.packets()},            {"bytes", r.bytes()},
          {"packets_ab", r.packets_ab},        {"bytes_ab", r.bytes_ab},
          {"packets_ba", r.packets_ba},        {"bytes_ba", r.bytes_ba},
          {"rel_start", format_seconds(r.rel_start_us, 6)},
          {"duration", format_seconds(r.duration_us, 6)}};
}

}  // namespace

std::string manifest_json(const PstnCallFixture& fx) {
  json streams = json::array();
  for (const auto& s : fx.streams)
    streams.push_back({{"label", s.label},
                       {"trace_pt", s.trace_pt},
                       {"src_id", s.src_id},
                       {"payload_type", s.payload_type},
                       {"ssrc", s.ssrc},
                       {"first_seq", s.first_seq},
                       {"tone_hz", s.tone_hz},
                       {"ring_hz", s.ring_hz},
                       {"ring_samples", s.ring_samples},
                       {"packets", s.packets},
                       {"packets_sent", s.packets_sent},
                       {"duplicates_injected", s.duplicates_injected},
                       {"dropped_packets", s.dropped_packets},
                       {"first_arrival", format_iso8601(s.first_arrival_us)}});
  json j = {{"schema", "tfx.manifest.pstn-call/1"},
            {"session_id", fx.session_id},
            {"sample_rate", fx.sample_rate},
            {"samples_per_packet", fx.samples_per_packet},
            {"amplitude", fx.amplitude},
            {"streams", streams}};
  return j.dump(2) + "\n";
}

std::string manifest_json(const WtFixture& fx) {
  json teams = json::array(), other = json::array(), dns = json::array();
  for (const auto& r : fx.teams_flows) teams.push_back(flow_json(r));
  for (const auto& r : fx.other_flows) other.push_back(flow_json(r));
  for (const auto& d : fx.dns) {
    char txid[8];
    std::snprintf(txid, sizeof txid, "0x%04x", d.txid);
    dns.push_back({{"query_rel", format_seconds(d.rel_query_us, 6)},
                   {"response_rel", format_seconds(d.rel_response_us, 6)},
                   {"txid", txid},
                   {"name", d.name},
                   {"cname_chain", d.cname_chain},
                   {"address", d.address.to_string()}});
  }
  json j = {{"schema", "tfx.manifest.wt-capture/1"},
            {"client", fx.client.to_string()},
            {"gateway", fx.gateway.to_string()},
            {"client_mac", mac_to_string(fx.client_mac)},
            {"teams_flows", teams},
            {"other_flows", other},
            {"dns", dns},
            {"sip_packets", fx.sip_packets},
            {"peer_traffic", fx.peer_traffic},
            {"expected_verdict", fx.expected_verdict}};
  return j.dump(2) + "\n";
}

std::string manifest_json(const SipLogManifest& m) {
  json dialogs = json::array();
  for (const auto& d : m.dialogs)
    dialogs.push_back({{"call_id", d.call_id},
                       {"messages", d.messages},
                       {"caller", d.caller},
                       {"callee", d.callee},
                       {"start", format_iso8601(d.start_us)},
                       {"end", format_iso8601(d.end_us)},
                       {"completeness", std::string(sip::to_string(d.completeness))}});
  json j = {{"schema", "tfx.manifest.sip-log/1"},
            {"bytes", m.bytes},
            {"sip_records", m.sip_records},
            {"filler_records", m.filler_records},
            {"dialogs", dialogs}};
  return j.dump(2) + "\n";
}

std::string manifest_json(const CdrFixture& fx) {
  json calls = json::array();
  for (const auto& c : fx.calls) {
    json call = {{"session_id", c.session_id},
                 {"outcome", std::string(cdr::to_string(c.outcome))},
                 {"direction", std::string(cdr::to_string(c.direction))},
                 {"caller", c.caller},
                 {"callee", c.callee}};
    call["duration_s"] = c.duration_s ? json(*c.duration_s) : json(nullptr);
    calls.push_back(call);
  }
  json j = {{"schema", "tfx.manifest.cdr/1"}, {"legs", fx.legs}, {"calls", calls}};
  return j.dump(2) + "\n";
}

std::string manifest_json(const UsageFixture& fx) {
  json windows = json::object();
  for (const auto& [w, s] : fx.expected) {
    json devices = json::object();
    for (const auto& [d, n] : s.device_counts) devices[std::string(usage::to_string(d))] = n;
    windows[std::string(usage::to_string(w))] = {
        {"total_users", s.total_users},
        {"total_one_to_one_calls", s.total_one_to_one_calls},
        {"total_audio", usage::format_duration_text(s.total_audio_s)},
        {"total_video", usage::format_duration_text(s.total_video_s)},
        {"avg_audio_hours_per_user", s.avg_audio_hours_per_user},
        {"avg_video_hours_per_user", s.avg_video_hours_per_user},
        {"device_counts", devices},
        {"pstn_calls_total", s.pstn_calls_total},
        {"pstn_duration_total", usage::format_duration_text(s.pstn_duration_total_s)}};
  }
  json top = json::array();
  for (const auto& u : fx.expected_top_audio)
    top.push_back({{"rank", u.rank}, {"user", u.user_id}, {"audio", u.audio_text}, {"video", u.video_text}});
  json j = {{"schema", "tfx.manifest.usage/1"}, {"windows", windows}, {"top_audio_d7", top}};
  return j.dump(2) + "\n";
}

}  // namespace tfx::forge
