#include "tfx/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tfx/text.hpp"

namespace tfx::classify {

// ---------------------------------------------------------------------------
// RangeSet

RangeSet::RangeSet(std::vector<LabeledRange> ranges) : ranges_(std::move(ranges)) {
  if (ranges_.empty())
    throw Error(ErrorCode::FormatError, "range set must not be empty");
  std::set<std::string> labels;
  for (const auto& r : ranges_) {
    if (r.label.empty())
      throw Error(ErrorCode::FormatError, "range label must not be empty");
    if (!labels.insert(r.label).second)
      throw Error(ErrorCode::FormatError, "duplicate range label: " + r.label);
  }
}

RangeSet RangeSet::teams_default() {
  return RangeSet({
      {"teams-media/52.112.0.0/14", CidrRange::parse("52.112.0.0/14")},
      {"teams-media/52.120.0.0/14", CidrRange::parse("52.120.0.0/14")},
  });
}

RangeSet RangeSet::parse(std::istream& in) {
  std::vector<LabeledRange> ranges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = std::string_view(line);
    if (auto hash = body.find('#'); hash != std::string_view::npos)
      body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) continue;
    std::istringstream fields{std::string(body)};
    std::string label, cidr, extra;
    fields >> label >> cidr;
    if (label.empty() || cidr.empty() || (fields >> extra))
      throw Error(ErrorCode::FormatError,
                  "range file line " + std::to_string(lineno) +
                      ": expected 'label cidr'");
    ranges.push_back({label, CidrRange::parse(cidr)});
  }
  return RangeSet(std::move(ranges));
}

RangeSet RangeSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse(in);
}

const LabeledRange* RangeSet::match(Ipv4 addr) const {
  for (const auto& r : ranges_)
    if (capture::cidr_contains(r.range, addr)) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// DNS

namespace {

class DnsCursor {
 public:
  explicit DnsCursor(std::span<const std::uint8_t> msg) : msg_(msg) {}

  bool u8(std::uint8_t& v) {
    if (pos_ + 1 > msg_.size()) return false;
    v = msg_[pos_++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (pos_ + 2 > msg_.size()) return false;
    v = static_cast<std::uint16_t>((msg_[pos_] << 8) | msg_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool u32(std::uint32_t& v) {
    std::uint16_t hi, lo;
    if (!u16(hi) || !u16(lo)) return false;
    v = (std::uint32_t{hi} << 16) | lo;
    return true;
  }
  bool skip(std::size_t n) {
    if (pos_ + n > msg_.size()) return false;
    pos_ += n;
    return true;
  }

  /// Reads a possibly compressed name starting at the cursor.
  bool name(std::string& out) {
    out.clear();
    std::size_t p = pos_;
    bool jumped = false;
    int hops = 0;
    while (true) {
      if (p >= msg_.size()) return false;
      const std::uint8_t len = msg_[p];
      if ((len & 0xc0) == 0xc0) {
        if (p + 1 >= msg_.size() || ++hops > 32) return false;
        const std::size_t target = static_cast<std::size_t>((len & 0x3f) << 8) | msg_[p + 1];
        if (!jumped) pos_ = p + 2;
        jumped = true;
        p = target;
        continue;
      }
      if (len & 0xc0) return false;
      if (len == 0) {
        if (!jumped) pos_ = p + 1;
        return true;
      }
      if (p + 1 + len > msg_.size()) return false;
      if (!out.empty()) out += '.';
      for (std::size_t i = 0; i < len; ++i) {
        char c = static_cast<char>(msg_[p + 1 + i]);
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out += c;
      }
      if (out.size() > 255) return false;
      p += 1 + len;
    }
  }

  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> msg_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<DnsMessage> parse_dns(std::span<const std::uint8_t> payload) {
  DnsCursor cur(payload);
  DnsMessage msg;
  std::uint16_t flags, qd, an, ns, ar;
  if (!cur.u16(msg.txid) || !cur.u16(flags) || !cur.u16(qd) || !cur.u16(an) ||
      !cur.u16(ns) || !cur.u16(ar))
    return std::nullopt;
  msg.response = (flags & 0x8000) != 0;
  msg.rcode = static_cast<std::uint8_t>(flags & 0x0f);
  if (qd > 16 || an > 256) return std::nullopt;
  for (std::uint16_t i = 0; i < qd; ++i) {
    std::string name;
    std::uint16_t qtype, qclass;
    if (!cur.name(name) || !cur.u16(qtype) || !cur.u16(qclass)) return std::nullopt;
    if (i == 0) {
      msg.question = std::move(name);
      msg.qtype = qtype;
    }
  }
  if (qd > 0 && msg.question.empty()) return std::nullopt;
  for (std::uint16_t i = 0; i < an; ++i) {
    DnsResourceRecord rr;
    std::uint16_t rdlen;
    if (!cur.name(rr.name) || !cur.u16(rr.type) || !cur.u16(rr.klass) ||
        !cur.u32(rr.ttl) || !cur.u16(rdlen))
      return std::nullopt;
    const std::size_t rdata_start = cur.pos();
    if (rr.type == kDnsTypeA) {
      std::uint32_t addr;
      if (rdlen != 4 || !cur.u32(addr)) return std::nullopt;
      rr.a = Ipv4{addr};
    } else if (rr.type == kDnsTypeCname) {
      std::string target;
      if (!cur.name(target)) return std::nullopt;
      rr.target = std::move(target);
      if (cur.pos() - rdata_start > rdlen) return std::nullopt;
      cur = DnsCursor(payload);
      if (!cur.skip(rdata_start + rdlen)) return std::nullopt;
    } else if (!cur.skip(rdlen)) {
      return std::nullopt;
    }
    msg.answers.push_back(std::move(rr));
  }
  return msg;
}

DnsExtraction extract_dns(const std::vector<PacketRecord>& packets) {
  struct Seen {
    const PacketRecord* packet;
    DnsMessage msg;
  };
  DnsExtraction out;
  std::vector<Seen> seen;
  for (const auto& p : packets) {
    if (p.ip_proto != capture::IpProto::UDP || !p.has_five_tuple()) continue;
    if (*p.src_port != 53 && *p.dst_port != 53) continue;
    auto msg = parse_dns(p.payload);
    if (!msg || msg->question.empty()) {
      ++out.malformed;
      continue;
    }
    seen.push_back({&p, std::move(*msg)});
  }
  std::sort(seen.begin(), seen.end(), [](const Seen& a, const Seen& b) {
    if (a.packet->ts_us != b.packet->ts_us) return a.packet->ts_us < b.packet->ts_us;
    if (a.msg.response != b.msg.response) return !a.msg.response;
    return a.packet->index < b.packet->index;
  });

  // (txid, name, client) -> indices of unanswered observations.
  std::map<std::tuple<std::uint16_t, std::string, std::uint32_t>, std::vector<std::size_t>> pending;
  for (const Seen& s : seen) {
    const PacketRecord& p = *s.packet;
    const Ipv4 client = s.msg.response ? *p.dst_ip : *p.src_ip;
    const auto key = std::make_tuple(s.msg.txid, s.msg.question, client.value);
    if (!s.msg.response) {
      DnsObservation obs;
      obs.ts_us = p.ts_us;
      obs.query_name = s.msg.question;
      obs.txid = s.msg.txid;
      obs.client = client;
      obs.packet_index = p.index;
      pending[key].push_back(out.observations.size());
      out.observations.push_back(std::move(obs));
      continue;
    }
    DnsObservation* target = nullptr;
    if (auto it = pending.find(key); it != pending.end() && !it->second.empty()) {
      target = &out.observations[it->second.front()];
      it->second.erase(it->second.begin());
    } else {
      DnsObservation obs;
      obs.ts_us = p.ts_us;
      obs.query_name = s.msg.question;
      obs.txid = s.msg.txid;
      obs.client = client;
      obs.packet_index = p.index;
      out.observations.push_back(std::move(obs));
      target = &out.observations.back();
    }
    target->answered = true;
    for (const auto& rr : s.msg.answers) {
      if (rr.a) target->answers.push_back(*rr.a);
      if (rr.target) target->aliases.push_back(*rr.target);
    }
  }
  std::stable_sort(out.observations.begin(), out.observations.end(),
                   [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
  return out;
}

// ---------------------------------------------------------------------------
// Flow classification

std::string_view to_string(FlowClass c) {
  switch (c) {
    case FlowClass::TEAMS_SERVICE: return "TEAMS_SERVICE";
    case FlowClass::LOCAL_GATEWAY: return "LOCAL_GATEWAY";
    case FlowClass::THIRD_PARTY: return "THIRD_PARTY";
    case FlowClass::UNKNOWN: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::vector<FlowLabel> classify_flows(const std::vector<ConversationStats>& convs,
                                      const RangeSet& ranges,
                                      const std::vector<DnsObservation>& dns,
                                      const ClassifyOptions& options) {
  std::vector<FlowLabel> out;
  out.reserve(convs.size());
  for (const auto& c : convs) {
    FlowLabel fl;
    fl.key = c.key;
    const Ipv4 a = c.key.addr_a;
    const Ipv4 b = c.key.addr_b;
    if (options.client) {
      if (a == *options.client)
        fl.remote = b;
      else if (b == *options.client)
        fl.remote = a;
    } else if (ranges.contains(a) && !ranges.contains(b)) {
      fl.remote = a;
    } else {
      fl.remote = b;
    }
    if (!fl.remote) {
      fl.label = FlowClass::UNKNOWN;
      out.push_back(std::move(fl));
      continue;
    }
    const Ipv4 remote = *fl.remote;
    std::set<std::string> names;
    for (const auto& obs : dns)
      if (std::find(obs.answers.begin(), obs.answers.end(), remote) != obs.answers.end())
        names.insert(obs.query_name);
    fl.dns_names.assign(names.begin(), names.end());

    if (options.gateway && remote == *options.gateway) {
      fl.label = FlowClass::LOCAL_GATEWAY;
    } else if (const LabeledRange* r = ranges.match(remote)) {
      fl.label = FlowClass::TEAMS_SERVICE;
      fl.matched_range = r->label;
      fl.media_candidate = c.key.proto == capture::IpProto::UDP;
    } else {
      fl.label = FlowClass::THIRD_PARTY;
    }
    out.push_back(std::move(fl));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SIP presence

namespace {

bool is_token_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '!' ||
         c == '%' || c == '*' || c == '_' || c == '+' || c == '`' ||
         c == '\'' || c == '~';
}

bool line_end_or_eof(std::string_view rest) {
  return rest.empty() || rest.front() == '\r' || rest.front() == '\n';
}

}  // namespace

bool starts_with_sip_line(std::string_view s) {
  constexpr std::string_view kVersion = "SIP/2.0";
  if (s.substr(0, kVersion.size()) == kVersion) {
    auto rest = s.substr(kVersion.size());
    return rest.size() >= 4 && rest[0] == ' ' && std::isdigit(static_cast<unsigned char>(rest[1])) &&
           std::isdigit(static_cast<unsigned char>(rest[2])) &&
           std::isdigit(static_cast<unsigned char>(rest[3])) &&
           (rest.size() == 4 || rest[4] == ' ' || rest[4] == '\r' || rest[4] == '\n');
  }
  std::size_t i = 0;
  while (i < s.size() && i < 32 && is_token_char(s[i])) ++i;
  if (i == 0 || i >= s.size() || s[i] != ' ') return false;
  const std::size_t uri_start = ++i;
  while (i < s.size() && s[i] != ' ' && s[i] != '\r' && s[i] != '\n') ++i;
  if (i == uri_start || i >= s.size() || s[i] != ' ') return false;
  auto rest = s.substr(i + 1);
  return rest.substr(0, kVersion.size()) == kVersion &&
         line_end_or_eof(rest.substr(kVersion.size()));
}

SipScan detect_sip(const std::vector<PacketRecord>& packets) {
  std::vector<std::pair<TimestampUs, std::uint64_t>> hits;
  for (const auto& p : packets) {
    if (p.ip_proto != capture::IpProto::UDP && p.ip_proto != capture::IpProto::TCP)
      continue;
    if (p.payload.empty()) continue;
    std::string_view body(reinterpret_cast<const char*>(p.payload.data()),
                          p.payload.size());
    if (starts_with_sip_line(body)) hits.emplace_back(p.ts_us, p.index);
  }
  std::sort(hits.begin(), hits.end());
  SipScan scan;
  scan.count = hits.size();
  for (std::size_t i = 0; i < hits.size() && i < 10; ++i)
    scan.exemplars.push_back(hits[i].second);
  return scan;
}

// ---------------------------------------------------------------------------
// Walkie-Talkie

std::string_view to_string(WtVerdict v) {
  switch (v) {
    case WtVerdict::DETECTED: return "DETECTED";
    case WtVerdict::NOT_DETECTED: return "NOT_DETECTED";
    case WtVerdict::INCONSISTENT: return "INCONSISTENT";
  }
  return "NOT_DETECTED";
}

bool wt_name_matches(const WtOptions& options, std::string_view name) {
  if (!name.empty() && name.back() == '.') name.remove_suffix(1);
  const std::string lname = text::to_lower(name);
  for (const auto& pattern : options.names) {
    const std::string lp = text::to_lower(pattern);
    if (options.suffix_wildcard && lp.size() > 2 && lp.compare(0, 2, "*.") == 0) {
      const std::string_view suffix = std::string_view(lp).substr(1);  // ".teams..."
      if (lname.size() > suffix.size() &&
          lname.compare(lname.size() - suffix.size(), suffix.size(), suffix) == 0)
        return true;
    } else if (lname == lp) {
      return true;
    }
  }
  return false;
}

WtReport detect_walkie_talkie(const std::vector<PacketRecord>& packets,
                              Ipv4 client, const RangeSet& ranges,
                              const WtOptions& options) {
  WtReport report;
  report.client_addr = client;
  const bool seen = std::any_of(packets.begin(), packets.end(),
                                [&](const PacketRecord& p) { return p.involves(client); });
  if (!seen)
    throw Error(ErrorCode::ClientNotSeen,
                "client " + client.to_string() + " appears in no packet");

  // (i) DNS lookups of the Walkie-Talkie service name.
  const DnsExtraction dns = extract_dns(packets);
  std::vector<TimestampUs> hit_times;
  std::set<Ipv4> wt_addrs;
  for (const auto& obs : dns.observations) {
    if (obs.client && *obs.client != client) continue;
    if (!wt_name_matches(options, obs.query_name)) continue;
    hit_times.push_back(obs.ts_us);
    wt_addrs.insert(obs.answers.begin(), obs.answers.end());
  }
  report.dns_hits = hit_times.size();
  report.resolved_wt_addrs.assign(wt_addrs.begin(), wt_addrs.end());

  // (ii) TLS flows from the client into the service ranges.
  const auto convs = capture::build_conversations(
      packets, [&](const PacketRecord& p) { return p.involves(client); });
  struct Candidate {
    FlowKey key;
    Ipv4 remote;
    TimestampUs start, end;
  };
  std::vector<Candidate> flows;
  for (const auto& c : convs) {
    const bool client_is_a = c.key.addr_a == client;
    const Ipv4 remote = client_is_a ? c.key.addr_b : c.key.addr_a;
    const std::uint16_t remote_port = client_is_a ? c.key.port_b : c.key.port_a;
    if (remote == client || !ranges.contains(remote)) continue;
    if (c.key.proto == capture::IpProto::UDP) {
      report.media_candidates.push_back(c.key);
      continue;
    }
    if (c.key.proto != capture::IpProto::TCP || remote_port != options.tls_port)
      continue;
    flows.push_back({c.key, remote, c.first_ts_us, c.first_ts_us + c.duration_us});
  }
  std::sort(flows.begin(), flows.end(), [](const Candidate& a, const Candidate& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.key < b.key;
  });
  bool any_hub_flow = false;
  for (const auto& f : flows) {
    WtSession* current = report.sessions.empty() ? nullptr : &report.sessions.back();
    if (!current || f.start > current->end_ts_us + options.idle_gap_us) {
      report.sessions.push_back(WtSession{f.start, f.end, {}, {}, 0});
      current = &report.sessions.back();
    }
    current->end_ts_us = std::max(current->end_ts_us, f.end);
    current->flows.push_back(f.key);
    if (wt_addrs.count(f.remote)) {
      any_hub_flow = true;
      if (std::find(current->wt_hub_addrs.begin(), current->wt_hub_addrs.end(),
                    f.remote) == current->wt_hub_addrs.end())
        current->wt_hub_addrs.push_back(f.remote);
    }
  }
  for (auto& s : report.sessions) {
    std::sort(s.wt_hub_addrs.begin(), s.wt_hub_addrs.end());
    for (TimestampUs t : hit_times)
      if (t >= s.start_ts_us - options.idle_gap_us && t <= s.end_ts_us + options.idle_gap_us)
        ++s.dns_hits;
  }

  // (iii) SIP absence.
  const SipScan sip = detect_sip(packets);
  report.sip_packets_found = sip.count;
  report.sip_exemplars = sip.exemplars;

  // (iv) no direct client-to-peer traffic.
  if (options.peer) {
    const Ipv4 peer = *options.peer;
    report.peer_direct_traffic_found =
        std::any_of(packets.begin(), packets.end(), [&](const PacketRecord& p) {
          return p.has_ip() && ((*p.src_ip == client && *p.dst_ip == peer) ||
                                (*p.src_ip == peer && *p.dst_ip == client));
        });
  }

  const bool wt_indicator = report.dns_hits > 0 || any_hub_flow;
  const bool has_flows = !report.sessions.empty();
  const bool contradicted = report.sip_packets_found > 0 || report.peer_direct_traffic_found;
  if (wt_indicator && has_flows && contradicted) {
    report.verdict = WtVerdict::INCONSISTENT;
    if (report.sip_packets_found > 0)
      report.notes.push_back("SIP signalling present alongside Walkie-Talkie indicators");
    if (report.peer_direct_traffic_found)
      report.notes.push_back("direct client-to-peer traffic present");
  } else if (wt_indicator && has_flows) {
    report.verdict = WtVerdict::DETECTED;
  } else {
    report.verdict = WtVerdict::NOT_DETECTED;
    if (report.dns_hits > 0 && !has_flows)
      report.notes.push_back("Walkie-Talkie DNS lookup without service flows");
    if (has_flows && !wt_indicator)
      report.notes.push_back("service-range TLS flows without Walkie-Talkie DNS or hub traffic");
  }
  if (!report.media_candidates.empty())
    report.notes.push_back("UDP flows into service ranges left unclassified (media candidates)");
  return report;
}

}  // namespace tfx::classify
