#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "tfx/classifier.hpp"
#include "tfx/forge.hpp"

using namespace tfx;
using namespace tfx::classify;

namespace {

std::vector<PacketRecord> load(const Bytes& pcap) {
  std::istringstream in(std::string(pcap.begin(), pcap.end()));
  return capture::load_capture(in).packets;
}

forge::Endpoint ep(Ipv4 ip, std::uint16_t port) { return forge::Endpoint{{2, 0, 0, 0, 0, 9}, ip, port}; }

}  // namespace

TEST_CASE("DNS response with a CNAME chain") {
  const std::vector<std::string> chain{"rtlswt-prod-global.trafficmanager.net",
                                       "ip-byoip-rtlclstr-prod-weu-01-rtls-wt-hub.westeurope.cloudapp.azure.com"};
  const auto resp = forge::encode_dns_response(0x0ed9, "walkietalkie.teams.microsoft.com", chain,
                                               Ipv4(52, 114, 74, 99));
  // Frame length as captured: Ethernet + IPv4 + UDP headers around the message.
  CHECK(resp.size() + forge::kEthIpUdpHeader == 241);
  const auto m = parse_dns(resp);
  REQUIRE(m);
  CHECK(m->response);
  CHECK(m->txid == 0x0ed9);
  CHECK(m->question == "walkietalkie.teams.microsoft.com");
  REQUIRE(m->answers.size() == 3);
  CHECK(m->answers[0].type == kDnsTypeCname);
  CHECK(m->answers[0].target == chain[0]);
  CHECK(m->answers[1].name == chain[0]);
  CHECK(m->answers[1].target == chain[1]);
  CHECK(m->answers[2].type == kDnsTypeA);
  CHECK(m->answers[2].name == chain[1]);
  CHECK(m->answers[2].a == Ipv4(52, 114, 74, 99));

  const auto q = parse_dns(forge::encode_dns_query(0x683f, "walkietalkie.teams.microsoft.com"));
  REQUIRE(q);
  CHECK_FALSE(q->response);
  CHECK(q->answers.empty());
}

TEST_CASE("malformed DNS is rejected") {
  auto resp = forge::encode_dns_response(1, "a.example", {}, Ipv4(1, 2, 3, 4));
  CHECK_FALSE(parse_dns(Bytes(resp.begin(), resp.begin() + 8)));
  // A compression pointer aimed at itself must not loop.
  Bytes loop = {0, 1, 0x81, 0x80, 0, 1, 0, 0, 0, 0, 0, 0, 0xc0, 12, 0, 1, 0, 1};
  CHECK_FALSE(parse_dns(loop));
  resp.resize(resp.size() - 3);
  CHECK_FALSE(parse_dns(resp));
}

TEST_CASE("range files") {
  std::istringstream in("# Teams\nmedia-a 52.112.0.0/14\nmedia-b 52.120.0.0/14  # second\n\n");
  const auto rs = RangeSet::parse(in);
  REQUIRE(rs.ranges().size() == 2);
  CHECK(rs.match(Ipv4(52, 122, 1, 1))->label == "media-b");
  CHECK_FALSE(rs.contains(Ipv4(52, 124, 0, 0)));

  std::istringstream dup("x 10.0.0.0/8\nx 11.0.0.0/8\n");
  CHECK_THROWS_AS(RangeSet::parse(dup), Error);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(RangeSet::parse(empty), Error);
  std::istringstream bad("x 10.0.0/8\n");
  CHECK_THROWS_AS(RangeSet::parse(bad), Error);

  const auto def = RangeSet::teams_default();
  CHECK(def.contains(Ipv4(52, 112, 0, 0)));
  CHECK(def.contains(Ipv4(52, 123, 255, 255)));
  CHECK_FALSE(def.contains(Ipv4(52, 116, 0, 0)));
}

TEST_CASE("DNS extraction pairs queries with responses") {
  const auto fx = forge::gen_wt_capture({});
  const auto packets = load(fx.pcap);
  const auto dns = extract_dns(packets);
  REQUIRE(dns.observations.size() == fx.dns.size());
  CHECK(dns.malformed == 0);
  for (std::size_t i = 0; i < fx.dns.size(); ++i) {
    const auto& o = dns.observations[i];
    CHECK(o.answered);
    CHECK(o.txid == fx.dns[i].txid);
    CHECK(o.query_name == fx.dns[i].name);
    CHECK(o.aliases == fx.dns[i].cname_chain);
    REQUIRE(o.answers.size() == 1);
    CHECK(o.answers[0] == fx.dns[i].address);
    CHECK(o.client == fx.client);
    CHECK_FALSE(o.query_name.empty());
  }
}

TEST_CASE("every flow gets one label and service labels carry a range") {
  const auto fx = forge::gen_wt_capture({});
  const auto packets = load(fx.pcap);
  const auto convs = capture::build_conversations(packets);
  const auto dns = extract_dns(packets).observations;
  const auto labels = classify_flows(convs, RangeSet::teams_default(), dns, {fx.client, fx.gateway});
  REQUIRE(labels.size() == convs.size());
  std::size_t teams = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CHECK(labels[i].key == convs[i].key);
    CHECK((labels[i].label == FlowClass::TEAMS_SERVICE) == labels[i].matched_range.has_value());
    if (labels[i].label == FlowClass::TEAMS_SERVICE) ++teams;
  }
  CHECK(teams == fx.teams_flows.size());

  // Enlarging the range set never demotes a service flow.
  const RangeSet wider({{"media-a", capture::CidrRange::parse("52.112.0.0/14")},
                        {"media-b", capture::CidrRange::parse("52.120.0.0/14")},
                        {"google", capture::CidrRange::parse("142.250.0.0/15")}});
  const auto relabeled = classify_flows(convs, wider, dns, {fx.client, fx.gateway});
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i].label == FlowClass::TEAMS_SERVICE) CHECK(relabeled[i].label == FlowClass::TEAMS_SERVICE);
}

TEST_CASE("UDP into the ranges is a media candidate") {
  capture::ConversationStats c;
  c.key = capture::FlowKey::canonical(Ipv4(192, 168, 1, 5), 50000, Ipv4(52, 113, 1, 1), 3478, capture::IpProto::UDP);
  const auto l = classify_flows({c}, RangeSet::teams_default(), {}, {});
  REQUIRE(l.size() == 1);
  CHECK(l[0].media_candidate);
}

TEST_CASE("SIP start line detection") {
  CHECK(starts_with_sip_line("INVITE sip:+390421364@10.15.4.30 SIP/2.0\r\n"));
  CHECK(starts_with_sip_line("SIP/2.0 200 OK\r\n"));
  CHECK(starts_with_sip_line("OPTIONS sip:a@b SIP/2.0"));
  CHECK_FALSE(starts_with_sip_line("GET / HTTP/1.1\r\n"));
  CHECK_FALSE(starts_with_sip_line("SIP/2.0 2000 OK"));
  CHECK_FALSE(starts_with_sip_line(""));
}

TEST_CASE("Walkie Talkie detection verdicts") {
  const auto plain = forge::gen_wt_capture({});
  const auto packets = load(plain.pcap);
  const auto rs = RangeSet::teams_default();
  const auto r = detect_walkie_talkie(packets, plain.client, rs);
  CHECK(r.verdict == WtVerdict::DETECTED);
  CHECK(r.sip_packets_found == 0);
  CHECK(r.dns_hits == 2);
  REQUIRE_FALSE(r.sessions.empty());
  for (const auto& s : r.sessions) {
    CHECK(s.start_ts_us <= s.end_ts_us);
    for (const auto& k : s.flows) {
      const Ipv4 remote = k.addr_a == plain.client ? k.addr_b : k.addr_a;
      CHECK(std::any_of(rs.ranges().begin(), rs.ranges().end(),
                        [&](const LabeledRange& lr) { return capture::cidr_contains(lr.range, remote); }));
    }
  }

  forge::WtSpec with_sip;
  with_sip.include_sip = true;
  const auto sipfx = forge::gen_wt_capture(with_sip);
  const auto rs2 = detect_walkie_talkie(load(sipfx.pcap), sipfx.client, rs);
  CHECK(rs2.verdict == WtVerdict::INCONSISTENT);
  CHECK(rs2.sip_packets_found == 1);

  forge::WtSpec with_peer;
  with_peer.peer = Ipv4(192, 168, 1, 77);
  const auto peerfx = forge::gen_wt_capture(with_peer);
  WtOptions opt;
  opt.peer = with_peer.peer;
  const auto rp = detect_walkie_talkie(load(peerfx.pcap), peerfx.client, rs, opt);
  CHECK(rp.peer_direct_traffic_found);
  CHECK(rp.verdict == WtVerdict::INCONSISTENT);

  CHECK_THROWS_AS(detect_walkie_talkie(packets, Ipv4(10, 9, 9, 9), rs), Error);
}

TEST_CASE("a DNS hit without service flows is not a detection") {
  const auto fx = forge::gen_wt_capture({});
  auto packets = load(fx.pcap);
  packets.erase(std::remove_if(packets.begin(), packets.end(),
                               [](const PacketRecord& p) { return p.src_port == 443 || p.dst_port == 443; }),
                packets.end());
  const auto r = detect_walkie_talkie(packets, fx.client, RangeSet::teams_default());
  CHECK(r.verdict == WtVerdict::NOT_DETECTED);
  CHECK(r.dns_hits == 2);
  CHECK_FALSE(r.notes.empty());
}

TEST_CASE("detection ignores reordering of packets with equal timestamps") {
  const auto fx = forge::gen_wt_capture({});
  auto packets = load(fx.pcap);
  const auto rs = RangeSet::teams_default();
  const auto base = detect_walkie_talkie(packets, fx.client, rs);
  std::mt19937_64 rng(9);
  for (int round = 0; round < 20; ++round) {
    // Shuffle, then restore time order; ties land in random order.
    for (auto& p : packets) p.ts_us -= p.ts_us % 1000;
    std::shuffle(packets.begin(), packets.end(), rng);
    std::stable_sort(packets.begin(), packets.end(), [](const auto& a, const auto& b) { return a.ts_us < b.ts_us; });
    const auto r = detect_walkie_talkie(packets, fx.client, rs);
    if (round == 0) {
      // First round changed the timestamps; use it as the reference.
      const auto ref = r;
      CHECK(ref.verdict == base.verdict);
      continue;
    }
    CHECK(r.verdict == base.verdict);
    CHECK(r.sessions.size() == base.sessions.size());
    CHECK(r.dns_hits == base.dns_hits);
    CHECK(r.resolved_wt_addrs == base.resolved_wt_addrs);
  }
}

TEST_CASE("name matching") {
  WtOptions o;
  CHECK(wt_name_matches(o, "walkietalkie.teams.microsoft.com"));
  CHECK(wt_name_matches(o, "WalkieTalkie.Teams.Microsoft.com."));
  CHECK_FALSE(wt_name_matches(o, "x.walkietalkie.teams.microsoft.com"));
  o.names = {"*.teams.microsoft.com"};
  CHECK_FALSE(wt_name_matches(o, "walkietalkie.teams.microsoft.com"));
  o.suffix_wildcard = true;
  CHECK(wt_name_matches(o, "walkietalkie.teams.microsoft.com"));
  CHECK_FALSE(wt_name_matches(o, "teams.microsoft.com.evil"));
}

TEST_CASE("SIP scan counts and keeps exemplars") {
  std::vector<PacketRecord> packets;
  for (int i = 0; i < 15; ++i) {
    const std::string s = "OPTIONS sip:a@b SIP/2.0\r\n";
    const auto f = forge::build_udp_frame(ep(Ipv4(10, 0, 0, 1), 5060), ep(Ipv4(10, 0, 0, 2), 5060),
                                          Bytes(s.begin(), s.end()));
    auto p = capture::decode_frame(capture::kLinkEthernet, f, static_cast<std::uint32_t>(f.size()));
    p.index = static_cast<std::uint64_t>(i);
    packets.push_back(p);
  }
  const auto scan = detect_sip(packets);
  CHECK(scan.count == 15);
  CHECK(scan.exemplars.size() == 10);
}
