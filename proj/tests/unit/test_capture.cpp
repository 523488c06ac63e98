#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "tfx/capture.hpp"
#include "tfx/forge.hpp"

using namespace tfx;
using namespace tfx::capture;

namespace {

std::string pcap_bytes(const std::vector<std::pair<TimestampUs, Bytes>>& frames) {
  std::ostringstream out;
  forge::PcapWriter w(out);
  for (const auto& [ts, f] : frames) w.write(ts, f);
  return out.str();
}

forge::Endpoint ep(Ipv4 ip, std::uint16_t port) { return forge::Endpoint{{2, 0, 0, 0, 0, 1}, ip, port}; }

PacketRecord random_packet(std::mt19937_64& rng, std::uint64_t index) {
  PacketRecord p;
  p.index = index;
  p.ts_us = static_cast<TimestampUs>(rng() % 100'000'000);
  // Small address and port pools so that conversations collide.
  p.src_ip = Ipv4(10, 0, static_cast<std::uint8_t>(rng() % 3), static_cast<std::uint8_t>(rng() % 20));
  p.dst_ip = Ipv4(static_cast<std::uint8_t>(rng() % 2 ? 52 : 192), 168, 0, static_cast<std::uint8_t>(rng() % 20));
  const auto r = rng() % 10;
  p.ip_proto = r < 5 ? IpProto::TCP : r < 9 ? IpProto::UDP : IpProto::OTHER;
  if (p.ip_proto != IpProto::OTHER) {
    p.src_port = static_cast<std::uint16_t>(rng() % 4 + 440);
    p.dst_port = static_cast<std::uint16_t>(rng() % 4 + 440);
  }
  p.wire_len = static_cast<std::uint32_t>(60 + rng() % 1400);
  return p;
}

/// Bit-by-bit prefix comparison.
bool cidr_oracle(std::uint32_t base, int prefix, std::uint32_t addr) {
  for (int bit = 31; bit > 31 - prefix; --bit)
    if (((base >> bit) & 1u) != ((addr >> bit) & 1u)) return false;
  return true;
}

}  // namespace

TEST_CASE("pcap round trip keeps timestamps, addresses and lengths") {
  const Ipv4 a(192, 168, 1, 5), b(52, 114, 74, 99);
  const Bytes payload(100, 0xab);
  const auto frame = forge::build_tcp_frame(ep(a, 40000), ep(b, 443), forge::kTcpAck | forge::kTcpPsh, 1, 2, payload);
  const auto udp = forge::build_udp_frame(ep(b, 53), ep(a, 5353), Bytes(10, 1), 60);
  std::istringstream in(pcap_bytes({{1'000'000, frame}, {1'500'123, udp}}));
  const auto cap = load_capture(in);
  REQUIRE(cap.packets.size() == 2);
  CHECK_FALSE(cap.stats.truncated);
  const auto& p = cap.packets[0];
  CHECK(p.ts_us == 1'000'000);
  CHECK(p.src_ip == a);
  CHECK(p.dst_ip == b);
  CHECK(p.ip_proto == IpProto::TCP);
  CHECK(p.src_port == 40000);
  CHECK(p.dst_port == 443);
  CHECK(p.wire_len == forge::kEthIpTcpHeader + 100);
  CHECK(p.payload == payload);
  CHECK(p.tcp_flags == (forge::kTcpAck | forge::kTcpPsh));
  CHECK(cap.packets[1].wire_len == 60);
  CHECK(cap.packets[1].payload.size() == 10);
  CHECK(cap.packets[1].ts_us == 1'500'123);
}

TEST_CASE("bad magic and truncated header are errors") {
  std::istringstream junk(std::string(24, 'x'));
  CHECK_THROWS_AS(load_capture(junk), Error);
  try {
    std::istringstream j2(std::string(24, 'x'));
    load_capture(j2);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadMagic);
  }
  std::string good = pcap_bytes({});
  std::istringstream shortin(good.substr(0, 10));
  try {
    load_capture(shortin);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedHeader);
  }
}

TEST_CASE("a truncated final record keeps the packets before it") {
  const auto f = forge::build_udp_frame(ep(Ipv4(1, 2, 3, 4), 1), ep(Ipv4(5, 6, 7, 8), 2), Bytes(20, 0));
  std::string data = pcap_bytes({{0, f}, {10, f}, {20, f}});
  data.resize(data.size() - 5);
  std::istringstream in(data);
  const auto cap = load_capture(in);
  CHECK(cap.packets.size() == 2);
  CHECK(cap.stats.truncated);

  std::istringstream in2(data);
  PcapReader reader(in2);
  CHECK(reader.next());
  CHECK(reader.next());
  CHECK_THROWS_AS(reader.next(), Error);
}

TEST_CASE("nanosecond pcap timestamps are truncated to microseconds") {
  const auto f = forge::build_udp_frame(ep(Ipv4(1, 2, 3, 4), 1), ep(Ipv4(5, 6, 7, 8), 2), Bytes(4, 0));
  std::string data = pcap_bytes({{0, f}});
  // Rewrite magic to the nanosecond variant and the fraction to 123456789 ns.
  const unsigned char magic[4] = {0x4d, 0x3c, 0xb2, 0xa1};
  std::copy(magic, magic + 4, data.begin());
  const std::uint32_t ns = 123456789;
  for (int i = 0; i < 4; ++i) data[24 + 4 + i] = static_cast<char>((ns >> (8 * i)) & 0xff);
  std::istringstream in(data);
  PcapReader r(in);
  CHECK(r.nanosecond());
  const auto p = r.next();
  REQUIRE(p);
  CHECK(p->ts_us == 123456);
}

TEST_CASE("VLAN, Linux cooked and IPv6 frames") {
  const Ipv4 a(10, 0, 0, 1), b(10, 0, 0, 2);
  const auto eth = forge::build_udp_frame(ep(a, 1000), ep(b, 2000), Bytes(8, 7));

  Bytes vlan(eth.begin(), eth.begin() + 12);
  for (std::uint8_t x : {0x81, 0x00, 0x00, 0x64}) vlan.push_back(x);
  vlan.insert(vlan.end(), eth.begin() + 12, eth.end());
  const auto pv = decode_frame(kLinkEthernet, vlan, static_cast<std::uint32_t>(vlan.size()));
  CHECK(pv.src_ip == a);
  CHECK(pv.dst_port == 2000);

  Bytes sll = {0, 0, 0, 1, 0, 6, 2, 0, 0, 0, 0, 1, 0, 0, 0x08, 0x00};
  sll.insert(sll.end(), eth.begin() + 14, eth.end());
  const auto ps = decode_frame(kLinkLinuxSll, sll, static_cast<std::uint32_t>(sll.size()));
  CHECK(ps.dst_ip == b);
  CHECK(ps.ip_proto == IpProto::UDP);

  Bytes v6(eth.begin(), eth.begin() + 12);
  v6.push_back(0x86);
  v6.push_back(0xdd);
  v6.resize(80, 0);
  CaptureStats st;
  const auto p6 = decode_frame(kLinkEthernet, v6, 80, &st);
  CHECK_FALSE(p6.has_ip());
  CHECK(st.ipv6 == 1);
  CHECK_FALSE(p6.src_port.has_value());
}

TEST_CASE("FlowKey canonicalization is idempotent and direction-free") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const auto p = random_packet(rng, static_cast<std::uint64_t>(i));
    const auto k = FlowKey::of(p);
    const auto kr = FlowKey::of(reversed(p));
    REQUIRE(k.has_value() == kr.has_value());
    if (!k) continue;
    CHECK(*k == *kr);
    CHECK(FlowKey::canonical(k->addr_a, k->port_a, k->addr_b, k->port_b, k->proto) == *k);
    CHECK(FlowKey::canonical(k->addr_b, k->port_b, k->addr_a, k->port_a, k->proto) == *k);
  }
}

TEST_CASE("conversation table is invariant under reversing every packet") {
  std::mt19937_64 rng(11);
  std::vector<PacketRecord> packets, flipped;
  for (int i = 0; i < 10000; ++i) packets.push_back(random_packet(rng, static_cast<std::uint64_t>(i)));
  std::sort(packets.begin(), packets.end(), [](const auto& x, const auto& y) { return x.ts_us < y.ts_us; });
  for (const auto& p : packets) flipped.push_back(reversed(p));

  const auto fwd = build_conversations(packets);
  const auto rev = build_conversations(flipped);
  REQUIRE(fwd.size() == rev.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    CHECK(fwd[i].key == rev[i].key);
    CHECK(fwd[i].packets_ab == rev[i].packets_ba);
    CHECK(fwd[i].packets_ba == rev[i].packets_ab);
    CHECK(fwd[i].bytes_ab == rev[i].bytes_ba);
    CHECK(fwd[i].bytes_ba == rev[i].bytes_ab);
    CHECK(fwd[i].rel_start_us == rev[i].rel_start_us);
    CHECK(fwd[i].duration_us == rev[i].duration_us);
    CHECK(fwd[i].packets_total == fwd[i].packets_ab + fwd[i].packets_ba);
    CHECK(fwd[i].bytes_total == fwd[i].bytes_ab + fwd[i].bytes_ba);
    CHECK(fwd[i].duration_us >= 0);
    total += fwd[i].packets_total;
  }
  const auto with_tuple = std::count_if(packets.begin(), packets.end(), [](const auto& p) { return p.has_five_tuple(); });
  CHECK(total == static_cast<std::uint64_t>(with_tuple));
}

TEST_CASE("filtered packets still anchor the relative start") {
  std::vector<PacketRecord> packets;
  PacketRecord p;
  p.src_ip = Ipv4(1, 1, 1, 1);
  p.dst_ip = Ipv4(2, 2, 2, 2);
  p.ip_proto = IpProto::UDP;
  p.src_port = 1;
  p.dst_port = 2;
  p.wire_len = 100;
  p.ts_us = 1000;
  packets.push_back(p);
  p.src_ip = Ipv4(3, 3, 3, 3);
  p.ts_us = 4000;
  packets.push_back(p);
  const auto convs = build_conversations(packets, [](const PacketRecord& x) { return x.involves(Ipv4(3, 3, 3, 3)); });
  REQUIRE(convs.size() == 1);
  CHECK(convs[0].rel_start_us == 3000);
  CHECK(convs[0].duration_us == 0);
  CHECK_FALSE(convs[0].bits_per_second_ab().has_value());
}

TEST_CASE("endpoint order follows dotted-quad text") {
  CHECK(endpoint_less(Ipv4(192, 168, 1, 5), 5, Ipv4(52, 114, 74, 99), 443));
  CHECK(endpoint_less(Ipv4(142, 250, 184, 35), 443, Ipv4(192, 168, 1, 5), 1));
  CHECK(endpoint_less(Ipv4(10, 0, 0, 1), 1, Ipv4(10, 0, 0, 1), 2));
}

TEST_CASE("CIDR containment agrees with a bit-loop oracle") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto base = static_cast<std::uint32_t>(rng());
    const int prefix = static_cast<int>(rng() % 33);
    // Half the addresses share the prefix so both outcomes are exercised.
    auto addr = static_cast<std::uint32_t>(rng());
    if (i % 2 && prefix > 0) {
      const std::uint32_t mask = prefix == 32 ? ~0u : ~(~0u >> prefix);
      addr = (base & mask) | (addr & ~mask);
    }
    const auto r = CidrRange::make(Ipv4(base), prefix);
    CHECK((r.base.value & ~r.mask()) == 0u);
    CHECK(cidr_contains(r, Ipv4(addr)) == cidr_oracle(base, prefix, addr));
  }
}

TEST_CASE("CIDR parsing") {
  const auto r = CidrRange::parse("52.112.0.0/14");
  CHECK(r.prefix_len == 14);
  CHECK(r.to_string() == "52.112.0.0/14");
  CHECK(cidr_contains(r, Ipv4(52, 114, 74, 99)));
  CHECK_FALSE(cidr_contains(r, Ipv4(52, 116, 0, 1)));
  CHECK(CidrRange::parse("10.1.2.3").prefix_len == 32);
  CHECK(CidrRange::parse("10.1.2.3/8").to_string() == "10.0.0.0/8");
  CHECK_THROWS_AS(CidrRange::parse("10.1.2/8"), Error);
  CHECK_THROWS_AS(CidrRange::parse("10.1.2.3/33"), Error);
}

TEST_CASE("conversation CSV header and number formats") {
  std::vector<ConversationStats> convs(1);
  convs[0].key = FlowKey::canonical(Ipv4(192, 168, 1, 5), 48851, Ipv4(52, 114, 104, 172), 443, IpProto::TCP);
  convs[0].packets_total = 5;
  convs[0].bytes_total = 683;
  convs[0].rel_start_us = 727369;
  convs[0].duration_us = 77900;
  std::ostringstream out;
  write_conversations_csv(out, convs);
  const std::string s = out.str();
  CHECK(s.find("Address A,Port A,Address B,Port B") == 0);
  CHECK(s.find("192.168.1.5,48851,52.114.104.172,443,5,683") != std::string::npos);
  CHECK(s.find("0.727369,0.0779") != std::string::npos);
}
