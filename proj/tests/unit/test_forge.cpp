#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tfx/capture.hpp"
#include "tfx/forge.hpp"

using namespace tfx;
using nlohmann::json;

TEST_CASE("rng reductions stay in range and cover it") {
  forge::Rng rng(42);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
    const auto b = rng.between(-3, 3);
    REQUIRE(b >= -3);
    REQUIRE(b <= 3);
    const double u = rng.unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK(seen.size() == 7);
  // mt19937_64 with the default seed yields this value at position 10000.
  std::mt19937_64 e;
  e.discard(9999);
  CHECK(e() == 9981545732273789042ULL);
}

TEST_CASE("identical specs give identical bytes") {
  forge::PstnCallSpec pstn;
  pstn.seed = 77;
  pstn.duration_s = 2;
  pstn.duplicate_rate = 0.05;
  pstn.gaps = {{0, 20, 3}};
  const auto a = forge::gen_pstn_call_capture(pstn);
  const auto b = forge::gen_pstn_call_capture(pstn);
  CHECK(a.pcap == b.pcap);
  CHECK(forge::manifest_json(a) == forge::manifest_json(b));
  pstn.seed = 78;
  CHECK(forge::gen_pstn_call_capture(pstn).pcap != a.pcap);

  forge::WtSpec wt;
  CHECK(forge::gen_wt_capture(wt).pcap == forge::gen_wt_capture(wt).pcap);

  forge::SipLogSpec sip;
  sip.dialogs = 30;
  sip.byte_target = 300'000;
  std::ostringstream s1, s2;
  const auto m1 = forge::gen_sip_log(sip, s1);
  const auto m2 = forge::gen_sip_log(sip, s2);
  CHECK(s1.str() == s2.str());
  CHECK(forge::manifest_json(m1) == forge::manifest_json(m2));

  forge::CdrSpec cdr;
  cdr.calls = 40;
  CHECK(forge::gen_cdr(cdr).csv == forge::gen_cdr(cdr).csv);

  forge::UsageSpec usage;
  usage.reference = false;
  CHECK(forge::gen_usage(usage).activity_csv == forge::gen_usage(usage).activity_csv);
}

TEST_CASE("pstn-call manifest describes the capture") {
  forge::PstnCallSpec spec;
  spec.seed = 5;
  spec.duration_s = 3;
  spec.duplicate_rate = 0.05;
  spec.gaps = {{1, 40, 3}};
  spec.start_seq = 65500;
  const auto fx = forge::gen_pstn_call_capture(spec);
  const auto j = json::parse(forge::manifest_json(fx));
  CHECK(j["schema"] == "tfx.manifest.pstn-call/1");
  REQUIRE(j["streams"].size() == 4);

  std::istringstream in(std::string(fx.pcap.begin(), fx.pcap.end()));
  const auto cap = capture::load_capture(in);
  std::size_t sent = 0;
  for (const auto& s : fx.streams) {
    CHECK(s.packets == 150);
    CHECK(s.duplicates_injected == static_cast<std::size_t>(0.05 * 150));
    CHECK(s.packets_sent == s.packets - s.dropped_packets.size() + s.duplicates_injected);
    sent += s.packets_sent;
  }
  CHECK(fx.streams[1].dropped_packets == std::vector<std::size_t>{40, 41, 42});
  // One extra non-RTP debug frame.
  CHECK(cap.packets.size() == sent + 1);

  const auto wave = forge::source_waveform(fx, fx.streams[1], true);
  CHECK(wave.size() == 150 * 160);
  for (std::size_t i = 40 * 160; i < 43 * 160; ++i) REQUIRE(wave[i] == 0);

  forge::PstnCallSpec bad = spec;
  bad.duplicate_rate = 1.5;
  CHECK_THROWS_AS(forge::gen_pstn_call_capture(bad), Error);
  bad = spec;
  bad.gaps = {{7, 0, 1}};
  CHECK_THROWS_AS(forge::gen_pstn_call_capture(bad), Error);
}

TEST_CASE("walkie-talkie manifest rows") {
  const auto fx = forge::gen_wt_capture({});
  const auto& ref = forge::wt_reference_rows();
  REQUIRE(ref.size() == 9);
  CHECK(fx.teams_flows.size() == 9);
  CHECK(ref[0].rel_start_us == 727369);
  CHECK(ref[0].packets() == 5);
  CHECK(ref[0].bytes() == 683);
  CHECK(ref[1].bytes() == 22633);
  CHECK(fx.expected_verdict == "DETECTED");
  const auto j = json::parse(forge::manifest_json(fx));
  CHECK(j["client"] == "192.168.1.5");
  CHECK(j["teams_flows"].size() == 9);
}

TEST_CASE("sip-log byte target is met within half a filler record") {
  forge::SipLogSpec spec;
  spec.dialogs = 20;
  spec.byte_target = 123'457;
  std::ostringstream out;
  const auto m = forge::gen_sip_log(spec, out);
  const auto size = static_cast<std::int64_t>(out.str().size());
  CHECK(std::abs(size - static_cast<std::int64_t>(spec.byte_target)) <= 100);
  CHECK(m.bytes == out.str().size());
  CHECK(m.dialogs.size() == 20);
  spec.byte_target = 100;
  std::ostringstream small;
  CHECK_THROWS_AS(forge::gen_sip_log(spec, small), Error);
  spec.byte_target = 0;
  spec.min_messages = 1;
  CHECK_THROWS_AS(forge::gen_sip_log(spec, small), Error);
}
