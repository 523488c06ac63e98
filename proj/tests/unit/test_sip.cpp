#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <zlib.h>

#include "tfx/forge.hpp"
#include "tfx/sip.hpp"

using namespace tfx;
using namespace tfx::sip;

namespace {

std::string make_log(const forge::SipLogSpec& spec, forge::SipLogManifest* manifest = nullptr) {
  std::ostringstream out;
  auto m = forge::gen_sip_log(spec, out);
  if (manifest) *manifest = std::move(m);
  return out.str();
}

std::vector<SipLogLine> read_all(const std::string& log) {
  std::istringstream in(log);
  return stream_syslog(in);
}

/// Counts Call-ID header lines per id with a plain line scan.
std::map<std::string, std::size_t> call_id_oracle(const std::string& log) {
  static const std::regex re(R"(^\s+Call-ID:\s*(\S+)\s*$)", std::regex::icase);
  std::map<std::string, std::size_t> counts;
  std::istringstream in(log);
  std::string line;
  std::smatch m;
  while (std::getline(in, line))
    if (std::regex_match(line, m, re)) ++counts[m[1]];
  return counts;
}

const char* kInvite =
    "INVITE sip:+390421364@10.15.4.30 SIP/2.0\r\n"
    "Via: SIP/2.0/UDP 10.15.4.20:5060\r\n"
    "From: \"Desk\" <sip:+39041220444@10.15.4.20>;tag=1\r\n"
    "To: <sip:+390421364@10.15.4.30>\r\n"
    "i: abc@host\r\n"
    "CSeq: 1 INVITE\r\n"
    "Content-Type: application/sdp\r\n"
    "\r\n"
    "v=0\r\n"
    "m=audio 6000 RTP/AVP 8 0\r\n";

}  // namespace

TEST_CASE("SIP message parsing") {
  const auto m = parse_sip(kInvite);
  CHECK(m.kind == MessageKind::REQUEST);
  CHECK(m.method == "INVITE");
  CHECK(m.call_id == "abc@host");
  CHECK(m.from_uri == "sip:+39041220444@10.15.4.20");
  CHECK(m.to_uri == "sip:+390421364@10.15.4.30");
  CHECK(m.cseq == 1);
  CHECK(m.cseq_method == "INVITE");
  CHECK(m.body_summary == "audio 6000 RTP/AVP 8 0");

  const auto r = parse_sip("SIP/2.0 486 Busy Here\r\nCall-ID: x\r\nCSeq: 1 INVITE\r\n");
  CHECK(r.kind == MessageKind::RESPONSE);
  CHECK(r.status_code == 486);
  CHECK(r.reason == "Busy Here");
  CHECK(r.method_or_code() == "486");

  auto code_of = [](const char* text) {
    try {
      parse_sip(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of("HELLO world\r\nCall-ID: x\r\n") == ErrorCode::NotSip);
  CHECK(code_of("SIP/2.0 99 Low\r\nCall-ID: x\r\n") == ErrorCode::NotSip);
  CHECK(code_of("BYE sip:a@b SIP/2.0\r\nCSeq: 2 BYE\r\n") == ErrorCode::MissingCallId);
}

TEST_CASE("syslog framing, zones and bad headers") {
  const std::string log =
      "2021-07-20T13:00:00.100Z sbc01 local0: OPTIONS sip:a@b SIP/2.0\n"
      "    Call-ID: one\n"
      "    CSeq: 1 OPTIONS\n"
      "\n"
      "2021-07-20T13:00:01 sbc01 local1: [S=1] plain diagnostic\n"
      "garbage line without a timestamp\n"
      "2021-07-20T13:00:02+02:00 sbc01 local0: SIP/2.0 200 OK\n"
      "    Call-ID: one\n"
      "    CSeq: 1 OPTIONS\n";
  std::istringstream in(log);
  SyslogReader r(in);
  std::vector<SipLogLine> lines;
  while (auto l = r.next()) lines.push_back(*l);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].sip_fragment.has_value());
  CHECK_FALSE(lines[1].sip_fragment.has_value());
  CHECK(lines[1].zone_assumed);
  CHECK_FALSE(lines[2].header_ok);
  CHECK(lines[2].ts_us == lines[1].ts_us);
  CHECK(lines[3].ts_us == lines[0].ts_us + 1'900'000 - 7'200'000'000);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].seq > lines[i - 1].seq);
  CHECK(r.stats().records == 4);
  CHECK(r.stats().sip_records == 2);
  CHECK(r.stats().bad_headers == 1);
  CHECK(r.stats().zone_assumed == 1);
}

TEST_CASE("invalid UTF-8 is replaced, not fatal") {
  std::string log = "2021-07-20T13:00:00Z sbc01 local1: bad \xff\xfe bytes\n";
  std::istringstream in(log);
  SyslogReader r(in);
  const auto l = r.next();
  REQUIRE(l);
  CHECK(r.stats().replaced_bytes == 2);
}

TEST_CASE("dialog grouping agrees with a Call-ID line scan") {
  forge::SipLogSpec spec;
  spec.seed = 21;
  spec.dialogs = 300;
  spec.interleave = 20;
  spec.byte_target = 2'000'000;
  forge::SipLogManifest manifest;
  const std::string log = make_log(spec, &manifest);
  const auto oracle = call_id_oracle(log);

  const auto result = split_dialogs(read_all(log));
  CHECK(result.unparseable == 0);
  CHECK(result.non_sip_records == manifest.filler_records);
  REQUIRE(result.dialogs.size() == oracle.size());
  REQUIRE(result.dialogs.size() == manifest.dialogs.size());
  std::size_t total = 0;
  std::map<std::string, const forge::DialogTruth*> truth;
  for (const auto& t : manifest.dialogs) truth[t.call_id] = &t;
  for (const auto& d : result.dialogs) {
    REQUIRE(oracle.count(d.call_id));
    CHECK(d.messages.size() == oracle.at(d.call_id));
    REQUIRE(truth.count(d.call_id));
    CHECK(d.messages.size() == truth[d.call_id]->messages);
    CHECK(d.completeness == truth[d.call_id]->completeness);
    CHECK(d.start_ts_us == truth[d.call_id]->start_us);
    CHECK(d.end_ts_us == truth[d.call_id]->end_us);
    CHECK(d.start_ts_us <= d.end_ts_us);
    for (std::size_t i = 0; i < d.messages.size(); ++i) {
      CHECK(d.messages[i].call_id == d.call_id);
      if (i) CHECK(d.messages[i].source_seq > d.messages[i - 1].source_seq);
    }
    total += d.messages.size();
  }
  CHECK(total == result.messages);
  CHECK(total == manifest.sip_records);
}

TEST_CASE("completeness rules") {
  auto msg = [](const char* text) { return parse_sip(text); };
  const auto inv = msg("INVITE sip:a@b SIP/2.0\r\nCall-ID: c\r\nCSeq: 1 INVITE\r\n");
  const auto ok = msg("SIP/2.0 200 OK\r\nCall-ID: c\r\nCSeq: 1 INVITE\r\n");
  const auto busy = msg("SIP/2.0 486 Busy Here\r\nCall-ID: c\r\nCSeq: 1 INVITE\r\n");
  const auto ringing = msg("SIP/2.0 180 Ringing\r\nCall-ID: c\r\nCSeq: 1 INVITE\r\n");
  const auto bye = msg("BYE sip:a@b SIP/2.0\r\nCall-ID: c\r\nCSeq: 2 BYE\r\n");
  CHECK(derive_completeness({inv, ringing}) == Completeness::NO_FINAL_RESPONSE);
  CHECK(derive_completeness({inv, ringing, busy}) == Completeness::COMPLETE);
  CHECK(derive_completeness({inv, ok}) == Completeness::NO_FINAL_RESPONSE);
  CHECK(derive_completeness({inv, ok, bye}) == Completeness::COMPLETE);
  CHECK(derive_completeness({ok, bye}) == Completeness::ORPHAN_RESPONSE);
}

TEST_CASE("window selection") {
  forge::SipLogSpec spec;
  spec.seed = 5;
  spec.dialogs = 60;
  forge::SipLogManifest manifest;
  const std::string log = make_log(spec, &manifest);
  const auto lines = read_all(log);

  SUBCASE("the full range is idempotent") {
    const Window all{manifest.dialogs.front().start_us, manifest.dialogs.back().end_us + 1, std::nullopt};
    const auto a = split_dialogs(lines);
    const auto b = split_dialogs(select_window(lines, all));
    REQUIRE(a.dialogs.size() == b.dialogs.size());
    for (std::size_t i = 0; i < a.dialogs.size(); ++i) {
      CHECK(a.dialogs[i].call_id == b.dialogs[i].call_id);
      CHECK(a.dialogs[i].messages.size() == b.dialogs[i].messages.size());
    }
  }
  SUBCASE("a narrow window keeps whole overlapping dialogs") {
    const auto& t = manifest.dialogs[10];
    const Window w{t.start_us, t.start_us, std::nullopt};
    const auto sel = split_dialogs(select_window(lines, w));
    // Brute-force oracle over the manifest.
    std::size_t expected = 0;
    for (const auto& d : manifest.dialogs)
      if (d.start_us <= w.to_us && d.end_us >= w.from_us) ++expected;
    CHECK(sel.dialogs.size() >= 1);
    CHECK(sel.dialogs.size() <= expected);
    for (const auto& d : sel.dialogs) {
      bool inside = false;
      for (const auto& m : d.messages) inside |= (m.ts_us >= w.from_us && m.ts_us <= w.to_us);
      CHECK(inside);
    }
  }
  SUBCASE("participant filter") {
    const auto& t = manifest.dialogs[3];
    Window w{manifest.dialogs.front().start_us, manifest.dialogs.back().end_us, t.caller};
    const auto sel = split_dialogs(select_window(lines, w));
    REQUIRE_FALSE(sel.dialogs.empty());
    for (const auto& d : sel.dialogs) {
      bool hit = false;
      for (const auto& p : d.participants) hit |= p.find(t.caller) != std::string::npos;
      CHECK(hit);
    }
  }
  SUBCASE("reversed window") {
    CHECK_THROWS_AS(select_window(lines, Window{10, 5, std::nullopt}), Error);
  }
}

TEST_CASE("gzip logs stream like plain ones and file selection matches memory") {
  forge::SipLogSpec spec;
  spec.seed = 8;
  spec.dialogs = 40;
  const std::string log = make_log(spec);
  const auto dir = std::filesystem::temp_directory_path() / "tfx_test_sip";
  std::filesystem::create_directories(dir);
  const auto plain = (dir / "sbc.log").string();
  const auto packed = (dir / "sbc.log.gz").string();
  {
    std::ofstream f(plain, std::ios::binary);
    f << log;
  }
  gzFile gz = gzopen(packed.c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, log.data(), static_cast<unsigned>(log.size()));
  gzclose(gz);

  auto count = [](const std::string& path) {
    auto r = SyslogReader::open_file(path);
    DialogSplitter s;
    while (auto l = r.next()) s.add(*l);
    return s.finish().dialogs.size();
  };
  CHECK(count(plain) == 40);
  CHECK(count(packed) == 40);

  const auto lines = read_all(log);
  const Window w{lines[50].ts_us, lines[120].ts_us, std::nullopt};
  const auto mem = select_window(lines, w);
  std::vector<std::string> streamed;
  const auto stats = select_window_file(packed, w, [&](const SipLogLine& l) { streamed.push_back(l.raw); });
  REQUIRE(streamed.size() == mem.size());
  for (std::size_t i = 0; i < mem.size(); ++i) CHECK(streamed[i] == mem[i].raw);
  CHECK(stats.lines_emitted == mem.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("bundle file names") {
  CHECK(bundle_name("abc@10.0.0.1") == "abc@10.0.0.1.sip");
  CHECK(bundle_name("a/b\\c:d") == "a_b_c_d.sip");
  CHECK(bundle_name("..") == "_...sip");
}
