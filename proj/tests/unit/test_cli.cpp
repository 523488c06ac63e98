#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tfx/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result tfx_run(std::vector<std::string> args) {
  args.insert(args.begin(), "tfx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = tfx::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "tfx_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    for (const auto& kind : {"pstn-call", "wt", "sip-log", "cdr", "usage"}) {
      std::vector<std::string> args{"fixtures", kind, "--out-dir", (d / kind).string(), "--reference"};
      if (std::string(kind) == "pstn-call") {
        args.insert(args.end(), {"--duration", "2", "--dup-rate", "0.05", "--gap", "0:10:3"});
      }
      REQUIRE(tfx_run(args).code == 0);
    }
    REQUIRE(tfx_run({"fixtures", "wt", "--out-dir", (d / "wt-sip").string(), "--include-sip"}).code == 0);
    return d;
  }();
  return dir;
}

std::string path(const char* rel) { return (workdir() / rel).string(); }

}  // namespace

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(tfx_run({}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"--help"}).code == tfx::cli::kOk);
  CHECK(tfx_run({"flows"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"flows", "--pcap", "/nonexistent.pcap"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"holdmap", "--format", "xml"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"holdmap", "--scenario", "voicemail"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"wt-detect", "--pcap", path("wt/wt.pcap"), "--client", "10.0.0.99"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"wt-detect", "--pcap", path("wt/wt.pcap"), "--client", "not-an-ip"}).code == tfx::cli::kUsage);
  CHECK(tfx_run({"extract-audio", "--pcap", path("pstn-call/call.pcap"), "--select", "(35,"}).code ==
        tfx::cli::kUsage);
}

TEST_CASE("unreadable inputs exit 3") {
  const auto junk = workdir() / "junk.pcap";
  std::ofstream(junk) << "this is not a capture at all";
  const auto r = tfx_run({"flows", "--pcap", junk.string()});
  CHECK(r.code == tfx::cli::kParse);
  CHECK(r.err.find("BadMagic") != std::string::npos);
  const auto bad_csv = workdir() / "bad.csv";
  std::ofstream(bad_csv) << "CALLER,CALLEE\n1,2\n";
  CHECK(tfx_run({"cdr-correlate", "--in", bad_csv.string()}).code == tfx::cli::kParse);
}

TEST_CASE("wt-detect verdicts and strict mode") {
  auto r = tfx_run({"wt-detect", "--pcap", path("wt/wt.pcap"), "--client", "192.168.1.5", "--format", "json"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["verdict"] == "DETECTED");
  CHECK(j["sip_packets_found"] == 0);

  r = tfx_run({"wt-detect", "--pcap", path("wt-sip/wt.pcap"), "--client", "192.168.1.5", "--format", "json"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["verdict"] == "INCONSISTENT");
  r = tfx_run({"wt-detect", "--pcap", path("wt-sip/wt.pcap"), "--client", "192.168.1.5", "--strict"});
  CHECK(r.code == tfx::cli::kInconsistent);
}

TEST_CASE("extract-audio needs exactly two streams") {
  const auto wav = (workdir() / "out.wav").string();
  auto r = tfx_run({"extract-audio", "--pcap", path("pstn-call/call.pcap"), "--out", wav, "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["streams"].size() == 2);
  CHECK(fs::file_size(wav) > 44);
  r = tfx_run({"extract-audio", "--pcap", path("pstn-call/call.pcap"), "--out", wav, "--select", "(35,36)"});
  CHECK(r.code == tfx::cli::kInconsistent);
  r = tfx_run({"extract-audio", "--pcap", path("pstn-call/call.pcap"), "--list"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PCMA") != std::string::npos);
}

TEST_CASE("sip-split writes bundles and an index") {
  const auto out_dir = workdir() / "bundles";
  const auto r = tfx_run({"sip-split", "--in", path("sip-log/sbc.log"), "--out-dir", out_dir.string(), "--format", "csv"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out_dir / "index.csv"));
  std::size_t bundles = 0;
  for (const auto& e : fs::directory_iterator(out_dir)) bundles += e.path().extension() == ".sip";
  CHECK(bundles == 100);
}

TEST_CASE("usage summaries and top list") {
  auto r = tfx_run({"usage", "--in", path("usage/activity.csv"), "--in", path("usage/devices.csv"), "--in",
                    path("usage/pstn.csv"), "--format", "csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Average audio time per user,12,44,130") != std::string::npos);
  r = tfx_run({"usage", "--in", path("usage/activity.csv"), "--top", "3", "--format", "csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("1,user0001@contoso.example,2 days 3 hours 10 minutes") != std::string::npos);
}

TEST_CASE("structured output is byte-identical across runs") {
  const auto wav = (workdir() / "det.wav").string();
  const std::vector<std::vector<std::string>> commands = {
      {"flows", "--pcap", path("wt/wt.pcap"), "--pcap", path("wt-sip/wt.pcap")},
      {"classify", "--pcap", path("wt/wt.pcap"), "--client", "192.168.1.5"},
      {"wt-detect", "--pcap", path("wt/wt.pcap"), "--client", "192.168.1.5"},
      {"sip-split", "--in", path("sip-log/sbc.log")},
      {"sip-select", "--in", path("sip-log/sbc.log"), "--from", "2021-07-20T13:00:01Z", "--to", "2021-07-20T13:00:02Z"},
      {"cdr-correlate", "--in", path("cdr/cdr.csv")},
      {"extract-audio", "--pcap", path("pstn-call/call.pcap"), "--out", wav},
      {"usage", "--in", path("usage/activity.csv")},
      {"holdmap"},
      {"fixtures", "cdr", "--out-dir", (workdir() / "det-cdr").string()},
  };
  for (auto cmd : commands) {
    cmd.insert(cmd.end(), {"--format", "json"});
    const auto a = tfx_run(cmd);
    const auto b = tfx_run(cmd);
    INFO(cmd[0]);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK_FALSE(a.out.empty());
    CHECK(json::accept(a.out));
  }
}
