#include "tfx/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "tfx/capture.hpp"
#include "tfx/cdr.hpp"
#include "tfx/classifier.hpp"
#include "tfx/forge.hpp"
#include "tfx/media.hpp"
#include "tfx/report.hpp"
#include "tfx/sip.hpp"
#include "tfx/text.hpp"
#include "tfx/usage.hpp"

namespace tfx::cli {

namespace {

namespace fs = std::filesystem;
using report::json;

enum class Format { TEXT, CSV, JSON };

const std::map<std::string, Format> kFormats = {
    {"text", Format::TEXT}, {"csv", Format::CSV}, {"json", Format::JSON}, {"structured", Format::JSON}};

struct Common {
  std::string format = "text";
  std::string out;

  Format fmt() const { return kFormats.at(format); }
};

/// --out file when given, otherwise the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error(ErrorCode::Io, "cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

void add_common(CLI::App* app, Common& c, bool csv = true) {
  std::vector<std::string> allowed{"text", "json", "structured"};
  if (csv) allowed.push_back("csv");
  app->add_option("--format", c.format, "Output format")->check(CLI::IsMember(allowed));
  app->add_option("--out", c.out, "Write results to this file");
}

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

std::size_t display_width(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xc0) != 0x80; }));
}

void print_table(std::ostream& out, const std::vector<std::string>& head,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) w[i] = display_width(head[i]);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], display_width(r[i]));
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += "  ";
      s += cells[i];
      if (i + 1 < cells.size()) s.append(w[i] - display_width(cells[i]), ' ');
    }
    out << s << '\n';
  };
  line(head);
  for (const auto& r : rows) line(r);
}

Ipv4 ip_arg(const std::string& s, const char* what) {
  auto ip = Ipv4::parse(s);
  if (!ip) throw Error(ErrorCode::InvalidArgument, std::string("bad ") + what + " address '" + s + "'");
  return *ip;
}

classify::RangeSet load_ranges(const std::string& path) {
  return path.empty() ? classify::RangeSet::teams_default() : classify::RangeSet::load_file(path);
}

unsigned default_jobs() { return std::max(1u, std::min(4u, std::thread::hardware_concurrency())); }

/// Runs fn over inputs with at most jobs in flight; results keep input order.
template <typename R>
std::vector<R> parallel_map(const std::vector<std::string>& inputs, unsigned jobs,
                            const std::function<R(const std::string&)>& fn) {
  std::vector<R> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); i += jobs) {
    std::vector<std::future<R>> batch;
    for (std::size_t k = i; k < std::min(inputs.size(), i + jobs); ++k)
      batch.push_back(std::async(std::launch::async, fn, inputs[k]));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

// ---------------------------------------------------------------------------
// flows

struct FlowsCmd {
  Common common;
  std::vector<std::string> pcaps;
  std::string client;
  std::vector<std::string> ranges;
  unsigned jobs = default_jobs();

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("flows", "Conversation table of a capture");
    sub->add_option("--pcap", pcaps, "Capture file (repeatable)")->required()->check(CLI::ExistingFile);
    sub->add_option("--client", client, "Keep conversations involving this address");
    sub->add_option("--range", ranges, "Keep conversations touching this CIDR (repeatable)");
    sub->add_option("--jobs", jobs, "Captures processed in parallel")->check(CLI::Range(1u, 64u));
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }
  bool selected = false;

  struct Result {
    capture::CaptureStats stats;
    std::vector<capture::ConversationStats> convs;
  };

  int exec(std::ostream& out_default, std::ostream&) {
    std::optional<Ipv4> who;
    if (!client.empty()) who = ip_arg(client, "client");
    std::vector<capture::CidrRange> cidrs;
    for (const auto& r : ranges) cidrs.push_back(capture::CidrRange::parse(r));
    capture::PacketFilter filter;
    if (who || !cidrs.empty()) {
      filter = [who, cidrs](const capture::PacketRecord& p) {
        if (!p.has_ip()) return false;
        if (who && !p.involves(*who)) return false;
        if (cidrs.empty()) return true;
        return std::any_of(cidrs.begin(), cidrs.end(), [&](const capture::CidrRange& c) {
          return capture::cidr_contains(c, *p.src_ip) || capture::cidr_contains(c, *p.dst_ip);
        });
      };
    }
    const auto results = parallel_map<Result>(pcaps, jobs, [&](const std::string& path) {
      auto cap = capture::load_capture_file(path);
      return Result{cap.stats, capture::build_conversations(cap.packets, filter)};
    });

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    switch (common.fmt()) {
      case Format::JSON: {
        json caps = json::array();
        for (std::size_t i = 0; i < pcaps.size(); ++i) {
          json c = report::conversations_json(results[i].convs);
          caps.push_back({{"file", pcaps[i]},
                          {"stats", report::capture_stats_json(results[i].stats)},
                          {"conversations", c["conversations"]}});
        }
        write_json(out, {{"schema", "tfx.flows/1"}, {"captures", caps}});
        break;
      }
      case Format::CSV:
        for (std::size_t i = 0; i < pcaps.size(); ++i) {
          std::ostringstream one;
          capture::write_conversations_csv(one, results[i].convs);
          if (pcaps.size() == 1) {
            out << one.str();
            continue;
          }
          // Several captures: a leading Capture column keeps rows apart.
          std::istringstream lines(one.str());
          std::string line;
          bool header = true;
          while (std::getline(lines, line)) {
            if (header && i > 0) {
              header = false;
              continue;
            }
            out << (header ? std::string("Capture") : text::csv_field(pcaps[i])) << ',' << line << '\n';
            header = false;
          }
        }
        break;
      case Format::TEXT:
        for (std::size_t i = 0; i < pcaps.size(); ++i) {
          if (pcaps.size() > 1) out << "== " << pcaps[i] << '\n';
          std::vector<std::vector<std::string>> rows;
          for (const auto& c : results[i].convs)
            rows.push_back({c.key.addr_a.to_string(), std::to_string(c.key.port_a), c.key.addr_b.to_string(),
                            std::to_string(c.key.port_b), std::to_string(c.packets_total),
                            std::to_string(c.bytes_total), std::to_string(c.packets_ab),
                            std::to_string(c.bytes_ab), std::to_string(c.packets_ba),
                            std::to_string(c.bytes_ba), format_seconds(c.rel_start_us, 6),
                            format_seconds(c.duration_us, 4)});
          print_table(out, capture::conversation_columns(), rows);
          out << results[i].convs.size() << " conversations, " << results[i].stats.packets << " packets"
              << (results[i].stats.truncated ? " (capture truncated)" : "") << '\n';
        }
        break;
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// classify

struct ClassifyCmd {
  Common common;
  std::string pcap, client, gateway, ranges;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("classify", "Label flows by service range and DNS names");
    sub->add_option("--pcap", pcap, "Capture file")->required()->check(CLI::ExistingFile);
    sub->add_option("--client", client, "Client address");
    sub->add_option("--gateway", gateway, "Local gateway address");
    sub->add_option("--ranges", ranges, "Range file replacing the built-in Teams ranges")->check(CLI::ExistingFile);
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream&) {
    classify::ClassifyOptions opt;
    if (!client.empty()) opt.client = ip_arg(client, "client");
    if (!gateway.empty()) opt.gateway = ip_arg(gateway, "gateway");
    const auto rs = load_ranges(ranges);
    const auto cap = capture::load_capture_file(pcap);
    const auto dns = classify::extract_dns(cap.packets);
    const auto convs = capture::build_conversations(cap.packets);
    const auto labels = classify::classify_flows(convs, rs, dns.observations, opt);

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    switch (common.fmt()) {
      case Format::JSON: {
        json j = report::flow_labels_json(labels);
        j["dns"] = report::dns_json(dns.observations);
        j["dns_malformed"] = dns.malformed;
        write_json(out, j);
        break;
      }
      case Format::CSV:
        out << "address_a,port_a,address_b,port_b,proto,label,matched_range,dns_names,media_candidate\n";
        for (const auto& l : labels) {
          std::string names;
          for (const auto& n : l.dns_names) names += (names.empty() ? "" : ";") + n;
          out << text::csv_row({l.key.addr_a.to_string(), std::to_string(l.key.port_a), l.key.addr_b.to_string(),
                                std::to_string(l.key.port_b), std::string(capture::to_string(l.key.proto)),
                                std::string(classify::to_string(l.label)), l.matched_range.value_or(""), names,
                                l.media_candidate ? "true" : "false"})
              << '\n';
        }
        break;
      case Format::TEXT: {
        std::vector<std::vector<std::string>> rows;
        for (const auto& l : labels) {
          std::string names;
          for (const auto& n : l.dns_names) names += (names.empty() ? "" : ", ") + n;
          rows.push_back({std::string(classify::to_string(l.label)),
                          l.key.addr_a.to_string() + ":" + std::to_string(l.key.port_a),
                          l.key.addr_b.to_string() + ":" + std::to_string(l.key.port_b),
                          std::string(capture::to_string(l.key.proto)), l.matched_range.value_or("-"),
                          names.empty() ? "-" : names});
        }
        print_table(out, {"Label", "Endpoint A", "Endpoint B", "Proto", "Range", "DNS"}, rows);
        for (const auto& d : dns.observations) {
          out << "dns " << format_iso8601(d.ts_us) << ' ' << d.query_name;
          for (const auto& a : d.aliases) out << " -> " << a;
          for (const auto& a : d.answers) out << " = " << a.to_string();
          out << '\n';
        }
        break;
      }
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// wt-detect

struct WtCmd {
  Common common;
  std::string pcap, client, ranges, peer;
  std::vector<std::string> names;
  bool suffix = false;
  double idle_gap_s = 30.0;
  bool strict = false;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("wt-detect", "Look for Walkie Talkie activity of a client");
    sub->add_option("--pcap", pcap, "Capture file")->required()->check(CLI::ExistingFile);
    sub->add_option("--client", client, "Client address")->required();
    sub->add_option("--ranges", ranges, "Range file replacing the built-in Teams ranges")->check(CLI::ExistingFile);
    sub->add_option("--peer", peer, "Other party; direct traffic with it is reported");
    sub->add_option("--name", names, "Walkie Talkie host name (repeatable)");
    sub->add_flag("--suffix-wildcard", suffix, "Allow *.suffix patterns in --name");
    sub->add_option("--idle-gap", idle_gap_s, "Seconds of silence that split sessions")->check(CLI::PositiveNumber);
    sub->add_flag("--strict", strict, "Exit 4 when the verdict is INCONSISTENT");
    add_common(sub, common, false);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream& err) {
    classify::WtOptions opt;
    if (!names.empty()) opt.names = names;
    opt.suffix_wildcard = suffix;
    opt.idle_gap_us = static_cast<TimestampUs>(idle_gap_s * 1e6);
    if (!peer.empty()) opt.peer = ip_arg(peer, "peer");
    const Ipv4 who = ip_arg(client, "client");
    const auto cap = capture::load_capture_file(pcap);
    const auto r = classify::detect_walkie_talkie(cap.packets, who, load_ranges(ranges), opt);

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    if (common.fmt() == Format::JSON) {
      write_json(out, report::wt_report_json(r));
    } else {
      out << "client    " << r.client_addr.to_string() << '\n'
          << "verdict   " << classify::to_string(r.verdict) << '\n'
          << "dns hits  " << r.dns_hits << '\n'
          << "resolved ";
      for (const auto& a : r.resolved_wt_addrs) out << ' ' << a.to_string();
      out << '\n' << "sip       " << r.sip_packets_found << " packets\n"
          << "peer      " << (r.peer_direct_traffic_found ? "direct traffic found" : "no direct traffic") << '\n';
      for (std::size_t i = 0; i < r.sessions.size(); ++i) {
        const auto& s = r.sessions[i];
        out << "session " << i + 1 << "  " << format_iso8601(s.start_ts_us) << " .. "
            << format_iso8601(s.end_ts_us) << "  flows " << s.flows.size() << "  dns hits " << s.dns_hits
            << "  hubs";
        for (const auto& a : s.wt_hub_addrs) out << ' ' << a.to_string();
        out << '\n';
      }
      for (const auto& n : r.notes) out << "note: " << n << '\n';
    }
    if (strict && r.verdict == classify::WtVerdict::INCONSISTENT) {
      err << "tfx: verdict INCONSISTENT\n";
      return kInconsistent;
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// sip-split

struct SipSplitCmd {
  Common common;
  std::vector<std::string> inputs;
  std::string out_dir;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("sip-split", "Regroup SBC syslog SIP messages into dialogs");
    sub->add_option("--in", inputs, "Syslog file, plain or gzip (repeatable, read in order)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out-dir", out_dir, "Write one <call-id>.sip bundle per dialog and index.csv here");
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream&) {
    sip::DialogSplitter splitter(sip::SplitOptions{!out_dir.empty()});
    sip::StreamStats total;
    for (const auto& path : inputs) {
      auto reader = sip::SyslogReader::open_file(path);
      while (auto rec = reader.next()) splitter.add(*rec);
      const auto& s = reader.stats();
      total.physical_lines += s.physical_lines;
      total.records += s.records;
      total.sip_records += s.sip_records;
      total.replaced_bytes += s.replaced_bytes;
      total.zone_assumed += s.zone_assumed;
      total.bad_headers += s.bad_headers;
      total.bytes += s.bytes;
    }
    auto result = splitter.finish();
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      for (const auto& d : result.dialogs) {
        std::ofstream f(fs::path(out_dir) / sip::bundle_name(d.call_id), std::ios::binary);
        if (!f) throw Error(ErrorCode::Io, "cannot write bundle in " + out_dir);
        sip::write_dialog_bundle(f, d);
      }
      std::ofstream idx(fs::path(out_dir) / "index.csv", std::ios::binary);
      if (!idx) throw Error(ErrorCode::Io, "cannot write index in " + out_dir);
      sip::write_dialog_index(idx, result.dialogs);
    }

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    switch (common.fmt()) {
      case Format::JSON: write_json(out, report::split_json(result, total)); break;
      case Format::CSV: sip::write_dialog_index(out, result.dialogs); break;
      case Format::TEXT: {
        std::vector<std::vector<std::string>> rows;
        for (const auto& d : result.dialogs) {
          std::string parts;
          for (const auto& p : d.participants) parts += (parts.empty() ? "" : " ") + p;
          rows.push_back({d.call_id, format_iso8601(d.start_ts_us), std::to_string(d.messages.size()),
                          std::string(sip::to_string(d.completeness)), parts});
        }
        print_table(out, {"Call-ID", "Start", "Messages", "Completeness", "Participants"}, rows);
        out << result.dialogs.size() << " dialogs, " << result.messages << " messages, " << result.unparseable
            << " unparseable, " << result.non_sip_records << " other records\n";
        break;
      }
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// sip-select

struct SipSelectCmd {
  Common common;
  std::string input, from, to, participant;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("sip-select", "Records of the dialogs active in a time window");
    sub->add_option("--in", input, "Syslog file, plain or gzip")->required()->check(CLI::ExistingFile);
    sub->add_option("--from", from, "Window start, ISO-8601")->required();
    sub->add_option("--to", to, "Window end, ISO-8601")->required();
    sub->add_option("--participant", participant, "Substring of a From/To URI");
    add_common(sub, common, false);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream& err) {
    auto parse_ts = [](const std::string& s, const char* what) {
      auto t = parse_iso8601(s);
      if (!t) throw Error(ErrorCode::InvalidArgument, std::string("bad ") + what + " time '" + s + "'");
      return t->us;
    };
    sip::Window w{parse_ts(from, "--from"), parse_ts(to, "--to"), std::nullopt};
    if (!participant.empty()) w.participant = participant;

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    const bool structured = common.fmt() == Format::JSON;
    json records = json::array();
    const auto stats = sip::select_window_file(input, w, [&](const sip::SipLogLine& l) {
      if (structured) records.push_back(l.raw);
      else out << l.raw << "\n\n";
    });
    if (structured) {
      write_json(out, {{"schema", "tfx.sip-select/1"},
                       {"from", format_iso8601(w.from_us)},
                       {"to", format_iso8601(w.to_us)},
                       {"participant", w.participant ? json(*w.participant) : json(nullptr)},
                       {"dialogs_indexed", stats.dialogs_indexed},
                       {"dialogs_selected", stats.dialogs_selected},
                       {"records", records}});
    } else {
      err << "tfx: " << stats.dialogs_selected << " of " << stats.dialogs_indexed << " dialogs, "
          << stats.lines_emitted << " records\n";
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// cdr-correlate

struct CdrCmd {
  Common common;
  std::vector<std::string> inputs;
  std::vector<std::string> teams_groups, pbx_groups, aliases;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("cdr-correlate", "Pair SBC trunk records into calls");
    sub->add_option("--in", inputs, "CDR CSV file or directory of CSVs (repeatable)")
        ->required()
        ->check(CLI::ExistingPath);
    sub->add_option("--teams-group", teams_groups, "IP group of the Teams trunk (default IPG_TEAMS)");
    sub->add_option("--pbx-group", pbx_groups, "IP group of the PBX trunk (default IPG_PBX)");
    sub->add_option("--alias", aliases, "Header alias, e.g. \"sess id=session id\"");
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream& err) {
    cdr::AliasMap amap;
    for (const auto& a : aliases) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "alias needs name=column: " + a);
      amap[text::to_lower(text::trim(a.substr(0, eq)))] = std::string(text::trim(a.substr(eq + 1)));
    }
    cdr::CdrParse all;
    for (const auto& path : inputs) {
      cdr::CdrParse one;
      if (fs::is_directory(path)) {
        one = cdr::parse_cdr_directory(path, amap);
      } else {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
        one = cdr::parse_cdr(in, amap);
      }
      all.legs.insert(all.legs.end(), one.legs.begin(), one.legs.end());
      all.errors.insert(all.errors.end(), one.errors.begin(), one.errors.end());
    }
    cdr::GroupConfig cfg;
    if (!teams_groups.empty()) cfg.teams_groups = {teams_groups.begin(), teams_groups.end()};
    if (!pbx_groups.empty()) cfg.pbx_groups = {pbx_groups.begin(), pbx_groups.end()};
    const auto corr = cdr::correlate_legs(all.legs, cfg);
    const auto summary = cdr::summarize_cdr(corr.calls);
    for (const auto& e : all.errors) err << "tfx: row " << e.row << ": " << e.message << '\n';

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    switch (common.fmt()) {
      case Format::JSON: write_json(out, report::cdr_json(corr, summary, all.errors)); break;
      case Format::CSV: cdr::write_calls_csv(out, corr.calls); break;
      case Format::TEXT: {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : corr.calls)
          rows.push_back({c.session_id, std::string(cdr::to_string(c.overall_direction)),
                          std::string(cdr::to_string(c.outcome)), c.duration_s ? cdr::format_hms(*c.duration_s) : "-",
                          c.pbx_leg.caller, c.pbx_leg.callee, c.reason_mismatch ? "reason mismatch" : ""});
        print_table(out, {"Session", "Direction", "Outcome", "Duration", "Caller", "Callee", "Flags"}, rows);
        out << summary.total_calls << " calls:";
        for (const auto& [o, n] : summary.by_outcome) out << ' ' << cdr::to_string(o) << '=' << n;
        out << "; completed talk time " << cdr::format_hms(summary.total_duration_s) << '\n';
        if (!corr.orphans.empty()) out << corr.orphan_legs() << " legs could not be paired\n";
        for (const auto& o : corr.orphans) out << "  " << o.session_id << ": " << o.diagnostic << '\n';
        break;
      }
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// extract-audio

struct AudioCmd {
  Common common;
  std::string pcap, select = "(35,36)|(21,38)", wav;
  std::uint16_t port = media::kDefaultAcdrPort;
  bool list = false;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("extract-audio", "Rebuild a call's audio from SBC debug recording");
    sub->add_option("--pcap", pcap, "Capture of the debug recording traffic")->required()->check(CLI::ExistingFile);
    sub->add_option("--select", select,
                    "Streams as (trace_pt,src_id)|...; the first pair is the left channel")
        ->capture_default_str();
    sub->add_option("--port", port, "UDP port of the recording traffic")->capture_default_str();
    sub->add_option("--out", wav, "Stereo WAV to write");
    sub->add_flag("--list", list, "Only list the RTP streams found");
    sub->add_option("--format", common.format, "Report format")->check(CLI::IsMember({"text", "json", "structured"}));
    sub->add_option("--report", common.out, "Write the report to this file");
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream& err) {
    const auto cap = capture::load_capture_file(pcap);
    const auto acdr = media::parse_acdr(cap.packets, port);
    const media::Selector sel = list ? media::Selector::all() : media::Selector::parse(select);
    const auto set = media::enumerate_streams(acdr.frames, sel);

    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    auto print_streams = [&] {
      std::vector<std::vector<std::string>> rows;
      for (const auto& s : set.streams) {
        std::uint64_t missing = 0;
        for (const auto& g : s.gaps) missing += g.missing_count;
        char ssrc[16];
        std::snprintf(ssrc, sizeof ssrc, "0x%08x", s.key.ssrc);
        rows.push_back({std::to_string(s.key.trace_pt), std::to_string(s.key.src_id), ssrc,
                        media::codec_name(s.key.payload_type), std::to_string(s.packets.size()),
                        std::to_string(s.duplicates_removed), std::to_string(missing)});
      }
      print_table(out, {"Trace pt", "Src id", "SSRC", "Codec", "Packets", "Duplicates", "Missing"}, rows);
    };
    if (list || wav.empty()) {
      if (common.fmt() == Format::JSON) write_json(out, report::streams_json(set));
      else print_streams();
      if (!list) {
        err << "tfx: --out is required to write audio\n";
        return kUsage;
      }
      return kOk;
    }
    if (set.streams.size() != 2) {
      err << "tfx: selector " << sel.to_string() << " matched " << set.streams.size()
          << " streams; exactly 2 are needed for a stereo file\n";
      return kInconsistent;
    }
    // Left channel: the stream of the first selector pair.
    const auto& first = sel.pairs().front();
    const bool swap = !(set.streams[0].key.trace_pt == first.first && set.streams[0].key.src_id == first.second);
    const auto a = media::reassemble(set.streams[swap ? 1 : 0]);
    const auto b = media::reassemble(set.streams[swap ? 0 : 1]);
    const auto audio = media::merge_stereo(a, b);
    {
      std::ofstream f(wav, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + wav);
      media::write_wav(f, audio);
    }
    if (common.fmt() == Format::JSON) {
      json j = report::audio_json(audio, a, b);
      j["streams"] = report::streams_json(set)["streams"];
      j["selector"] = sel.to_string();
      write_json(out, j);
    } else {
      print_streams();
      out << "wrote " << wav << ": " << audio.frames() << " frames, " << audio.sample_rate
          << " Hz stereo, channel " << (audio.delayed_channel == 0 ? 'A' : 'B') << " delayed "
          << audio.offset_samples << " samples\n";
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// usage

struct UsageCmd {
  Common common;
  std::vector<std::string> inputs;
  std::string call_detail;
  std::size_t top = 0;
  std::string metric = "audio";
  std::string window = "D7";
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("usage", "Summaries of exported tenant usage reports");
    sub->add_option("--in", inputs, "Usage report CSV/TSV (repeatable)")->check(CLI::ExistingFile);
    sub->add_option("--call-detail", call_detail, "Per-call detail export to report on")->check(CLI::ExistingFile);
    sub->add_option("--top", top, "List the N heaviest users instead of the summary");
    sub->add_option("--metric", metric, "Ranking metric")->check(CLI::IsMember({"audio", "video"}));
    sub->add_option("--window", window, "Window for --top (D7, D30, D90)");
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream&) {
    if (!call_detail.empty()) return exec_call_detail(out_default);
    if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "usage needs --in or --call-detail");
    std::vector<usage::UsageActivityRecord> records;
    for (const auto& path : inputs) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
      auto parsed = usage::parse_usage_report(in);
      records.insert(records.end(), parsed.records.begin(), parsed.records.end());
    }
    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    if (top > 0) {
      const auto w = usage::parse_window(window);
      if (!w) throw Error(ErrorCode::InvalidArgument, "bad window '" + window + "'");
      std::vector<usage::UsageActivityRecord> in_window;
      for (const auto& r : records)
        if (r.window == *w) in_window.push_back(r);
      const auto m = metric == "video" ? usage::Metric::VIDEO : usage::Metric::AUDIO;
      const auto ranked = usage::top_users(in_window, top, m);
      switch (common.fmt()) {
        case Format::JSON: write_json(out, report::top_users_json(ranked, m)); break;
        case Format::CSV:
          out << "Rank,UserName,AudioTime,VideoTime\n";
          for (const auto& u : ranked)
            out << text::csv_row({std::to_string(u.rank), u.user_id, u.audio_text, u.video_text}) << '\n';
          break;
        case Format::TEXT: {
          std::vector<std::vector<std::string>> rows;
          for (const auto& u : ranked) rows.push_back({std::to_string(u.rank), u.user_id, u.audio_text, u.video_text});
          print_table(out, {"Rank", "UserName", "AudioTime", "VideoTime"}, rows);
          break;
        }
      }
      return kOk;
    }
    const auto summaries = usage::aggregate_usage(records);
    switch (common.fmt()) {
      case Format::JSON: write_json(out, report::usage_summary_json(summaries)); break;
      case Format::CSV: usage::write_summary_csv(out, summaries); break;
      case Format::TEXT: usage::write_summary_table(out, summaries); break;
    }
    return kOk;
  }

  int exec_call_detail(std::ostream& out_default) {
    std::ifstream in(call_detail, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + call_detail);
    const auto call = usage::ingest_call_detail(in);
    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    if (common.fmt() == Format::JSON) {
      write_json(out, report::call_detail_json(call));
      return kOk;
    }
    if (common.fmt() == Format::CSV) {
      out << "Party,Field,Value\n";
      for (const auto& [role, party] : {std::pair{"caller", &call.caller}, std::pair{"callee", &call.callee}}) {
        if (!*party) continue;
        for (const auto& name : usage::party_field_names()) {
          const auto* v = usage::party_field(**party, name);
          out << text::csv_row({role, name, (v && *v) ? **v : ""}) << '\n';
        }
      }
      return kOk;
    }
    out << "scenario  " << usage::to_string(call.scenario) << '\n';
    if (call.start) out << "start     " << *call.start << '\n';
    if (call.duration_s) out << "duration  " << cdr::format_hms(*call.duration_s) << '\n';
    if (call.audio_quality) out << "quality   " << *call.audio_quality << '\n';
    for (const auto& [role, party] : {std::pair{"caller", &call.caller}, std::pair{"callee", &call.callee}}) {
      if (!*party) continue;
      out << '[' << role << "]\n";
      for (const auto& name : usage::party_field_names()) {
        const auto* v = usage::party_field(**party, name);
        if (v && *v) out << "  " << name << ": " << **v << '\n';
      }
    }
    for (const auto& n : usage::availability_notes(call)) out << "note: " << n << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// holdmap

struct HoldCmd {
  Common common;
  std::string scenario;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("holdmap", "Where Teams content lives for legal hold");
    sub->add_option("--scenario", scenario, "Scenario to look up; all rows when omitted");
    add_common(sub, common);
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out_default, std::ostream&) {
    Sink sink(common.out, out_default);
    std::ostream& out = *sink;
    if (!scenario.empty()) {
      const std::string loc = usage::hold_location(scenario);
      if (common.fmt() == Format::JSON)
        write_json(out, {{"schema", "tfx.hold-location/1"}, {"scenario", scenario}, {"location", loc}});
      else
        out << loc << '\n';
      return kOk;
    }
    switch (common.fmt()) {
      case Format::JSON: write_json(out, report::hold_table_json()); break;
      case Format::CSV:
        out << "Scenario,Content location\n";
        for (const auto& e : usage::hold_table()) out << text::csv_row({e.scenario, e.location}) << '\n';
        break;
      case Format::TEXT:
        for (const auto& e : usage::hold_table()) out << e.scenario << "\n    " << e.location << '\n';
        break;
    }
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// fixtures

struct FixturesCmd {
  Common common;
  std::string kind;
  std::string out_dir;
  std::uint64_t seed = 1;
  double duration = 10.0;
  double dup_rate = 0.0;
  std::vector<std::string> gaps;
  int start_seq = -1;
  bool include_sip = false;
  std::string peer;
  std::size_t dialogs = 100;
  std::size_t min_messages = 5, max_messages = 12, interleave = 8;
  std::uint64_t bytes = 0;
  bool reference = false;
  std::size_t calls = 50;
  std::size_t users = 50;
  bool selected = false;

  void attach(CLI::App& app) {
    auto* sub = app.add_subcommand("fixtures", "Generate synthetic evidence with a manifest");
    sub->add_option("kind", kind, "pstn-call | wt | sip-log | cdr | usage")
        ->required()
        ->check(CLI::IsMember({"pstn-call", "wt", "sip-log", "cdr", "usage"}));
    sub->add_option("--out-dir", out_dir, "Directory for the artifacts and manifest.json")->required();
    sub->add_option("--seed", seed, "Generator seed")->capture_default_str();
    sub->add_option("--duration", duration, "pstn-call: call length in seconds")->capture_default_str();
    sub->add_option("--dup-rate", dup_rate, "pstn-call: duplicated packet fraction per stream");
    sub->add_option("--gap", gaps, "pstn-call: drop packets, stream:first:count (repeatable)");
    sub->add_option("--start-seq", start_seq, "pstn-call: first RTP sequence number")->check(CLI::Range(0, 65535));
    sub->add_flag("--include-sip", include_sip, "wt: add one SIP packet");
    sub->add_option("--peer", peer, "wt: add direct traffic with this address");
    sub->add_option("--dialogs", dialogs, "sip-log: dialog count")->capture_default_str();
    sub->add_option("--min-messages", min_messages, "sip-log: fewest messages per dialog");
    sub->add_option("--max-messages", max_messages, "sip-log: most messages per dialog");
    sub->add_option("--interleave", interleave, "sip-log: dialogs open at once");
    sub->add_option("--bytes", bytes, "sip-log: total size to reach with diagnostic records");
    sub->add_flag("--reference", reference, "cdr, usage: the published reference data set");
    sub->add_option("--calls", calls, "cdr: call count");
    sub->add_option("--users", users, "usage: user count when not --reference");
    sub->add_option("--format", common.format, "Listing format")->check(CLI::IsMember({"text", "json", "structured"}));
    sub->callback([this] { selected = true; });
  }

  int exec(std::ostream& out, std::ostream&) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& data) {
      const fs::path p = fs::path(out_dir) / name;
      std::ofstream f(p, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + p.string());
      f.write(data.data(), static_cast<std::streamsize>(data.size()));
      written.push_back(name);
    };
    auto bytes_str = [](const Bytes& b) { return std::string(b.begin(), b.end()); };

    if (kind == "pstn-call") {
      forge::PstnCallSpec spec;
      spec.seed = seed;
      spec.duration_s = duration;
      spec.duplicate_rate = dup_rate;
      if (start_seq >= 0) spec.start_seq = static_cast<std::uint16_t>(start_seq);
      for (const auto& g : gaps) {
        const auto parts = text::split(g, ':');
        if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "gap must be stream:first:count");
        try {
          spec.gaps.push_back({std::stoul(std::string(parts[0])), std::stoul(std::string(parts[1])),
                               std::stoul(std::string(parts[2]))});
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "gap must be stream:first:count");
        }
      }
      const auto fx = forge::gen_pstn_call_capture(spec);
      put("call.pcap", bytes_str(fx.pcap));
      put("manifest.json", forge::manifest_json(fx));
    } else if (kind == "wt") {
      forge::WtSpec spec;
      spec.seed = seed;
      spec.include_sip = include_sip;
      if (!peer.empty()) spec.peer = ip_arg(peer, "peer");
      const auto fx = forge::gen_wt_capture(spec);
      put("wt.pcap", bytes_str(fx.pcap));
      put("manifest.json", forge::manifest_json(fx));
    } else if (kind == "sip-log") {
      forge::SipLogSpec spec;
      spec.seed = seed;
      spec.dialogs = dialogs;
      spec.min_messages = min_messages;
      spec.max_messages = max_messages;
      spec.interleave = interleave;
      spec.byte_target = bytes;
      const fs::path p = fs::path(out_dir) / "sbc.log";
      std::ofstream f(p, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cannot write " + p.string());
      const auto m = forge::gen_sip_log(spec, f);
      written.push_back("sbc.log");
      put("manifest.json", forge::manifest_json(m));
    } else if (kind == "cdr") {
      forge::CdrSpec spec;
      spec.seed = seed;
      spec.reference = reference;
      spec.calls = calls;
      const auto fx = forge::gen_cdr(spec);
      put("cdr.csv", fx.csv);
      put("manifest.json", forge::manifest_json(fx));
    } else {
      forge::UsageSpec spec;
      spec.seed = seed;
      spec.reference = reference;
      spec.users = users;
      const auto fx = forge::gen_usage(spec);
      put("activity.csv", fx.activity_csv);
      put("devices.csv", fx.device_csv);
      put("pstn.csv", fx.pstn_csv);
      put("manifest.json", forge::manifest_json(fx));
    }
    if (common.fmt() == Format::JSON) {
      write_json(out, {{"schema", "tfx.fixtures/1"}, {"kind", kind}, {"seed", seed}, {"files", written}});
    } else {
      for (const auto& w : written) out << (fs::path(out_dir) / w).string() << '\n';
    }
    return kOk;
  }
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidWindow:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnknownScenario:
    case ErrorCode::ClientNotSeen:
      return kUsage;
    default:
      return kParse;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forensic analysis of Teams calls, SBC records and captures", "tfx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tfx 1.0.0");

  FlowsCmd flows;
  ClassifyCmd classify_cmd;
  WtCmd wt;
  SipSplitCmd sip_split;
  SipSelectCmd sip_select;
  CdrCmd cdr_cmd;
  AudioCmd audio;
  UsageCmd usage_cmd;
  HoldCmd hold;
  FixturesCmd fixtures;
  flows.attach(app);
  classify_cmd.attach(app);
  wt.attach(app);
  sip_split.attach(app);
  sip_select.attach(app);
  cdr_cmd.attach(app);
  audio.attach(app);
  usage_cmd.attach(app);
  hold.attach(app);
  fixtures.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (flows.selected) return flows.exec(out, err);
    if (classify_cmd.selected) return classify_cmd.exec(out, err);
    if (wt.selected) return wt.exec(out, err);
    if (sip_split.selected) return sip_split.exec(out, err);
    if (sip_select.selected) return sip_select.exec(out, err);
    if (cdr_cmd.selected) return cdr_cmd.exec(out, err);
    if (audio.selected) return audio.exec(out, err);
    if (usage_cmd.selected) return usage_cmd.exec(out, err);
    if (hold.selected) return hold.exec(out, err);
    if (fixtures.selected) return fixtures.exec(out, err);
  } catch (const Error& e) {
    err << "tfx: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "tfx: " << e.what() << '\n';
    return kParse;
  }
  return kUsage;
}

}  // namespace tfx::cli
