#include "tfx/cdr.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tfx/text.hpp"

namespace tfx::cdr {

std::string_view to_string(Direction d) {
  return d == Direction::Incoming ? "Incoming" : "Outgoing";
}

std::string_view to_string(CallDirection d) {
  switch (d) {
    case CallDirection::TEAMS_TO_PSTN: return "TEAMS_TO_PSTN";
    case CallDirection::PSTN_TO_TEAMS: return "PSTN_TO_TEAMS";
    case CallDirection::UNDETERMINED: return "UNDETERMINED";
  }
  return "UNDETERMINED";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::COMPLETED: return "COMPLETED";
    case Outcome::NO_ANSWER: return "NO_ANSWER";
    case Outcome::BUSY: return "BUSY";
    case Outcome::FAILED: return "FAILED";
    case Outcome::OTHER: return "OTHER";
  }
  return "OTHER";
}

Outcome outcome_for_reason(std::string_view reason) {
  reason = text::trim(reason);
  if (text::iequals(reason, "NORMAL_CALL_CLEAR")) return Outcome::COMPLETED;
  if (text::iequals(reason, "NO_ANSWER")) return Outcome::NO_ANSWER;
  if (text::iequals(reason, "BUSY")) return Outcome::BUSY;
  if (text::iequals(reason, "GENERAL_FAILED")) return Outcome::FAILED;
  return Outcome::OTHER;
}

std::optional<std::int64_t> parse_hms(std::string_view s) {
  s = text::trim(s);
  const auto parts = text::split(s, ':');
  if (parts.size() != 3) return std::nullopt;
  std::int64_t v[3];
  for (int i = 0; i < 3; ++i) {
    const auto p = parts[static_cast<std::size_t>(i)];
    if (p.size() != 2 || !std::isdigit(static_cast<unsigned char>(p[0])) ||
        !std::isdigit(static_cast<unsigned char>(p[1])))
      return std::nullopt;
    v[i] = (p[0] - '0') * 10 + (p[1] - '0');
  }
  if (v[1] > 59 || v[2] > 59) return std::nullopt;
  return v[0] * 3600 + v[1] * 60 + v[2];
}

std::string format_hms(std::int64_t seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld",
                static_cast<long long>(seconds / 3600),
                static_cast<long long>((seconds / 60) % 60),
                static_cast<long long>(seconds % 60));
  return buf;
}

namespace {

const std::vector<std::string> kRequired = {"ip group", "caller", "callee", "direction",
                                            "termination reason", "session id"};

std::string normalize_header(std::string_view h) {
  std::string out = text::to_lower(text::trim(h));
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::optional<TimestampUs> parse_end_time(std::string_view s) {
  s = text::trim(s);
  if (auto iso = parse_iso8601(s)) return iso->us;
  // Time of day: HH:MM:SS[.fff]
  if (s.size() < 8) return std::nullopt;
  auto hms = parse_hms(s.substr(0, 8));
  if (!hms) return std::nullopt;
  std::int64_t frac = 0;
  if (s.size() > 8) {
    if (s[8] != '.') return std::nullopt;
    std::int64_t scale = 100000;
    for (char c : s.substr(9)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      frac += (c - '0') * scale;
      scale /= 10;
    }
  }
  return *hms * 1'000'000 + frac;
}

void parse_into(std::istream& in, const AliasMap& aliases, CdrParse& out) {
  text::CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) {
    throw Error(ErrorCode::MissingColumn, "CDR export has no header row");
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name = normalize_header(header[i]);
    if (auto it = aliases.find(name); it != aliases.end()) name = normalize_header(it->second);
    col.emplace(name, i);
  }
  for (const auto& req : kRequired)
    if (!col.count(req)) throw Error(ErrorCode::MissingColumn, "missing CDR column: " + req);

  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    auto field = [&](const std::string& name) -> std::string {
      auto it = col.find(name);
      if (it == col.end() || it->second >= row.size()) return {};
      return std::string(text::trim(row[it->second]));
    };
    const std::size_t rowno = reader.record_line();
    CdrLeg leg;
    leg.source_row = rowno;
    leg.call_end_time = field("call end time");
    leg.call_end_us = parse_end_time(leg.call_end_time);
    leg.endpoint_type = field("endpoint type");
    leg.ip_group = field("ip group");
    leg.caller = field("caller");
    leg.callee = field("callee");
    leg.remote_ip = field("remote ip");
    leg.remote_addr = Ipv4::parse(leg.remote_ip);
    leg.termination_reason = field("termination reason");
    leg.session_id = field("session id");

    const std::string dir = field("direction");
    if (text::iequals(dir, "incoming")) {
      leg.direction = Direction::Incoming;
    } else if (text::iequals(dir, "outgoing")) {
      leg.direction = Direction::Outgoing;
    } else {
      out.errors.push_back({rowno, "unknown direction '" + dir + "'"});
      continue;
    }
    if (leg.session_id.empty()) {
      out.errors.push_back({rowno, "empty session id"});
      continue;
    }
    const std::string dur = field("duration");
    if (!dur.empty()) {
      leg.duration_s = parse_hms(dur);
      if (!leg.duration_s) {
        out.errors.push_back({rowno, "bad duration '" + dur + "'"});
        continue;
      }
    } else if (outcome_for_reason(leg.termination_reason) == Outcome::COMPLETED) {
      out.errors.push_back({rowno, "NORMAL_CALL_CLEAR leg without duration"});
      continue;
    }
    out.legs.push_back(std::move(leg));
  }
}

}  // namespace

CdrParse parse_cdr(std::istream& in, const AliasMap& aliases) {
  CdrParse out;
  parse_into(in, aliases, out);
  return out;
}

CdrParse parse_cdr_directory(const std::string& dir, const AliasMap& aliases) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && text::iequals(entry.path().extension().string(), ".csv"))
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  CdrParse out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + f.string());
    parse_into(in, aliases, out);
  }
  return out;
}

std::size_t Correlation::orphan_legs() const {
  std::size_t n = 0;
  for (const auto& o : orphans) n += o.legs.size();
  return n;
}

Correlation correlate_legs(const std::vector<CdrLeg>& legs, const GroupConfig& config) {
  std::map<std::string, std::vector<const CdrLeg*>> groups;
  for (const auto& leg : legs) groups[leg.session_id].push_back(&leg);

  Correlation out;
  for (auto& [session, members] : groups) {
    // Input order must not matter: fix a canonical order inside the group.
    std::sort(members.begin(), members.end(), [](const CdrLeg* a, const CdrLeg* b) {
      return std::tie(a->ip_group, a->call_end_time, a->caller, a->callee, a->source_row) <
             std::tie(b->ip_group, b->call_end_time, b->caller, b->callee, b->source_row);
    });
    const CdrLeg* teams = nullptr;
    const CdrLeg* pbx = nullptr;
    std::string diagnostic;
    if (members.size() != 2) {
      diagnostic = std::to_string(members.size()) + " legs share this session id";
    } else {
      for (const CdrLeg* leg : members) {
        if (config.teams_groups.count(leg->ip_group)) teams = teams ? teams : leg;
        else if (config.pbx_groups.count(leg->ip_group)) pbx = pbx ? pbx : leg;
      }
      if (!teams || !pbx || teams->ip_group == pbx->ip_group)
        diagnostic = "legs are not one Teams-group and one PBX-group trunk (" +
                     members[0]->ip_group + ", " + members[1]->ip_group + ")";
    }
    if (!diagnostic.empty()) {
      OrphanGroup orphan;
      orphan.session_id = session;
      for (const CdrLeg* leg : members) orphan.legs.push_back(*leg);
      orphan.diagnostic = std::move(diagnostic);
      out.orphans.push_back(std::move(orphan));
      continue;
    }

    CorrelatedCall call;
    call.session_id = session;
    call.teams_leg = *teams;
    call.pbx_leg = *pbx;
    // The SBC receiving the call from Teams means Teams originated it.
    call.overall_direction = teams->direction == Direction::Incoming
                                 ? CallDirection::TEAMS_TO_PSTN
                                 : CallDirection::PSTN_TO_TEAMS;
    const Outcome pbx_outcome = outcome_for_reason(pbx->termination_reason);
    call.reason_mismatch =
        !text::iequals(text::trim(teams->termination_reason), text::trim(pbx->termination_reason));
    if (!call.reason_mismatch) {
      call.outcome = pbx_outcome;
    } else {
      // PSTN-side reason wins, but a call is only COMPLETED when both legs
      // cleared normally.
      call.outcome = pbx_outcome == Outcome::COMPLETED ? Outcome::OTHER : pbx_outcome;
    }
    call.duration_s = pbx->duration_s ? pbx->duration_s : teams->duration_s;
    out.calls.push_back(std::move(call));
  }
  return out;
}

CdrSummary summarize_cdr(const std::vector<CorrelatedCall>& calls) {
  CdrSummary s;
  s.total_calls = calls.size();
  for (const auto& c : calls) {
    ++s.by_outcome[c.outcome];
    ++s.by_direction[c.overall_direction];
    if (c.outcome == Outcome::COMPLETED && c.duration_s) s.total_duration_s += *c.duration_s;
    for (const CdrLeg* leg : {&c.teams_leg, &c.pbx_leg}) {
      if (!leg->call_end_us) continue;
      if (!s.first_end_us || *leg->call_end_us < *s.first_end_us) s.first_end_us = leg->call_end_us;
      if (!s.last_end_us || *leg->call_end_us > *s.last_end_us) s.last_end_us = leg->call_end_us;
    }
  }
  return s;
}

void write_calls_csv(std::ostream& out, const std::vector<CorrelatedCall>& calls) {
  out << "session_id,direction,outcome,duration,caller,callee,teams_remote_ip,"
         "pbx_remote_ip,teams_reason,pbx_reason,reason_mismatch,call_end_time\n";
  for (const auto& c : calls) {
    out << text::csv_row({c.session_id, std::string(to_string(c.overall_direction)),
                          std::string(to_string(c.outcome)),
                          c.duration_s ? format_hms(*c.duration_s) : "",
                          c.pbx_leg.caller, c.pbx_leg.callee, c.teams_leg.remote_ip,
                          c.pbx_leg.remote_ip, c.teams_leg.termination_reason,
                          c.pbx_leg.termination_reason, c.reason_mismatch ? "true" : "false",
                          c.pbx_leg.call_end_time})
        << '\n';
  }
}

}  // namespace tfx::cdr
