#include "tfx/usage.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <iomanip>
#include <set>
#include <sstream>

#include "tfx/text.hpp"

namespace tfx::usage {

std::string_view to_string(Window w) {
  switch (w) {
    case Window::D7: return "D7";
    case Window::D30: return "D30";
    case Window::D90: return "D90";
  }
  return "D7";
}

std::string_view to_string(DeviceClass d) {
  switch (d) {
    case DeviceClass::WINDOWS_PC: return "WINDOWS_PC";
    case DeviceClass::MAC: return "MAC";
    case DeviceClass::IOS: return "IOS";
    case DeviceClass::ANDROID: return "ANDROID";
    case DeviceClass::LINUX: return "LINUX";
    case DeviceClass::WEB: return "WEB";
  }
  return "WEB";
}

std::string_view to_string(ReportType t) {
  switch (t) {
    case ReportType::USER_ACTIVITY: return "USER_ACTIVITY";
    case ReportType::DEVICE_USAGE: return "DEVICE_USAGE";
    case ReportType::PSTN_USAGE: return "PSTN_USAGE";
  }
  return "USER_ACTIVITY";
}

std::string_view to_string(CallScenario s) {
  switch (s) {
    case CallScenario::TEAMS: return "TEAMS";
    case CallScenario::PSTN: return "PSTN";
    case CallScenario::SKYPE_CONSUMER: return "SKYPE_CONSUMER";
    case CallScenario::UNSPECIFIED: return "UNSPECIFIED";
  }
  return "UNSPECIFIED";
}

std::optional<Window> parse_window(std::string_view text) {
  const std::string t = text::to_lower(text::trim(text));
  std::string digits;
  for (char c : t)
    if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
  const bool plain = t == digits || t == "d" + digits || t == "last " + digits + " days";
  if (!plain) return std::nullopt;
  if (digits == "7") return Window::D7;
  if (digits == "30") return Window::D30;
  if (digits == "90") return Window::D90;
  return std::nullopt;
}

namespace {

[[noreturn]] void format_error(std::string msg) { throw Error(ErrorCode::FormatError, std::move(msg)); }

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::int64_t to_int(std::string_view s, std::string_view context) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) format_error("bad number in '" + std::string(context) + "'");
  return v;
}

}  // namespace

std::int64_t parse_duration_text(std::string_view text) {
  const std::string_view s = text::trim(text);
  if (s.find(':') != std::string_view::npos) {
    const auto parts = text::split(s, ':');
    if (parts.size() != 3 || !all_digits(parts[0]) || parts[1].size() != 2 ||
        parts[2].size() != 2 || !all_digits(parts[1]) || !all_digits(parts[2]))
      format_error("bad duration '" + std::string(s) + "'");
    const auto h = to_int(parts[0], s), m = to_int(parts[1], s), sec = to_int(parts[2], s);
    if (m > 59 || sec > 59) format_error("bad duration '" + std::string(s) + "'");
    return h * 3600 + m * 60 + sec;
  }
  std::istringstream in{std::string(s)};
  std::string num, unit;
  static constexpr std::string_view kUnits[3][2] = {{"days", "day"}, {"hours", "hour"}, {"minutes", "minute"}};
  static constexpr std::int64_t kScale[3] = {86400, 3600, 60};
  std::int64_t total = 0;
  for (int i = 0; i < 3; ++i) {
    if (!(in >> num >> unit) || !all_digits(num)) format_error("bad duration '" + std::string(s) + "'");
    const std::string u = text::to_lower(unit);
    if (u != kUnits[i][0] && u != kUnits[i][1]) format_error("bad duration unit in '" + std::string(s) + "'");
    const auto v = to_int(num, s);
    if ((i == 1 && v > 23) || (i == 2 && v > 59)) format_error("bad duration '" + std::string(s) + "'");
    total += v * kScale[i];
  }
  if (in >> num) format_error("trailing text in duration '" + std::string(s) + "'");
  return total;
}

std::string format_duration_text(std::int64_t seconds) {
  if (seconds < 0) throw Error(ErrorCode::InvalidArgument, "negative duration");
  const std::int64_t minutes = seconds / 60;
  return std::to_string(minutes / 1440) + " days " + std::to_string((minutes / 60) % 24) +
         " hours " + std::to_string(minutes % 60) + " minutes";
}

std::uint64_t parse_grouped_number(std::string_view text) {
  const std::string_view s = text::trim(text);
  if (all_digits(s)) return static_cast<std::uint64_t>(to_int(s, s));
  const std::size_t sep_pos = s.find_first_of(".,");
  if (sep_pos == std::string_view::npos) format_error("bad number '" + std::string(s) + "'");
  const char sep = s[sep_pos];
  const auto groups = text::split(s, sep);
  bool ok = groups.size() >= 2 && all_digits(groups[0]) && groups[0].size() <= 3 && groups[0][0] != '0';
  for (std::size_t i = 1; ok && i < groups.size(); ++i) ok = groups[i].size() == 3 && all_digits(groups[i]);
  if (!ok) format_error("ambiguous number '" + std::string(s) + "'");
  std::string digits;
  for (auto g : groups) digits += g;
  return static_cast<std::uint64_t>(to_int(digits, s));
}

std::int64_t round_half_up_hours(std::int64_t total_seconds, std::uint64_t users) {
  if (users == 0) return 0;
  const auto u = static_cast<std::int64_t>(users);
  return (2 * total_seconds + 3600 * u) / (7200 * u);
}

std::map<Window, UsageSummary> aggregate_usage(const std::vector<UsageActivityRecord>& records) {
  std::map<Window, UsageSummary> out;
  std::map<Window, std::set<std::string>> users;
  std::map<std::pair<Window, DeviceClass>, std::set<std::string>> device_users;
  for (const auto& r : records) {
    if (r.audio_seconds < 0 || r.video_seconds < 0 || r.pstn_seconds < 0)
      throw Error(ErrorCode::InvalidArgument, "negative duration for user " + r.user_id);
    auto& s = out[r.window];
    s.window = r.window;
    users[r.window].insert(r.user_id);
    s.total_one_to_one_calls += r.one_to_one_calls;
    s.total_audio_s += r.audio_seconds;
    s.total_video_s += r.video_seconds;
    s.pstn_calls_total += r.pstn_calls;
    s.pstn_duration_total_s += r.pstn_seconds;
    if (r.device_class) device_users[{r.window, *r.device_class}].insert(r.user_id);
  }
  for (auto& [w, s] : out) {
    s.total_users = users[w].size();
    s.avg_audio_hours_per_user = round_half_up_hours(s.total_audio_s, s.total_users);
    s.avg_video_hours_per_user = round_half_up_hours(s.total_video_s, s.total_users);
    for (DeviceClass d : kAllDevices) s.device_counts[d] = device_users[{w, d}].size();
  }
  return out;
}

std::vector<RankedUser> top_users(const std::vector<UsageActivityRecord>& records, std::size_t n,
                                  Metric metric) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> totals;
  for (const auto& r : records) {
    auto& t = totals[r.user_id];
    t.first += r.audio_seconds;
    t.second += r.video_seconds;
  }
  std::vector<RankedUser> all;
  all.reserve(totals.size());
  for (const auto& [user, t] : totals) {
    RankedUser u;
    u.user_id = user;
    u.audio_seconds = t.first;
    u.video_seconds = t.second;
    all.push_back(std::move(u));
  }
  auto key = [metric](const RankedUser& u) {
    return metric == Metric::AUDIO ? u.audio_seconds : u.video_seconds;
  };
  std::stable_sort(all.begin(), all.end(), [&](const RankedUser& a, const RankedUser& b) {
    if (key(a) != key(b)) return key(a) > key(b);
    return a.user_id < b.user_id;
  });
  if (all.size() > n) all.resize(n);
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].rank = i + 1;
    all[i].audio_text = format_duration_text(all[i].audio_seconds);
    all[i].video_text = format_duration_text(all[i].video_seconds);
  }
  return all;
}

// ---------------------------------------------------------------------------
// Report ingestion

namespace {

std::string norm_header(std::string_view h) {
  std::string out;
  for (char c : text::to_lower(text::trim(h)))
    if (std::isalnum(static_cast<unsigned char>(c))) out += c;
  return out;
}

const std::vector<std::string> kActivityHeader = {"user", "window", "onetoonecalls", "audiotime", "videotime"};
const std::vector<std::string> kDeviceHeader = {"user", "window", "windows", "mac", "ios", "android", "linux", "web"};
const std::vector<std::string> kPstnHeader = {"user", "window", "pstncalls", "pstntime"};

bool parse_yes_no(std::string_view v, std::string_view context) {
  v = text::trim(v);
  if (text::iequals(v, "yes") || v == "1" || text::iequals(v, "true")) return true;
  if (text::iequals(v, "no") || v == "0" || text::iequals(v, "false") || v.empty()) return false;
  format_error("expected Yes/No in " + std::string(context));
}

}  // namespace

UsageParse parse_usage_report(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  std::istringstream body(buf.str());
  const std::string& all = body.str();
  const std::string first = all.substr(0, all.find('\n'));
  const char delim = first.find('\t') != std::string::npos ? '\t' : ',';

  text::CsvReader reader(body, delim);
  std::vector<std::string> header;
  if (!reader.next(header)) format_error("empty usage report");
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(norm_header(h));

  UsageParse out;
  if (names == kActivityHeader) out.type = ReportType::USER_ACTIVITY;
  else if (names == kDeviceHeader) out.type = ReportType::DEVICE_USAGE;
  else if (names == kPstnHeader) out.type = ReportType::PSTN_USAGE;
  else format_error("unrecognized usage report header");

  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    const std::string where = "line " + std::to_string(reader.record_line());
    if (row.size() != names.size()) format_error("wrong field count at " + where);
    auto w = parse_window(row[1]);
    if (!w) format_error("unknown window '" + row[1] + "' at " + where);
    const std::string user(text::trim(row[0]));
    if (user.empty()) format_error("empty user at " + where);
    try {
      switch (out.type) {
        case ReportType::USER_ACTIVITY: {
          UsageActivityRecord r;
          r.user_id = user;
          r.window = *w;
          r.one_to_one_calls = parse_grouped_number(row[2]);
          r.audio_seconds = parse_duration_text(row[3]);
          r.video_seconds = parse_duration_text(row[4]);
          out.records.push_back(std::move(r));
          break;
        }
        case ReportType::DEVICE_USAGE:
          for (std::size_t i = 0; i < std::size(kAllDevices); ++i) {
            if (!parse_yes_no(row[2 + i], where)) continue;
            UsageActivityRecord r;
            r.user_id = user;
            r.window = *w;
            r.device_class = kAllDevices[i];
            out.records.push_back(std::move(r));
          }
          break;
        case ReportType::PSTN_USAGE: {
          UsageActivityRecord r;
          r.user_id = user;
          r.window = *w;
          r.pstn_calls = parse_grouped_number(row[2]);
          r.pstn_seconds = parse_duration_text(row[3]);
          out.records.push_back(std::move(r));
          break;
        }
      }
    } catch (const Error& e) {
      format_error(std::string(e.what()) + " at " + where);
    }
  }
  return out;
}

namespace {

struct SummaryRow {
  std::string label;
  std::map<Window, std::string> cells;
};

std::vector<SummaryRow> summary_rows(const std::map<Window, UsageSummary>& summaries) {
  static const std::pair<DeviceClass, const char*> kDeviceLabels[] = {
      {DeviceClass::WINDOWS_PC, "Windows PC users"}, {DeviceClass::MAC, "Mac users"},
      {DeviceClass::IOS, "iOS Phone users"},         {DeviceClass::ANDROID, "Android Phone users"},
      {DeviceClass::LINUX, "Linux users"},           {DeviceClass::WEB, "Web browser users"}};
  std::vector<SummaryRow> rows;
  auto add = [&](std::string label, auto cell) {
    SummaryRow r{std::move(label), {}};
    for (const auto& [w, s] : summaries) r.cells[w] = cell(s);
    rows.push_back(std::move(r));
  };
  auto num = [](auto v) { return std::to_string(v); };
  add("Total users of Teams services", [&](const UsageSummary& s) { return num(s.total_users); });
  add("1:1 Calls", [&](const UsageSummary& s) { return num(s.total_one_to_one_calls); });
  add("Total Audio time", [](const UsageSummary& s) { return format_duration_text(s.total_audio_s); });
  add("Total Video time", [](const UsageSummary& s) { return format_duration_text(s.total_video_s); });
  add("Average audio time per user", [&](const UsageSummary& s) { return num(s.avg_audio_hours_per_user); });
  add("Average video time per user", [&](const UsageSummary& s) { return num(s.avg_video_hours_per_user); });
  for (const auto& [d, label] : kDeviceLabels)
    add(label, [&, d = d](const UsageSummary& s) {
      auto it = s.device_counts.find(d);
      return num(it == s.device_counts.end() ? std::uint64_t{0} : it->second);
    });
  add("Total number Teams PSTN calls", [&](const UsageSummary& s) { return num(s.pstn_calls_total); });
  add("Total time Teams PSTN calls",
      [](const UsageSummary& s) { return format_duration_text(s.pstn_duration_total_s); });
  return rows;
}

}  // namespace

void write_summary_table(std::ostream& out, const std::map<Window, UsageSummary>& summaries) {
  const auto rows = summary_rows(summaries);
  std::size_t label_w = 5;
  std::map<Window, std::size_t> col_w;
  for (const auto& [w, s] : summaries) col_w[w] = to_string(w).size();
  for (const auto& r : rows) {
    label_w = std::max(label_w, r.label.size());
    for (const auto& [w, c] : r.cells) col_w[w] = std::max(col_w[w], c.size());
  }
  out << std::left << std::setw(static_cast<int>(label_w)) << "Usage";
  for (const auto& [w, width] : col_w) out << "  " << std::setw(static_cast<int>(width)) << to_string(w);
  out << '\n';
  for (const auto& r : rows) {
    out << std::setw(static_cast<int>(label_w)) << r.label;
    for (const auto& [w, width] : col_w) out << "  " << std::setw(static_cast<int>(width)) << r.cells.at(w);
    out << '\n';
  }
  out << std::right;
}

void write_summary_csv(std::ostream& out, const std::map<Window, UsageSummary>& summaries) {
  std::vector<std::string> head{"Usage"};
  for (const auto& [w, s] : summaries) head.emplace_back(to_string(w));
  out << text::csv_row(head) << '\n';
  for (const auto& r : summary_rows(summaries)) {
    std::vector<std::string> cells{r.label};
    for (const auto& [w, c] : r.cells) cells.push_back(c);
    out << text::csv_row(cells) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Call detail export

namespace {

using PartyMember = std::optional<std::string> PartyDetails::*;

const std::vector<std::pair<std::string, PartyMember>>& party_fields() {
  static const std::vector<std::pair<std::string, PartyMember>> fields = {
      {"Microphone device name", &PartyDetails::microphone_device_name},
      {"Microphone device driver", &PartyDetails::microphone_driver},
      {"Speaker device name", &PartyDetails::speaker_device_name},
      {"Speaker device driver", &PartyDetails::speaker_driver},
      {"System name", &PartyDetails::system_name},
      {"Operating System", &PartyDetails::operating_system},
      {"Network connection type", &PartyDetails::network_connection_type},
      {"Wi-Fi driver description", &PartyDetails::wifi_driver_description},
      {"Wi-Fi driver version", &PartyDetails::wifi_driver_version},
      {"Wi-Fi signal strength", &PartyDetails::wifi_signal_strength},
  };
  return fields;
}

std::optional<PartyMember> find_party_member(std::string_view name) {
  if (text::iequals(name, "System name (Computer name)")) return &PartyDetails::system_name;
  for (const auto& [n, m] : party_fields())
    if (text::iequals(n, name)) return m;
  return std::nullopt;
}

[[noreturn]] void schema_error(std::string msg) { throw Error(ErrorCode::SchemaError, std::move(msg)); }

}  // namespace

const std::vector<std::string>& party_field_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& f : party_fields()) v.push_back(f.first);
    return v;
  }();
  return names;
}

const std::optional<std::string>* party_field(const PartyDetails& party, std::string_view name) {
  auto m = find_party_member(name);
  return m ? &(party.*(*m)) : nullptr;
}

CallDetailExport ingest_call_detail(std::istream& in) {
  CallDetailExport out;
  enum class Section { NONE, CALL, CALLER, CALLEE } section = Section::NONE;
  std::string line;
  std::size_t lineno = 0;
  bool saw_any = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string_view t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    saw_any = true;
    const std::string where = " at line " + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') schema_error("malformed section" + where);
      const std::string name = text::to_lower(text::trim(t.substr(1, t.size() - 2)));
      if (name == "call") {
        section = Section::CALL;
      } else if (name == "caller") {
        if (out.caller) schema_error("duplicate [caller]" + where);
        section = Section::CALLER;
        out.caller.emplace();
      } else if (name == "callee") {
        if (out.callee) schema_error("duplicate [callee]" + where);
        section = Section::CALLEE;
        out.callee.emplace();
      } else {
        schema_error("unknown section [" + name + "]" + where);
      }
      continue;
    }
    const std::size_t colon = t.find(':');
    if (colon == std::string_view::npos) schema_error("expected 'Name: value'" + where);
    const std::string_view key = text::trim(t.substr(0, colon));
    const std::string value(text::trim(t.substr(colon + 1)));
    switch (section) {
      case Section::NONE: schema_error("field outside a section" + where);
      case Section::CALL:
        if (text::iequals(key, "Start")) {
          out.start = value;
        } else if (text::iequals(key, "Duration")) {
          try {
            out.duration_s = parse_duration_text(value);
          } catch (const Error&) {
            schema_error("bad duration" + where);
          }
        } else if (text::iequals(key, "Audio quality")) {
          out.audio_quality = value;
        } else if (text::iequals(key, "Scenario")) {
          if (text::iequals(value, "Teams")) out.scenario = CallScenario::TEAMS;
          else if (text::iequals(value, "PSTN")) out.scenario = CallScenario::PSTN;
          else if (text::iequals(value, "Skype Consumer") || text::iequals(value, "SKYPE_CONSUMER"))
            out.scenario = CallScenario::SKYPE_CONSUMER;
          else schema_error("unknown scenario '" + value + "'" + where);
        } else {
          schema_error("unknown call field '" + std::string(key) + "'" + where);
        }
        break;
      case Section::CALLER:
      case Section::CALLEE: {
        auto m = find_party_member(key);
        if (!m) schema_error("unknown party field '" + std::string(key) + "'" + where);
        PartyDetails& p = section == Section::CALLER ? *out.caller : *out.callee;
        if ((p.*(*m)).has_value()) schema_error("duplicate field '" + std::string(key) + "'" + where);
        p.*(*m) = value;
        break;
      }
    }
  }
  if (!saw_any) schema_error("empty call detail export");
  if (!out.caller && !out.callee) schema_error("call detail export has no [caller] or [callee]");
  return out;
}

std::vector<std::string> availability_notes(const CallDetailExport& call) {
  std::vector<std::string> notes;
  const bool wifi_desc_expected_missing =
      call.scenario == CallScenario::PSTN || call.scenario == CallScenario::SKYPE_CONSUMER;
  auto party_notes = [&](const std::optional<PartyDetails>& party, std::string_view role) {
    if (!party) {
      notes.push_back(std::string(role) + ": no details exported");
      return;
    }
    for (const auto& [name, member] : party_fields()) {
      if ((*party.*member).has_value()) continue;
      std::string note = std::string(role) + ": " + name + " absent";
      if (role == "caller" && member == &PartyDetails::wifi_driver_description &&
          wifi_desc_expected_missing)
        note += " (expected for " + std::string(to_string(call.scenario)) + " calls)";
      notes.push_back(std::move(note));
    }
  };
  party_notes(call.caller, "caller");
  party_notes(call.callee, "callee");
  return notes;
}

// ---------------------------------------------------------------------------
// Legal hold

const std::vector<HoldEntry>& hold_table() {
  static const std::vector<HoldEntry> table = {
      {"Teams chats for a user (for example, 1:1 chats, 1:N group chats, and private channel "
       "conversations)",
       "Teams chats for a user", "User mailbox."},
      {"Teams channel chats (excluding private channels)", "Teams channel chats",
       "Group mailbox used for the team."},
      {"Teams file content (for example, Wiki content and files)", "Teams file content",
       "SharePoint site used by the team."},
      {"Teams private channel files", "Teams private channel files",
       "Dedicated SharePoint site for private channels."},
      {"User's private content", "User's private content",
       "The user's OneDrive for Business account."},
      {"Card content in chats", "Card content in chats",
       "User mailbox for 1:1 chats, 1:N group chats, and private channel conversations or group "
       "mailbox for card content in channel messages."},
  };
  return table;
}

std::string hold_location(std::string_view scenario) {
  const std::string_view s = text::trim(scenario);
  for (const auto& e : hold_table())
    if (text::iequals(s, e.short_name) || text::iequals(s, e.scenario)) return e.location;
  throw Error(ErrorCode::UnknownScenario, "no hold location for '" + std::string(s) + "'");
}

}  // namespace tfx::usage
