#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tfx/common.hpp"

namespace tfx::usage {

enum class Window { D7, D30, D90 };
enum class DeviceClass { WINDOWS_PC, MAC, IOS, ANDROID, LINUX, WEB };

std::string_view to_string(Window w);
std::string_view to_string(DeviceClass d);
/// "D7", "7", "last 7 days" and friends.
std::optional<Window> parse_window(std::string_view text);

inline constexpr DeviceClass kAllDevices[] = {DeviceClass::WINDOWS_PC, DeviceClass::MAC,
                                              DeviceClass::IOS,        DeviceClass::ANDROID,
                                              DeviceClass::LINUX,      DeviceClass::WEB};

/// One exported row. Rows from the device report carry only device_class;
/// rows from the activity and PSTN reports carry the counters.
struct UsageActivityRecord {
  std::string user_id;
  Window window = Window::D7;
  std::int64_t audio_seconds = 0;
  std::int64_t video_seconds = 0;
  std::uint64_t one_to_one_calls = 0;
  std::optional<DeviceClass> device_class;
  std::uint64_t pstn_calls = 0;
  std::int64_t pstn_seconds = 0;
};

struct UsageSummary {
  Window window = Window::D7;
  std::uint64_t total_users = 0;
  std::uint64_t total_one_to_one_calls = 0;
  std::int64_t total_audio_s = 0;
  std::int64_t total_video_s = 0;
  std::int64_t avg_audio_hours_per_user = 0;
  std::int64_t avg_video_hours_per_user = 0;
  std::map<DeviceClass, std::uint64_t> device_counts;  // distinct users per class
  std::uint64_t pstn_calls_total = 0;
  std::int64_t pstn_duration_total_s = 0;
};

/// "<D> days <H> hours <M> minutes" (singular units accepted) or "HH:MM:SS".
/// Throws Error(FormatError).
std::int64_t parse_duration_text(std::string_view text);
/// "D days H hours M minutes"; seconds below a minute are dropped.
std::string format_duration_text(std::int64_t seconds);

/// Accepts plain digits or digits grouped by three with a single '.' or ','
/// separator ("36.368", "1,171"). Anything else is ambiguous and throws
/// Error(FormatError).
std::uint64_t parse_grouped_number(std::string_view text);

/// total / users in hours, rounded half up to an integer.
std::int64_t round_half_up_hours(std::int64_t total_seconds, std::uint64_t users);

std::map<Window, UsageSummary> aggregate_usage(const std::vector<UsageActivityRecord>& records);

enum class Metric { AUDIO, VIDEO };

struct RankedUser {
  std::size_t rank = 0;
  std::string user_id;
  std::int64_t audio_seconds = 0;
  std::int64_t video_seconds = 0;
  std::string audio_text;
  std::string video_text;
};

/// Per-user totals over the given records, descending by metric, ties by
/// user id. Throws Error(InvalidArgument) when n is 0.
std::vector<RankedUser> top_users(const std::vector<UsageActivityRecord>& records, std::size_t n,
                                  Metric metric);

enum class ReportType { USER_ACTIVITY, DEVICE_USAGE, PSTN_USAGE };

std::string_view to_string(ReportType t);

struct UsageParse {
  ReportType type = ReportType::USER_ACTIVITY;
  std::vector<UsageActivityRecord> records;
};

/// Reads one exported report (CSV or TSV). The report type is recognized from
/// the header:
///   user activity: User, Window, One-to-one calls, Audio time, Video time
///   device usage:  User, Window, Windows, Mac, iOS, Android, Linux, Web (Yes/No)
///   PSTN usage:    User, Window, PSTN calls, PSTN time
/// Throws Error(FormatError) with the offending line.
UsageParse parse_usage_report(std::istream& in);

/// Table in the published row order, one column per window.
void write_summary_table(std::ostream& out, const std::map<Window, UsageSummary>& summaries);
void write_summary_csv(std::ostream& out, const std::map<Window, UsageSummary>& summaries);

// ---------------------------------------------------------------------------
// Per-call details exported from the admin center

struct PartyDetails {
  std::optional<std::string> microphone_device_name;
  std::optional<std::string> microphone_driver;
  std::optional<std::string> speaker_device_name;
  std::optional<std::string> speaker_driver;
  std::optional<std::string> system_name;
  std::optional<std::string> operating_system;
  std::optional<std::string> network_connection_type;
  std::optional<std::string> wifi_driver_description;
  std::optional<std::string> wifi_driver_version;
  std::optional<std::string> wifi_signal_strength;
};

enum class CallScenario { TEAMS, PSTN, SKYPE_CONSUMER, UNSPECIFIED };

std::string_view to_string(CallScenario s);

struct CallDetailExport {
  std::optional<PartyDetails> caller;
  std::optional<PartyDetails> callee;
  std::optional<std::string> start;
  std::optional<std::int64_t> duration_s;
  std::optional<std::string> audio_quality;
  CallScenario scenario = CallScenario::UNSPECIFIED;
};

/// Field names as listed for a call in the admin center.
const std::vector<std::string>& party_field_names();
/// Looks a party field up by its display name; nullptr for unknown names.
const std::optional<std::string>* party_field(const PartyDetails& party, std::string_view name);

/// Sectioned key-value export:
///   [call]    Start, Duration, Audio quality, Scenario
///   [caller]  / [callee]   the party fields, "Name: value" per line
/// Absent fields stay absent. Throws Error(SchemaError).
CallDetailExport ingest_call_detail(std::istream& in);

/// One line per absent party field, saying whether the absence is expected
/// for the call scenario.
std::vector<std::string> availability_notes(const CallDetailExport& call);

// ---------------------------------------------------------------------------
// Legal hold content locations

struct HoldEntry {
  std::string scenario;  // full scenario text
  std::string short_name;
  std::string location;
};

/// The six scenario/location rows.
const std::vector<HoldEntry>& hold_table();

/// Matches the short name or full scenario text, case-insensitively. Throws
/// Error(UnknownScenario).
std::string hold_location(std::string_view scenario);

}  // namespace tfx::usage
