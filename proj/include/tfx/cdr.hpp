#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "tfx/common.hpp"

namespace tfx::cdr {

enum class Direction { Incoming, Outgoing };

std::string_view to_string(Direction d);

/// One SBC trunk record. Time-of-day end times ("13:10:18.408") are stored as
/// microseconds since midnight; full ISO-8601 values as epoch microseconds.
struct CdrLeg {
  std::string call_end_time;  // as exported
  std::optional<TimestampUs> call_end_us;
  std::string endpoint_type;
  std::string ip_group;
  std::string caller;
  std::string callee;
  Direction direction = Direction::Incoming;
  std::string remote_ip;  // as exported; displays may truncate it
  std::optional<Ipv4> remote_addr;
  std::optional<std::int64_t> duration_s;
  std::string termination_reason;
  std::string session_id;
  std::size_t source_row = 0;  // 1-based line in the source file
};

struct RowError {
  std::size_t row = 0;
  std::string message;
};

struct CdrParse {
  std::vector<CdrLeg> legs;
  std::vector<RowError> errors;
};

/// Maps alternative header spellings (lowercase) to canonical column names
/// such as "session id".
using AliasMap = std::map<std::string, std::string>;

/// Parses an export with a header row. Header matching is case-insensitive
/// and treats '_' as a space. Throws Error(MissingColumn); row problems are
/// collected in CdrParse::errors.
CdrParse parse_cdr(std::istream& in, const AliasMap& aliases = {});

/// All *.csv files of a directory, in name order.
CdrParse parse_cdr_directory(const std::string& dir, const AliasMap& aliases = {});

/// "HH:MM:SS" (HH up to 99) to seconds; nullopt when malformed.
std::optional<std::int64_t> parse_hms(std::string_view text);
std::string format_hms(std::int64_t seconds);

enum class CallDirection { TEAMS_TO_PSTN, PSTN_TO_TEAMS, UNDETERMINED };
enum class Outcome { COMPLETED, NO_ANSWER, BUSY, FAILED, OTHER };

std::string_view to_string(CallDirection d);
std::string_view to_string(Outcome o);

Outcome outcome_for_reason(std::string_view termination_reason);

struct CorrelatedCall {
  std::string session_id;
  CdrLeg teams_leg;
  CdrLeg pbx_leg;
  CallDirection overall_direction = CallDirection::UNDETERMINED;
  Outcome outcome = Outcome::OTHER;
  std::optional<std::int64_t> duration_s;
  bool reason_mismatch = false;
};

struct OrphanGroup {
  std::string session_id;
  std::vector<CdrLeg> legs;
  std::string diagnostic;
};

struct GroupConfig {
  std::set<std::string> teams_groups{"IPG_TEAMS"};
  std::set<std::string> pbx_groups{"IPG_PBX"};
};

struct Correlation {
  std::vector<CorrelatedCall> calls;  // ordered by session id
  std::vector<OrphanGroup> orphans;   // ordered by session id
  std::size_t orphan_legs() const;
};

Correlation correlate_legs(const std::vector<CdrLeg>& legs, const GroupConfig& config = {});

struct CdrSummary {
  std::size_t total_calls = 0;
  std::map<Outcome, std::size_t> by_outcome;
  std::map<CallDirection, std::size_t> by_direction;
  std::int64_t total_duration_s = 0;  // completed calls
  std::optional<TimestampUs> first_end_us;
  std::optional<TimestampUs> last_end_us;
};

CdrSummary summarize_cdr(const std::vector<CorrelatedCall>& calls);

/// session_id,direction,outcome,duration,caller,callee,teams_remote_ip,
/// pbx_remote_ip,teams_reason,pbx_reason,reason_mismatch,call_end_time
void write_calls_csv(std::ostream& out, const std::vector<CorrelatedCall>& calls);

}  // namespace tfx::cdr
