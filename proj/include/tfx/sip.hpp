#pragma once

#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tfx/common.hpp"

namespace tfx::sip {

/// One syslog record: a header line "<ISO-8601 ts> <host> <facility>: <text>"
/// plus indented continuation lines, ended by an empty line or the next
/// unindented line. When <text> opens a SIP start line the record's SIP text
/// is collected into sip_fragment (CRLF separated, indentation removed; an
/// indented whitespace-only line stands for the empty header/body separator).
struct SipLogLine {
  TimestampUs ts_us = 0;
  std::uint64_t seq = 0;  // physical line number of the header line, 1-based
  std::string raw;
  std::optional<std::string> sip_fragment;
  bool zone_assumed = false;  // timestamp had no zone; taken as UTC
  bool header_ok = true;      // false: ts inherited from the previous record
};

struct StreamStats {
  std::uint64_t physical_lines = 0;
  std::uint64_t records = 0;
  std::uint64_t sip_records = 0;
  std::uint64_t replaced_bytes = 0;
  std::uint64_t zone_assumed = 0;
  std::uint64_t bad_headers = 0;
  std::uint64_t bytes = 0;
};

/// Rewrites each physical line before framing; the seam for vendor layouts
/// that differ from the canonical one.
using LinePreprocessor = std::function<std::string(std::string_view)>;

class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Returns bytes read, 0 at end of input.
  virtual std::size_t read(char* dst, std::size_t n) = 0;
};

/// Streaming syslog reader. Memory use is bounded by the longest record.
class SyslogReader {
 public:
  explicit SyslogReader(std::istream& in);
  explicit SyslogReader(std::unique_ptr<ByteSource> source);

  /// Opens a plain or gzip-compressed file (detected from content).
  static SyslogReader open_file(const std::string& path);

  std::optional<SipLogLine> next();
  const StreamStats& stats() const { return stats_; }
  void set_preprocessor(LinePreprocessor fn) { preprocess_ = std::move(fn); }

 private:
  bool read_physical(std::string& line);

  std::unique_ptr<ByteSource> source_;
  std::vector<char> buf_;
  std::size_t buf_pos_ = 0;
  std::size_t buf_len_ = 0;
  bool eof_ = false;
  std::optional<std::string> pending_;
  std::uint64_t pending_lineno_ = 0;
  std::uint64_t lineno_ = 0;
  TimestampUs last_ts_ = 0;
  StreamStats stats_;
  LinePreprocessor preprocess_;
};

std::vector<SipLogLine> stream_syslog(std::istream& in);

enum class MessageKind { REQUEST, RESPONSE };

struct SipMessage {
  MessageKind kind = MessageKind::REQUEST;
  std::string method;       // REQUEST
  int status_code = 0;      // RESPONSE
  std::string reason;       // RESPONSE
  std::string request_uri;  // REQUEST
  std::string call_id;
  std::string from_uri;
  std::string to_uri;
  std::uint32_t cseq = 0;
  std::string cseq_method;
  TimestampUs ts_us = 0;
  std::uint64_t source_seq = 0;
  std::optional<std::string> body_summary;  // SDP m= lines, "; " separated
  std::string text;  // full SIP text, kept only on request

  std::string method_or_code() const {
    return kind == MessageKind::REQUEST ? method : std::to_string(status_code);
  }
};

/// Throws Error(NotSip) without a valid start line and Error(MissingCallId).
SipMessage parse_sip(std::string_view fragment);

enum class Completeness { COMPLETE, NO_FINAL_RESPONSE, ORPHAN_RESPONSE };

std::string_view to_string(Completeness c);

struct SipDialog {
  std::string call_id;
  std::vector<SipMessage> messages;
  std::vector<std::string> participants;  // sorted, unique
  TimestampUs start_ts_us = 0;
  TimestampUs end_ts_us = 0;
  Completeness completeness = Completeness::NO_FINAL_RESPONSE;
};

/// COMPLETE needs a final (>= 200) response matching the initial request's
/// CSeq, and for an INVITE answered 2xx also a BYE. Dialogs that open with a
/// response are ORPHAN_RESPONSE.
Completeness derive_completeness(const std::vector<SipMessage>& messages);

struct SplitOptions {
  bool keep_text = false;
};

struct SplitResult {
  std::vector<SipDialog> dialogs;  // ordered by start time, then call id
  std::uint64_t messages = 0;
  std::uint64_t unparseable = 0;
  std::uint64_t non_sip_records = 0;
};

class DialogSplitter {
 public:
  explicit DialogSplitter(SplitOptions options = {}) : options_(options) {}

  void add(const SipLogLine& line);
  SplitResult finish();

 private:
  SplitOptions options_;
  std::unordered_map<std::string, SipDialog> dialogs_;
  SplitResult result_;
};

SplitResult split_dialogs(const std::vector<SipLogLine>& lines,
                          SplitOptions options = {});

struct Window {
  TimestampUs from_us = 0;
  TimestampUs to_us = 0;
  std::optional<std::string> participant;
};

/// Lines belonging to a dialog with any message inside [from, to] (and, with
/// a participant filter, a participant URI containing it), in source order.
/// Throws Error(InvalidWindow) when from > to.
std::vector<SipLogLine> select_window(const std::vector<SipLogLine>& lines,
                                      const Window& window);

struct SelectStats {
  std::uint64_t dialogs_indexed = 0;
  std::uint64_t dialogs_selected = 0;
  std::uint64_t lines_emitted = 0;
};

/// Two-pass streaming selection over a file: the first pass indexes dialogs,
/// the second emits matching records to sink. Memory is bounded by the index.
SelectStats select_window_file(const std::string& path, const Window& window,
                               const std::function<void(const SipLogLine&)>& sink);

/// File name for a dialog bundle: call id with unsafe characters replaced.
std::string bundle_name(std::string_view call_id);

void write_dialog_bundle(std::ostream& out, const SipDialog& dialog);

/// call_id,start,end,participants,completeness,message_count
void write_dialog_index(std::ostream& out, const std::vector<SipDialog>& dialogs);

}  // namespace tfx::sip
