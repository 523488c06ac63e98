#include "tfx/sip.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>
#include <unordered_map>

#include "tfx/classifier.hpp"
#include "tfx/text.hpp"

namespace tfx::sip {

namespace {

constexpr std::size_t kReadChunk = 1 << 20;

class IstreamSource final : public ByteSource {
 public:
  explicit IstreamSource(std::istream& in) : in_(in) {}
  std::size_t read(char* dst, std::size_t n) override {
    in_.read(dst, static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount());
  }

 private:
  std::istream& in_;
};

// zlib reads plain files transparently, so this serves both layouts.
class GzSource final : public ByteSource {
 public:
  explicit GzSource(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw Error(ErrorCode::Io, "cannot open " + path);
    gzbuffer(file_, 256 * 1024);
  }
  ~GzSource() override { gzclose(file_); }
  GzSource(const GzSource&) = delete;
  GzSource& operator=(const GzSource&) = delete;

  std::size_t read(char* dst, std::size_t n) override {
    const int got = gzread(file_, dst, static_cast<unsigned>(n));
    if (got < 0) {
      int errnum = 0;
      throw Error(ErrorCode::Io, std::string("gzip read failed: ") + gzerror(file_, &errnum));
    }
    return static_cast<std::size_t>(got);
  }

 private:
  gzFile file_;
};

/// Replaces every byte that is not part of a well-formed UTF-8 sequence with
/// U+FFFD. Returns the number of bytes replaced.
std::size_t sanitize_utf8(std::string& s) {
  bool ascii = true;
  for (unsigned char c : s)
    if (c >= 0x80) {
      ascii = false;
      break;
    }
  if (ascii) return 0;
  std::string out;
  out.reserve(s.size() + 8);
  std::size_t replaced = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if (c >= 0xc2 && c <= 0xdf) len = 2;
    else if (c >= 0xe0 && c <= 0xef) len = 3;
    else if (c >= 0xf0 && c <= 0xf4) len = 4;
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k)
      ok = (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
    if (ok && len == 3) {
      const auto c1 = static_cast<unsigned char>(s[i + 1]);
      ok = !(c == 0xe0 && c1 < 0xa0) && !(c == 0xed && c1 >= 0xa0);
    } else if (ok && len == 4) {
      const auto c1 = static_cast<unsigned char>(s[i + 1]);
      ok = !(c == 0xf0 && c1 < 0x90) && !(c == 0xf4 && c1 >= 0x90);
    }
    if (ok) {
      out.append(s, i, len);
      i += len;
    } else {
      out += "\xEF\xBF\xBD";
      ++replaced;
      ++i;
    }
  }
  s = std::move(out);
  return replaced;
}

bool is_indented(std::string_view line) {
  return !line.empty() && (line.front() == ' ' || line.front() == '\t');
}

struct Header {
  ParsedTime time;
  std::string_view text;
};

std::optional<Header> parse_header(std::string_view line) {
  const auto sp = line.find(' ');
  if (sp == std::string_view::npos) return std::nullopt;
  auto time = parse_iso8601(line.substr(0, sp));
  if (!time) return std::nullopt;
  auto rest = line.substr(sp + 1);
  std::string_view body;
  if (auto colon = rest.find(": "); colon != std::string_view::npos)
    body = rest.substr(colon + 2);
  else if (auto host_end = rest.find(' '); host_end != std::string_view::npos)
    body = rest.substr(host_end + 1);
  return Header{*time, body};
}

}  // namespace

// ---------------------------------------------------------------------------
// SyslogReader

SyslogReader::SyslogReader(std::istream& in)
    : SyslogReader(std::make_unique<IstreamSource>(in)) {}

SyslogReader::SyslogReader(std::unique_ptr<ByteSource> source)
    : source_(std::move(source)), buf_(kReadChunk) {}

SyslogReader SyslogReader::open_file(const std::string& path) {
  return SyslogReader(std::make_unique<GzSource>(path));
}

bool SyslogReader::read_physical(std::string& line) {
  line.clear();
  while (true) {
    if (buf_pos_ == buf_len_) {
      if (eof_) {
        if (line.empty()) return false;
        break;
      }
      buf_len_ = source_->read(buf_.data(), buf_.size());
      buf_pos_ = 0;
      stats_.bytes += buf_len_;
      if (buf_len_ == 0) {
        eof_ = true;
        continue;
      }
    }
    const char* start = buf_.data() + buf_pos_;
    const char* end = buf_.data() + buf_len_;
    const char* nl = static_cast<const char*>(std::memchr(start, '\n', static_cast<std::size_t>(end - start)));
    if (nl) {
      line.append(start, nl);
      buf_pos_ = static_cast<std::size_t>(nl - buf_.data()) + 1;
      break;
    }
    line.append(start, end);
    buf_pos_ = buf_len_;
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++lineno_;
  ++stats_.physical_lines;
  stats_.replaced_bytes += sanitize_utf8(line);
  if (preprocess_) line = preprocess_(line);
  return true;
}

std::optional<SipLogLine> SyslogReader::next() {
  std::string head;
  std::uint64_t head_lineno = 0;
  // Find the next non-empty line to open a record.
  while (true) {
    if (pending_) {
      head = std::move(*pending_);
      head_lineno = pending_lineno_;
      pending_.reset();
    } else {
      if (!read_physical(head)) return std::nullopt;
      head_lineno = lineno_;
    }
    if (!head.empty()) break;
  }

  SipLogLine rec;
  rec.seq = head_lineno;
  rec.raw = head;
  std::string_view text;
  if (auto hdr = is_indented(head) ? std::nullopt : parse_header(head)) {
    rec.ts_us = hdr->time.us;
    rec.zone_assumed = !hdr->time.had_zone;
    if (rec.zone_assumed) ++stats_.zone_assumed;
    text = hdr->text;
    last_ts_ = rec.ts_us;
  } else {
    rec.ts_us = last_ts_;
    rec.header_ok = false;
    ++stats_.bad_headers;
    text = text::trim(head);
  }

  const bool is_sip = classify::starts_with_sip_line(text);
  std::string fragment;
  if (is_sip) fragment.assign(text);

  std::string line;
  while (read_physical(line)) {
    if (line.empty()) break;
    if (!is_indented(line)) {
      pending_ = std::move(line);
      pending_lineno_ = lineno_;
      break;
    }
    rec.raw += '\n';
    rec.raw += line;
    if (is_sip) {
      fragment += "\r\n";
      fragment += text::trim(line);
    }
  }
  if (is_sip) {
    rec.sip_fragment = std::move(fragment);
    ++stats_.sip_records;
  }
  ++stats_.records;
  return rec;
}

std::vector<SipLogLine> stream_syslog(std::istream& in) {
  SyslogReader reader(in);
  std::vector<SipLogLine> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

// ---------------------------------------------------------------------------
// SIP message parsing

namespace {

std::string extract_uri(std::string_view value) {
  value = text::trim(value);
  if (auto lt = value.find('<'); lt != std::string_view::npos) {
    auto gt = value.find('>', lt);
    return std::string(value.substr(lt + 1, gt == std::string_view::npos ? gt : gt - lt - 1));
  }
  if (auto semi = value.find(';'); semi != std::string_view::npos)
    value = value.substr(0, semi);
  return std::string(text::trim(value));
}

std::string canonical_header(std::string_view name) {
  std::string n = text::to_lower(text::trim(name));
  if (n == "i") return "call-id";
  if (n == "f") return "from";
  if (n == "t") return "to";
  return n;
}

}  // namespace

SipMessage parse_sip(std::string_view fragment) {
  if (!classify::starts_with_sip_line(fragment))
    throw Error(ErrorCode::NotSip, "no SIP start line");
  SipMessage msg;
  auto eol = fragment.find_first_of("\r\n");
  const std::string_view start = fragment.substr(0, eol);
  if (start.substr(0, 7) == "SIP/2.0") {
    msg.kind = MessageKind::RESPONSE;
    msg.status_code = std::stoi(std::string(start.substr(8, 3)));
    if (start.size() > 12) msg.reason = std::string(start.substr(12));
  } else {
    msg.kind = MessageKind::REQUEST;
    auto sp1 = start.find(' ');
    auto sp2 = start.find(' ', sp1 + 1);
    msg.method = std::string(start.substr(0, sp1));
    msg.request_uri = std::string(start.substr(sp1 + 1, sp2 - sp1 - 1));
  }

  std::string_view rest = eol == std::string_view::npos ? std::string_view{} : fragment.substr(eol);
  bool in_body = false;
  std::string media;
  while (!rest.empty()) {
    // Consume one line terminator (CRLF, LF or CR).
    if (rest.substr(0, 2) == "\r\n") rest.remove_prefix(2);
    else rest.remove_prefix(1);
    auto end = rest.find_first_of("\r\n");
    std::string_view line = rest.substr(0, end);
    rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    if (!in_body) {
      if (line.empty()) {
        in_body = true;
        continue;
      }
      auto colon = line.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string name = canonical_header(line.substr(0, colon));
      const std::string_view value = text::trim(line.substr(colon + 1));
      if (name == "call-id") {
        msg.call_id = std::string(value);
      } else if (name == "from") {
        msg.from_uri = extract_uri(value);
      } else if (name == "to") {
        msg.to_uri = extract_uri(value);
      } else if (name == "cseq") {
        auto sp = value.find(' ');
        try {
          msg.cseq = static_cast<std::uint32_t>(std::stoul(std::string(value.substr(0, sp))));
        } catch (const std::exception&) {
          msg.cseq = 0;
        }
        if (sp != std::string_view::npos)
          msg.cseq_method = std::string(text::trim(value.substr(sp + 1)));
      }
    } else if (line.size() > 2 && line.substr(0, 2) == "m=") {
      if (!media.empty()) media += "; ";
      media += line.substr(2);
    }
  }
  if (msg.call_id.empty()) throw Error(ErrorCode::MissingCallId, "SIP message without Call-ID");
  if (!media.empty()) msg.body_summary = std::move(media);
  return msg;
}

// ---------------------------------------------------------------------------
// Dialogs

std::string_view to_string(Completeness c) {
  switch (c) {
    case Completeness::COMPLETE: return "COMPLETE";
    case Completeness::NO_FINAL_RESPONSE: return "NO_FINAL_RESPONSE";
    case Completeness::ORPHAN_RESPONSE: return "ORPHAN_RESPONSE";
  }
  return "NO_FINAL_RESPONSE";
}

Completeness derive_completeness(const std::vector<SipMessage>& messages) {
  if (messages.empty() || messages.front().kind == MessageKind::RESPONSE)
    return Completeness::ORPHAN_RESPONSE;
  const SipMessage& initial = messages.front();
  const SipMessage* final_response = nullptr;
  for (const auto& m : messages) {
    if (m.kind == MessageKind::RESPONSE && m.status_code >= 200 &&
        m.status_code <= 699 && m.cseq == initial.cseq &&
        text::iequals(m.cseq_method, initial.method)) {
      final_response = &m;
      break;
    }
  }
  if (!final_response) return Completeness::NO_FINAL_RESPONSE;
  if (initial.method == "INVITE" && final_response->status_code < 300) {
    const bool has_bye = std::any_of(messages.begin(), messages.end(), [](const SipMessage& m) {
      return m.kind == MessageKind::REQUEST && m.method == "BYE";
    });
    if (!has_bye) return Completeness::NO_FINAL_RESPONSE;
  }
  return Completeness::COMPLETE;
}

void DialogSplitter::add(const SipLogLine& line) {
  if (!line.sip_fragment) {
    ++result_.non_sip_records;
    return;
  }
  SipMessage msg;
  try {
    msg = parse_sip(*line.sip_fragment);
  } catch (const Error&) {
    ++result_.unparseable;
    return;
  }
  msg.ts_us = line.ts_us;
  msg.source_seq = line.seq;
  if (options_.keep_text) msg.text = *line.sip_fragment;
  ++result_.messages;
  auto [it, inserted] = dialogs_.try_emplace(msg.call_id);
  SipDialog& d = it->second;
  if (inserted) {
    d.call_id = msg.call_id;
    d.start_ts_us = msg.ts_us;
    d.end_ts_us = msg.ts_us;
  }
  d.start_ts_us = std::min(d.start_ts_us, msg.ts_us);
  d.end_ts_us = std::max(d.end_ts_us, msg.ts_us);
  d.messages.push_back(std::move(msg));
}

SplitResult DialogSplitter::finish() {
  SplitResult out = std::move(result_);
  result_ = {};
  out.dialogs.reserve(dialogs_.size());
  for (auto& [id, d] : dialogs_) {
    std::stable_sort(d.messages.begin(), d.messages.end(),
                     [](const SipMessage& a, const SipMessage& b) { return a.ts_us < b.ts_us; });
    std::set<std::string> parts;
    for (const auto& m : d.messages) {
      if (!m.from_uri.empty()) parts.insert(m.from_uri);
      if (!m.to_uri.empty()) parts.insert(m.to_uri);
    }
    d.participants.assign(parts.begin(), parts.end());
    d.completeness = derive_completeness(d.messages);
    out.dialogs.push_back(std::move(d));
  }
  dialogs_.clear();
  std::sort(out.dialogs.begin(), out.dialogs.end(), [](const SipDialog& a, const SipDialog& b) {
    if (a.start_ts_us != b.start_ts_us) return a.start_ts_us < b.start_ts_us;
    return a.call_id < b.call_id;
  });
  return out;
}

SplitResult split_dialogs(const std::vector<SipLogLine>& lines, SplitOptions options) {
  DialogSplitter splitter(options);
  for (const auto& l : lines) splitter.add(l);
  return splitter.finish();
}

namespace {

struct IndexEntry {
  bool in_window = false;
  bool participant_match = false;
};

class WindowIndex {
 public:
  explicit WindowIndex(const Window& w) : w_(w) {
    if (w.from_us > w.to_us)
      throw Error(ErrorCode::InvalidWindow, "window start is after window end");
  }

  /// Returns the call id when the record carries a parseable SIP message.
  std::optional<std::string> observe(const SipLogLine& line) {
    if (!line.sip_fragment) return std::nullopt;
    SipMessage msg;
    try {
      msg = parse_sip(*line.sip_fragment);
    } catch (const Error&) {
      return std::nullopt;
    }
    IndexEntry& e = entries_[msg.call_id];
    if (line.ts_us >= w_.from_us && line.ts_us <= w_.to_us) e.in_window = true;
    if (w_.participant &&
        (msg.from_uri.find(*w_.participant) != std::string::npos ||
         msg.to_uri.find(*w_.participant) != std::string::npos))
      e.participant_match = true;
    return msg.call_id;
  }

  bool selected(const std::string& call_id) const {
    auto it = entries_.find(call_id);
    if (it == entries_.end()) return false;
    return it->second.in_window && (!w_.participant || it->second.participant_match);
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t selected_count() const {
    std::size_t n = 0;
    for (const auto& [id, e] : entries_)
      if (e.in_window && (!w_.participant || e.participant_match)) ++n;
    return n;
  }

 private:
  Window w_;
  std::unordered_map<std::string, IndexEntry> entries_;
};

std::optional<std::string> call_id_of(const SipLogLine& line) {
  if (!line.sip_fragment) return std::nullopt;
  try {
    return parse_sip(*line.sip_fragment).call_id;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<SipLogLine> select_window(const std::vector<SipLogLine>& lines,
                                      const Window& window) {
  WindowIndex index(window);
  std::vector<std::optional<std::string>> ids;
  ids.reserve(lines.size());
  for (const auto& l : lines) ids.push_back(index.observe(l));
  std::vector<SipLogLine> out;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (ids[i] && index.selected(*ids[i])) out.push_back(lines[i]);
  return out;
}

SelectStats select_window_file(const std::string& path, const Window& window,
                               const std::function<void(const SipLogLine&)>& sink) {
  WindowIndex index(window);
  {
    auto reader = SyslogReader::open_file(path);
    while (auto rec = reader.next()) index.observe(*rec);
  }
  SelectStats stats;
  stats.dialogs_indexed = index.size();
  stats.dialogs_selected = index.selected_count();
  auto reader = SyslogReader::open_file(path);
  while (auto rec = reader.next()) {
    auto id = call_id_of(*rec);
    if (id && index.selected(*id)) {
      sink(*rec);
      ++stats.lines_emitted;
    }
  }
  return stats;
}

std::string bundle_name(std::string_view call_id) {
  std::string out;
  for (char c : call_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                      c == '_' || c == '.' || c == '@';
    out += safe ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out + ".sip";
}

void write_dialog_bundle(std::ostream& out, const SipDialog& dialog) {
  for (const auto& m : dialog.messages) {
    out << "# " << format_iso8601(m.ts_us) << " line " << m.source_seq << '\n';
    if (!m.text.empty()) {
      out << m.text;
    } else {
      out << m.method_or_code() << " Call-ID: " << m.call_id;
    }
    out << "\r\n\r\n";
  }
}

void write_dialog_index(std::ostream& out, const std::vector<SipDialog>& dialogs) {
  out << "call_id,start,end,participants,completeness,message_count\n";
  for (const auto& d : dialogs) {
    std::string parts;
    for (const auto& p : d.participants) {
      if (!parts.empty()) parts += ';';
      parts += p;
    }
    out << text::csv_row({d.call_id, format_iso8601(d.start_ts_us),
                          format_iso8601(d.end_ts_us), parts,
                          std::string(to_string(d.completeness)),
                          std::to_string(d.messages.size())})
        << '\n';
  }
}

}  // namespace tfx::sip
