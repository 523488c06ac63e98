#include "tfx/common.hpp"

#include <chrono>
#include <charconv>
#include <cstdio>

namespace tfx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::TruncatedPacket: return "TruncatedPacket";
    case ErrorCode::ClientNotSeen: return "ClientNotSeen";
    case ErrorCode::NotSip: return "NotSip";
    case ErrorCode::MissingCallId: return "MissingCallId";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnsupportedCodec: return "UnsupportedCodec";
    case ErrorCode::RateMismatch: return "RateMismatch";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::optional<Ipv4> Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || next == p || next - p > 3 || part > 255)
      return std::nullopt;
    value = (value << 8) | part;
    p = next;
  }
  if (p != end) return std::nullopt;
  return Ipv4{value};
}

Ipv4 Ipv4::must_parse(std::string_view text) {
  auto addr = parse(text);
  if (!addr)
    throw Error(ErrorCode::FormatError,
                "not an IPv4 address: '" + std::string(text) + "'");
  return *addr;
}

std::string Ipv4::to_string() const {
  char buf[16];
  int n = std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (value >> 24) & 0xff,
                        (value >> 16) & 0xff, (value >> 8) & 0xff, value & 0xff);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string mac_to_string(const MacAddress& mac) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0],
                mac[1], mac[2], mac[3], mac[4], mac[5]);
  return buf;
}

std::string format_seconds(TimestampUs us, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals,
                static_cast<double>(us) / 1e6);
  return buf;
}

std::string format_iso8601(TimestampUs us) {
  using namespace std::chrono;
  const sys_time<microseconds> tp{microseconds{us}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss tod{tp - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%06dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

namespace {

bool read_fixed(std::string_view& s, std::size_t width, int& out) {
  if (s.size() < width) return false;
  int value = 0;
  for (std::size_t i = 0; i < width; ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  s.remove_prefix(width);
  return true;
}

bool expect(std::string_view& s, char c) {
  if (s.empty() || s.front() != c) return false;
  s.remove_prefix(1);
  return true;
}

}  // namespace

std::optional<ParsedTime> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h, mi, sec;
  if (!read_fixed(s, 4, y) || !expect(s, '-') || !read_fixed(s, 2, mo) ||
      !expect(s, '-') || !read_fixed(s, 2, d))
    return std::nullopt;
  if (s.empty() || (s.front() != 'T' && s.front() != ' ')) return std::nullopt;
  s.remove_prefix(1);
  if (!read_fixed(s, 2, h) || !expect(s, ':') || !read_fixed(s, 2, mi) ||
      !expect(s, ':') || !read_fixed(s, 2, sec))
    return std::nullopt;
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
  std::int64_t frac_us = 0;
  if (!s.empty() && (s.front() == '.' || s.front() == ',')) {
    s.remove_prefix(1);
    int digits = 0;
    std::int64_t scale = 100000;
    while (!s.empty() && s.front() >= '0' && s.front() <= '9') {
      if (digits < 6) frac_us += (s.front() - '0') * scale;
      scale /= 10;
      ++digits;
      s.remove_prefix(1);
    }
    if (digits == 0) return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  ParsedTime out;
  std::int64_t offset_s = 0;
  if (!s.empty()) {
    if (s.front() == 'Z') {
      s.remove_prefix(1);
      out.had_zone = true;
    } else if (s.front() == '+' || s.front() == '-') {
      const int sign = s.front() == '+' ? 1 : -1;
      s.remove_prefix(1);
      int oh, om;
      if (!read_fixed(s, 2, oh)) return std::nullopt;
      expect(s, ':');
      if (!read_fixed(s, 2, om)) return std::nullopt;
      offset_s = sign * (oh * 3600 + om * 60);
      out.had_zone = true;
    }
  }
  if (!s.empty()) return std::nullopt;
  const auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} +
                    seconds{sec} - seconds{offset_s};
  out.us = duration_cast<microseconds>(secs).count() + frac_us;
  return out;
}

}  // namespace tfx
