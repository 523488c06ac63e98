#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tfx {

using Bytes = std::vector<std::uint8_t>;

/// Microseconds since the Unix epoch (or since midnight for time-of-day
/// values such as CDR end times).
using TimestampUs = std::int64_t;

enum class ErrorCode {
  BadMagic,
  TruncatedHeader,
  TruncatedPacket,
  ClientNotSeen,
  NotSip,
  MissingCallId,
  InvalidWindow,
  MissingColumn,
  UnsupportedCodec,
  RateMismatch,
  FormatError,
  SchemaError,
  UnknownScenario,
  InvalidSpec,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// IPv4 address in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) |
              (std::uint32_t{c} << 8) | std::uint32_t{d}) {}

  static std::optional<Ipv4> parse(std::string_view text);
  /// Throws Error(FormatError) when text is not a dotted quad.
  static Ipv4 must_parse(std::string_view text);

  std::string to_string() const;

  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;
};

using MacAddress = std::array<std::uint8_t, 6>;

std::string mac_to_string(const MacAddress& mac);

/// Seconds with microsecond resolution, e.g. 0.727369.
std::string format_seconds(TimestampUs us, int decimals = 6);

/// "2021-07-20T10:00:00.123456Z".
std::string format_iso8601(TimestampUs us);

struct ParsedTime {
  TimestampUs us = 0;
  bool had_zone = false;
};

/// Accepts "YYYY-MM-DDTHH:MM:SS[.frac][Z|+HH:MM|-HH:MM]" (a space may replace
/// the T). Values without a zone are taken as UTC and reported via had_zone.
std::optional<ParsedTime> parse_iso8601(std::string_view text);

}  // namespace tfx
