#include <doctest.h>

#include <sstream>

#include "tfx/common.hpp"
#include "tfx/text.hpp"

using namespace tfx;

TEST_CASE("dotted quads") {
  CHECK(Ipv4::parse("52.114.74.99") == Ipv4(52, 114, 74, 99));
  CHECK(Ipv4(192, 168, 1, 5).to_string() == "192.168.1.5");
  CHECK_FALSE(Ipv4::parse("1.2.3"));
  CHECK_FALSE(Ipv4::parse("1.2.3.256"));
  CHECK_FALSE(Ipv4::parse("1.2.3.4 "));
  CHECK_FALSE(Ipv4::parse("01.2.3.4.5"));
  CHECK_THROWS_AS(Ipv4::must_parse("x"), Error);
}

TEST_CASE("ISO-8601 timestamps") {
  const auto t = parse_iso8601("2021-07-20T13:00:00.123456Z");
  REQUIRE(t);
  CHECK(t->us == 1626786000123456);
  CHECK(t->had_zone);
  CHECK(format_iso8601(t->us) == "2021-07-20T13:00:00.123456Z");
  const auto local = parse_iso8601("2021-07-20 15:00:00+02:00");
  REQUIRE(local);
  CHECK(local->us == 1626786000000000);
  const auto bare = parse_iso8601("2021-07-20T13:00:00.5");
  REQUIRE(bare);
  CHECK_FALSE(bare->had_zone);
  CHECK(bare->us == 1626786000500000);
  CHECK_FALSE(parse_iso8601("2021-13-01T00:00:00Z"));
  CHECK_FALSE(parse_iso8601("yesterday"));
  CHECK(format_seconds(727369) == "0.727369");
  CHECK(format_seconds(77900, 4) == "0.0779");
}

TEST_CASE("CSV reading and writing") {
  std::istringstream in("\xEF\xBB\xBF" "a,\"b,c\",\"say \"\"hi\"\"\"\n\"multi\nline\",2,3\n");
  text::CsvReader r(in);
  std::vector<std::string> f;
  REQUIRE(r.next(f));
  CHECK(f == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  REQUIRE(r.next(f));
  CHECK(f[0] == "multi\nline");
  CHECK(r.record_line() == 2);
  CHECK_FALSE(r.next(f));
  CHECK(text::csv_row({"x", "y,z", "q\""}) == "x,\"y,z\",\"q\"\"\"");
  CHECK(text::csv_field("a\tb", '\t') == "\"a\tb\"");
}

TEST_CASE("string helpers") {
  CHECK(text::trim("  a b \t") == "a b");
  CHECK(text::iequals("IPG_Teams", "ipg_teams"));
  CHECK(text::istarts_with("Call-ID: x", "call-id"));
  CHECK(text::split("a||b", '|').size() == 3);
  CHECK(to_string(ErrorCode::BadMagic) == "BadMagic");
}
