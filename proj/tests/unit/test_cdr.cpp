#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "tfx/cdr.hpp"
#include "tfx/forge.hpp"

using namespace tfx;
using namespace tfx::cdr;

namespace {

CdrParse parse_text(const std::string& csv, const AliasMap& aliases = {}) {
  std::istringstream in(csv);
  return parse_cdr(in, aliases);
}

const std::string kHeader =
    "CALL END TIME,ENDPOINT TYPE,IP GROUP,CALLER,CALLEE,DIRECTION,REMOTE IP,DURATION,TERMINATION REASON,SESSION ID\n";

}  // namespace

TEST_CASE("reference history correlates to five calls") {
  forge::CdrSpec spec;
  spec.reference = true;
  const auto fx = forge::gen_cdr(spec);
  const auto parsed = parse_text(fx.csv);
  CHECK(parsed.errors.empty());
  REQUIRE(parsed.legs.size() == 10);
  const auto corr = correlate_legs(parsed.legs);
  CHECK(corr.orphans.empty());
  REQUIRE(corr.calls.size() == 5);
  const auto sum = summarize_cdr(corr.calls);
  CHECK(sum.by_outcome.at(Outcome::COMPLETED) == 1);
  CHECK(sum.by_outcome.at(Outcome::NO_ANSWER) == 2);
  CHECK(sum.by_outcome.at(Outcome::FAILED) == 1);
  CHECK(sum.by_outcome.at(Outcome::BUSY) == 1);
  CHECK(sum.total_duration_s == 410);
  for (std::size_t i = 0; i < corr.calls.size(); ++i) {
    const auto& c = corr.calls[i];
    CHECK(c.session_id == fx.calls[i].session_id);
    CHECK(c.outcome == fx.calls[i].outcome);
    CHECK(c.overall_direction == fx.calls[i].direction);
    CHECK(c.duration_s == fx.calls[i].duration_s);
    CHECK(c.teams_leg.ip_group != c.pbx_leg.ip_group);
  }
  const auto& done = corr.calls[1];
  CHECK(done.session_id == "db01ef9:65");
  CHECK(done.overall_direction == CallDirection::TEAMS_TO_PSTN);
  CHECK(done.duration_s == 410);
  // The exported remote IP keeps its truncated form.
  CHECK(done.pbx_leg.remote_ip == "132.100.50");
  CHECK_FALSE(done.pbx_leg.remote_addr.has_value());
  CHECK(done.teams_leg.remote_addr == Ipv4(52, 114, 75, 24));
}

TEST_CASE("correlation ignores input order and conserves legs") {
  forge::CdrSpec spec;
  spec.seed = 99;
  spec.calls = 80;
  const auto fx = forge::gen_cdr(spec);
  auto legs = parse_text(fx.csv).legs;
  // Orphans: one lone leg and one session with three legs.
  auto lone = legs.front();
  lone.session_id = "lonely:1";
  legs.push_back(lone);
  for (int i = 0; i < 3; ++i) {
    auto extra = legs[static_cast<std::size_t>(i)];
    extra.session_id = "triple:1";
    legs.push_back(extra);
  }
  const auto base = correlate_legs(legs);
  const auto base_sum = summarize_cdr(base.calls);
  CHECK(base.calls.size() == 80);
  CHECK(2 * base.calls.size() + base.orphan_legs() == legs.size());
  CHECK(base.orphans.size() == 2);

  std::mt19937_64 rng(1234);
  for (int round = 0; round < 1000; ++round) {
    std::shuffle(legs.begin(), legs.end(), rng);
    const auto c = correlate_legs(legs);
    REQUIRE(c.calls.size() == base.calls.size());
    REQUIRE(2 * c.calls.size() + c.orphan_legs() == legs.size());
    for (std::size_t i = 0; i < c.calls.size(); ++i) {
      REQUIRE(c.calls[i].session_id == base.calls[i].session_id);
      REQUIRE(c.calls[i].outcome == base.calls[i].outcome);
      REQUIRE(c.calls[i].duration_s == base.calls[i].duration_s);
      REQUIRE(c.calls[i].overall_direction == base.calls[i].overall_direction);
      REQUIRE(c.calls[i].teams_leg.source_row == base.calls[i].teams_leg.source_row);
    }
    const auto s = summarize_cdr(c.calls);
    REQUIRE(s.by_outcome == base_sum.by_outcome);
    REQUIRE(s.total_duration_s == base_sum.total_duration_s);
  }
}

TEST_CASE("generated calls match the generator's truth") {
  forge::CdrSpec spec;
  spec.seed = 3;
  spec.calls = 200;
  const auto fx = forge::gen_cdr(spec);
  const auto corr = correlate_legs(parse_text(fx.csv).legs);
  REQUIRE(corr.calls.size() == fx.calls.size());
  std::map<Outcome, std::size_t> counts;
  for (std::size_t i = 0; i < fx.calls.size(); ++i) {
    CHECK(corr.calls[i].session_id == fx.calls[i].session_id);
    CHECK(corr.calls[i].outcome == fx.calls[i].outcome);
    CHECK(corr.calls[i].duration_s == fx.calls[i].duration_s);
    ++counts[corr.calls[i].outcome];
  }
  const auto sum = summarize_cdr(corr.calls);
  std::size_t total = 0;
  for (const auto& [o, n] : sum.by_outcome) total += n;
  CHECK(total == sum.total_calls);
  CHECK(sum.by_outcome == counts);
}

TEST_CASE("reason disagreement prefers the PSTN side") {
  const std::string csv = kHeader +
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,,NO_ANSWER,s1\n"
                          "10:00:00.000,SBC,IPG_PBX,1,2,Outgoing,10.0.0.1,,BUSY,s1\n"
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,00:00:10,NORMAL_CALL_CLEAR,s2\n"
                          "10:00:00.000,SBC,IPG_PBX,1,2,Outgoing,10.0.0.1,,NO_ANSWER,s2\n";
  const auto corr = correlate_legs(parse_text(csv).legs);
  REQUIRE(corr.calls.size() == 2);
  CHECK(corr.calls[0].outcome == Outcome::BUSY);
  CHECK(corr.calls[0].reason_mismatch);
  CHECK(corr.calls[1].outcome == Outcome::NO_ANSWER);
  CHECK(corr.calls[1].reason_mismatch);
  CHECK(corr.calls[1].duration_s == 10);
}

TEST_CASE("direction comes from the Teams leg") {
  const std::string csv = kHeader +
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Outgoing,52.114.75.24,,NO_ANSWER,a\n"
                          "10:00:00.000,SBC,IPG_PBX,1,2,Incoming,10.0.0.1,,NO_ANSWER,a\n"
                          "10:00:00.000,SBC,IPG_X,1,2,Incoming,52.114.75.24,,NO_ANSWER,b\n"
                          "10:00:00.000,SBC,IPG_Y,1,2,Outgoing,10.0.0.1,,NO_ANSWER,b\n";
  const auto corr = correlate_legs(parse_text(csv).legs);
  REQUIRE(corr.calls.size() == 1);
  CHECK(corr.calls[0].overall_direction == CallDirection::PSTN_TO_TEAMS);
  REQUIRE(corr.orphans.size() == 1);
  CHECK(corr.orphans[0].session_id == "b");

  GroupConfig cfg;
  cfg.teams_groups = {"IPG_X"};
  cfg.pbx_groups = {"IPG_Y"};
  const auto renamed = correlate_legs(parse_text(csv).legs, cfg);
  REQUIRE(renamed.calls.size() == 1);
  CHECK(renamed.calls[0].session_id == "b");
  CHECK(renamed.calls[0].overall_direction == CallDirection::TEAMS_TO_PSTN);
}

TEST_CASE("row problems are collected; missing columns are fatal") {
  const std::string csv = kHeader +
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Sideways,52.114.75.24,,NO_ANSWER,a\n"
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,,NORMAL_CALL_CLEAR,b\n"
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,1:2:3,NO_ANSWER,c\n"
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,,NO_ANSWER,\n"
                          "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,,NO_ANSWER,ok\n";
  const auto p = parse_text(csv);
  CHECK(p.legs.size() == 1);
  CHECK(p.errors.size() == 4);
  CHECK(p.errors[0].row == 2);
  for (const auto& l : p.legs) {
    CHECK_FALSE(l.session_id.empty());
    if (!l.duration_s) CHECK(outcome_for_reason(l.termination_reason) != Outcome::COMPLETED);
  }

  try {
    parse_text("CALLER,CALLEE\n1,2\n");
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingColumn);
  }
}

TEST_CASE("header aliases and spelling variants") {
  const std::string csv =
      "call_end_time,endpoint type,ip_group,Caller,Callee,Direction,Remote IP,Duration,Termination Reason,Sess\n"
      "10:00:00.000,SBC,IPG_TEAMS,1,2,Incoming,52.114.75.24,,NO_ANSWER,z\n";
  CHECK_THROWS_AS(parse_text(csv), Error);
  const auto p = parse_text(csv, {{"sess", "session id"}});
  REQUIRE(p.legs.size() == 1);
  CHECK(p.legs[0].session_id == "z");
  CHECK(p.legs[0].call_end_us == TimestampUs{36'000'000'000});
}

TEST_CASE("HH:MM:SS round trip over the whole range") {
  for (std::int64_t s = 0; s < 100 * 3600; s += 7) {
    const auto text = format_hms(s);
    REQUIRE(parse_hms(text) == s);
    REQUIRE(format_hms(*parse_hms(text)) == text);
  }
  CHECK(format_hms(410) == "00:06:50");
  CHECK(parse_hms("99:59:59") == 99 * 3600 + 59 * 60 + 59);
  CHECK_FALSE(parse_hms("00:60:00"));
  CHECK_FALSE(parse_hms("0:06:50"));
  CHECK_FALSE(parse_hms("100:00:00"));
}
