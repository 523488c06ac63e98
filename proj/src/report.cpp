#include "tfx/report.hpp"

namespace tfx::report {

namespace {

json addrs(const std::vector<Ipv4>& v) {
  json out = json::array();
  for (const auto& a : v) out.push_back(a.to_string());
  return out;
}

json optional_seconds(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json flow_key_json(const capture::FlowKey& k) {
  return {{"address_a", k.addr_a.to_string()},
          {"port_a", k.port_a},
          {"address_b", k.addr_b.to_string()},
          {"port_b", k.port_b},
          {"proto", std::string(capture::to_string(k.proto))}};
}

json conversations_json(const std::vector<capture::ConversationStats>& convs) {
  json rows = json::array();
  for (const auto& c : convs) {
    json r = flow_key_json(c.key);
    r["packets"] = c.packets_total;
    r["bytes"] = c.bytes_total;
    r["packets_ab"] = c.packets_ab;
    r["bytes_ab"] = c.bytes_ab;
    r["packets_ba"] = c.packets_ba;
    r["bytes_ba"] = c.bytes_ba;
    r["rel_start"] = format_seconds(c.rel_start_us, 6);
    r["duration"] = format_seconds(c.duration_us, 6);
    r["first_packet"] = format_iso8601(c.first_ts_us);
    r["bits_per_second_ab"] = optional_seconds(c.bits_per_second_ab());
    r["bits_per_second_ba"] = optional_seconds(c.bits_per_second_ba());
    rows.push_back(std::move(r));
  }
  return {{"schema", "tfx.conversations/1"}, {"conversations", rows}};
}

json capture_stats_json(const capture::CaptureStats& s) {
  return {{"packets", s.packets},
          {"ip_absent", s.ip_absent},
          {"ipv6", s.ipv6},
          {"unsupported_link", s.unsupported_link},
          {"truncated", s.truncated}};
}

json dns_json(const std::vector<classify::DnsObservation>& dns) {
  json out = json::array();
  for (const auto& d : dns) {
    char txid[8];
    std::snprintf(txid, sizeof txid, "0x%04x", d.txid);
    out.push_back({{"time", format_iso8601(d.ts_us)},
                   {"query", d.query_name},
                   {"txid", txid},
                   {"answered", d.answered},
                   {"answers", addrs(d.answers)},
                   {"aliases", d.aliases},
                   {"client", d.client ? json(d.client->to_string()) : json(nullptr)},
                   {"packet", d.packet_index}});
  }
  return out;
}

json flow_labels_json(const std::vector<classify::FlowLabel>& labels) {
  json rows = json::array();
  for (const auto& l : labels) {
    json r = flow_key_json(l.key);
    r["label"] = std::string(classify::to_string(l.label));
    r["matched_range"] = l.matched_range ? json(*l.matched_range) : json(nullptr);
    r["dns_names"] = l.dns_names;
    r["remote"] = l.remote ? json(l.remote->to_string()) : json(nullptr);
    r["media_candidate"] = l.media_candidate;
    rows.push_back(std::move(r));
  }
  return {{"schema", "tfx.flow-labels/1"}, {"flows", rows}};
}

json wt_report_json(const classify::WtReport& r) {
  json sessions = json::array();
  for (const auto& s : r.sessions) {
    json flows = json::array();
    for (const auto& k : s.flows) flows.push_back(flow_key_json(k));
    sessions.push_back({{"start", format_iso8601(s.start_ts_us)},
                        {"end", format_iso8601(s.end_ts_us)},
                        {"flows", flows},
                        {"wt_hub_addrs", addrs(s.wt_hub_addrs)},
                        {"dns_hits", s.dns_hits}});
  }
  json media = json::array();
  for (const auto& k : r.media_candidates) media.push_back(flow_key_json(k));
  return {{"schema", "tfx.wt-report/1"},
          {"client_addr", r.client_addr.to_string()},
          {"verdict", std::string(classify::to_string(r.verdict))},
          {"sessions", sessions},
          {"sip_packets_found", r.sip_packets_found},
          {"sip_exemplars", r.sip_exemplars},
          {"peer_direct_traffic_found", r.peer_direct_traffic_found},
          {"dns_hits", r.dns_hits},
          {"resolved_wt_addrs", addrs(r.resolved_wt_addrs)},
          {"media_candidates", media},
          {"notes", r.notes}};
}

json sip_message_json(const sip::SipMessage& m) {
  json j = {{"kind", m.kind == sip::MessageKind::REQUEST ? "REQUEST" : "RESPONSE"},
            {"method_or_code", m.method_or_code()},
            {"from", m.from_uri},
            {"to", m.to_uri},
            {"cseq", std::to_string(m.cseq) + " " + m.cseq_method},
            {"time", format_iso8601(m.ts_us)},
            {"line", m.source_seq}};
  if (m.body_summary) j["body_summary"] = *m.body_summary;
  return j;
}

json dialog_json(const sip::SipDialog& d, bool with_messages) {
  json j = {{"call_id", d.call_id},
            {"start", format_iso8601(d.start_ts_us)},
            {"end", format_iso8601(d.end_ts_us)},
            {"participants", d.participants},
            {"completeness", std::string(sip::to_string(d.completeness))},
            {"message_count", d.messages.size()}};
  if (with_messages) {
    json msgs = json::array();
    for (const auto& m : d.messages) msgs.push_back(sip_message_json(m));
    j["messages"] = msgs;
  }
  return j;
}

json split_json(const sip::SplitResult& result, const sip::StreamStats& stats) {
  json dialogs = json::array();
  for (const auto& d : result.dialogs) dialogs.push_back(dialog_json(d, false));
  return {{"schema", "tfx.sip-dialogs/1"},
          {"dialogs", dialogs},
          {"messages", result.messages},
          {"unparseable", result.unparseable},
          {"non_sip_records", result.non_sip_records},
          {"stream",
           {{"physical_lines", stats.physical_lines},
            {"records", stats.records},
            {"sip_records", stats.sip_records},
            {"replaced_bytes", stats.replaced_bytes},
            {"zone_assumed", stats.zone_assumed},
            {"bad_headers", stats.bad_headers},
            {"bytes", stats.bytes}}}};
}

json cdr_json(const cdr::Correlation& c, const cdr::CdrSummary& s,
              const std::vector<cdr::RowError>& errors) {
  auto leg_json = [](const cdr::CdrLeg& l) {
    return json{{"ip_group", l.ip_group},
                {"caller", l.caller},
                {"callee", l.callee},
                {"direction", std::string(cdr::to_string(l.direction))},
                {"remote_ip", l.remote_ip},
                {"termination_reason", l.termination_reason},
                {"call_end_time", l.call_end_time},
                {"duration", l.duration_s ? json(cdr::format_hms(*l.duration_s)) : json(nullptr)},
                {"row", l.source_row}};
  };
  json calls = json::array();
  for (const auto& call : c.calls)
    calls.push_back({{"session_id", call.session_id},
                     {"direction", std::string(cdr::to_string(call.overall_direction))},
                     {"outcome", std::string(cdr::to_string(call.outcome))},
                     {"duration_s", call.duration_s ? json(*call.duration_s) : json(nullptr)},
                     {"reason_mismatch", call.reason_mismatch},
                     {"teams_leg", leg_json(call.teams_leg)},
                     {"pbx_leg", leg_json(call.pbx_leg)}});
  json orphans = json::array();
  for (const auto& o : c.orphans) {
    json legs = json::array();
    for (const auto& l : o.legs) legs.push_back(leg_json(l));
    orphans.push_back({{"session_id", o.session_id}, {"diagnostic", o.diagnostic}, {"legs", legs}});
  }
  json by_outcome = json::object(), by_direction = json::object();
  for (const auto& [o, n] : s.by_outcome) by_outcome[std::string(cdr::to_string(o))] = n;
  for (const auto& [d, n] : s.by_direction) by_direction[std::string(cdr::to_string(d))] = n;
  json errs = json::array();
  for (const auto& e : errors) errs.push_back({{"row", e.row}, {"message", e.message}});
  return {{"schema", "tfx.cdr-correlation/1"},
          {"calls", calls},
          {"orphans", orphans},
          {"orphan_legs", c.orphan_legs()},
          {"row_errors", errs},
          {"summary",
           {{"total_calls", s.total_calls},
            {"by_outcome", by_outcome},
            {"by_direction", by_direction},
            {"total_duration_s", s.total_duration_s}}}};
}

json stream_key_json(const media::StreamKey& k) {
  return {{"ssrc", k.ssrc},
          {"trace_pt", k.trace_pt},
          {"src_id", k.src_id},
          {"payload_type", k.payload_type},
          {"codec", media::codec_name(k.payload_type)}};
}

json streams_json(const media::StreamSet& set) {
  json streams = json::array();
  for (const auto& s : set.streams) {
    json gaps = json::array();
    for (const auto& g : s.gaps) gaps.push_back({{"after_seq", g.after_seq}, {"missing", g.missing_count}});
    json j = stream_key_json(s.key);
    j["packets"] = s.packets.size();
    j["duplicates_removed"] = s.duplicates_removed;
    j["gaps"] = gaps;
    if (!s.packets.empty()) j["first_arrival"] = format_iso8601(s.packets.front().arrival_ts_us);
    streams.push_back(std::move(j));
  }
  json errors = json::array();
  for (const auto& e : set.errors) errors.push_back({{"packet", e.packet_index}, {"message", e.message}});
  return {{"schema", "tfx.rtp-streams/1"}, {"streams", streams}, {"errors", errors}};
}

json audio_json(const media::AudioArtifact& audio, const media::MonoBuffer& a,
                const media::MonoBuffer& b) {
  auto channel = [](const media::MonoBuffer& m) {
    return json{{"source", m.source ? stream_key_json(*m.source) : json(nullptr)},
                {"samples", m.samples.size()},
                {"received_samples", m.received_samples},
                {"gap_fill_samples", m.gap_fill_samples},
                {"start", format_iso8601(m.start_us)}};
  };
  return {{"schema", "tfx.audio/1"},
          {"sample_rate", audio.sample_rate},
          {"channels", audio.channels},
          {"frames", audio.frames()},
          {"alignment_offset_samples", audio.offset_samples},
          {"delayed_channel", audio.delayed_channel == 0 ? "A" : "B"},
          {"channel_a", channel(a)},
          {"channel_b", channel(b)}};
}

json usage_summary_json(const std::map<usage::Window, usage::UsageSummary>& summaries) {
  json windows = json::object();
  for (const auto& [w, s] : summaries) {
    json devices = json::object();
    for (const auto& [d, n] : s.device_counts) devices[std::string(usage::to_string(d))] = n;
    windows[std::string(usage::to_string(w))] = {
        {"total_users", s.total_users},
        {"total_one_to_one_calls", s.total_one_to_one_calls},
        {"total_audio", usage::format_duration_text(s.total_audio_s)},
        {"total_audio_s", s.total_audio_s},
        {"total_video", usage::format_duration_text(s.total_video_s)},
        {"total_video_s", s.total_video_s},
        {"avg_audio_hours_per_user", s.avg_audio_hours_per_user},
        {"avg_video_hours_per_user", s.avg_video_hours_per_user},
        {"device_counts", devices},
        {"pstn_calls_total", s.pstn_calls_total},
        {"pstn_duration_total", usage::format_duration_text(s.pstn_duration_total_s)},
        {"pstn_duration_total_s", s.pstn_duration_total_s}};
  }
  return {{"schema", "tfx.usage-summary/1"}, {"windows", windows}};
}

json top_users_json(const std::vector<usage::RankedUser>& users, usage::Metric metric) {
  json rows = json::array();
  for (const auto& u : users)
    rows.push_back({{"rank", u.rank},
                    {"user", u.user_id},
                    {"audio", u.audio_text},
                    {"video", u.video_text},
                    {"audio_s", u.audio_seconds},
                    {"video_s", u.video_seconds}});
  return {{"schema", "tfx.top-users/1"},
          {"metric", metric == usage::Metric::AUDIO ? "AUDIO" : "VIDEO"},
          {"users", rows}};
}

json call_detail_json(const usage::CallDetailExport& call) {
  auto party = [](const std::optional<usage::PartyDetails>& p) -> json {
    if (!p) return nullptr;
    json j = json::object();
    for (const auto& name : usage::party_field_names()) {
      const auto* v = usage::party_field(*p, name);
      j[name] = (v && *v) ? json(**v) : json(nullptr);
    }
    return j;
  };
  return {{"schema", "tfx.call-detail/1"},
          {"start", call.start ? json(*call.start) : json(nullptr)},
          {"duration_s", call.duration_s ? json(*call.duration_s) : json(nullptr)},
          {"audio_quality", call.audio_quality ? json(*call.audio_quality) : json(nullptr)},
          {"scenario", std::string(usage::to_string(call.scenario))},
          {"caller", party(call.caller)},
          {"callee", party(call.callee)},
          {"notes", usage::availability_notes(call)}};
}

json hold_table_json() {
  json rows = json::array();
  for (const auto& e : usage::hold_table())
    rows.push_back({{"scenario", e.scenario}, {"short_name", e.short_name}, {"location", e.location}});
  return {{"schema", "tfx.hold-locations/1"}, {"locations", rows}};
}

}  // namespace tfx::report
