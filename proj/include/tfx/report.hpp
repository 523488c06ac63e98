#pragma once

// Structured (JSON) renderings of analysis results. Every document carries a
// "schema" member naming its layout and version; docs/schemas.md lists them.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfx/capture.hpp"
#include "tfx/cdr.hpp"
#include "tfx/classifier.hpp"
#include "tfx/media.hpp"
#include "tfx/sip.hpp"
#include "tfx/usage.hpp"

namespace tfx::report {

using nlohmann::json;

json flow_key_json(const capture::FlowKey& key);
json conversations_json(const std::vector<capture::ConversationStats>& convs);
json capture_stats_json(const capture::CaptureStats& stats);

json dns_json(const std::vector<classify::DnsObservation>& dns);
json flow_labels_json(const std::vector<classify::FlowLabel>& labels);
json wt_report_json(const classify::WtReport& report);

json sip_message_json(const sip::SipMessage& m);
json dialog_json(const sip::SipDialog& d, bool with_messages);
json split_json(const sip::SplitResult& result, const sip::StreamStats& stats);

json cdr_json(const cdr::Correlation& correlation, const cdr::CdrSummary& summary,
              const std::vector<cdr::RowError>& errors);

json stream_key_json(const media::StreamKey& key);
json streams_json(const media::StreamSet& streams);
json audio_json(const media::AudioArtifact& audio, const media::MonoBuffer& a,
                const media::MonoBuffer& b);

json usage_summary_json(const std::map<usage::Window, usage::UsageSummary>& summaries);
json top_users_json(const std::vector<usage::RankedUser>& users, usage::Metric metric);
json call_detail_json(const usage::CallDetailExport& call);
json hold_table_json();

}  // namespace tfx::report
