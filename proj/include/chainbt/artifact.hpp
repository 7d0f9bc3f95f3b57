#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "chainbt/engine.hpp"
#include "chainbt/metrics.hpp"
#include "chainbt/strategies.hpp"

// JSON artifacts written by the command layer. Every document carries a
// "schema" tag; readers reject schemas they do not know.
namespace chainbt::artifact {

inline constexpr std::string_view kRunSchema = "chainbt.run_result/1";
inline constexpr std::string_view kTuneSchema = "chainbt.tune_report/1";

struct RunMetadata {
    std::string kind = "backtest";  // or "agent_run"
    std::string strategy_id;
    double fee_rate = 0;
    double capital = 0;
    long seed = 0;
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const metrics::MetricsSummary& m);
metrics::MetricsSummary summary_from_json(const nlohmann::json& j);

// `config` is the fully resolved run configuration that produced `result`.
nlohmann::json run_to_json(const RunResult& result, const RunMetadata& meta,
                           const nlohmann::json& config);
RunResult run_from_json(const nlohmann::json& j);

nlohmann::json tune_to_json(const strategies::TuneReport& report, const nlohmann::json& config);

// Deterministic text form: two-space indent, sorted keys, trailing newline.
std::string dump(const nlohmann::json& j);

// "<prefix>-<first 16 hex digits of sha256(dump(config))>".
std::string content_name(std::string_view prefix, const nlohmann::json& config);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace chainbt::artifact
