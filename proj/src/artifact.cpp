#include "chainbt/artifact.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "chainbt/backend.hpp"
#include "chainbt/error.hpp"

namespace chainbt::artifact {

nlohmann::json record_to_json(const RunRecord& r) {
    return {{"date", r.date.iso()},
            {"execution_price", r.execution_price},
            {"action", r.action.fraction},
            {"fee_paid", r.fee_paid},
            {"post_cash", r.post_cash},
            {"post_holdings", r.post_holdings},
            {"net_worth", r.net_worth}};
}

RunRecord record_from_json(const nlohmann::json& j) {
    return RunRecord{Date::parse(j.at("date").get<std::string>()),
                     j.at("execution_price").get<double>(),
                     TradeAction{j.at("action").get<double>()},
                     j.at("fee_paid").get<double>(),
                     j.at("post_cash").get<double>(),
                     j.at("post_holdings").get<double>(),
                     j.at("net_worth").get<double>()};
}

nlohmann::json summary_to_json(const metrics::MetricsSummary& m) {
    return {{"total_return_pct", m.total_return},
            {"daily_return_mean_pct", m.daily_return_mean},
            {"daily_return_std_pct", m.daily_return_std},
            {"sharpe", m.sharpe},
            {"sharpe_degenerate", m.sharpe_degenerate}};
}

metrics::MetricsSummary summary_from_json(const nlohmann::json& j) {
    metrics::MetricsSummary m;
    m.total_return = j.at("total_return_pct").get<double>();
    m.daily_return_mean = j.at("daily_return_mean_pct").get<double>();
    m.daily_return_std = j.at("daily_return_std_pct").get<double>();
    m.sharpe = j.at("sharpe").get<double>();
    m.sharpe_degenerate = j.at("sharpe_degenerate").get<bool>();
    return m;
}

nlohmann::json run_to_json(const RunResult& result, const RunMetadata& meta,
                           const nlohmann::json& config) {
    nlohmann::json j;
    j["schema"] = kRunSchema;
    j["config"] = config;
    j["metadata"] = {{"kind", meta.kind},
                     {"asset", result.split.asset},
                     {"split", result.split.name},
                     {"start", result.split.start.iso()},
                     {"end", result.split.end.iso()},
                     {"strategy_id", meta.strategy_id},
                     {"fee_rate", meta.fee_rate},
                     {"capital", meta.capital},
                     {"seed", meta.seed}};
    auto records = nlohmann::json::array();
    for (const auto& r : result.records) records.push_back(record_to_json(r));
    j["records"] = std::move(records);
    j["start_net_worth"] = result.start_net_worth;
    j["final_net_worth"] = result.final_net_worth;
    j["valuation_price"] = result.valuation_price;
    j["summary"] = summary_to_json(metrics::summarize(result));
    return j;
}

RunResult run_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kRunSchema) {
            throw DataError(fmt::format("unsupported run artifact schema '{}'",
                                        j.at("schema").get<std::string>()));
        }
        RunResult r;
        const auto& meta = j.at("metadata");
        r.split = SplitSpec{meta.at("asset").get<std::string>(), meta.at("split").get<std::string>(),
                            Date::parse(meta.at("start").get<std::string>()),
                            Date::parse(meta.at("end").get<std::string>())};
        for (const auto& rec : j.at("records")) r.records.push_back(record_from_json(rec));
        r.start_net_worth = j.at("start_net_worth").get<double>();
        r.final_net_worth = j.at("final_net_worth").get<double>();
        r.valuation_price = j.at("valuation_price").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed run artifact: {}", e.what()));
    }
}

nlohmann::json tune_to_json(const strategies::TuneReport& report, const nlohmann::json& config) {
    nlohmann::json j;
    j["schema"] = kTuneSchema;
    j["config"] = config;
    j["asset"] = report.asset;
    j["validation_split"] = report.validation_split;
    j["selection_metric"] = strategies::metric_name(report.selection_metric);
    auto grid = nlohmann::json::array();
    for (std::size_t i = 0; i < report.grid.size(); ++i) {
        grid.push_back({{"spec", strategies::spec_to_json(report.grid[i])},
                        {"id", report.grid[i].id()},
                        {"summary", summary_to_json(report.scores[i])}});
    }
    j["grid"] = std::move(grid);
    j["chosen_index"] = report.chosen_index;
    j["chosen"] = strategies::spec_to_json(report.chosen);
    j["chosen_id"] = report.chosen.id();
    return j;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string content_name(std::string_view prefix, const nlohmann::json& config) {
    return fmt::format("{}-{}", prefix, agents::sha256_hex(dump(config)).substr(0, 16));
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

}  // namespace chainbt::artifact
