#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainbt/agents.hpp"
#include "chainbt/error.hpp"
#include "chainbt/engine.hpp"
#include "chainbt/metrics.hpp"
#include "chainbt/strategies.hpp"

// The operations behind the command-line tool. Each command takes a fully
// resolved RunConfig, produces its artifact(s) and, when `out_dir` is set,
// writes them under content-addressed names.
namespace chainbt::commands {

struct RunConfig {
    std::string asset = "ETH";
    std::string split = "bullish";
    std::optional<strategies::StrategySpec> strategy;
    std::optional<std::string> ablation;  // agent runs
    double fee_rate = 0.002;
    double capital = 1'000'000.0;
    int info_lag_days = 1;
    long seed = 0;

    std::string market_path;
    std::string txn_stats_path;    // optional
    std::string news_path;         // optional
    std::string splits_path;       // optional; built-in table when empty
    std::string predictions_path;  // forecaster with predictor=file
    std::string backend_path;      // agent runs against a live endpoint
    std::string mock_path;         // agent runs against the fixture mock
    std::string cache_path;        // tuned-parameter cache
    std::string out_dir;

    // Agent pipeline knobs.
    std::size_t recent_prices = 7;
    int news_window_days = 1;
    std::size_t news_char_budget = 6000;

    [[nodiscard]] nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    // Fills market/txn/news paths from `<data_dir>/{market,txn,news}/<ASSET>.*`
    // where not set explicitly. Optional files are only used if present.
    void resolve_data_paths(const std::filesystem::path& data_dir);

    // Checks ranges and that referenced files exist. Throws ConfigError.
    void validate() const;
};

Dataset load_dataset(const RunConfig& config);
SplitSpec resolve_split(const RunConfig& config);
RunOptions run_options(const RunConfig& config);

struct BacktestOutput {
    RunResult result;
    metrics::MetricsSummary summary;
    nlohmann::json artifact;
    std::optional<std::filesystem::path> artifact_path;
};

BacktestOutput cmd_backtest(const RunConfig& config);

struct TuneOutput {
    strategies::TuneReport report;
    nlohmann::json artifact;
    std::optional<std::filesystem::path> artifact_path;
};

// Tunes `config.strategy`'s kind on the asset's validation split over
// `grid` (default grid when empty) and stores the choice in the cache file
// when one is configured.
TuneOutput cmd_tune(const RunConfig& config, std::vector<strategies::StrategySpec> grid = {},
                    strategies::SelectionMetric metric = strategies::SelectionMetric::total_return);

struct CompareOutput {
    std::string table;
    std::vector<metrics::ConditionRow> rows;
    std::size_t fresh_runs = 0;
    std::size_t cached_runs = 0;
};

// Runs every strategy in `strategies` on each of `conditions` (split names)
// for config.asset. Parameters come from the tuned cache when present,
// otherwise from tuning on the validation split. With out_dir set, results
// already on disk under their content address are loaded, not re-run.
CompareOutput cmd_compare(const RunConfig& config,
                          const std::vector<strategies::StrategyKind>& kinds,
                          const std::vector<std::string>& conditions,
                          metrics::TableFormat format = metrics::TableFormat::markdown);

struct AgentRunOutput {
    RunResult result;
    metrics::MetricsSummary summary;
    nlohmann::json artifact;
    std::vector<agents::ModelExchange> audit_log;
    std::optional<std::filesystem::path> artifact_path;
    std::optional<std::filesystem::path> audit_path;
};

// Raised when an agent run aborts; the partial audit log is attached (and
// already written when out_dir is set).
class AgentRunFailure : public BackendError {
public:
    AgentRunFailure(const std::string& what, std::vector<agents::ModelExchange> log,
                    std::optional<std::filesystem::path> audit_path)
        : BackendError(what), log_(std::move(log)), audit_path_(std::move(audit_path)) {}

    [[nodiscard]] const std::vector<agents::ModelExchange>& audit_log() const { return log_; }
    [[nodiscard]] const std::optional<std::filesystem::path>& audit_path() const { return audit_path_; }

private:
    std::vector<agents::ModelExchange> log_;
    std::optional<std::filesystem::path> audit_path_;
};

// `backend` overrides the configured mock/endpoint (used by tests).
AgentRunOutput cmd_agent_run(const RunConfig& config,
                             std::shared_ptr<agents::ChatBackend> backend = nullptr);

}  // namespace chainbt::commands
