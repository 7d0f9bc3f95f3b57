#include "chainbt/commands.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <fmt/format.h>

#include "chainbt/artifact.hpp"
#include "chainbt/error.hpp"

namespace chainbt::commands {

namespace {

namespace fs = std::filesystem;
using strategies::StrategyKind;
using strategies::StrategySpec;

std::string display_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::buy_and_hold: return "Buy and hold";
        case StrategyKind::sma: return "SMA";
        case StrategyKind::slma: return "SLMA";
        case StrategyKind::macd: return "MACD";
        case StrategyKind::bollinger: return "Bollinger Bands";
        case StrategyKind::forecaster: return "Forecaster";
    }
    return "?";
}

void require_file(const std::string& path, std::string_view what) {
    if (!path.empty() && !fs::is_regular_file(path)) {
        throw DataError(fmt::format("{} file not found: {}", what, path));
    }
}

std::optional<fs::path> write_doc(const RunConfig& config, const std::string& name,
                                  const nlohmann::json& doc) {
    if (config.out_dir.empty()) return std::nullopt;
    auto path = fs::path(config.out_dir) / (name + ".json");
    artifact::write_text(path, artifact::dump(doc));
    return path;
}

std::vector<SplitSpec> load_splits(const RunConfig& config) {
    if (config.splits_path.empty()) return default_splits();
    return load_splits_csv(config.splits_path);
}

std::optional<strategies::PredictionTable> load_predictions(const RunConfig& config) {
    if (config.predictions_path.empty()) return std::nullopt;
    return strategies::PredictionTable::load(config.predictions_path);
}

BacktestOutput run_resolved(const RunConfig& config, const Dataset& dataset) {
    const auto spec = strategies::with_defaults(*config.strategy);
    const auto predictions = load_predictions(config);
    auto strategy = strategies::make_strategy(spec, predictions ? &*predictions : nullptr);
    BacktestOutput out;
    out.result = run_backtest(dataset, resolve_split(config), strategy, run_options(config));
    out.summary = metrics::summarize(out.result);
    artifact::RunMetadata meta{"backtest", spec.id(), config.fee_rate, config.capital, config.seed};
    const auto cfg = config.to_json();
    out.artifact = artifact::run_to_json(out.result, meta, cfg);
    out.artifact_path = write_doc(config, artifact::content_name("run", cfg), out.artifact);
    return out;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["asset"] = asset;
    j["split"] = split;
    j["strategy"] = strategy ? strategies::spec_to_json(strategies::with_defaults(*strategy))
                             : nlohmann::json(nullptr);
    j["ablation"] = ablation ? nlohmann::json(*ablation) : nlohmann::json(nullptr);
    j["fee_rate"] = fee_rate;
    j["capital"] = capital;
    j["info_lag_days"] = info_lag_days;
    j["seed"] = seed;
    j["paths"] = {{"market", market_path},   {"txn_stats", txn_stats_path},
                  {"news", news_path},       {"splits", splits_path},
                  {"predictions", predictions_path}, {"backend", backend_path},
                  {"mock", mock_path},       {"cache", cache_path}};
    j["agent"] = {{"recent_prices", recent_prices},
                  {"news_window_days", news_window_days},
                  {"news_char_budget", news_char_budget}};
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    try {
        RunConfig c;
        c.asset = j.at("asset").get<std::string>();
        c.split = j.at("split").get<std::string>();
        if (!j.at("strategy").is_null()) c.strategy = strategies::spec_from_json(j.at("strategy"));
        if (!j.at("ablation").is_null()) c.ablation = j.at("ablation").get<std::string>();
        c.fee_rate = j.at("fee_rate").get<double>();
        c.capital = j.at("capital").get<double>();
        c.info_lag_days = j.at("info_lag_days").get<int>();
        c.seed = j.at("seed").get<long>();
        const auto& p = j.at("paths");
        c.market_path = p.at("market").get<std::string>();
        c.txn_stats_path = p.at("txn_stats").get<std::string>();
        c.news_path = p.at("news").get<std::string>();
        c.splits_path = p.at("splits").get<std::string>();
        c.predictions_path = p.at("predictions").get<std::string>();
        c.backend_path = p.at("backend").get<std::string>();
        c.mock_path = p.at("mock").get<std::string>();
        c.cache_path = p.at("cache").get<std::string>();
        const auto& a = j.at("agent");
        c.recent_prices = a.at("recent_prices").get<std::size_t>();
        c.news_window_days = a.at("news_window_days").get<int>();
        c.news_char_budget = a.at("news_char_budget").get<std::size_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("invalid run config: {}", e.what()));
    }
}

void RunConfig::resolve_data_paths(const fs::path& data_dir) {
    auto pick = [&](std::string& target, const fs::path& candidate, bool required) {
        if (!target.empty()) return;
        if (required || fs::exists(candidate)) target = candidate.string();
    };
    pick(market_path, data_dir / "market" / (asset + ".csv"), true);
    pick(txn_stats_path, data_dir / "txn" / (asset + ".csv"), false);
    pick(news_path, data_dir / "news" / (asset + ".jsonl"), false);
}

void RunConfig::validate() const {
    if (!std::isfinite(fee_rate) || fee_rate < 0 || fee_rate >= 1) {
        throw ConfigError(fmt::format("fee must be in [0, 1), got {}", fee_rate));
    }
    if (!std::isfinite(capital) || !(capital > 0)) {
        throw ConfigError(fmt::format("capital must be > 0, got {}", capital));
    }
    if (info_lag_days < 0) throw ConfigError("info lag must be >= 0");
    if (market_path.empty()) throw ConfigError("no market data file given");
    require_file(market_path, "market data");
    require_file(txn_stats_path, "txn stats");
    require_file(news_path, "news");
    require_file(splits_path, "split table");
    require_file(predictions_path, "prediction");
    require_file(backend_path, "backend config");
    require_file(mock_path, "mock fixture");
    if (strategy) strategies::validate(strategies::with_defaults(*strategy));
    if (ablation) agents::AblationConfig::parse(*ablation);
}

Dataset load_dataset(const RunConfig& config) {
    Dataset d;
    d.market = load_market_csv(config.market_path);
    if (!config.txn_stats_path.empty()) d.txn_stats = load_txn_stats_csv(config.txn_stats_path);
    if (!config.news_path.empty()) d.news = load_news_jsonl(config.news_path);
    validate_dataset(d);
    return d;
}

SplitSpec resolve_split(const RunConfig& config) {
    return find_split(load_splits(config), config.asset, config.split);
}

RunOptions run_options(const RunConfig& config) {
    return RunOptions{FeeModel{config.fee_rate}, config.capital, config.info_lag_days};
}

BacktestOutput cmd_backtest(const RunConfig& config) {
    config.validate();
    if (!config.strategy) throw ConfigError("backtest needs a strategy");
    const auto dataset = load_dataset(config);
    return run_resolved(config, dataset);
}

TuneOutput cmd_tune(const RunConfig& config, std::vector<StrategySpec> grid,
                    strategies::SelectionMetric metric) {
    config.validate();
    if (!config.strategy && grid.empty()) throw ConfigError("tune needs a strategy kind or a grid");
    if (grid.empty()) grid = strategies::default_grid(config.strategy->kind);
    const auto dataset = load_dataset(config);
    const auto predictions = load_predictions(config);
    TuneOutput out;
    out.report = strategies::tune(dataset, resolve_split(config), grid, run_options(config), metric,
                                  predictions ? &*predictions : nullptr);
    auto cfg = config.to_json();
    cfg["strategy"] = nullptr;
    cfg["grid"] = nlohmann::json::array();
    for (const auto& s : out.report.grid) cfg["grid"].push_back(strategies::spec_to_json(s));
    cfg["selection_metric"] = strategies::metric_name(metric);
    out.artifact = artifact::tune_to_json(out.report, cfg);
    out.artifact_path = write_doc(config, artifact::content_name("tune", cfg), out.artifact);
    if (!config.cache_path.empty()) {
        auto cache = strategies::TunedParamCache::load(config.cache_path);
        cache.put(config.asset, out.report);
        cache.save(config.cache_path);
    }
    return out;
}

CompareOutput cmd_compare(const RunConfig& config, const std::vector<StrategyKind>& kinds,
                          const std::vector<std::string>& conditions, metrics::TableFormat format) {
    config.validate();
    const auto dataset = load_dataset(config);
    auto cache = config.cache_path.empty() ? strategies::TunedParamCache{}
                                           : strategies::TunedParamCache::load(config.cache_path);
    bool cache_dirty = false;

    std::vector<StrategySpec> specs;
    for (auto kind : kinds) {
        if (auto cached = cache.get(config.asset, kind)) {
            specs.push_back(*cached);
            continue;
        }
        auto grid = strategies::default_grid(kind);
        if (grid.size() == 1) {
            specs.push_back(grid.front());
            continue;
        }
        RunConfig tune_cfg = config;
        tune_cfg.split = "validation";
        const auto report = strategies::tune(dataset, resolve_split(tune_cfg), grid,
                                             run_options(config));
        cache.put(config.asset, report);
        cache_dirty = true;
        specs.push_back(report.chosen);
    }
    if (cache_dirty && !config.cache_path.empty()) cache.save(config.cache_path);

    struct Job {
        std::future<metrics::MetricsSummary> summary;
        bool cached = false;
    };
    std::vector<Job> jobs;
    for (const auto& spec : specs) {
        for (const auto& condition : conditions) {
            RunConfig cfg = config;
            cfg.strategy = spec;
            cfg.split = condition;
            const auto name = artifact::content_name("run", cfg.to_json());
            const auto path = fs::path(config.out_dir) / (name + ".json");
            if (!config.out_dir.empty() && fs::exists(path)) {
                std::promise<metrics::MetricsSummary> ready;
                ready.set_value(metrics::summarize(artifact::run_from_json(artifact::read_json(path))));
                jobs.push_back({ready.get_future(), true});
                continue;
            }
            jobs.push_back({std::async(std::launch::async,
                                       [cfg, &dataset] { return run_resolved(cfg, dataset).summary; }),
                            false});
        }
    }

    CompareOutput out;
    std::size_t j = 0;
    for (const auto& spec : specs) {
        metrics::ConditionRow row{display_name(spec.kind), {}};
        for (std::size_t c = 0; c < conditions.size(); ++c, ++j) {
            row.by_condition.push_back(jobs[j].summary.get());
            (jobs[j].cached ? out.cached_runs : out.fresh_runs) += 1;
        }
        out.rows.push_back(std::move(row));
    }
    out.table = metrics::render_condition_table(conditions, out.rows, format);
    return out;
}

AgentRunOutput cmd_agent_run(const RunConfig& config, std::shared_ptr<agents::ChatBackend> backend) {
    config.validate();
    const auto ablation = agents::AblationConfig::parse(config.ablation.value_or("full"));
    auto cfg = config.to_json();
    cfg["ablation"] = ablation.label();
    cfg["strategy"] = nullptr;
    if (!backend) {
        if (!config.mock_path.empty()) {
            backend = agents::MockBackend::load(config.mock_path);
            std::ifstream in(config.mock_path, std::ios::binary);
            std::ostringstream bytes;
            bytes << in.rdbuf();
            cfg["backend"] = {{"mock_sha256", agents::sha256_hex(bytes.str())}};
        } else if (!config.backend_path.empty()) {
            auto bc = agents::BackendConfig::load(config.backend_path);
            if (!bc.seed) bc.seed = config.seed;
            cfg["backend"] = bc.to_json();
            backend = std::make_shared<agents::HttpChatBackend>(bc);
        } else {
            throw ConfigError("agent run needs --mock or --backend");
        }
    } else {
        cfg["backend"] = {{"injected", true}};
    }

    agents::AgentConfig agent_cfg;
    agent_cfg.ablation = ablation;
    agent_cfg.recent_prices = config.recent_prices;
    agent_cfg.news_window_days = config.news_window_days;
    agent_cfg.news_char_budget = config.news_char_budget;
    agents::AgentSession session(agent_cfg, backend);

    const auto name = artifact::content_name("agent", cfg);
    const auto audit_path = config.out_dir.empty()
                                ? std::optional<fs::path>{}
                                : std::optional<fs::path>{fs::path(config.out_dir) / (name + ".audit.jsonl")};
    auto write_audit = [&] {
        if (!audit_path) return;
        std::ostringstream os;
        session.write_audit_log(os);
        artifact::write_text(*audit_path, os.str());
    };

    const auto dataset = load_dataset(config);
    AgentRunOutput out;
    try {
        out.result = run_backtest(dataset, resolve_split(config), session.strategy(), run_options(config));
    } catch (const BackendError& e) {
        write_audit();
        throw AgentRunFailure(e.what(), session.audit_log(), audit_path);
    } catch (...) {
        write_audit();
        throw;
    }
    write_audit();
    out.summary = metrics::summarize(out.result);
    artifact::RunMetadata meta{"agent_run", fmt::format("agent({})", ablation.label()), config.fee_rate,
                               config.capital, config.seed};
    out.artifact = artifact::run_to_json(out.result, meta, cfg);
    out.audit_log = session.audit_log();
    out.audit_path = audit_path;
    out.artifact_path = write_doc(config, name, out.artifact);
    return out;
}

}  // namespace chainbt::commands
