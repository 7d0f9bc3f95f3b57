#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chainbt/artifact.hpp"
#include "chainbt/commands.hpp"
#include "chainbt/error.hpp"

namespace chainbt::cli {

namespace {

namespace fs = std::filesystem;
using commands::RunConfig;

struct Flags {
    std::string asset, split, strategy, predictor, ablation;
    std::vector<std::string> params;
    double fee = 0, capital = 0;
    int lag = 0;
    long seed = 0;
    std::string data_dir = "data";
    std::string market, txn, news, splits, predictions, backend, mock, cache, out, config;
    std::string format = "markdown";
    std::string metric = "total_return";
    std::vector<std::string> kinds{"buy_and_hold", "sma", "slma", "macd", "bollinger"};
    std::vector<std::string> conditions{"bearish", "sideways", "bullish"};
    std::size_t recent_prices = 0, news_char_budget = 0;
    int news_window_days = 0;
};

struct Options {
    std::map<std::string, CLI::Option*> by_name;
    [[nodiscard]] bool given(const std::string& name) const {
        auto it = by_name.find(name);
        return it != by_name.end() && it->second->count() > 0;
    }
};

void add_common(CLI::App& cmd, Flags& f, Options& o) {
    o.by_name["asset"] = cmd.add_option("--asset", f.asset, "BTC, ETH or SOL");
    o.by_name["split"] = cmd.add_option("--split", f.split, "Split name from the split table");
    o.by_name["fee"] = cmd.add_option("--fee", f.fee, "Proportional fee rate, default 0.002");
    o.by_name["capital"] = cmd.add_option("--capital", f.capital, "Starting capital, default 1e6");
    o.by_name["lag"] = cmd.add_option("--lag", f.lag, "Information lag in days, default 1");
    o.by_name["seed"] = cmd.add_option("--seed", f.seed, "Seed recorded in artifacts");
    o.by_name["data-dir"] = cmd.add_option("--data-dir", f.data_dir, "Root of market/, txn/, news/");
    o.by_name["market"] = cmd.add_option("--market", f.market, "Market CSV");
    o.by_name["txn"] = cmd.add_option("--txn", f.txn, "Txn-stats CSV");
    o.by_name["news"] = cmd.add_option("--news", f.news, "News JSONL");
    o.by_name["splits"] = cmd.add_option("--splits", f.splits, "Split table CSV");
    o.by_name["out"] = cmd.add_option("--out", f.out, "Artifact directory");
    o.by_name["config"] =
        cmd.add_option("--config", f.config, "Run config JSON, or an artifact to re-run");
}

void add_strategy(CLI::App& cmd, Flags& f, Options& o) {
    o.by_name["strategy"] = cmd.add_option("--strategy", f.strategy, "Strategy kind");
    o.by_name["param"] = cmd.add_option("--param", f.params, "Strategy parameter as name=value");
    o.by_name["predictor"] =
        cmd.add_option("--predictor", f.predictor, "Forecaster predictor: momentum, persistence, file");
    o.by_name["predictions"] = cmd.add_option("--predictions", f.predictions, "Per-date predictions CSV");
}

RunConfig load_config_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ConfigError(fmt::format("config file not found: {}", path));
    auto j = artifact::read_json(path);
    if (j.contains("schema") && j.contains("config")) j = j.at("config");
    return RunConfig::from_json(j);
}

double parse_number(std::string_view text, std::string_view what) {
    double v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("bad number for {}: '{}'", what, text));
    return v;
}

RunConfig build_config(const Flags& f, const Options& o, std::string_view default_split) {
    const bool from_file = o.given("config");
    RunConfig c = from_file ? load_config_file(f.config) : RunConfig{};
    if (!from_file) c.split = std::string(default_split);
    if (o.given("asset")) c.asset = f.asset;
    if (o.given("split")) c.split = f.split;
    if (o.given("fee")) c.fee_rate = f.fee;
    if (o.given("capital")) c.capital = f.capital;
    if (o.given("lag")) c.info_lag_days = f.lag;
    if (o.given("seed")) c.seed = f.seed;
    if (o.given("market")) c.market_path = f.market;
    if (o.given("txn")) c.txn_stats_path = f.txn;
    if (o.given("news")) c.news_path = f.news;
    if (o.given("splits")) c.splits_path = f.splits;
    if (o.given("predictions")) c.predictions_path = f.predictions;
    if (o.given("backend")) c.backend_path = f.backend;
    if (o.given("mock")) c.mock_path = f.mock;
    if (o.given("cache")) c.cache_path = f.cache;
    if (o.given("ablation")) c.ablation = f.ablation;
    if (o.given("recent-prices")) c.recent_prices = f.recent_prices;
    if (o.given("news-window")) c.news_window_days = f.news_window_days;
    if (o.given("news-budget")) c.news_char_budget = f.news_char_budget;
    c.out_dir = f.out;

    if (o.given("strategy")) {
        strategies::StrategySpec spec;
        spec.kind = strategies::parse_kind(f.strategy);
        c.strategy = spec;
    }
    if ((o.given("param") || o.given("predictor")) && !c.strategy) {
        throw ConfigError("--param and --predictor need --strategy");
    }
    if (c.strategy) {
        for (const auto& kv : f.params) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ConfigError(fmt::format("--param expects name=value, got '{}'", kv));
            }
            const auto name = kv.substr(0, eq);
            c.strategy->params[name] = parse_number(std::string_view(kv).substr(eq + 1), name);
        }
        if (o.given("predictor")) c.strategy->predictor = f.predictor;
        c.strategy = strategies::with_defaults(*c.strategy);
    }
    if (!from_file || o.given("data-dir") || o.given("asset")) {
        if (o.given("asset") && !o.given("market")) c.market_path.clear();
        if (o.given("asset") && !o.given("txn")) c.txn_stats_path.clear();
        if (o.given("asset") && !o.given("news")) c.news_path.clear();
        c.resolve_data_paths(f.data_dir);
    }
    return c;
}

void print_summary(std::ostream& out, std::string_view label, const metrics::MetricsSummary& m,
                   const std::optional<fs::path>& artifact_path) {
    const metrics::LabeledSummary row{std::string(label), m};
    out << metrics::render_table(std::span(&row, 1), metrics::TableFormat::markdown);
    if (artifact_path) out << "artifact: " << artifact_path->string() << "\n";
}

std::string error_line(std::string_view kind, std::string_view message, int code) {
    nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    return j.dump();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Backtest classical and agent-driven crypto trading strategies"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "chainbt 0.1.0");

    Flags f;
    Options bt_o, tune_o, cmp_o, agent_o;

    auto* backtest = app.add_subcommand("backtest", "Run one strategy over one split");
    add_common(*backtest, f, bt_o);
    add_strategy(*backtest, f, bt_o);

    auto* tune = app.add_subcommand("tune", "Grid-search a strategy's parameters");
    add_common(*tune, f, tune_o);
    add_strategy(*tune, f, tune_o);
    tune_o.by_name["cache"] = tune->add_option("--cache", f.cache, "Tuned-parameter cache JSON");
    tune->add_option("--metric", f.metric, "total_return or sharpe")->capture_default_str();

    auto* compare = app.add_subcommand("compare", "Tabulate strategies across market conditions");
    add_common(*compare, f, cmp_o);
    cmp_o.by_name["cache"] = compare->add_option("--cache", f.cache, "Tuned-parameter cache JSON");
    compare->add_option("--strategies", f.kinds, "Strategy kinds, in row order")
        ->delimiter(',')
        ->capture_default_str();
    compare->add_option("--conditions", f.conditions, "Split names, in column order")
        ->delimiter(',')
        ->capture_default_str();
    compare->add_option("--format", f.format, "markdown or csv")->capture_default_str();

    auto* agent = app.add_subcommand("agent-run", "Run the multi-agent trader over one split");
    add_common(*agent, f, agent_o);
    agent_o.by_name["ablation"] = agent->add_option("--ablation", f.ablation, "Prompt ablation name");
    agent_o.by_name["mock"] = agent->add_option("--mock", f.mock, "Mock fixture JSONL");
    agent_o.by_name["backend"] = agent->add_option("--backend", f.backend, "Backend config JSON");
    agent_o.by_name["recent-prices"] =
        agent->add_option("--recent-prices", f.recent_prices, "Opens listed in the prompt");
    agent_o.by_name["news-window"] =
        agent->add_option("--news-window", f.news_window_days, "News window in days");
    agent_o.by_name["news-budget"] =
        agent->add_option("--news-budget", f.news_char_budget, "News character budget");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "chainbt 0.1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << error_line("usage", e.what(), kExitBadInput) << "\n";
        return kExitBadInput;
    }

    try {
        if (backtest->parsed()) {
            const auto result = commands::cmd_backtest(build_config(f, bt_o, "bullish"));
            print_summary(out, result.artifact.at("metadata").at("strategy_id").get<std::string>(),
                          result.summary, result.artifact_path);
        } else if (tune->parsed()) {
            const auto config = build_config(f, tune_o, "validation");
            const auto result = commands::cmd_tune(config, {}, strategies::parse_metric(f.metric));
            std::vector<metrics::LabeledSummary> rows;
            for (std::size_t i = 0; i < result.report.grid.size(); ++i) {
                rows.push_back({result.report.grid[i].id(), result.report.scores[i]});
            }
            out << metrics::render_table(rows, metrics::TableFormat::markdown);
            out << "chosen: " << result.report.chosen.id() << "\n";
            if (result.artifact_path) out << "artifact: " << result.artifact_path->string() << "\n";
        } else if (compare->parsed()) {
            const auto config = build_config(f, cmp_o, "bullish");
            std::vector<strategies::StrategyKind> kinds;
            for (const auto& k : f.kinds) {
                if (!k.empty()) kinds.push_back(strategies::parse_kind(k));
            }
            const auto result = commands::cmd_compare(config, kinds, f.conditions,
                                                      metrics::parse_table_format(f.format));
            out << result.table;
        } else if (agent->parsed()) {
            const auto result = commands::cmd_agent_run(build_config(f, agent_o, "bullish"));
            print_summary(out, result.artifact.at("metadata").at("strategy_id").get<std::string>(),
                          result.summary, result.artifact_path);
            if (result.audit_path) out << "audit: " << result.audit_path->string() << "\n";
        }
    } catch (const commands::AgentRunFailure& e) {
        err << error_line("backend", e.what(), kExitRunFailure) << "\n";
        if (e.audit_path()) out << "partial audit: " << e.audit_path()->string() << "\n";
        return kExitRunFailure;
    } catch (const StrategyError& e) {
        err << error_line("strategy", e.what(), kExitRunFailure) << "\n";
        return kExitRunFailure;
    } catch (const BackendError& e) {
        err << error_line("backend", e.what(), kExitRunFailure) << "\n";
        return kExitRunFailure;
    } catch (const ConfigError& e) {
        err << error_line("config", e.what(), kExitBadInput) << "\n";
        return kExitBadInput;
    } catch (const DataError& e) {
        err << error_line("data", e.what(), kExitBadInput) << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        err << error_line("internal", e.what(), kExitRunFailure) << "\n";
        return kExitRunFailure;
    }
    return kExitOk;
}

}  // namespace chainbt::cli
