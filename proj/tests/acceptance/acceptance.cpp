// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed here, not taken from the environment.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "chainbt/agents.hpp"
#include "chainbt/artifact.hpp"
#include "chainbt/dataio.hpp"
#include "chainbt/engine.hpp"
#include "chainbt/error.hpp"
#include "chainbt/indicators.hpp"
#include "chainbt/metrics.hpp"
#include "chainbt/strategies.hpp"
#include "oracles.hpp"

using namespace chainbt;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kTrendTolerancePp = 0.5;
constexpr double kSplitSeconds = 1.0;
constexpr double kOracleRel = 1e-9;
constexpr double kPropertySeconds = 30.0;
constexpr int kPropertyRuns = 1000;
constexpr int kIndicatorSeries = 100;
constexpr int kTunerDatasets = 20;
constexpr int kAgentRepeats = 3;
constexpr int kParseSamples = 200'001;

const std::string kRoot = CHAINBT_SOURCE_DIR;
const std::string kFixtures = CHAINBT_FIXTURES;

struct Verdict {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, std::string_view name, const Verdict& v) {
    std::cout << fmt::format("{} [{}] {}: {}\n", v.pass ? "PASS" : "FAIL", id, name, v.detail);
    if (!v.pass) ++failures;
}

template <typename Fn>
void criterion(int id, std::string_view name, Fn fn) {
    Verdict v;
    try {
        v = fn();
    } catch (const std::exception& e) {
        v = {false, fmt::format("exception: {}", e.what())};
    }
    report(id, name, v);
}

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

Dataset dataset_from_opens(const std::vector<double>& opens) {
    Dataset d;
    d.market = oracle::market_from_opens(opens, Date(2023, 1, 1));
    return d;
}

// 1 ---------------------------------------------------------------------

Verdict table_trends() {
    // Published trend per split, in percent.
    const std::map<std::pair<std::string, std::string>, double> trend{
        {{"BTC", "validation"}, -1.67}, {{"BTC", "bearish"}, -15.61}, {{"BTC", "sideways"}, -0.83},
        {{"BTC", "bullish"}, 39.66},    {{"ETH", "validation"}, 0.88}, {{"ETH", "bearish"}, -12.24},
        {{"ETH", "sideways"}, -1.91},   {{"ETH", "bullish"}, 22.59},   {{"SOL", "validation"}, -0.27},
        {{"SOL", "bearish"}, -36.08},   {{"SOL", "sideways"}, -3.23},  {{"SOL", "bullish"}, 176.72},
    };
    Verdict v;
    double worst = 0, slowest = 0;
    std::map<std::string, Dataset> data;
    for (const auto& split : default_splits()) {
        const auto t0 = Clock::now();
        auto& d = data[split.asset];
        if (d.market.empty()) d.market = load_market_csv(kRoot + "/data/market/" + split.asset + ".csv");
        const auto r = run_backtest(d, split, strategies::buy_and_hold, RunOptions{FeeModel{0}, 1e6, 1});
        const double got = metrics::total_return(r);
        const double elapsed = seconds_since(t0);
        const double err = std::fabs(got - trend.at({split.asset, split.name}));
        worst = std::max(worst, err);
        slowest = std::max(slowest, elapsed);
        if (err > kTrendTolerancePp || elapsed >= kSplitSeconds) {
            v.pass = false;
            v.detail += fmt::format("{} {} got {:.2f}% ({:.3f}s); ", split.asset, split.name, got, elapsed);
        }
    }
    v.detail += fmt::format("12 splits, worst |error| {:.2f}pp (tol {}pp), slowest {:.4f}s (limit {}s)", worst,
                            kTrendTolerancePp, slowest, kSplitSeconds);
    return v;
}

// 2 ---------------------------------------------------------------------

Verdict sharpe_arithmetic() {
    const double mean = 0.0056, sd = 0.0223;
    const std::size_t n = 60;
    const double d = sd * std::sqrt(double(n - 1) / double(n));
    RunResult r;
    r.start_net_worth = 1e6;
    double w = 1e6;
    std::vector<double> path{w};
    for (std::size_t i = 0; i < n; ++i) path.push_back(path.back() * (1 + mean + (i % 2 ? -d : d)));
    for (std::size_t i = 0; i < n; ++i) {
        RunRecord rec;
        rec.date = Date(2023, 10, 1).plus_days(static_cast<int>(i));
        rec.execution_price = 1;
        rec.net_worth = rec.post_cash = path[i];
        r.records.push_back(rec);
    }
    r.final_net_worth = path.back();
    const metrics::LabeledSummary row{"synthetic", metrics::summarize(r)};
    const auto csv = metrics::render_table(std::span(&row, 1), metrics::TableFormat::csv);
    const auto line = csv.substr(csv.find('\n') + 1);
    const bool ok = line.find(",0.56±2.23,0.25\n") != std::string::npos;
    return {ok, fmt::format("daily mean 0.56%, std 2.23% renders as '{}' (expect Sharpe 0.25)",
                            line.substr(0, line.size() - 1))};
}

// 3 ---------------------------------------------------------------------

Verdict engine_oracle() {
    std::ifstream in(kFixtures + "/engine_3day_oracle.csv");
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("day", 0) == 0) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> r;
        while (std::getline(ss, cell, ',')) {
            r.push_back(cell.empty() || cell == "final" ? 0.0 : std::stod(cell));
        }
        r.resize(7);
        rows.push_back(r);
    }
    if (rows.size() != 4) return {false, "oracle fixture malformed"};
    const std::vector<double> opens{rows[0][1], rows[1][1], rows[2][1], rows[3][1]};
    const std::vector<double> actions{1, 0, -1};
    const auto r = run_backtest(dataset_from_opens(opens), {"X", "t", Date(2023, 1, 1), Date(2023, 1, 4)},
                                [&](const DecisionContext& c) { return TradeAction{actions[c.day_index]}; },
                                RunOptions{FeeModel{0.001}, 1e6, 1});
    double worst = 0;
    auto check = [&](double got, double want) {
        worst = std::max(worst, std::fabs(got - want) / std::max(std::fabs(want), 1.0));
    };
    for (std::size_t i = 0; i < 3; ++i) {
        check(r.records[i].fee_paid, rows[i][3]);
        check(r.records[i].post_cash, rows[i][4]);
        check(r.records[i].post_holdings, rows[i][5]);
        check(r.records[i].net_worth, rows[i][6]);
    }
    check(r.final_net_worth, rows[3][6]);
    return {worst <= kOracleRel,
            fmt::format("prices [100,110,105], actions [+1,0,-1], fee 0.001: max rel error {:.2e} (tol {:.0e})",
                        worst, kOracleRel)};
}

// 4 ---------------------------------------------------------------------

// Depends on every context field a strategy may read, so any leak of later
// data shows up as a changed action.
TradeAction probe_strategy(const DecisionContext& ctx) {
    double h = ctx.today_open;
    for (const auto& d : ctx.market_history) h = std::fmod(h * 1.37 + d.open + d.close * 0.1 + d.volume * 1e-6, 1e6);
    for (const auto& t : ctx.txn_stats_history) h = std::fmod(h * 1.11 + t.num_transactions, 1e6);
    for (const auto& n : ctx.news_history) h = std::fmod(h + double(n.title.size()) * 3.1, 1e6);
    h += ctx.portfolio.cash * 1e-3 + ctx.portfolio.holdings;
    return TradeAction{std::sin(h)};
}

Verdict properties() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> act(-1, 1), rate(0.0005, 0.05), unit(0, 1);
    std::uniform_int_distribution<int> len(5, 90);
    int fee_fail = 0, conserve_fail = 0, negative_fail = 0, lookahead_fail = 0;
    for (int run = 0; run < kPropertyRuns; ++run) {
        const int n = len(rng);
        const auto opens = oracle::random_walk(rng, n + 1, 10 + 1000 * unit(rng), 0.05);
        std::vector<double> actions(n);
        for (auto& a : actions) a = unit(rng) < 0.2 ? 0.0 : (unit(rng) < 0.15 ? std::copysign(1.0, act(rng)) : act(rng));
        actions[0] = actions[0] == 0 ? 0.5 : actions[0];
        auto data = dataset_from_opens(opens);
        const SplitSpec split{"X", "p", Date(2023, 1, 1), Date(2023, 1, 1).plus_days(n)};
        auto scripted = [&](const DecisionContext& c) { return TradeAction{actions[c.day_index]}; };

        // Fee monotonicity.
        const double r1 = rate(rng), r2 = r1 + rate(rng);
        const auto lo = run_backtest(data, split, scripted, RunOptions{FeeModel{r1}, 1e6, 1});
        const auto hi = run_backtest(data, split, scripted, RunOptions{FeeModel{r2}, 1e6, 1});
        const auto free = run_backtest(data, split, scripted, RunOptions{FeeModel{0}, 1e6, 1});
        if (!(free.final_net_worth >= lo.final_net_worth && lo.final_net_worth >= hi.final_net_worth)) ++fee_fail;

        // No negative balances.
        for (const auto* res : {&lo, &hi, &free}) {
            for (const auto& rec : res->records) {
                if (rec.post_cash < 0 || rec.post_holdings < 0 || !std::isfinite(rec.net_worth)) ++negative_fail;
            }
        }

        // Zero-fee conservation at the execution price.
        PortfolioState s = init_portfolio(1e6, opens[0]);
        for (int i = 0; i < n; ++i) {
            const double before = s.cash + s.holdings * opens[i];
            s = execute_action(s, opens[i], {actions[i]}, FeeModel{0}).state;
            const double after = s.cash + s.holdings * opens[i];
            if (!oracle::rel_close(before, after, 1e-12)) ++conserve_fail;
        }

        // No lookahead: scramble everything after day t, actions up to t stay put.
        for (int i = 0; i <= n; ++i) {
            const auto date = Date(2023, 1, 1).plus_days(i);
            data.txn_stats.days.push_back({date, 100.0 + i, 1, 1, 1, 1});
            data.news[date].push_back({date, "s", std::string(1 + i % 7, 'x'), "t", std::nullopt});
        }
        const int t = std::uniform_int_distribution<int>(0, n - 1)(rng);
        const int lag = run % 2;
        std::vector<double> base_actions, moved_actions;
        auto record = [](std::vector<double>& out) {
            return [&out](const DecisionContext& c) {
                auto a = probe_strategy(c);
                out.push_back(a.fraction);
                return a;
            };
        };
        run_backtest(data, split, record(base_actions), RunOptions{FeeModel{0.002}, 1e6, lag});
        auto moved = data;
        const auto cut = Date(2023, 1, 1).plus_days(t);
        for (auto& d : moved.market) {
            if (d.date > cut) {
                const double k = 0.5 + unit(rng);
                d.open *= k;
                d.close *= k;
                d.high *= k * 1.1;
                d.low *= k * 0.9;
                d.volume *= 7;
            }
        }
        for (auto& x : moved.txn_stats.days) {
            if (x.date > cut) x.num_transactions *= 3;
        }
        for (auto& [date, items] : moved.news) {
            if (date > cut) items.front().title += "!!";
        }
        run_backtest(moved, split, record(moved_actions), RunOptions{FeeModel{0.002}, 1e6, lag});
        for (int i = 0; i <= t; ++i) {
            if (base_actions[i] != moved_actions[i]) {
                ++lookahead_fail;
                break;
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const bool ok = fee_fail + conserve_fail + negative_fail + lookahead_fail == 0 && elapsed < kPropertySeconds;
    return {ok, fmt::format("{} randomized runs in {:.2f}s (limit {}s): fee-monotonicity {} fails, "
                            "conservation {} fails, negative-balance {} fails, lookahead {} fails",
                            kPropertyRuns, elapsed, kPropertySeconds, fee_fail, conserve_fail, negative_fail,
                            lookahead_fail)};
}

// 5 ---------------------------------------------------------------------

Verdict indicator_oracles() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(1, 200), win(1, 40);
    double worst = 0;
    auto rel = [&](double got, double want, double scale) {
        worst = std::max(worst, std::fabs(got - want) / std::max(std::fabs(want), scale));
    };
    for (int s = 0; s < kIndicatorSeries; ++s) {
        const auto p = oracle::random_walk(rng, len(rng), 1 + 5000 * std::uniform_real_distribution<double>(0, 1)(rng));
        const double scale = *std::max_element(p.begin(), p.end());
        const std::size_t w = win(rng);
        const auto a = indicators::sma(p, w);
        const auto ao = oracle::sma(p, w);
        const auto e = indicators::ema(p, w);
        const auto eo = oracle::ema(p, w);
        const auto m = indicators::macd(p);
        const auto mo = oracle::macd(p, 12, 26, 9);
        const std::size_t bw = std::max<std::size_t>(w, 2);
        const auto b = indicators::bollinger(p, bw, 2.0);
        const auto bo = oracle::bollinger(p, bw, 2.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (a[i].has_value() != ao[i].has_value() || b[i].has_value() != bo[i].has_value()) {
                return {false, fmt::format("warm-up mismatch on series {} index {}", s, i)};
            }
            if (a[i]) rel(*a[i], *ao[i], 0);
            rel(e[i], eo[i], 0);
            // MACD values are price differences; relative to the price scale.
            rel(m[i].macd, mo[i].macd, scale);
            rel(m[i].signal, mo[i].signal, scale);
            rel(m[i].histogram, mo[i].histogram, scale);
            if (b[i]) {
                rel(b[i]->middle, bo[i]->middle, 0);
                rel(b[i]->upper, bo[i]->upper, 0);
                rel(b[i]->lower, bo[i]->lower, 0);
            }
        }
    }
    bool exact = true;
    for (double c : {0.015, 1.0, 1671.0, 37718.01}) {
        const std::vector<double> flat(150, c);
        for (const auto& v : indicators::sma(flat, 20)) exact &= !v || *v == c;
        for (double v : indicators::ema(flat, 26)) exact &= v == c;
        for (const auto& v : indicators::macd(flat)) exact &= v.macd == 0 && v.signal == 0 && v.histogram == 0;
        for (const auto& v : indicators::bollinger(flat)) exact &= !v || (v->lower == c && v->upper == c);
    }
    return {worst <= kOracleRel && exact,
            fmt::format("{} random series (len 1-200): max rel error {:.2e} (tol {:.0e}); constant series exact: {}",
                        kIndicatorSeries, worst, kOracleRel, exact ? "yes" : "no")};
}

// 6 ---------------------------------------------------------------------

bool params_smaller(const strategies::StrategySpec& a, const strategies::StrategySpec& b) {
    for (auto name : strategies::param_names(a.kind)) {
        if (a.param(name) != b.param(name)) return a.param(name) < b.param(name);
    }
    return false;
}

Verdict tuner() {
    using strategies::StrategyKind;
    std::mt19937_64 rng(99);
    int mismatches = 0;
    std::size_t slma_evaluated = 0;
    for (int k = 0; k < kTunerDatasets; ++k) {
        const auto opens = oracle::random_walk(rng, 140, 100, 0.04);
        const auto data = dataset_from_opens(opens);
        const SplitSpec val{"X", "validation", Date(2023, 1, 1).plus_days(40), Date(2023, 1, 1).plus_days(139)};
        const auto kind = k % 2 ? StrategyKind::slma : StrategyKind::sma;
        const auto grid = strategies::default_grid(kind);
        const auto metric = k % 4 == 3 ? strategies::SelectionMetric::sharpe : strategies::SelectionMetric::total_return;
        const RunOptions opt{FeeModel{0.002}, 1e6, 1};
        const auto report = strategies::tune(data, val, grid, opt, metric);
        if (kind == StrategyKind::slma) slma_evaluated = report.scores.size();

        std::size_t best = 0;
        std::vector<metrics::MetricsSummary> ms;
        for (const auto& spec : grid) ms.push_back(metrics::summarize(run_backtest(data, val, strategies::make_strategy(spec), opt)));
        auto key = [&](std::size_t i) {
            return metric == strategies::SelectionMetric::sharpe ? ms[i].sharpe : ms[i].total_return;
        };
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (key(i) > key(best) ||
                (key(i) == key(best) && (ms[i].sharpe > ms[best].sharpe ||
                                         (ms[i].sharpe == ms[best].sharpe && params_smaller(grid[i], grid[best]))))) {
                best = i;
            }
        }
        if (!(report.chosen == grid[best])) ++mismatches;
    }
    const bool ok = mismatches == 0 && slma_evaluated == 10 && strategies::default_grid(StrategyKind::slma).size() == 10;
    return {ok, fmt::format("{} random datasets: {} mismatches against exhaustive re-evaluation; SLMA grid evaluated {} specs",
                            kTunerDatasets, mismatches, slma_evaluated)};
}

// 7 ---------------------------------------------------------------------

Verdict agent_determinism() {
    Dataset data;
    data.market = load_market_csv(kRoot + "/data/market/ETH.csv");
    data.txn_stats = load_txn_stats_csv(kRoot + "/data/txn/ETH.csv");
    data.news = load_news_jsonl(kRoot + "/data/news/ETH.jsonl");
    const auto& split = find_split(default_splits(), "ETH", "bullish");
    std::vector<double> script;
    for (int i = 0; i < 61; ++i) script.push_back(std::round(std::sin(i * 0.7) * 100) / 100);

    int unstable = 0;
    std::map<agents::AblationName, std::string> first_prompt;
    for (auto name : agents::all_ablations()) {
        std::string reference;
        for (int rep = 0; rep < kAgentRepeats; ++rep) {
            agents::AgentConfig cfg;
            cfg.ablation = agents::AblationConfig::make(name);
            agents::AgentSession session(cfg, agents::MockBackend::scripted(script));
            const auto result = run_backtest(data, split, session.strategy());
            std::ostringstream audit;
            session.write_audit_log(audit);
            const auto bytes =
                artifact::dump(artifact::run_to_json(result, {"agent_run", "agent", 0.002, 1e6, 0}, {})) + audit.str();
            if (rep == 0) {
                reference = bytes;
                first_prompt[name] = session.prompts().at(1).render();
            } else if (bytes != reference) {
                ++unstable;
            }
        }
    }
    auto markers = [](const std::string& text) {
        std::set<std::string_view> out;
        for (auto m : {agents::kBaseMarker, agents::kTechnicalMarker, agents::kTxnStatsMarker, agents::kNewsMarker,
                       agents::kReflectionMarker}) {
            if (text.find(m) != std::string::npos) out.insert(m);
        }
        return out;
    };
    const auto full = markers(first_prompt[agents::AblationName::full]);
    const auto base = markers(first_prompt[agents::AblationName::base]);
    std::set<std::string_view> diff;
    std::set_difference(full.begin(), full.end(), base.begin(), base.end(), std::inserter(diff, diff.end()));
    const std::set<std::string_view> expected{agents::kTechnicalMarker, agents::kTxnStatsMarker, agents::kNewsMarker,
                                              agents::kReflectionMarker};
    const bool markers_ok = diff == expected && base == std::set<std::string_view>{agents::kBaseMarker};
    return {unstable == 0 && markers_ok,
            fmt::format("6 ablations x {} runs under scripted mock: {} non-identical repeats; base-vs-full diff "
                        "markers {}",
                        kAgentRepeats, unstable, markers_ok ? "exactly technical/txn/news/reflection" : "WRONG")};
}

// 8 ---------------------------------------------------------------------

Verdict parse_round_trip() {
    int failures_seen = 0;
    for (int i = 0; i < kParseSamples; ++i) {
        const double v = -1.0 + 2.0 * i / (kParseSamples - 1);
        const auto parsed = agents::parse_action(agents::render_action_response(v, "trend up 3% since 2023-10-01"));
        if (!parsed || parsed->fraction != (v == 0 ? 0.0 : v)) ++failures_seen;
    }
    return {failures_seen == 0,
            fmt::format("{} actions over [-1, 1] rendered and parsed back with {} failures. Hosted-model agent rows "
                        "and ablation returns are not reproduced (proprietary models, live-period news); the "
                        "pipeline is exercised by criteria 7 and 8 only",
                        kParseSamples, failures_seen)};
}

}  // namespace

int main() {
    criterion(1, "Buy-and-hold trend reproduction", table_trends);
    criterion(2, "Sharpe arithmetic", sharpe_arithmetic);
    criterion(3, "Engine hand-stepped oracle", engine_oracle);
    criterion(4, "Engine property suite", properties);
    criterion(5, "Indicator oracles", indicator_oracles);
    criterion(6, "Tuner correctness", tuner);
    criterion(7, "Agent pipeline determinism", agent_determinism);
    criterion(8, "Action parse round-trip", parse_round_trip);
    std::cout << (failures == 0 ? "ALL CRITERIA PASS\n" : fmt::format("{} CRITERIA FAILED\n", failures));
    return failures == 0 ? 0 : 1;
}
