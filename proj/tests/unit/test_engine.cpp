#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "chainbt/engine.hpp"
#include "chainbt/error.hpp"
#include "oracles.hpp"

using namespace chainbt;

namespace {

Strategy scripted(std::vector<double> actions) {
    return [actions = std::move(actions)](const DecisionContext& ctx) {
        return TradeAction{actions.at(ctx.day_index)};
    };
}

Dataset dataset_from_opens(const std::vector<double>& opens, Date first = Date(2023, 1, 1)) {
    Dataset d;
    d.market = oracle::market_from_opens(opens, first);
    return d;
}

struct OracleRow {
    std::string day;
    double open = 0, action = 0, fee = 0, cash = 0, holdings = 0, net_worth = 0;
};

std::vector<OracleRow> load_oracle(const std::string& path) {
    std::ifstream in(path);
    std::vector<OracleRow> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        f.resize(7);
        auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
        rows.push_back({f[0], num(f[1]), num(f[2]), num(f[3]), num(f[4]), num(f[5]), num(f[6])});
    }
    return rows;
}

}  // namespace

TEST(InitPortfolio, SplitsCapitalInHalf) {
    const auto s = init_portfolio(1'000'000, 1671.00);
    EXPECT_DOUBLE_EQ(s.cash, 500000);
    EXPECT_NEAR(s.holdings, 299.2220, 5e-5);
    EXPECT_EQ(init_portfolio(2, 1), (PortfolioState{1, 1}));
    EXPECT_THROW(init_portfolio(1e6, 0), Error);
    EXPECT_THROW(init_portfolio(0, 10), Error);
}

TEST(ExecuteAction, HandArithmetic) {
    const auto buy = execute_action({500000, 10}, 100, {0.5}, FeeModel{0});
    EXPECT_DOUBLE_EQ(buy.state.cash, 250000);
    EXPECT_DOUBLE_EQ(buy.state.holdings, 2510);
    EXPECT_DOUBLE_EQ(buy.fee_paid, 0);

    const auto hold = execute_action({123, 4}, 100, {0}, FeeModel{0.01});
    EXPECT_EQ(hold.state, (PortfolioState{123, 4}));
    EXPECT_EQ(hold.fee_paid, 0);

    const auto sell = execute_action({0, 10}, 100, {-1}, FeeModel{0.01});
    EXPECT_DOUBLE_EQ(sell.state.holdings, 0);
    EXPECT_DOUBLE_EQ(sell.state.cash, 990);
    EXPECT_DOUBLE_EQ(sell.fee_paid, 10);
}

TEST(ExecuteAction, FullBuyLeavesZeroCashAndRepeatsAsNoOp) {
    auto r = execute_action({1000, 0}, 10, {1}, FeeModel{0.002});
    EXPECT_EQ(r.state.cash, 0);
    r = execute_action(r.state, 10, {1}, FeeModel{0.002});
    EXPECT_EQ(r.state.cash, 0);
    EXPECT_EQ(r.fee_paid, 0);
}

TEST(ExecuteAction, RejectsInvalidInputs) {
    EXPECT_THROW(execute_action({1, 1}, 10, {1.5}, FeeModel{0}), StrategyError);
    EXPECT_THROW(execute_action({1, 1}, 10, {std::nan("")}, FeeModel{0}), StrategyError);
    EXPECT_THROW(execute_action({1, 1}, 0, {0.5}, FeeModel{0}), Error);
    EXPECT_THROW(execute_action({1, 1}, 10, {0.5}, FeeModel{1.0}), ConfigError);
    EXPECT_THROW(execute_action({1, 1}, 10, {0.5}, FeeModel{-0.1}), ConfigError);
}

TEST(RunBacktest, ThreeDayHandSteppedOracle) {
    const auto rows = load_oracle(std::string(CHAINBT_FIXTURES) + "/engine_3day_oracle.csv");
    ASSERT_EQ(rows.size(), 4u);
    std::vector<double> opens;
    for (const auto& r : rows) opens.push_back(r.open);
    const auto data = dataset_from_opens(opens);
    const SplitSpec split{"X", "t", Date(2023, 1, 1), Date(2023, 1, 4)};
    const auto result = run_backtest(data, split, scripted({1, 0, -1}), RunOptions{FeeModel{0.001}, 1e6, 1});
    ASSERT_EQ(result.records.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& rec = result.records[i];
        EXPECT_TRUE(oracle::rel_close(rec.fee_paid, rows[i].fee)) << i;
        EXPECT_TRUE(oracle::rel_close(rec.post_cash, rows[i].cash)) << i;
        EXPECT_TRUE(oracle::rel_close(rec.post_holdings, rows[i].holdings)) << i;
        EXPECT_TRUE(oracle::rel_close(rec.net_worth, rows[i].net_worth)) << i;
        EXPECT_EQ(rec.action.fraction, rows[i].action);
    }
    EXPECT_TRUE(oracle::rel_close(result.final_net_worth, rows[3].net_worth));
    EXPECT_EQ(result.start_net_worth, 1e6);
    EXPECT_EQ(result.valuation_price, 108);
}

TEST(RunBacktest, AlwaysHoldIsHalfExposure) {
    const auto data = dataset_from_opens({100, 90, 130, 125});
    const SplitSpec split{"X", "t", Date(2023, 1, 1), Date(2023, 1, 4)};
    const auto r = run_backtest(data, split, scripted({0, 0, 0}), RunOptions{FeeModel{0}, 1e6, 1});
    EXPECT_TRUE(oracle::rel_close(r.final_net_worth / r.start_net_worth, 0.5 + 0.5 * 125.0 / 100.0));
}

TEST(RunBacktest, OutOfRangeActionAbortsWithContext) {
    const auto data = dataset_from_opens({100, 90, 130, 125});
    const SplitSpec split{"X", "t", Date(2023, 1, 1), Date(2023, 1, 4)};
    try {
        run_backtest(data, split, scripted({0, 2, 0}));
        FAIL() << "expected StrategyError";
    } catch (const StrategyError& e) {
        EXPECT_NE(std::string(e.what()).find("2023-01-02"), std::string::npos) << e.what();
    }
}

TEST(RunBacktest, ContextHasNoLookahead) {
    Dataset data = dataset_from_opens({100, 101, 102, 103, 104, 105});
    for (int i = 0; i < 6; ++i) {
        data.txn_stats.days.push_back({Date(2023, 1, 1).plus_days(i), double(i), 0, 0, 0, 0});
        data.news[Date(2023, 1, 1).plus_days(i)].push_back(
            {Date(2023, 1, 1).plus_days(i), "s", "t" + std::to_string(i), "x", std::nullopt});
    }
    const SplitSpec split{"X", "t", Date(2023, 1, 3), Date(2023, 1, 6)};
    for (int lag : {0, 1, 2}) {
        run_backtest(data, split,
                     [&](const DecisionContext& ctx) {
                         EXPECT_EQ(ctx.market_history.back().date, ctx.today.plus_days(-1));
                         EXPECT_EQ(ctx.opens().back(), ctx.today_open);
                         for (const auto& t : ctx.txn_stats_history) {
                             EXPECT_LE(t.date, ctx.today.plus_days(-lag));
                         }
                         EXPECT_EQ(ctx.txn_stats_history.back().date, ctx.today.plus_days(-lag));
                         for (const auto& n : ctx.news_history) EXPECT_LE(n.date, ctx.today.plus_days(-lag));
                         EXPECT_EQ(ctx.past_decisions.size(), ctx.day_index);
                         return TradeAction{0};
                     },
                     RunOptions{FeeModel{0}, 1e6, lag});
    }
}

TEST(RunBacktest, PastDecisionsCarryDailyReturns) {
    const auto data = dataset_from_opens({100, 110, 121, 100});
    const SplitSpec split{"X", "t", Date(2023, 1, 1), Date(2023, 1, 4)};
    std::vector<PastDecision> seen;
    run_backtest(data, split,
                 [&](const DecisionContext& ctx) {
                     seen.assign(ctx.past_decisions.begin(), ctx.past_decisions.end());
                     return TradeAction{ctx.day_index == 0 ? 1.0 : 0.0};
                 },
                 RunOptions{FeeModel{0}, 1e6, 1});
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_TRUE(oracle::rel_close(seen[0].daily_return, 0.10));
    EXPECT_TRUE(oracle::rel_close(seen[1].daily_return, 0.10));
    EXPECT_EQ(seen[0].action.fraction, 1.0);
}

TEST(RunBacktest, DeterministicAndRandomizedAgainstStepper) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> act(-1, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto opens = oracle::random_walk(rng, 30);
        std::vector<double> actions(29);
        for (auto& a : actions) a = act(rng);
        const auto data = dataset_from_opens(opens);
        const SplitSpec split{"X", "t", Date(2023, 1, 1), Date(2023, 1, 30)};
        const RunOptions opt{FeeModel{0.003}, 1e6, 1};
        const auto r1 = run_backtest(data, split, scripted(actions), opt);
        const auto r2 = run_backtest(data, split, scripted(actions), opt);
        EXPECT_EQ(r1, r2);
        oracle::StepState s{5e5L, 5e5L / opens[0]};
        for (std::size_t i = 0; i < actions.size(); ++i) {
            oracle::step(s, opens[i], actions[i], 0.003L);
            EXPECT_TRUE(oracle::rel_close(r1.records[i].post_cash, double(s.cash), 1e-9, 1e-6));
            EXPECT_TRUE(oracle::rel_close(r1.records[i].post_holdings, double(s.holdings), 1e-9, 1e-9));
        }
        const double final_oracle = double(s.cash + s.holdings * opens.back());
        EXPECT_TRUE(oracle::rel_close(r1.final_net_worth, final_oracle));
    }
}
