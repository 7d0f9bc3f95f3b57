#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chainbt/dataio.hpp"

namespace chainbt {

struct PortfolioState {
    double cash = 0;      // USD
    double holdings = 0;  // asset units

    friend bool operator==(const PortfolioState&, const PortfolioState&) = default;
};

// Signed fraction: (0, 1] spends that share of cash, [-1, 0) sells that share
// of holdings, 0 holds.
struct TradeAction {
    double fraction = 0;

    [[nodiscard]] bool valid() const;
    friend bool operator==(const TradeAction&, const TradeAction&) = default;
};

// Proportional fee on traded notional, rate in [0, 1).
struct FeeModel {
    double rate = 0.002;

    void validate() const;
};

struct RunRecord {
    Date date;
    double execution_price = 0;  // the day's open
    TradeAction action;
    double fee_paid = 0;
    double post_cash = 0;
    double post_holdings = 0;
    double net_worth = 0;  // post_cash + post_holdings * execution_price

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct RunResult {
    SplitSpec split;
    std::vector<RunRecord> records;
    double start_net_worth = 0;
    double final_net_worth = 0;
    double valuation_price = 0;  // open of split.end

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

// A decision already taken, with the net-worth change it produced between
// its day's open (before trading) and the next day's open.
struct PastDecision {
    Date date;
    TradeAction action;
    double daily_return = 0;
};

// Everything a strategy may look at on one trading day. Nothing here is
// derived from today's high/low/close/volume or from any later day.
struct DecisionContext {
    std::string asset;
    std::size_t day_index = 0;  // 0 for the split's first trading day
    Date today;
    double today_open = 0;
    std::span<const MarketDay> market_history;     // all dataset days before today
    std::span<const TxnStatsDay> txn_stats_history;  // dated <= today - info lag
    std::span<const NewsItem> news_history;          // dated <= today - info lag, date-ordered
    std::string txn_value_unit;
    int info_lag_days = 1;
    double fee_rate = 0;
    PortfolioState portfolio;
    std::span<const PastDecision> past_decisions;

    // Opens of market_history followed by today's open.
    [[nodiscard]] std::vector<double> opens() const;
};

using Strategy = std::function<TradeAction(const DecisionContext&)>;

struct RunOptions {
    FeeModel fee;
    double capital = 1'000'000.0;
    // Days by which txn stats and news trail the decision day; 0 admits
    // same-day items.
    int info_lag_days = 1;
};

// Half the capital in cash, half converted to units at first_open, no fee.
PortfolioState init_portfolio(double capital, double first_open);

struct Execution {
    PortfolioState state;
    double fee_paid = 0;
};

Execution execute_action(const PortfolioState& state, double price, TradeAction action,
                         const FeeModel& fee);

// Runs `strategy` over every trading day of `split`, executing at each day's
// open, and values the final portfolio at the open of split.end.
RunResult run_backtest(const Dataset& dataset, const SplitSpec& split, const Strategy& strategy,
                       const RunOptions& options = {});

}  // namespace chainbt
