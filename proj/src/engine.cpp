#include "chainbt/engine.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "chainbt/error.hpp"

namespace chainbt {

bool TradeAction::valid() const {
    return std::isfinite(fraction) && fraction >= -1.0 && fraction <= 1.0;
}

void FeeModel::validate() const {
    if (!std::isfinite(rate) || rate < 0.0 || rate >= 1.0) {
        throw ConfigError(fmt::format("fee rate must be in [0, 1), got {}", rate));
    }
}

std::vector<double> DecisionContext::opens() const {
    std::vector<double> out;
    out.reserve(market_history.size() + 1);
    for (const auto& d : market_history) out.push_back(d.open);
    out.push_back(today_open);
    return out;
}

PortfolioState init_portfolio(double capital, double first_open) {
    if (!std::isfinite(capital) || !(capital > 0)) {
        throw ConfigError(fmt::format("capital must be > 0, got {}", capital));
    }
    if (!std::isfinite(first_open) || !(first_open > 0)) {
        throw DataError(fmt::format("first open price must be > 0, got {}", first_open));
    }
    const double half = capital / 2.0;
    return PortfolioState{half, half / first_open};
}

Execution execute_action(const PortfolioState& state, double price, TradeAction action,
                         const FeeModel& fee) {
    if (!action.valid()) {
        throw StrategyError(fmt::format("action fraction must be in [-1, 1], got {}", action.fraction));
    }
    if (!std::isfinite(price) || !(price > 0)) {
        throw DataError(fmt::format("execution price must be > 0, got {}", price));
    }
    fee.validate();
    const double a = action.fraction;
    if (a > 0) {
        const double spend = a * state.cash;
        return {{state.cash - spend, state.holdings + spend * (1.0 - fee.rate) / price},
                spend * fee.rate};
    }
    if (a < 0) {
        const double sold = -a * state.holdings;
        return {{state.cash + sold * price * (1.0 - fee.rate), state.holdings - sold},
                sold * price * fee.rate};
    }
    return {state, 0.0};
}

namespace {

// Shares the first `count` elements of a date-ordered container whose dates
// are <= cutoff.
template <typename T>
std::span<const T> prefix_through(std::span<const T> items, Date cutoff) {
    auto it = std::upper_bound(items.begin(), items.end(), cutoff,
                               [](Date d, const T& x) { return d < x.date; });
    return items.first(static_cast<std::size_t>(it - items.begin()));
}

}  // namespace

RunResult run_backtest(const Dataset& dataset, const SplitSpec& split, const Strategy& strategy,
                       const RunOptions& options) {
    options.fee.validate();
    if (options.info_lag_days < 0) throw ConfigError("info lag must be >= 0 days");
    const auto slice = slice_split(dataset, split);
    const auto first_index = dataset.lower_index(split.start);

    std::vector<NewsItem> news;
    for (const auto& [date, items] : dataset.news) news.insert(news.end(), items.begin(), items.end());
    const std::span<const NewsItem> news_all(news);
    const std::span<const TxnStatsDay> txn_all(dataset.txn_stats.days);

    RunResult result;
    result.split = split;
    result.start_net_worth = options.capital;
    result.records.reserve(slice.trading_days.size());

    auto state = init_portfolio(options.capital, slice.trading_days.front().open);
    std::vector<PastDecision> past;
    past.reserve(slice.trading_days.size());
    double prev_pre_trade_worth = 0;

    for (std::size_t i = 0; i < slice.trading_days.size(); ++i) {
        const auto& day = slice.trading_days[i];
        const double pre_trade_worth = state.cash + state.holdings * day.open;
        if (i > 0) past.back().daily_return = pre_trade_worth / prev_pre_trade_worth - 1.0;
        prev_pre_trade_worth = pre_trade_worth;

        const Date info_cutoff = day.date.plus_days(-options.info_lag_days);
        DecisionContext ctx{
            .asset = split.asset,
            .day_index = i,
            .today = day.date,
            .today_open = day.open,
            .market_history = std::span<const MarketDay>(dataset.market).first(first_index + i),
            .txn_stats_history = prefix_through(txn_all, info_cutoff),
            .news_history = prefix_through(news_all, info_cutoff),
            .txn_value_unit = dataset.txn_stats.value_unit,
            .info_lag_days = options.info_lag_days,
            .fee_rate = options.fee.rate,
            .portfolio = state,
            .past_decisions = past,
        };
        const TradeAction action = strategy(ctx);
        if (!action.valid()) {
            throw StrategyError(fmt::format("{} {}: strategy returned out-of-range action {} on {}",
                                            split.asset, split.name, action.fraction,
                                            day.date.iso()));
        }
        auto exec = execute_action(state, day.open, action, options.fee);
        state = exec.state;
        result.records.push_back(RunRecord{day.date, day.open, action, exec.fee_paid, state.cash,
                                           state.holdings, state.cash + state.holdings * day.open});
        past.push_back(PastDecision{day.date, action, 0.0});
    }

    result.valuation_price = slice.valuation_day.open;
    result.final_net_worth = state.cash + state.holdings * slice.valuation_day.open;
    return result;
}

}  // namespace chainbt
