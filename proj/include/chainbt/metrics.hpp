#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainbt/engine.hpp"

namespace chainbt::metrics {

// Percent fields are in percentage points (39.66 means +39.66%).
struct MetricsSummary {
    double total_return = 0;
    double daily_return_mean = 0;
    double daily_return_std = 0;
    double sharpe = 0;
    bool sharpe_degenerate = false;  // daily returns had zero spread
};

struct SharpeResult {
    double value = 0;
    bool degenerate = false;
};

// Valuation points used for daily returns: start net worth, the post-trade
// net worth of trading days 2..n, then the final valuation. One point per
// open, so an n-day run yields n daily returns.
std::vector<double> net_worth_path(const RunResult& result);

double total_return(const RunResult& result);
double total_return(double start_worth, double end_worth);

std::vector<double> daily_returns(const RunResult& result);
std::vector<double> daily_returns(std::span<const double> net_worth);

// (mean - risk_free) / sample std. Zero spread yields 0 with degenerate set.
SharpeResult sharpe(std::span<const double> returns, double risk_free = 0.0);
SharpeResult sharpe(const RunResult& result, double risk_free = 0.0);

MetricsSummary summarize(const RunResult& result);

enum class TableFormat { markdown, csv };

TableFormat parse_table_format(std::string_view name);

struct LabeledSummary {
    std::string label;
    MetricsSummary summary;
};

// One row per summary in input order: label, total return, mean±std, Sharpe,
// all at two decimals.
std::string render_table(std::span<const LabeledSummary> rows, TableFormat format);

// Wide layout with one column group per market condition, as used by the
// baseline comparison: Total Return | Daily Return | Sharpe, each split by
// condition.
struct ConditionRow {
    std::string label;
    std::vector<MetricsSummary> by_condition;  // aligned with the condition list
};

std::string render_condition_table(std::span<const std::string> conditions,
                                   std::span<const ConditionRow> rows, TableFormat format);

}  // namespace chainbt::metrics
