#include "chainbt/metrics.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "chainbt/error.hpp"

namespace chainbt::metrics {

namespace {

constexpr double kZeroSpread = 1e-12;

std::string fixed2(double v) {
    auto s = fmt::format("{:.2f}", v);
    return s == "-0.00" ? "0.00" : s;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string mean_std(const MetricsSummary& m) {
    return fixed2(m.daily_return_mean) + "±" + fixed2(m.daily_return_std);
}

}  // namespace

std::vector<double> net_worth_path(const RunResult& result) {
    std::vector<double> w;
    w.reserve(result.records.size() + 1);
    w.push_back(result.start_net_worth);
    for (std::size_t i = 1; i < result.records.size(); ++i) w.push_back(result.records[i].net_worth);
    w.push_back(result.final_net_worth);
    return w;
}

double total_return(double start_worth, double end_worth) {
    if (!(start_worth > 0)) throw DataError("starting net worth must be > 0");
    return (end_worth - start_worth) / start_worth * 100.0;
}

double total_return(const RunResult& result) {
    return total_return(result.start_net_worth, result.final_net_worth);
}

std::vector<double> daily_returns(std::span<const double> net_worth) {
    for (double w : net_worth) {
        if (!(w > 0)) throw DataError(fmt::format("net worth must be > 0, got {}", w));
    }
    std::vector<double> r;
    if (net_worth.size() < 2) return r;
    r.reserve(net_worth.size() - 1);
    for (std::size_t t = 1; t < net_worth.size(); ++t) r.push_back(net_worth[t] / net_worth[t - 1] - 1.0);
    return r;
}

std::vector<double> daily_returns(const RunResult& result) {
    auto w = net_worth_path(result);
    return daily_returns(w);
}

SharpeResult sharpe(std::span<const double> returns, double risk_free) {
    if (returns.size() < 2) {
        throw DataError(fmt::format("sharpe needs at least 2 daily returns, got {}", returns.size()));
    }
    const double n = static_cast<double>(returns.size());
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double ss = 0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd < kZeroSpread) return {0.0, true};
    return {(mean - risk_free) / sd, false};
}

SharpeResult sharpe(const RunResult& result, double risk_free) {
    auto r = daily_returns(result);
    return sharpe(r, risk_free);
}

MetricsSummary summarize(const RunResult& result) {
    MetricsSummary m;
    m.total_return = total_return(result);
    auto r = daily_returns(result);
    if (r.empty()) return m;
    const double n = static_cast<double>(r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    m.daily_return_mean = mean * 100.0;
    if (r.size() >= 2) {
        double ss = 0;
        for (double x : r) ss += (x - mean) * (x - mean);
        m.daily_return_std = std::sqrt(ss / (n - 1.0)) * 100.0;
        auto s = sharpe(r);
        m.sharpe = s.value;
        m.sharpe_degenerate = s.degenerate;
    } else {
        m.sharpe_degenerate = true;
    }
    return m;
}

TableFormat parse_table_format(std::string_view name) {
    if (name == "md" || name == "markdown") return TableFormat::markdown;
    if (name == "csv") return TableFormat::csv;
    throw ConfigError(fmt::format("unknown table format '{}' (expected md or csv)", name));
}

std::string render_table(std::span<const LabeledSummary> rows, TableFormat format) {
    std::string out;
    if (format == TableFormat::markdown) {
        out += "| Strategy | Total Return (%) | Daily Return (%) | Sharpe Ratio |\n";
        out += "|---|---:|---:|---:|\n";
        for (const auto& r : rows) {
            out += fmt::format("| {} | {} | {} | {} |\n", r.label, fixed2(r.summary.total_return),
                               mean_std(r.summary), fixed2(r.summary.sharpe));
        }
    } else {
        out += "strategy,total_return,daily_return,sharpe\n";
        for (const auto& r : rows) {
            out += fmt::format("{},{},{},{}\n", csv_escape(r.label), fixed2(r.summary.total_return),
                               mean_std(r.summary), fixed2(r.summary.sharpe));
        }
    }
    return out;
}

std::string render_condition_table(std::span<const std::string> conditions,
                                   std::span<const ConditionRow> rows, TableFormat format) {
    for (const auto& r : rows) {
        if (r.by_condition.size() != conditions.size()) {
            throw ConfigError(fmt::format("row '{}' has {} conditions, expected {}", r.label,
                                          r.by_condition.size(), conditions.size()));
        }
    }
    std::vector<std::string> header{"Strategy"};
    for (const char* group : {"Total Return (%)", "Daily Return (%)", "Sharpe Ratio"}) {
        for (const auto& c : conditions) header.push_back(fmt::format("{} {}", group, c));
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        if (format == TableFormat::markdown) {
            out += "|";
            for (const auto& c : cells) out += " " + c + " |";
        } else {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += csv_escape(cells[i]);
            }
        }
        out += '\n';
    };
    emit(header);
    if (format == TableFormat::markdown) {
        out += "|---|";
        for (std::size_t i = 1; i < header.size(); ++i) out += "---:|";
        out += '\n';
    }
    for (const auto& r : rows) {
        std::vector<std::string> cells{r.label};
        for (const auto& m : r.by_condition) cells.push_back(fixed2(m.total_return));
        for (const auto& m : r.by_condition) cells.push_back(mean_std(m));
        for (const auto& m : r.by_condition) cells.push_back(fixed2(m.sharpe));
        emit(cells);
    }
    return out;
}

}  // namespace chainbt::metrics
