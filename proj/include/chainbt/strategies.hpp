#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chainbt/engine.hpp"
#include "chainbt/metrics.hpp"

namespace chainbt::strategies {

enum class StrategyKind { buy_and_hold, sma, slma, macd, bollinger, forecaster };

std::string_view kind_name(StrategyKind kind);
StrategyKind parse_kind(std::string_view name);

// Parameter names in their canonical order for each kind. Tie-breaking in
// tune() compares parameter values in this order.
std::span<const std::string_view> param_names(StrategyKind kind);

struct StrategySpec {
    StrategyKind kind = StrategyKind::buy_and_hold;
    std::map<std::string, double, std::less<>> params;
    // Forecaster only: "momentum", "persistence" or "file" (per-date CSV).
    std::string predictor;

    // Canonical identifier, e.g. "slma(short=5,long=20)".
    [[nodiscard]] std::string id() const;
    [[nodiscard]] double param(std::string_view name) const;

    friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

nlohmann::json spec_to_json(const StrategySpec& spec);
StrategySpec spec_from_json(const nlohmann::json& j);

// Fills missing parameters with the conventional defaults (sma window 20,
// slma 5/20, macd 12/26/9, bollinger 20/2, forecaster momentum).
StrategySpec with_defaults(StrategySpec spec);

// Throws ConfigError on unknown, missing or out-of-range parameters.
void validate(const StrategySpec& spec);

// Returns the next-day price forecast given opens up to and including today.
using Predictor = std::function<double(std::span<const double> opens, Date today)>;

double persistence_predictor(std::span<const double> opens, Date today);
// today + (today - yesterday); persistence on the first day.
double momentum_predictor(std::span<const double> opens, Date today);

// External model output: `date,predicted_next_open`, keyed by decision day.
class PredictionTable {
public:
    static PredictionTable load(const std::filesystem::path& path);
    static PredictionTable read(std::istream& in, std::string_view source = "<stream>");

    void set(Date date, double predicted) { values_[date] = predicted; }
    // Throws StrategyError naming the date when absent.
    [[nodiscard]] double at(Date date) const;
    [[nodiscard]] Predictor predictor() const;
    [[nodiscard]] std::size_t size() const { return values_.size(); }

private:
    std::map<Date, double> values_;
};

TradeAction buy_and_hold(const DecisionContext& ctx);
TradeAction sma_strategy(const DecisionContext& ctx, std::size_t window);
TradeAction slma_strategy(const DecisionContext& ctx, std::size_t short_window,
                          std::size_t long_window);
TradeAction macd_strategy(const DecisionContext& ctx, std::size_t fast = 12, std::size_t slow = 26,
                          std::size_t signal = 9);
TradeAction bollinger_strategy(const DecisionContext& ctx, std::size_t window = 20,
                               double multiplier = 2.0);
TradeAction forecaster_strategy(const DecisionContext& ctx, const Predictor& predictor);

// Crossover rule shared by slma and macd. `spread` holds (fast - slow) for
// every post-warm-up day up to today. Fires +1 when today's spread is
// positive and the latest nonzero spread before it was negative (or none
// existed); -1 symmetrically. Touching zero and returning does not re-fire.
int crossover_signal(std::span<const double> spread);

// `predictions` is required when spec.predictor == "file".
Strategy make_strategy(const StrategySpec& spec, const PredictionTable* predictions = nullptr);

// Default tuning grids: sma windows {5,10,15,20,30}; slma every short<long
// pair from the same set; a single default spec for the other kinds.
std::vector<StrategySpec> default_grid(StrategyKind kind);

enum class SelectionMetric { total_return, sharpe };

std::string_view metric_name(SelectionMetric metric);
SelectionMetric parse_metric(std::string_view name);

struct TuneReport {
    std::string asset;
    std::string validation_split;
    std::vector<StrategySpec> grid;
    std::vector<metrics::MetricsSummary> scores;  // aligned with grid
    std::size_t chosen_index = 0;
    StrategySpec chosen;
    SelectionMetric selection_metric = SelectionMetric::total_return;
};

// True when candidate a ranks strictly above b: higher metric, then higher
// Sharpe, then smaller parameters in canonical order.
bool ranks_above(const StrategySpec& a, const metrics::MetricsSummary& ma, const StrategySpec& b,
                 const metrics::MetricsSummary& mb, SelectionMetric metric);

// Backtests every grid spec on the validation split (in parallel) and picks
// the best by ranks_above.
TuneReport tune(const Dataset& dataset, const SplitSpec& validation,
                std::span<const StrategySpec> grid, const RunOptions& options,
                SelectionMetric metric = SelectionMetric::total_return,
                const PredictionTable* predictions = nullptr);

// Chosen parameters per asset and strategy kind, persisted as JSON so test
// runs can reuse validation choices.
class TunedParamCache {
public:
    static TunedParamCache load(const std::filesystem::path& path);  // missing file -> empty
    void save(const std::filesystem::path& path) const;

    void put(const std::string& asset, const TuneReport& report);
    [[nodiscard]] std::optional<StrategySpec> get(std::string_view asset, StrategyKind kind) const;

private:
    std::map<std::string, std::map<std::string, StrategySpec>> entries_;
};

}  // namespace chainbt::strategies
