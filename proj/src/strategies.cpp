#include "chainbt/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <future>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chainbt/error.hpp"
#include "chainbt/indicators.hpp"
#include "csv_table.hpp"

namespace chainbt::strategies {

namespace {

constexpr std::array<std::string_view, 6> kKindNames{"buy_and_hold", "sma",       "slma",
                                                     "macd",         "bollinger", "forecaster"};

constexpr std::array<std::string_view, 1> kSmaParams{"window"};
constexpr std::array<std::string_view, 2> kSlmaParams{"short", "long"};
constexpr std::array<std::string_view, 3> kMacdParams{"fast", "slow", "signal"};
constexpr std::array<std::string_view, 2> kBollingerParams{"window", "multiplier"};

constexpr std::array<double, 5> kWindowGrid{5, 10, 15, 20, 30};

constexpr std::string_view kCacheSchema = "chainbt.tuned_params/1";

TradeAction signal(int s) { return TradeAction{static_cast<double>(s)}; }

std::size_t as_window(double v) { return static_cast<std::size_t>(v); }

// Trailing SMA ending at index `end` (inclusive). Same arithmetic as
// indicators::sma so values agree bit-for-bit.
double trailing_sma(std::span<const double> prices, std::size_t end, std::size_t window) {
    return *indicators::sma(prices.subspan(end + 1 - window, window), window).back();
}

int sign_of(double v) { return (v > 0) - (v < 0); }

// Crossover over spreads produced on demand; `spread_at(k)` is defined for
// k in [0, count).
template <typename SpreadAt>
int crossover_lazy(std::size_t count, SpreadAt spread_at) {
    if (count < 2) return 0;
    const int today = sign_of(spread_at(count - 1));
    if (today == 0) return 0;
    for (std::size_t k = count - 1; k-- > 0;) {
        const int prev = sign_of(spread_at(k));
        if (prev != 0) return prev == today ? 0 : today;
    }
    return today;
}

template <typename Error>
[[noreturn]] void rethrow_annotated(const std::string& id, const std::exception& e) {
    throw Error(fmt::format("{}: {}", id, e.what()));
}

}  // namespace

std::string_view kind_name(StrategyKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

StrategyKind parse_kind(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return static_cast<StrategyKind>(i);
    }
    throw ConfigError(fmt::format("unknown strategy '{}'", name));
}

std::span<const std::string_view> param_names(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::sma: return kSmaParams;
        case StrategyKind::slma: return kSlmaParams;
        case StrategyKind::macd: return kMacdParams;
        case StrategyKind::bollinger: return kBollingerParams;
        case StrategyKind::buy_and_hold:
        case StrategyKind::forecaster: return {};
    }
    return {};
}

std::string StrategySpec::id() const {
    std::string out(kind_name(kind));
    std::vector<std::string> parts;
    for (auto name : param_names(kind)) {
        auto it = params.find(name);
        if (it != params.end()) parts.push_back(fmt::format("{}={}", name, format_number(it->second)));
    }
    if (kind == StrategyKind::forecaster && !predictor.empty()) {
        parts.push_back(fmt::format("predictor={}", predictor));
    }
    if (!parts.empty()) out += fmt::format("({})", fmt::join(parts, ","));
    return out;
}

double StrategySpec::param(std::string_view name) const {
    auto it = params.find(name);
    if (it == params.end()) {
        throw ConfigError(fmt::format("{}: missing parameter '{}'", kind_name(kind), name));
    }
    return it->second;
}

nlohmann::json spec_to_json(const StrategySpec& spec) {
    nlohmann::json j;
    j["kind"] = kind_name(spec.kind);
    j["params"] = nlohmann::json::object();
    for (const auto& [k, v] : spec.params) j["params"][k] = v;
    if (spec.kind == StrategyKind::forecaster) j["predictor"] = spec.predictor;
    return j;
}

StrategySpec spec_from_json(const nlohmann::json& j) {
    try {
        StrategySpec spec;
        spec.kind = parse_kind(j.at("kind").get<std::string>());
        if (j.contains("params")) {
            for (const auto& [k, v] : j.at("params").items()) spec.params[k] = v.get<double>();
        }
        if (j.contains("predictor")) spec.predictor = j.at("predictor").get<std::string>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("invalid strategy spec: {}", e.what()));
    }
}

StrategySpec with_defaults(StrategySpec spec) {
    auto fill = [&](std::string_view name, double v) { spec.params.try_emplace(std::string(name), v); };
    switch (spec.kind) {
        case StrategyKind::sma: fill("window", 20); break;
        case StrategyKind::slma:
            fill("short", 5);
            fill("long", 20);
            break;
        case StrategyKind::macd:
            fill("fast", 12);
            fill("slow", 26);
            fill("signal", 9);
            break;
        case StrategyKind::bollinger:
            fill("window", 20);
            fill("multiplier", 2);
            break;
        case StrategyKind::forecaster:
            if (spec.predictor.empty()) spec.predictor = "momentum";
            break;
        case StrategyKind::buy_and_hold: break;
    }
    return spec;
}

void validate(const StrategySpec& spec) {
    const auto names = param_names(spec.kind);
    const auto label = kind_name(spec.kind);
    for (const auto& [k, v] : spec.params) {
        if (std::find(names.begin(), names.end(), k) == names.end()) {
            throw ConfigError(fmt::format("{}: unknown parameter '{}'", label, k));
        }
        if (!std::isfinite(v)) throw ConfigError(fmt::format("{}: parameter '{}' is not finite", label, k));
    }
    auto window = [&](std::string_view name, double min) {
        const double v = spec.param(name);
        if (v != std::floor(v) || v < min || v > 1e6) {
            throw ConfigError(fmt::format("{}: '{}' must be an integer >= {}, got {}", label, name,
                                          min, format_number(v)));
        }
        return v;
    };
    switch (spec.kind) {
        case StrategyKind::buy_and_hold: break;
        case StrategyKind::sma: window("window", 1); break;
        case StrategyKind::slma:
            if (window("short", 1) >= window("long", 1)) {
                throw ConfigError("slma: short window must be < long window");
            }
            break;
        case StrategyKind::macd:
            window("signal", 1);
            if (window("fast", 1) >= window("slow", 1)) {
                throw ConfigError("macd: fast window must be < slow window");
            }
            break;
        case StrategyKind::bollinger:
            window("window", 2);
            if (!(spec.param("multiplier") > 0)) throw ConfigError("bollinger: multiplier must be > 0");
            break;
        case StrategyKind::forecaster:
            if (spec.predictor != "momentum" && spec.predictor != "persistence" &&
                spec.predictor != "file") {
                throw ConfigError(fmt::format("forecaster: unknown predictor '{}'", spec.predictor));
            }
            break;
    }
}

double persistence_predictor(std::span<const double> opens, Date) { return opens.back(); }

double momentum_predictor(std::span<const double> opens, Date) {
    const double today = opens.back();
    if (opens.size() < 2) return today;
    return today + (today - opens[opens.size() - 2]);
}

PredictionTable PredictionTable::read(std::istream& in, std::string_view source) {
    constexpr std::array<std::string_view, 2> cols{"date", "predicted_next_open"};
    detail::CsvTable table(in, source, cols);
    PredictionTable out;
    while (table.next()) {
        auto d = table.date(0);
        if (out.values_.contains(d)) table.fail(fmt::format("duplicate date {}", d.iso()));
        out.values_[d] = table.number(1, "predicted_next_open");
    }
    return out;
}

PredictionTable PredictionTable::load(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path);
    return read(in, path.string());
}

double PredictionTable::at(Date date) const {
    auto it = values_.find(date);
    if (it == values_.end()) {
        throw StrategyError(fmt::format("no prediction for {}", date.iso()));
    }
    return it->second;
}

Predictor PredictionTable::predictor() const {
    return [table = *this](std::span<const double>, Date today) { return table.at(today); };
}

TradeAction buy_and_hold(const DecisionContext& ctx) {
    return ctx.day_index == 0 ? signal(1) : signal(0);
}

TradeAction sma_strategy(const DecisionContext& ctx, std::size_t window) {
    if (window == 0) throw ConfigError("sma window must be >= 1");
    const auto opens = ctx.opens();
    if (opens.size() < window) return signal(0);
    const double avg = trailing_sma(opens, opens.size() - 1, window);
    if (ctx.today_open > avg) return signal(1);
    if (ctx.today_open < avg) return signal(-1);
    return signal(0);
}

TradeAction slma_strategy(const DecisionContext& ctx, std::size_t short_window,
                          std::size_t long_window) {
    if (short_window == 0 || short_window >= long_window) {
        throw ConfigError("slma requires 1 <= short < long");
    }
    const auto opens = ctx.opens();
    if (opens.size() < long_window) return signal(0);
    const std::size_t first = long_window - 1;
    return signal(crossover_lazy(opens.size() - first, [&](std::size_t k) {
        return trailing_sma(opens, first + k, short_window) -
               trailing_sma(opens, first + k, long_window);
    }));
}

TradeAction macd_strategy(const DecisionContext& ctx, std::size_t fast, std::size_t slow,
                          std::size_t signal_window) {
    const auto opens = ctx.opens();
    auto points = indicators::macd(opens, fast, slow, signal_window);
    if (opens.size() < slow) return signal(0);
    const std::size_t first = slow - 1;
    return signal(crossover_lazy(opens.size() - first,
                                 [&](std::size_t k) { return points[first + k].histogram; }));
}

TradeAction bollinger_strategy(const DecisionContext& ctx, std::size_t window, double multiplier) {
    const auto opens = ctx.opens();
    if (window < 2) throw ConfigError("bollinger window must be >= 2");
    if (opens.size() < window) return signal(0);
    auto bands = indicators::bollinger(std::span<const double>(opens).last(window), window, multiplier);
    const auto& b = *bands.back();
    if (ctx.today_open < b.lower) return signal(1);
    if (ctx.today_open > b.upper) return signal(-1);
    return signal(0);
}

TradeAction forecaster_strategy(const DecisionContext& ctx, const Predictor& predictor) {
    const auto opens = ctx.opens();
    const double predicted = predictor(opens, ctx.today);
    if (!std::isfinite(predicted) || !(predicted > 0)) {
        throw StrategyError(fmt::format("predictor returned invalid price {} on {}", predicted,
                                        ctx.today.iso()));
    }
    if (predicted > ctx.today_open) return signal(1);
    if (predicted < ctx.today_open) return signal(-1);
    return signal(0);
}

int crossover_signal(std::span<const double> spread) {
    return crossover_lazy(spread.size(), [&](std::size_t k) { return spread[k]; });
}

Strategy make_strategy(const StrategySpec& raw, const PredictionTable* predictions) {
    const auto spec = with_defaults(raw);
    validate(spec);
    switch (spec.kind) {
        case StrategyKind::buy_and_hold: return buy_and_hold;
        case StrategyKind::sma:
            return [w = as_window(spec.param("window"))](const DecisionContext& c) {
                return sma_strategy(c, w);
            };
        case StrategyKind::slma:
            return [s = as_window(spec.param("short")),
                    l = as_window(spec.param("long"))](const DecisionContext& c) {
                return slma_strategy(c, s, l);
            };
        case StrategyKind::macd:
            return [f = as_window(spec.param("fast")), s = as_window(spec.param("slow")),
                    g = as_window(spec.param("signal"))](const DecisionContext& c) {
                return macd_strategy(c, f, s, g);
            };
        case StrategyKind::bollinger:
            return [w = as_window(spec.param("window")),
                    m = spec.param("multiplier")](const DecisionContext& c) {
                return bollinger_strategy(c, w, m);
            };
        case StrategyKind::forecaster: {
            Predictor p;
            if (spec.predictor == "momentum") {
                p = momentum_predictor;
            } else if (spec.predictor == "persistence") {
                p = persistence_predictor;
            } else {
                if (predictions == nullptr) {
                    throw ConfigError("forecaster with predictor=file needs a prediction CSV");
                }
                p = predictions->predictor();
            }
            return [p = std::move(p)](const DecisionContext& c) { return forecaster_strategy(c, p); };
        }
    }
    throw ConfigError("unhandled strategy kind");
}

std::vector<StrategySpec> default_grid(StrategyKind kind) {
    std::vector<StrategySpec> grid;
    switch (kind) {
        case StrategyKind::sma:
            for (double w : kWindowGrid) grid.push_back({kind, {{"window", w}}, {}});
            break;
        case StrategyKind::slma:
            for (std::size_t i = 0; i < kWindowGrid.size(); ++i) {
                for (std::size_t j = i + 1; j < kWindowGrid.size(); ++j) {
                    grid.push_back({kind, {{"short", kWindowGrid[i]}, {"long", kWindowGrid[j]}}, {}});
                }
            }
            break;
        default: grid.push_back(with_defaults(StrategySpec{kind, {}, {}})); break;
    }
    return grid;
}

std::string_view metric_name(SelectionMetric metric) {
    return metric == SelectionMetric::total_return ? "total_return" : "sharpe";
}

SelectionMetric parse_metric(std::string_view name) {
    if (name == "total_return") return SelectionMetric::total_return;
    if (name == "sharpe") return SelectionMetric::sharpe;
    throw ConfigError(fmt::format("unknown selection metric '{}'", name));
}

bool ranks_above(const StrategySpec& a, const metrics::MetricsSummary& ma, const StrategySpec& b,
                 const metrics::MetricsSummary& mb, SelectionMetric metric) {
    const double sa = metric == SelectionMetric::total_return ? ma.total_return : ma.sharpe;
    const double sb = metric == SelectionMetric::total_return ? mb.total_return : mb.sharpe;
    if (sa != sb) return sa > sb;
    if (ma.sharpe != mb.sharpe) return ma.sharpe > mb.sharpe;
    const auto na = param_names(a.kind);
    for (auto name : na) {
        auto ia = a.params.find(name);
        auto ib = b.params.find(name);
        if (ia == a.params.end() || ib == b.params.end()) break;
        if (ia->second != ib->second) return ia->second < ib->second;
    }
    return false;
}

TuneReport tune(const Dataset& dataset, const SplitSpec& validation,
                std::span<const StrategySpec> grid, const RunOptions& options,
                SelectionMetric metric, const PredictionTable* predictions) {
    if (grid.empty()) throw ConfigError("tuning grid is empty");
    TuneReport report;
    report.asset = validation.asset;
    report.validation_split = validation.name;
    report.selection_metric = metric;
    for (const auto& s : grid) {
        auto spec = with_defaults(s);
        validate(spec);
        report.grid.push_back(std::move(spec));
    }

    std::vector<std::future<metrics::MetricsSummary>> jobs;
    jobs.reserve(report.grid.size());
    for (const auto& spec : report.grid) {
        jobs.push_back(std::async(std::launch::async, [&dataset, &validation, &options, &spec,
                                                       predictions] {
            auto strategy = make_strategy(spec, predictions);
            return metrics::summarize(run_backtest(dataset, validation, strategy, options));
        }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto id = report.grid[i].id();
        try {
            report.scores.push_back(jobs[i].get());
        } catch (const DataError& e) {
            rethrow_annotated<DataError>(id, e);
        } catch (const ConfigError& e) {
            rethrow_annotated<ConfigError>(id, e);
        } catch (const StrategyError& e) {
            rethrow_annotated<StrategyError>(id, e);
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < report.grid.size(); ++i) {
        if (ranks_above(report.grid[i], report.scores[i], report.grid[best], report.scores[best],
                        metric)) {
            best = i;
        }
    }
    report.chosen_index = best;
    report.chosen = report.grid[best];
    return report;
}

TunedParamCache TunedParamCache::load(const std::filesystem::path& path) {
    TunedParamCache cache;
    if (!std::filesystem::exists(path)) return cache;
    std::ifstream in(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("schema").get<std::string>() != kCacheSchema) {
            throw ConfigError(fmt::format("{}: unsupported schema", path.string()));
        }
        for (const auto& [asset, kinds] : j.at("assets").items()) {
            for (const auto& [kind, spec] : kinds.items()) {
                cache.entries_[asset][kind] = spec_from_json(spec);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}: invalid tuned-parameter cache: {}", path.string(), e.what()));
    }
    return cache;
}

void TunedParamCache::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["schema"] = kCacheSchema;
    j["assets"] = nlohmann::json::object();
    for (const auto& [asset, kinds] : entries_) {
        for (const auto& [kind, spec] : kinds) j["assets"][asset][kind] = spec_to_json(spec);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    out << j.dump(2) << '\n';
}

void TunedParamCache::put(const std::string& asset, const TuneReport& report) {
    entries_[asset][std::string(kind_name(report.chosen.kind))] = report.chosen;
}

std::optional<StrategySpec> TunedParamCache::get(std::string_view asset, StrategyKind kind) const {
    auto a = entries_.find(std::string(asset));
    if (a == entries_.end()) return std::nullopt;
    auto k = a->second.find(std::string(kind_name(kind)));
    if (k == a->second.end()) return std::nullopt;
    return k->second;
}

}  // namespace chainbt::strategies
