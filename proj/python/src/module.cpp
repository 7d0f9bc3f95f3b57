// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the package wrapper, so the artifact schema stays the same
// on both sides.

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chainbt/agents.hpp"
#include "chainbt/artifact.hpp"
#include "chainbt/commands.hpp"
#include "chainbt/dataio.hpp"
#include "chainbt/engine.hpp"
#include "chainbt/error.hpp"
#include "chainbt/indicators.hpp"
#include "chainbt/metrics.hpp"
#include "chainbt/strategies.hpp"

namespace py = pybind11;
using namespace chainbt;
using nlohmann::json;

namespace {

// Defaults overlaid with the caller's keys, then data paths filled in.
commands::RunConfig config_from(const std::string& overrides, const std::string& data_dir,
                                const std::string& out_dir) {
    auto j = commands::RunConfig{}.to_json();
    j.merge_patch(json::parse(overrides));
    auto c = commands::RunConfig::from_json(j);
    c.resolve_data_paths(data_dir);
    c.out_dir = out_dir;
    return c;
}

std::string with_path(json artifact, const std::optional<std::filesystem::path>& path) {
    if (path) artifact["_path"] = path->string();
    return artifact.dump();
}

std::string run_callable(const std::string& market_path, const std::string& start, const std::string& end,
                         const std::function<double(py::dict)>& fn, double fee_rate, double capital,
                         int info_lag_days) {
    Dataset d;
    d.market = load_market_csv(market_path);
    const SplitSpec split{"custom", "custom", Date::parse(start), Date::parse(end)};
    const auto strategy = [&](const DecisionContext& ctx) {
        py::dict day;
        day["day_index"] = ctx.day_index;
        day["date"] = ctx.today.iso();
        day["today_open"] = ctx.today_open;
        day["opens"] = ctx.opens();
        day["cash"] = ctx.portfolio.cash;
        day["holdings"] = ctx.portfolio.holdings;
        return TradeAction{fn(day)};
    };
    const auto r = run_backtest(d, split, strategy, RunOptions{FeeModel{fee_rate}, capital, info_lag_days});
    json out{{"records", json::array()},
             {"start_net_worth", r.start_net_worth},
             {"final_net_worth", r.final_net_worth},
             {"valuation_price", r.valuation_price},
             {"summary", artifact::summary_to_json(metrics::summarize(r))}};
    for (const auto& rec : r.records) out["records"].push_back(artifact::record_to_json(rec));
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_chainbt, m) {
    m.doc() = "Backtesting core for daily crypto trading strategies";

    static py::exception<Error> error(m, "Error");
    static py::exception<DataError> data_error(m, "DataError", error.ptr());
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<StrategyError> strategy_error(m, "StrategyError", error.ptr());
    static py::exception<BackendError> backend_error(m, "BackendError", error.ptr());
    // Most derived first; the first matching handler wins.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DataError& e) {
            PyErr_SetString(data_error.ptr(), e.what());
        } catch (const ConfigError& e) {
            PyErr_SetString(config_error.ptr(), e.what());
        } catch (const StrategyError& e) {
            PyErr_SetString(strategy_error.ptr(), e.what());
        } catch (const BackendError& e) {
            PyErr_SetString(backend_error.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    m.def("sma", [](const std::vector<double>& p, std::size_t w) { return indicators::sma(p, w); },
          py::arg("prices"), py::arg("window"));
    m.def("ema", [](const std::vector<double>& p, std::size_t w) { return indicators::ema(p, w); },
          py::arg("prices"), py::arg("window"));
    m.def(
        "macd",
        [](const std::vector<double>& p, std::size_t fast, std::size_t slow, std::size_t signal) {
            std::vector<std::tuple<double, double, double>> out;
            for (const auto& x : indicators::macd(p, fast, slow, signal)) out.emplace_back(x.macd, x.signal, x.histogram);
            return out;
        },
        py::arg("prices"), py::arg("fast") = 12, py::arg("slow") = 26, py::arg("signal") = 9);
    m.def(
        "bollinger",
        [](const std::vector<double>& p, std::size_t w, double k) {
            std::vector<std::optional<std::tuple<double, double, double>>> out;
            for (const auto& x : indicators::bollinger(p, w, k)) {
                out.push_back(x ? std::optional(std::tuple(x->middle, x->upper, x->lower)) : std::nullopt);
            }
            return out;
        },
        py::arg("prices"), py::arg("window") = 20, py::arg("multiplier") = 2.0);

    m.def("daily_returns", [](const std::vector<double>& w) { return metrics::daily_returns(w); },
          py::arg("net_worth"));
    m.def(
        "sharpe",
        [](const std::vector<double>& r, double rf) {
            const auto s = metrics::sharpe(r, rf);
            return std::pair(s.value, s.degenerate);
        },
        py::arg("returns"), py::arg("risk_free") = 0.0);
    m.def("total_return", py::overload_cast<double, double>(&metrics::total_return), py::arg("start"),
          py::arg("end"));

    m.def(
        "execute_action",
        [](double cash, double holdings, double price, double fraction, double fee_rate) {
            const auto e = execute_action(PortfolioState{cash, holdings}, price, TradeAction{fraction},
                                          FeeModel{fee_rate});
            return std::tuple(e.state.cash, e.state.holdings, e.fee_paid);
        },
        py::arg("cash"), py::arg("holdings"), py::arg("price"), py::arg("fraction"), py::arg("fee_rate"));

    m.def(
        "parse_action",
        [](const std::string& text) -> std::optional<double> {
            const auto a = agents::parse_action(text);
            return a ? std::optional(a->fraction) : std::nullopt;
        },
        py::arg("text"));

    m.def("run_callable", &run_callable, py::arg("market_path"), py::arg("start"), py::arg("end"),
          py::arg("strategy"), py::arg("fee_rate"), py::arg("capital"), py::arg("info_lag_days"));

    m.def(
        "backtest",
        [](const std::string& cfg, const std::string& data_dir, const std::string& out_dir) {
            const auto c = config_from(cfg, data_dir, out_dir);
            py::gil_scoped_release release;
            const auto o = commands::cmd_backtest(c);
            return with_path(o.artifact, o.artifact_path);
        },
        py::arg("config"), py::arg("data_dir"), py::arg("out_dir"));
    m.def(
        "tune",
        [](const std::string& cfg, const std::string& data_dir, const std::string& out_dir) {
            const auto c = config_from(cfg, data_dir, out_dir);
            py::gil_scoped_release release;
            const auto o = commands::cmd_tune(c);
            return with_path(o.artifact, o.artifact_path);
        },
        py::arg("config"), py::arg("data_dir"), py::arg("out_dir"));
    m.def(
        "compare",
        [](const std::string& cfg, const std::string& data_dir, const std::string& out_dir,
           const std::vector<std::string>& kinds, const std::vector<std::string>& conditions,
           const std::string& format) {
            const auto c = config_from(cfg, data_dir, out_dir);
            std::vector<strategies::StrategyKind> parsed;
            for (const auto& k : kinds) parsed.push_back(strategies::parse_kind(k));
            const auto f = metrics::parse_table_format(format);
            py::gil_scoped_release release;
            return commands::cmd_compare(c, parsed, conditions, f).table;
        },
        py::arg("config"), py::arg("data_dir"), py::arg("out_dir"), py::arg("strategies"), py::arg("conditions"),
        py::arg("format"));
    m.def(
        "agent_run",
        [](const std::string& cfg, const std::string& data_dir, const std::string& out_dir) {
            const auto c = config_from(cfg, data_dir, out_dir);
            py::gil_scoped_release release;
            const auto o = commands::cmd_agent_run(c);
            return with_path(o.artifact, o.artifact_path);
        },
        py::arg("config"), py::arg("data_dir"), py::arg("out_dir"));
}
