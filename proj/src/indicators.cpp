#include "chainbt/indicators.hpp"

#include <cmath>

#include <fmt/format.h>

#include "chainbt/error.hpp"

namespace chainbt::indicators {

namespace {

// Mean taken relative to the first element so a constant window returns that
// constant exactly.
double window_mean(std::span<const double> w) {
    const double anchor = w.front();
    double sum = 0;
    for (double v : w) sum += v - anchor;
    return anchor + sum / static_cast<double>(w.size());
}

}  // namespace

void validate_prices(std::span<const double> prices) {
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!std::isfinite(prices[i]) || !(prices[i] > 0)) {
            throw DataError(fmt::format("price at index {} must be finite and > 0, got {}", i,
                                        prices[i]));
        }
    }
}

std::vector<std::optional<double>> sma(std::span<const double> prices, std::size_t window) {
    if (window == 0) throw ConfigError("sma window must be >= 1");
    validate_prices(prices);
    std::vector<std::optional<double>> out(prices.size());
    for (std::size_t t = window - 1; t < prices.size(); ++t) {
        out[t] = window_mean(prices.subspan(t + 1 - window, window));
    }
    return out;
}

std::vector<double> ema(std::span<const double> prices, std::size_t window) {
    if (window == 0) throw ConfigError("ema window must be >= 1");
    if (prices.empty()) throw DataError("ema requires a non-empty series");
    validate_prices(prices);
    const double alpha = 2.0 / (static_cast<double>(window) + 1.0);
    std::vector<double> out(prices.size());
    out[0] = prices[0];
    for (std::size_t t = 1; t < prices.size(); ++t) {
        out[t] = out[t - 1] + alpha * (prices[t] - out[t - 1]);
    }
    return out;
}

std::vector<MacdPoint> macd(std::span<const double> prices, std::size_t fast, std::size_t slow,
                            std::size_t signal) {
    if (fast == 0 || signal == 0) throw ConfigError("macd windows must be >= 1");
    if (fast >= slow) {
        throw ConfigError(fmt::format("macd fast window ({}) must be < slow window ({})", fast, slow));
    }
    validate_prices(prices);
    std::vector<MacdPoint> out(prices.size());
    if (prices.empty()) return out;
    auto fast_ema = ema(prices, fast);
    auto slow_ema = ema(prices, slow);
    std::vector<double> line(prices.size());
    for (std::size_t t = 0; t < prices.size(); ++t) line[t] = fast_ema[t] - slow_ema[t];
    // The macd line may be zero or negative; run the recursion directly
    // rather than through ema(), which expects prices.
    const double alpha = 2.0 / (static_cast<double>(signal) + 1.0);
    double sig = line[0];
    for (std::size_t t = 0; t < prices.size(); ++t) {
        if (t > 0) sig += alpha * (line[t] - sig);
        out[t] = MacdPoint{line[t], sig, line[t] - sig};
    }
    return out;
}

std::vector<std::optional<BollingerPoint>> bollinger(std::span<const double> prices,
                                                     std::size_t window, double multiplier) {
    if (window < 2) throw ConfigError("bollinger window must be >= 2");
    if (!(multiplier > 0) || !std::isfinite(multiplier)) {
        throw ConfigError("bollinger multiplier must be finite and > 0");
    }
    validate_prices(prices);
    std::vector<std::optional<BollingerPoint>> out(prices.size());
    for (std::size_t t = window - 1; t < prices.size(); ++t) {
        auto w = prices.subspan(t + 1 - window, window);
        const double mid = window_mean(w);
        double ss = 0;
        for (double v : w) ss += (v - mid) * (v - mid);
        const double half = multiplier * std::sqrt(ss / static_cast<double>(window));
        out[t] = BollingerPoint{mid, mid + half, mid - half};
    }
    return out;
}

}  // namespace chainbt::indicators
