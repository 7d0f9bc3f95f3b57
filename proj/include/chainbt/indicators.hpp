#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

// Windowed price indicators. Inputs are index-aligned daily prices (the
// engine feeds daily opens); outputs have the same length as the input, with
// std::nullopt marking warm-up positions where the window is not yet full.
namespace chainbt::indicators {

struct MacdPoint {
    double macd = 0;       // fast EMA - slow EMA
    double signal = 0;     // EMA of macd
    double histogram = 0;  // macd - signal
};

struct BollingerPoint {
    double middle = 0;
    double upper = 0;
    double lower = 0;
};

// Throws DataError unless every value is finite and > 0.
void validate_prices(std::span<const double> prices);

std::vector<std::optional<double>> sma(std::span<const double> prices, std::size_t window);

// Seeded with the first price: ema[0] = p[0], then
// ema[t] = a*p[t] + (1-a)*ema[t-1] with a = 2/(window+1), evaluated as
// ema[t-1] + a*(p[t] - ema[t-1]) so constant input is a fixed point.
std::vector<double> ema(std::span<const double> prices, std::size_t window);

std::vector<MacdPoint> macd(std::span<const double> prices, std::size_t fast = 12,
                            std::size_t slow = 26, std::size_t signal = 9);

// Bands are middle +/- multiplier * population standard deviation of the
// trailing window.
std::vector<std::optional<BollingerPoint>> bollinger(std::span<const double> prices,
                                                     std::size_t window = 20,
                                                     double multiplier = 2.0);

}  // namespace chainbt::indicators
