#include "chainbt/date.hpp"

#include <charconv>

#include <fmt/format.h>

#include "chainbt/error.hpp"

namespace chainbt {

namespace {

bool parse_fixed(std::string_view text, int& out) {
    if (text.empty()) return false;
    for (char c : text) {
        if (c < '0' || c > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Date Date::parse(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !parse_fixed(text.substr(0, 4), y) || !parse_fixed(text.substr(5, 2), m) ||
        !parse_fixed(text.substr(8, 2), d)) {
        throw DataError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", text));
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw DataError(fmt::format("invalid calendar date '{}'", text));
    return Date{std::chrono::sys_days{ymd}};
}

std::string Date::iso() const {
    std::chrono::year_month_day ymd{days_};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace chainbt
