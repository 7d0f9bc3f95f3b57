#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace chainbt {

// Calendar day in UTC. Thin value wrapper over sys_days so that arithmetic
// is in whole days and ordering is chronological.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}) {}

    // Strict YYYY-MM-DD. Throws DataError on anything else, including
    // impossible dates such as 2023-02-30.
    static Date parse(std::string_view text);

    [[nodiscard]] std::string iso() const;
    [[nodiscard]] constexpr std::chrono::sys_days days() const { return days_; }

    [[nodiscard]] constexpr Date plus_days(long n) const {
        return Date{days_ + std::chrono::days{n}};
    }
    // Signed number of days from `other` to this date.
    [[nodiscard]] constexpr long days_since(Date other) const {
        return static_cast<long>((days_ - other.days_).count());
    }

    friend constexpr auto operator<=>(Date, Date) = default;
    friend constexpr bool operator==(Date, Date) = default;

private:
    std::chrono::sys_days days_{};
};

}  // namespace chainbt
