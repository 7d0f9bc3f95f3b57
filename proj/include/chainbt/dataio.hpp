#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainbt/date.hpp"

namespace chainbt {

// One day of OHLCV for a single asset. All monetary fields are USD.
struct MarketDay {
    Date date;
    double open = 0;
    double high = 0;
    double low = 0;
    double close = 0;
    double volume = 0;
    double market_cap = 0;

    friend bool operator==(const MarketDay&, const MarketDay&) = default;
};

// Daily on-chain activity. total_value_transferred is in native token units;
// avg_gas_price in the chain's native gas-price unit (Gwei for ETH).
struct TxnStatsDay {
    Date date;
    double num_transactions = 0;
    double active_wallets = 0;
    double total_value_transferred = 0;
    double avg_gas_price = 0;
    double total_gas_consumed = 0;

    friend bool operator==(const TxnStatsDay&, const TxnStatsDay&) = default;
};

struct NewsItem {
    Date date;
    std::string source;
    std::string title;
    std::string text;  // full body or a pre-made summary
    std::optional<std::string> url;

    friend bool operator==(const NewsItem&, const NewsItem&) = default;
};

struct TxnStatsSeries {
    // Free-text unit note carried in the file's leading `# unit:` comment.
    std::string value_unit;
    std::vector<TxnStatsDay> days;

    friend bool operator==(const TxnStatsSeries&, const TxnStatsSeries&) = default;
};

// Items grouped by date; file order is preserved within a date.
using NewsMap = std::map<Date, std::vector<NewsItem>>;

struct Dataset {
    std::vector<MarketDay> market;
    TxnStatsSeries txn_stats;
    NewsMap news;

    // First index with market[i].date >= d, or market.size().
    [[nodiscard]] std::size_t lower_index(Date d) const;
    [[nodiscard]] const MarketDay* find(Date d) const;
};

// Checks cross-series invariants (market strictly increasing, side series not
// extending past the last market day). Throws DataError.
void validate_dataset(const Dataset& dataset);

struct SplitSpec {
    std::string asset;
    std::string name;
    Date start;  // first trading day
    Date end;    // valuation day, not traded

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitSlice {
    std::span<const MarketDay> trading_days;
    MarketDay valuation_day;
};

// Market CSV: `date,open,high,low,close,volume,market_cap` (any column order,
// extra columns ignored, `#` comment lines and blank lines skipped).
std::vector<MarketDay> read_market_csv(std::istream& in, std::string_view source = "<stream>");
std::vector<MarketDay> load_market_csv(const std::filesystem::path& path);
void write_market_csv(std::ostream& out, std::span<const MarketDay> days);

// Txn-stats CSV: `date,num_transactions,active_wallets,total_value_transferred,
// avg_gas_price,total_gas_consumed`, optionally preceded by `# unit: <text>`.
TxnStatsSeries read_txn_stats_csv(std::istream& in, std::string_view source = "<stream>");
TxnStatsSeries load_txn_stats_csv(const std::filesystem::path& path);
void write_txn_stats_csv(std::ostream& out, const TxnStatsSeries& series);

// News JSONL, one object per line: date, source, title, text, optional url.
NewsMap read_news_jsonl(std::istream& in, std::string_view source = "<stream>");
NewsMap load_news_jsonl(const std::filesystem::path& path);

// Trading days are [start, end); the valuation day is `end`. Every calendar
// day in [start, end] must be present.
SplitSlice slice_split(const Dataset& dataset, const SplitSpec& split);

// Split table CSV: `asset,name,start,end`.
std::vector<SplitSpec> read_splits_csv(std::istream& in, std::string_view source = "<stream>");
std::vector<SplitSpec> load_splits_csv(const std::filesystem::path& path);
void write_splits_csv(std::ostream& out, std::span<const SplitSpec> splits);

// The twelve BTC/ETH/SOL validation and test windows used by the benchmark.
const std::vector<SplitSpec>& default_splits();
const SplitSpec& find_split(std::span<const SplitSpec> splits, std::string_view asset,
                            std::string_view name);

// Shortest decimal that round-trips, never in exponent form.
std::string format_number(double value);

}  // namespace chainbt
