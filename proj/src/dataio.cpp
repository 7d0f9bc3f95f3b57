#include "chainbt/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chainbt/error.hpp"
#include "csv_table.hpp"

namespace chainbt {

using detail::CsvTable;
using detail::open_or_throw;
using detail::trim;

namespace {

template <typename Row>
void sort_unique_by_date(std::vector<std::pair<Row, std::size_t>>& rows, std::string_view source) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first.date == rows[i - 1].first.date) {
            auto lines = std::minmax(rows[i].second, rows[i - 1].second);
            throw DataError(fmt::format("{}:{}: duplicate date {} (first seen on line {})", source,
                                        lines.second, rows[i].first.date.iso(), lines.first));
        }
    }
}

constexpr std::array<std::string_view, 7> kMarketColumns{"date",  "open",   "high",      "low",
                                                         "close", "volume", "market_cap"};
constexpr std::array<std::string_view, 6> kTxnColumns{
    "date", "num_transactions", "active_wallets", "total_value_transferred", "avg_gas_price",
    "total_gas_consumed"};
constexpr std::string_view kUnitPrefix = "unit:";

}  // namespace

std::string format_number(double value) {
    std::array<char, 512> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::fixed);
    if (ec != std::errc{}) return fmt::format("{}", value);
    std::string out(buf.data(), ptr);
    if (out == "-0") out = "0";
    return out;
}

std::size_t Dataset::lower_index(Date d) const {
    auto it = std::lower_bound(market.begin(), market.end(), d,
                               [](const MarketDay& m, Date x) { return m.date < x; });
    return static_cast<std::size_t>(it - market.begin());
}

const MarketDay* Dataset::find(Date d) const {
    auto i = lower_index(d);
    return i < market.size() && market[i].date == d ? &market[i] : nullptr;
}

void validate_dataset(const Dataset& dataset) {
    for (std::size_t i = 1; i < dataset.market.size(); ++i) {
        if (!(dataset.market[i - 1].date < dataset.market[i].date)) {
            throw DataError(fmt::format("market series not strictly increasing at {}",
                                        dataset.market[i].date.iso()));
        }
    }
    if (dataset.market.empty()) return;
    auto last = dataset.market.back().date;
    if (!dataset.txn_stats.days.empty() && dataset.txn_stats.days.back().date > last) {
        throw DataError(fmt::format("txn stats extend past the market range ({} > {})",
                                    dataset.txn_stats.days.back().date.iso(), last.iso()));
    }
    if (!dataset.news.empty() && dataset.news.rbegin()->first > last) {
        throw DataError(fmt::format("news extends past the market range ({} > {})",
                                    dataset.news.rbegin()->first.iso(), last.iso()));
    }
}

std::vector<MarketDay> read_market_csv(std::istream& in, std::string_view source) {
    CsvTable table(in, source, kMarketColumns);
    std::vector<std::pair<MarketDay, std::size_t>> rows;
    while (table.next()) {
        MarketDay d;
        d.date = table.date(0);
        d.open = table.number(1, "open");
        d.high = table.number(2, "high");
        d.low = table.number(3, "low");
        d.close = table.number(4, "close");
        d.volume = table.number(5, "volume");
        d.market_cap = table.number(6, "market_cap");
        const std::array<std::pair<std::string_view, double>, 6> checks{
            {{"open", d.open},
             {"high", d.high},
             {"low", d.low},
             {"close", d.close},
             {"volume", d.volume},
             {"market_cap", d.market_cap}}};
        for (auto [name, v] : checks) {
            if (!(v > 0)) table.fail(fmt::format("field '{}' must be > 0, got {}", name, v));
        }
        if (d.low > std::min(d.open, d.close) || d.high < std::max(d.open, d.close)) {
            table.fail("low/high do not bracket open and close");
        }
        rows.emplace_back(d, table.line_no());
    }
    sort_unique_by_date(rows, source);
    std::vector<MarketDay> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(r.first);
    return out;
}

std::vector<MarketDay> load_market_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_market_csv(in, path.string());
}

void write_market_csv(std::ostream& out, std::span<const MarketDay> days) {
    out << "date,open,high,low,close,volume,market_cap\n";
    for (const auto& d : days) {
        out << d.date.iso() << ',' << format_number(d.open) << ',' << format_number(d.high) << ','
            << format_number(d.low) << ',' << format_number(d.close) << ','
            << format_number(d.volume) << ',' << format_number(d.market_cap) << '\n';
    }
}

TxnStatsSeries read_txn_stats_csv(std::istream& in, std::string_view source) {
    CsvTable table(in, source, kTxnColumns);
    TxnStatsSeries series;
    for (const auto& c : table.comments()) {
        std::string_view sv = c;
        if (sv.starts_with(kUnitPrefix)) series.value_unit = std::string(trim(sv.substr(kUnitPrefix.size())));
    }
    std::vector<std::pair<TxnStatsDay, std::size_t>> rows;
    while (table.next()) {
        TxnStatsDay d;
        d.date = table.date(0);
        std::array<double*, 5> targets{&d.num_transactions, &d.active_wallets,
                                       &d.total_value_transferred, &d.avg_gas_price,
                                       &d.total_gas_consumed};
        for (std::size_t i = 0; i < targets.size(); ++i) {
            *targets[i] = table.number(i + 1, kTxnColumns[i + 1]);
            if (*targets[i] < 0) {
                table.fail(fmt::format("field '{}' must be >= 0, got {}", kTxnColumns[i + 1],
                                       format_number(*targets[i])));
            }
        }
        rows.emplace_back(d, table.line_no());
    }
    sort_unique_by_date(rows, source);
    series.days.reserve(rows.size());
    for (auto& r : rows) series.days.push_back(r.first);
    return series;
}

TxnStatsSeries load_txn_stats_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_txn_stats_csv(in, path.string());
}

void write_txn_stats_csv(std::ostream& out, const TxnStatsSeries& series) {
    if (!series.value_unit.empty()) out << "# " << kUnitPrefix << ' ' << series.value_unit << '\n';
    out << "date,num_transactions,active_wallets,total_value_transferred,avg_gas_price,"
           "total_gas_consumed\n";
    for (const auto& d : series.days) {
        out << d.date.iso() << ',' << format_number(d.num_transactions) << ','
            << format_number(d.active_wallets) << ',' << format_number(d.total_value_transferred)
            << ',' << format_number(d.avg_gas_price) << ',' << format_number(d.total_gas_consumed)
            << '\n';
    }
}

NewsMap read_news_jsonl(std::istream& in, std::string_view source) {
    NewsMap out;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](std::string_view what) {
        throw DataError(fmt::format("{}:{}: {}", source, line_no, what));
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(fmt::format("malformed JSON: {}", e.what()));
        }
        if (!obj.is_object()) fail("expected a JSON object");
        auto text_field = [&](const char* key, bool required) -> std::optional<std::string> {
            auto it = obj.find(key);
            if (it == obj.end() || it->is_null()) {
                if (required) fail(fmt::format("missing '{}'", key));
                return std::nullopt;
            }
            if (!it->is_string()) fail(fmt::format("'{}' must be a string", key));
            return it->get<std::string>();
        };
        NewsItem item;
        try {
            item.date = Date::parse(*text_field("date", true));
        } catch (const DataError& e) {
            fail(e.what());
        }
        item.source = text_field("source", false).value_or("");
        item.title = *text_field("title", true);
        item.text = *text_field("text", true);
        item.url = text_field("url", false);
        if (trim(item.title).empty()) fail("empty 'title'");
        if (trim(item.text).empty()) fail("empty 'text'");
        out[item.date].push_back(std::move(item));
    }
    return out;
}

NewsMap load_news_jsonl(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_news_jsonl(in, path.string());
}

SplitSlice slice_split(const Dataset& dataset, const SplitSpec& split) {
    const auto label = fmt::format("{} {}", split.asset, split.name);
    if (!(split.start < split.end)) {
        throw DataError(fmt::format("split {}: start {} is not before end {}", label,
                                    split.start.iso(), split.end.iso()));
    }
    auto first = dataset.lower_index(split.start);
    const auto span_days = static_cast<std::size_t>(split.end.days_since(split.start));
    for (std::size_t k = 0; k <= span_days; ++k) {
        auto expect = split.start.plus_days(static_cast<long>(k));
        auto i = first + k;
        if (i >= dataset.market.size() || dataset.market[i].date != expect) {
            throw DataError(fmt::format("split {}: market data missing {}", label, expect.iso()));
        }
    }
    return SplitSlice{std::span<const MarketDay>(dataset.market).subspan(first, span_days),
                      dataset.market[first + span_days]};
}

std::vector<SplitSpec> read_splits_csv(std::istream& in, std::string_view source) {
    constexpr std::array<std::string_view, 4> cols{"asset", "name", "start", "end"};
    CsvTable table(in, source, cols);
    std::vector<SplitSpec> out;
    while (table.next()) {
        SplitSpec s{std::string(table.field(0)), std::string(table.field(1)), table.date(2),
                    table.date(3)};
        if (s.asset.empty() || s.name.empty()) table.fail("asset and name must be non-empty");
        if (!(s.start < s.end)) table.fail("start must precede end");
        for (const auto& prev : out) {
            if (prev.asset == s.asset && prev.name == s.name) {
                table.fail(fmt::format("duplicate split {} {}", s.asset, s.name));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SplitSpec> load_splits_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_splits_csv(in, path.string());
}

void write_splits_csv(std::ostream& out, std::span<const SplitSpec> splits) {
    out << "asset,name,start,end\n";
    for (const auto& s : splits) {
        out << s.asset << ',' << s.name << ',' << s.start.iso() << ',' << s.end.iso() << '\n';
    }
}

const std::vector<SplitSpec>& default_splits() {
    static const std::vector<SplitSpec> splits{
        {"BTC", "validation", Date{2023, 1, 19}, Date{2023, 3, 13}},
        {"BTC", "bearish", Date{2023, 4, 12}, Date{2023, 6, 16}},
        {"BTC", "sideways", Date{2023, 6, 17}, Date{2023, 8, 25}},
        {"BTC", "bullish", Date{2023, 10, 1}, Date{2023, 12, 1}},
        {"ETH", "validation", Date{2023, 1, 13}, Date{2023, 3, 12}},
        {"ETH", "bearish", Date{2023, 4, 12}, Date{2023, 6, 16}},
        {"ETH", "sideways", Date{2023, 6, 20}, Date{2023, 8, 31}},
        {"ETH", "bullish", Date{2023, 10, 1}, Date{2023, 12, 1}},
        {"SOL", "validation", Date{2023, 1, 14}, Date{2023, 3, 12}},
        {"SOL", "bearish", Date{2023, 4, 12}, Date{2023, 6, 16}},
        {"SOL", "sideways", Date{2023, 7, 8}, Date{2023, 8, 31}},
        {"SOL", "bullish", Date{2023, 10, 1}, Date{2023, 12, 1}},
    };
    return splits;
}

const SplitSpec& find_split(std::span<const SplitSpec> splits, std::string_view asset,
                            std::string_view name) {
    for (const auto& s : splits) {
        if (s.asset == asset && s.name == name) return s;
    }
    throw ConfigError(fmt::format("unknown split '{} {}'", asset, name));
}

}  // namespace chainbt
