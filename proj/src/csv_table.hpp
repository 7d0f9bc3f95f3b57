#pragma once

// Internal helpers shared by the CSV readers. Not installed.

#include <charconv>
#include <cmath>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>
#include <fstream>
#include <filesystem>

#include <fmt/format.h>

#include "chainbt/date.hpp"
#include "chainbt/error.hpp"

namespace chainbt::detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                            : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

// Row-oriented reader over a headed CSV. Columns are addressed by name so the
// on-disk order is irrelevant.
class CsvTable {
public:
    CsvTable(std::istream& in, std::string_view source, std::span<const std::string_view> required)
        : in_(in), source_(source) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            auto t = trim(line);
            if (t.empty()) continue;
            if (t.front() == '#') {
                comments_.emplace_back(trim(t.substr(1)));
                continue;
            }
            auto names = split_fields(t);
            for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(std::string(names[i]), i);
            break;
        }
        if (index_.empty()) throw DataError(fmt::format("{}: missing header row", source_));
        for (auto name : required) {
            auto it = index_.find(std::string(name));
            if (it == index_.end()) {
                throw DataError(fmt::format("{}: missing required column '{}'", source_, name));
            }
            columns_.push_back(it->second);
        }
        width_ = index_.size();
    }

    // Advances to the next data row; false at end of input.
    bool next() {
        while (std::getline(in_, line_)) {
            ++line_no_;
            auto t = trim(line_);
            if (t.empty() || t.front() == '#') continue;
            fields_ = split_fields(t);
            if (fields_.size() != width_) {
                fail(fmt::format("expected {} fields, found {}", width_, fields_.size()));
            }
            return true;
        }
        return false;
    }

    [[nodiscard]] std::string_view field(std::size_t required_index) const {
        return fields_[columns_[required_index]];
    }

    [[nodiscard]] double number(std::size_t required_index, std::string_view name) const {
        auto text = field(required_index);
        double v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
            fail(fmt::format("field '{}' is not a finite number: '{}'", name, text));
        }
        return v;
    }

    [[nodiscard]] Date date(std::size_t required_index) const {
        try {
            return Date::parse(field(required_index));
        } catch (const DataError& e) {
            fail(e.what());
        }
    }

    [[noreturn]] void fail(std::string_view what) const {
        throw DataError(fmt::format("{}:{}: {}", source_, line_no_, what));
    }

    [[nodiscard]] std::size_t line_no() const { return line_no_; }
    [[nodiscard]] const std::vector<std::string>& comments() const { return comments_; }

private:
    std::istream& in_;
    std::string source_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> columns_;
    std::size_t width_ = 0;
    std::size_t line_no_ = 0;
    std::string line_;
    std::vector<std::string_view> fields_;
    std::vector<std::string> comments_;
};

}  // namespace chainbt::detail
