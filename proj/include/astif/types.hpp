#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace astif {

/// Floor used for denominators that can reach zero in the scaled [0,1] domain.
inline constexpr double kEpsilon = 1e-8;

/// Calendar day, stored as days since 1970-01-01. No time-of-day component;
/// intraday timestamps are rejected at parse time.
struct Date {
    std::int32_t serial = 0;

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses "YYYY-MM-DD". Returns nullopt on anything else.
    static std::optional<Date> parse(std::string_view iso);

    std::string to_string() const;

    auto operator<=>(const Date&) const = default;
    Date operator+(int days) const { return Date{serial + days}; }
};

/// Dense row-major matrix used at module boundaries (feature rows, forest inputs).
struct DataMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DataMatrix() = default;
    DataMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * cols, cols);
    }
};

enum class Channel { SLM, ML };

inline const char* to_string(Channel c) { return c == Channel::SLM ? "SLM" : "ML"; }
std::optional<Channel> channel_from_string(std::string_view s);

} // namespace astif
