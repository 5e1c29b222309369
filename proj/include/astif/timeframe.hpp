#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "astif/types.hpp"

namespace astif {

/// Date-indexed table of raw or scaled series. Missing cells are NaN until
/// align_and_fill removes them.
struct TimeFrame {
    std::vector<Date> dates;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns; // columns[c][row]; NaN == missing
    std::string target_column;

    std::size_t rows() const { return dates.size(); }
    std::size_t n_cols() const { return names.size(); }

    bool has_column(const std::string& name) const;
    std::size_t column_index(const std::string& name) const; // throws DataError
    const std::vector<double>& column(const std::string& name) const;
    std::vector<double>& column(const std::string& name);

    /// Rows [begin, end), all columns.
    TimeFrame slice_rows(std::size_t begin, std::size_t end) const;
    std::size_t missing_count() const;
};

struct ColumnScale {
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false; // max == min
};

/// Per-column min/max fitted on a training slice; enables exact inverse maps.
struct ScalerParams {
    std::map<std::string, ColumnScale> per_column;

    nlohmann::json to_json() const;
    static ScalerParams from_json(const nlohmann::json& j);
};

enum class FillPolicy { ForwardFill, DropRow };

/// Loads a comma-separated file with a header row and one ISO date column.
/// Rows come back sorted by date; non-numeric cells are recorded as missing.
TimeFrame load_csv(const std::string& path, const std::string& date_column);

/// Merges frames onto one date axis. DropRow keeps the date intersection and
/// discards rows with any missing cell; ForwardFill takes the date union and
/// carries the last observation, dropping leading rows that cannot be filled.
TimeFrame align_and_fill(const std::vector<TimeFrame>& frames, FillPolicy policy);

/// Min/max over the given frame only; pass the training slice to avoid leakage.
ScalerParams fit_scaler(const TimeFrame& frame);

/// Maps each cell to (x - min) / (max - min), clipped to [0,1]. Degenerate
/// columns map to the constant 0.5.
TimeFrame transform(const TimeFrame& frame, const ScalerParams& scaler);

/// min + value * (max - min). Degenerate columns return their constant.
double inverse_transform(double value, const std::string& column, const ScalerParams& scaler);

/// Writes dates + columns as CSV (UTF-8, header row), the same format load_csv reads.
void write_csv(const TimeFrame& frame, const std::string& path, const std::string& date_column = "date");

} // namespace astif
