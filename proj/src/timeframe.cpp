#include "astif/timeframe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "astif/errors.hpp"

namespace astif {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null";
}

double parse_cell(const std::string& raw) {
    std::string s = trim(raw);
    if (is_missing_token(s)) return kNaN;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return kNaN; // non-numeric -> missing
    return v;
}

} // namespace

bool TimeFrame::has_column(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::size_t TimeFrame::column_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("no such column: " + name);
    return static_cast<std::size_t>(it - names.begin());
}

const std::vector<double>& TimeFrame::column(const std::string& name) const {
    return columns[column_index(name)];
}

std::vector<double>& TimeFrame::column(const std::string& name) {
    return columns[column_index(name)];
}

TimeFrame TimeFrame::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows()) throw DataError("slice_rows out of range");
    TimeFrame out;
    out.names = names;
    out.target_column = target_column;
    out.dates.assign(dates.begin() + begin, dates.begin() + end);
    out.columns.reserve(columns.size());
    for (const auto& col : columns) {
        out.columns.emplace_back(col.begin() + begin, col.begin() + end);
    }
    return out;
}

std::size_t TimeFrame::missing_count() const {
    std::size_t n = 0;
    for (const auto& col : columns) {
        for (double v : col) {
            if (std::isnan(v)) ++n;
        }
    }
    return n;
}

TimeFrame load_csv(const std::string& path, const std::string& date_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // BOM
    auto header = split_line(line);
    for (auto& h : header) h = trim(h);

    std::ptrdiff_t date_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == date_column) date_idx = static_cast<std::ptrdiff_t>(i);
    }
    if (date_idx < 0) throw DataError("date column '" + date_column + "' not found in " + path);

    TimeFrame frame;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (static_cast<std::ptrdiff_t>(i) != date_idx) frame.names.push_back(header[i]);
    }
    frame.columns.assign(frame.names.size(), {});

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        auto date = Date::parse(trim(cells[static_cast<std::size_t>(date_idx)]));
        if (!date) {
            throw DataError(path + ":" + std::to_string(line_no) + ": unparseable date '" +
                            trim(cells[static_cast<std::size_t>(date_idx)]) + "'");
        }
        frame.dates.push_back(*date);
        std::size_t c = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (static_cast<std::ptrdiff_t>(i) == date_idx) continue;
            frame.columns[c++].push_back(parse_cell(cells[i]));
        }
    }
    if (frame.dates.empty()) throw DataError("no data rows in " + path);

    // Sort rows by date, reject duplicates.
    std::vector<std::size_t> order(frame.dates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frame.dates[a] < frame.dates[b]; });
    TimeFrame sorted;
    sorted.names = frame.names;
    sorted.columns.assign(frame.names.size(), {});
    for (std::size_t r : order) {
        if (!sorted.dates.empty() && sorted.dates.back() == frame.dates[r]) {
            throw DataError(path + ": duplicate date " + frame.dates[r].to_string());
        }
        sorted.dates.push_back(frame.dates[r]);
        for (std::size_t c = 0; c < frame.columns.size(); ++c) {
            sorted.columns[c].push_back(frame.columns[c][r]);
        }
    }
    return sorted;
}

TimeFrame align_and_fill(const std::vector<TimeFrame>& frames, FillPolicy policy) {
    if (frames.empty()) throw DataError("align_and_fill: no frames");

    std::set<std::string> seen;
    for (const auto& f : frames) {
        for (const auto& n : f.names) {
            if (!seen.insert(n).second) throw DataError("column name collision: " + n);
        }
    }

    std::set<Date> date_set;
    if (policy == FillPolicy::DropRow) {
        date_set.insert(frames[0].dates.begin(), frames[0].dates.end());
        for (std::size_t i = 1; i < frames.size(); ++i) {
            std::set<Date> next;
            for (const auto& d : frames[i].dates) {
                if (date_set.count(d)) next.insert(d);
            }
            date_set.swap(next);
        }
        if (date_set.empty()) throw DataError("align_and_fill: empty date intersection");
    } else {
        for (const auto& f : frames) date_set.insert(f.dates.begin(), f.dates.end());
    }
    std::vector<Date> dates(date_set.begin(), date_set.end());

    TimeFrame out;
    out.dates = dates;
    for (const auto& f : frames) {
        std::map<Date, std::size_t> row_of;
        for (std::size_t r = 0; r < f.dates.size(); ++r) row_of[f.dates[r]] = r;
        for (std::size_t c = 0; c < f.names.size(); ++c) {
            std::vector<double> col(dates.size(), kNaN);
            double carry = kNaN;
            for (std::size_t r = 0; r < dates.size(); ++r) {
                auto it = row_of.find(dates[r]);
                if (it != row_of.end() && !std::isnan(f.columns[c][it->second])) {
                    carry = f.columns[c][it->second];
                }
                col[r] = (policy == FillPolicy::ForwardFill)
                             ? carry
                             : (it != row_of.end() ? f.columns[c][it->second] : kNaN);
            }
            out.names.push_back(f.names[c]);
            out.columns.push_back(std::move(col));
        }
        if (!f.target_column.empty() && out.target_column.empty()) {
            out.target_column = f.target_column;
        }
    }

    // Drop every row that still has a missing cell. Under forward fill only
    // leading rows can qualify; under drop-row any row with an original gap goes.
    std::vector<bool> keep(out.rows(), true);
    for (const auto& col : out.columns) {
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (std::isnan(col[r])) keep[r] = false;
        }
    }
    TimeFrame clean;
    clean.names = out.names;
    clean.target_column = out.target_column;
    clean.columns.assign(out.names.size(), {});
    for (std::size_t r = 0; r < out.rows(); ++r) {
        if (!keep[r]) continue;
        clean.dates.push_back(out.dates[r]);
        for (std::size_t c = 0; c < out.columns.size(); ++c) {
            clean.columns[c].push_back(out.columns[c][r]);
        }
    }
    if (clean.dates.empty()) throw DataError("align_and_fill: no complete rows remain");
    return clean;
}

ScalerParams fit_scaler(const TimeFrame& frame) {
    if (frame.rows() == 0) throw DataError("fit_scaler: empty frame");
    ScalerParams params;
    for (std::size_t c = 0; c < frame.n_cols(); ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : frame.columns[c]) {
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            throw DataError("fit_scaler: column '" + frame.names[c] + "' has no values");
        }
        params.per_column[frame.names[c]] = ColumnScale{lo, hi, lo == hi};
    }
    return params;
}

TimeFrame transform(const TimeFrame& frame, const ScalerParams& scaler) {
    TimeFrame out = frame;
    for (std::size_t c = 0; c < out.n_cols(); ++c) {
        auto it = scaler.per_column.find(out.names[c]);
        if (it == scaler.per_column.end()) {
            throw DataError("transform: column '" + out.names[c] + "' missing from scaler");
        }
        const ColumnScale& s = it->second;
        for (double& v : out.columns[c]) {
            if (std::isnan(v)) continue;
            if (s.degenerate) {
                v = 0.5;
            } else {
                v = std::clamp((v - s.min) / (s.max - s.min), 0.0, 1.0);
            }
        }
    }
    return out;
}

double inverse_transform(double value, const std::string& column, const ScalerParams& scaler) {
    auto it = scaler.per_column.find(column);
    if (it == scaler.per_column.end()) {
        throw DataError("inverse_transform: column '" + column + "' missing from scaler");
    }
    const ColumnScale& s = it->second;
    if (s.degenerate) return s.min;
    return s.min + value * (s.max - s.min);
}

nlohmann::json ScalerParams::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, s] : per_column) j[name] = {s.min, s.max};
    return j;
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
    ScalerParams p;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& pair = it.value();
        if (!pair.is_array() || pair.size() != 2) {
            throw DataError("scaler json: expected {column: [min,max]}");
        }
        double lo = pair[0].get<double>();
        double hi = pair[1].get<double>();
        if (hi < lo) throw DataError("scaler json: max < min for column " + it.key());
        p.per_column[it.key()] = ColumnScale{lo, hi, lo == hi};
    }
    return p;
}

void write_csv(const TimeFrame& frame, const std::string& path, const std::string& date_column) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << date_column;
    for (const auto& n : frame.names) out << ',' << n;
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        out << frame.dates[r].to_string();
        for (std::size_t c = 0; c < frame.n_cols(); ++c) {
            double v = frame.columns[c][r];
            if (std::isnan(v)) {
                out << ',';
            } else {
                std::snprintf(buf, sizeof(buf), "%.12g", v);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
}

} // namespace astif
