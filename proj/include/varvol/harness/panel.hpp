#pragma once

// Return panels: CSV I/O, price ingestion and chronological splitting.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "varvol/errors.hpp"

namespace varvol::harness {

using Matrix = Eigen::MatrixXd;

/// Log returns indexed by timestamp (rows) and symbol (columns).
/// Timestamps are strings compared lexicographically, so ISO dates order correctly.
struct ReturnsPanel {
    std::vector<std::string> timestamps;
    std::vector<std::string> symbols;
    Matrix values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    void validate() const {
        if (static_cast<std::size_t>(values.rows()) != timestamps.size()) {
            throw DataError("panel: " + std::to_string(timestamps.size()) + " timestamps for " +
                            std::to_string(values.rows()) + " rows");
        }
        if (static_cast<std::size_t>(values.cols()) != symbols.size() || symbols.empty()) {
            throw DataError("panel: symbol count does not match column count");
        }
        if (std::set<std::string>(symbols.begin(), symbols.end()).size() != symbols.size()) {
            throw DataError("panel: duplicate symbol");
        }
        for (std::size_t t = 1; t < timestamps.size(); ++t) {
            if (!(timestamps[t - 1] < timestamps[t])) {
                throw DataError("panel: timestamps not strictly increasing at '" + timestamps[t] + "'");
            }
        }
        for (Eigen::Index t = 0; t < values.rows(); ++t) {
            for (Eigen::Index j = 0; j < values.cols(); ++j) {
                if (!std::isfinite(values(t, j))) {
                    throw DataError("panel: non-finite value at " + timestamps[static_cast<std::size_t>(t)] + ", " +
                                    symbols[static_cast<std::size_t>(j)]);
                }
            }
        }
    }

    /// Rows [begin, end).
    ReturnsPanel slice(Eigen::Index begin, Eigen::Index end) const {
        if (begin < 0 || end > rows() || begin > end) throw std::out_of_range("panel slice out of range");
        return ReturnsPanel{{timestamps.begin() + begin, timestamps.begin() + end}, symbols,
                            values.middleRows(begin, end - begin)};
    }

    /// Columns in the given order.
    ReturnsPanel select(const std::vector<std::string>& wanted) const {
        ReturnsPanel out{timestamps, wanted, Matrix(rows(), static_cast<Eigen::Index>(wanted.size()))};
        for (std::size_t k = 0; k < wanted.size(); ++k) {
            const auto it = std::find(symbols.begin(), symbols.end(), wanted[k]);
            if (it == symbols.end()) throw DataError("panel: unknown symbol " + wanted[k]);
            out.values.col(static_cast<Eigen::Index>(k)) = values.col(it - symbols.begin());
        }
        return out;
    }

    bool operator==(const ReturnsPanel& o) const {
        return timestamps == o.timestamps && symbols == o.symbols && values.rows() == o.values.rows() &&
               values.cols() == o.values.cols() && values == o.values;
    }
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        out.emplace_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError(where + ": cannot parse number '" + s + "'");
    }
    return v;
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw DataError(path + ": empty file");
    return rows;
}

}  // namespace detail

/// Header `date,SYM1,...,SYMn`, one row per timestamp.
inline void write_panel_csv(const ReturnsPanel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "date";
    for (const auto& s : panel.symbols) out << ',' << s;
    out << '\n';
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
        out << panel.timestamps[static_cast<std::size_t>(t)];
        for (Eigen::Index j = 0; j < panel.cols(); ++j) out << ',' << format_double(panel.values(t, j));
        out << '\n';
    }
}

inline ReturnsPanel read_panel_csv(const std::string& path) {
    const auto rows = detail::read_csv(path);
    const auto& header = rows.front();
    if (header.size() < 2) throw DataError(path + ": header needs a date column and at least one symbol");
    ReturnsPanel panel;
    panel.symbols.assign(header.begin() + 1, header.end());
    panel.values.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(panel.symbols.size()));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string where = path + " line " + std::to_string(r + 1);
        if (rows[r].size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
        panel.timestamps.push_back(rows[r][0]);
        for (std::size_t j = 1; j < header.size(); ++j) {
            panel.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j - 1)) = parse_double(rows[r][j], where);
        }
    }
    panel.validate();
    return panel;
}

/// Removes rows where every asset's return is exactly zero.
inline ReturnsPanel drop_all_zero_rows(const ReturnsPanel& panel) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index t = 0; t < panel.rows(); ++t) {
        if ((panel.values.row(t).array() != 0.0).any()) keep.push_back(t);
    }
    ReturnsPanel out{{}, panel.symbols, Matrix(static_cast<Eigen::Index>(keep.size()), panel.cols())};
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.timestamps.push_back(panel.timestamps[static_cast<std::size_t>(keep[k])]);
        out.values.row(static_cast<Eigen::Index>(k)) = panel.values.row(keep[k]);
    }
    return out;
}

inline constexpr Eigen::Index kMinPanelRows = 10;

/// Reads `date,price` files, inner-joins them on date and returns log
/// returns between consecutive joined dates, minus all-zero rows. The
/// symbol is the price column's header, or the file stem when that header
/// is literally `price`.
inline ReturnsPanel ingest(const std::vector<std::string>& price_csv_paths) {
    if (price_csv_paths.empty()) throw ConfigError("ingest: no input files");
    std::vector<std::string> symbols;
    std::vector<std::map<std::string, double>> series;
    for (const auto& path : price_csv_paths) {
        const auto rows = detail::read_csv(path);
        if (rows.front().size() != 2) throw DataError(path + ": expected two columns (date, price)");
        std::string symbol = rows.front()[1];
        if (symbol.empty() || symbol == "price" || symbol == "Price") symbol = std::filesystem::path(path).stem().string();
        std::map<std::string, double> prices;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const std::string where = path + " line " + std::to_string(r + 1);
            if (rows[r].size() != 2) throw DataError(where + ": expected two fields");
            const double p = parse_double(rows[r][1], where);
            if (!(p > 0.0) || !std::isfinite(p)) throw DataError(where + ": non-positive price " + rows[r][1]);
            if (!prices.emplace(rows[r][0], p).second) throw DataError(where + ": duplicate date " + rows[r][0]);
        }
        symbols.push_back(symbol);
        series.push_back(std::move(prices));
    }

    std::vector<std::string> dates;
    for (const auto& [date, price] : series.front()) {
        bool everywhere = true;
        for (std::size_t k = 1; k < series.size() && everywhere; ++k) everywhere = series[k].count(date) > 0;
        if (everywhere) dates.push_back(date);
    }
    if (dates.size() < 2) throw DataError("ingest: fewer than two common dates after join");

    ReturnsPanel panel{{dates.begin() + 1, dates.end()}, symbols,
                       Matrix(static_cast<Eigen::Index>(dates.size() - 1), static_cast<Eigen::Index>(symbols.size()))};
    for (std::size_t t = 1; t < dates.size(); ++t) {
        for (std::size_t k = 0; k < series.size(); ++k) {
            panel.values(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(k)) =
                std::log(series[k].at(dates[t])) - std::log(series[k].at(dates[t - 1]));
        }
    }
    panel = drop_all_zero_rows(panel);
    if (panel.rows() < kMinPanelRows) {
        throw DataError("ingest: only " + std::to_string(panel.rows()) + " usable rows after join and filtering (need " +
                        std::to_string(kMinPanelRows) + ")");
    }
    panel.validate();
    return panel;
}

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;

    void validate() const {
        if (!(train > 0.0 && valid > 0.0 && test > 0.0)) throw ConfigError("split ratios must be positive");
        if (std::abs(train + valid + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    }
};

struct PanelSplit {
    ReturnsPanel train;
    ReturnsPanel valid;
    ReturnsPanel test;
};

/// Contiguous chronological split; boundaries are floor(cumulative ratio · T)
/// (a 1e-9 guard absorbs binary rounding such as 0.8 · 100 = 79.999...).
inline PanelSplit split(const ReturnsPanel& panel, const SplitRatios& ratios = {}) {
    ratios.validate();
    const double T = static_cast<double>(panel.rows());
    const auto b1 = static_cast<Eigen::Index>(std::floor(ratios.train * T + 1e-9));
    const auto b2 = static_cast<Eigen::Index>(std::floor((ratios.train + ratios.valid) * T + 1e-9));
    PanelSplit out{panel.slice(0, b1), panel.slice(b1, b2), panel.slice(b2, panel.rows())};
    for (const auto* seg : {&out.train, &out.valid, &out.test}) {
        if (seg->rows() < kMinPanelRows) {
            throw DataError("split: segment of " + std::to_string(seg->rows()) + " rows is shorter than " +
                            std::to_string(kMinPanelRows));
        }
    }
    return out;
}

/// Vertical concatenation of panels sharing symbols.
inline ReturnsPanel concat(const std::vector<const ReturnsPanel*>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no panels");
    ReturnsPanel out{{}, parts.front()->symbols, Matrix()};
    Eigen::Index total = 0;
    for (const auto* p : parts) {
        if (p->symbols != out.symbols) throw DataError("concat: symbol lists differ");
        total += p->rows();
    }
    out.values.resize(total, static_cast<Eigen::Index>(out.symbols.size()));
    Eigen::Index row = 0;
    for (const auto* p : parts) {
        out.values.middleRows(row, p->rows()) = p->values;
        out.timestamps.insert(out.timestamps.end(), p->timestamps.begin(), p->timestamps.end());
        row += p->rows();
    }
    return out;
}

}  // namespace varvol::harness
