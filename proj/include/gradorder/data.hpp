#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gradorder/core.hpp"
#include "gradorder/rng.hpp"

namespace gradorder {

enum class TargetKind { None, Regression, Classification };

/// Immutable n x d feature matrix with optional targets. Classification
/// targets are stored as whole-number class ids 0..K-1, encoded in first
/// appearance order.
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> features;  // row-major
    TargetKind target_kind = TargetKind::None;
    std::vector<double> targets;
    std::size_t num_classes = 0;
    std::vector<std::string> feature_names;
    std::string target_name;
    std::vector<std::string> class_names;  // class id -> original label

    std::span<const double> row(std::size_t i) const {
        if (i >= rows) throw std::invalid_argument("Dataset::row: index out of range");
        return {features.data() + i * cols, cols};
    }

    int label(std::size_t i) const {
        if (target_kind != TargetKind::Classification)
            throw std::invalid_argument("Dataset::label: dataset has no class targets");
        return static_cast<int>(targets.at(i));
    }

    bool has_targets() const { return target_kind != TargetKind::None; }
};

/// n i.i.d. vectors, each coordinate uniform on [low, high). Deterministic in
/// seed via the fixed SplitMix64 stream.
inline Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t dim, double low,
                             double high) {
    if (n == 0 || dim == 0) throw std::invalid_argument("gen_synthetic: n and dim must be positive");
    if (!(low < high)) throw std::invalid_argument("gen_synthetic: requires low < high");
    Dataset d;
    d.rows = n;
    d.cols = dim;
    d.features.resize(n * dim);
    SplitMix64 rng(derive_stream(seed, 0));
    for (double& v : d.features) v = low + (high - low) * rng.next_unit();
    d.feature_names.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) d.feature_names.push_back("f" + std::to_string(j));
    return d;
}

/// Target column selector: by header name, by zero-based column index, or
/// absent (no target).
struct CsvSchema {
    std::variant<std::monostate, std::string, std::size_t> target = std::monostate{};
    TargetKind target_kind = TargetKind::None;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_numeric_cell(const std::string& cell, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw std::runtime_error("load_csv: unparseable numeric cell at row " +
                                 std::to_string(row) + ", column " + std::to_string(col) + " ('" +
                                 cell + "')");
    }
    return v;
}

}  // namespace detail

/// Loads a header-first CSV (UTF-8, comma separated, '.' decimal point).
/// Features are all non-target numeric columns; classification targets are
/// label-encoded 0..K-1 in first appearance order.
inline Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path.string());
    const std::vector<std::string> header = detail::split_csv_line(line);

    std::optional<std::size_t> target_col;
    if (std::holds_alternative<std::string>(schema.target)) {
        const auto& name = std::get<std::string>(schema.target);
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::invalid_argument("load_csv: target column '" + name + "' not found");
        target_col = static_cast<std::size_t>(it - header.begin());
    } else if (std::holds_alternative<std::size_t>(schema.target)) {
        const std::size_t idx = std::get<std::size_t>(schema.target);
        if (idx >= header.size())
            throw std::invalid_argument("load_csv: target column index out of range");
        target_col = idx;
    }
    if (schema.target_kind != TargetKind::None && !target_col)
        throw std::invalid_argument("load_csv: target_kind set but no target column given");

    Dataset d;
    d.target_kind = target_col ? schema.target_kind : TargetKind::None;
    d.cols = header.size() - (target_col ? 1 : 0);
    if (d.cols == 0) throw std::runtime_error("load_csv: no feature columns in " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (target_col && j == *target_col)
            d.target_name = header[j];
        else
            d.feature_names.push_back(header[j]);
    }

    std::vector<std::string> class_names;
    std::size_t row_number = 1;  // header is row 0
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            ++row_number;
            continue;
        }
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error("load_csv: row " + std::to_string(row_number) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (target_col && j == *target_col) {
                if (d.target_kind == TargetKind::Classification) {
                    auto it = std::find(class_names.begin(), class_names.end(), cells[j]);
                    if (it == class_names.end()) {
                        class_names.push_back(cells[j]);
                        it = std::prev(class_names.end());
                    }
                    d.targets.push_back(static_cast<double>(it - class_names.begin()));
                } else {
                    d.targets.push_back(detail::parse_numeric_cell(cells[j], row_number, j));
                }
            } else {
                d.features.push_back(detail::parse_numeric_cell(cells[j], row_number, j));
            }
        }
        ++row_number;
        ++d.rows;
    }
    d.num_classes = class_names.size();
    d.class_names = std::move(class_names);
    return d;
}

/// Writes a Dataset back out in the load_csv schema. Finite values round-trip
/// bit-identically (%.17g).
inline void save_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path.string() + " for writing");
    char buf[64];
    for (std::size_t j = 0; j < d.cols; ++j) {
        if (j) out << ',';
        out << (j < d.feature_names.size() ? d.feature_names[j] : "f" + std::to_string(j));
    }
    if (d.has_targets()) out << ',' << (d.target_name.empty() ? "target" : d.target_name);
    out << '\n';
    for (std::size_t i = 0; i < d.rows; ++i) {
        const auto r = d.row(i);
        for (std::size_t j = 0; j < d.cols; ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", r[j]);
            out << buf;
        }
        if (d.has_targets()) {
            out << ',';
            if (d.target_kind == TargetKind::Classification &&
                static_cast<std::size_t>(d.label(i)) < d.class_names.size()) {
                out << d.class_names[d.label(i)];
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", d.targets[i]);
                out << buf;
            }
        }
        out << '\n';
    }
}

/// Per-feature min-max scaling onto [lo, hi]; constant columns map to lo.
/// Targets are left untouched.
inline Dataset min_max_scaled(const Dataset& d, double lo = 0.0, double hi = 1.0) {
    Dataset out = d;
    for (std::size_t j = 0; j < d.cols; ++j) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < d.rows; ++i) {
            mn = std::min(mn, d.features[i * d.cols + j]);
            mx = std::max(mx, d.features[i * d.cols + j]);
        }
        const double span = mx - mn;
        for (std::size_t i = 0; i < d.rows; ++i) {
            double& v = out.features[i * d.cols + j];
            v = span > 0.0 ? lo + (hi - lo) * (v - mn) / span : lo;
        }
    }
    return out;
}

}  // namespace gradorder
