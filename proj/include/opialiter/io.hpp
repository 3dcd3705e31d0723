#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "opialiter/engines.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/space.hpp"

namespace opialiter {

/// %.17g: enough digits to round-trip every double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void write_json(std::string& out, const nlohmann::ordered_json& j, int indent, int depth) {
    const auto pad = [&](int d) { out.append(static_cast<std::size_t>(d * indent), ' '); };
    switch (j.type()) {
        case nlohmann::ordered_json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            std::size_t i = 0;
            for (const auto& [key, value] : j.items()) {
                pad(depth + 1);
                out += nlohmann::ordered_json(key).dump();
                out += ": ";
                write_json(out, value, indent, depth + 1);
                out += ++i < j.size() ? ",\n" : "\n";
            }
            pad(depth);
            out += "}";
            return;
        }
        case nlohmann::ordered_json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                pad(depth + 1);
                write_json(out, j[i], indent, depth + 1);
                out += i + 1 < j.size() ? ",\n" : "\n";
            }
            pad(depth);
            out += "]";
            return;
        }
        case nlohmann::ordered_json::value_t::number_float:
            out += format_double(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

}  // namespace detail

/// Deterministic serialization: insertion-ordered keys, two-space indent,
/// floats printed with 17 significant digits.
inline std::string dump_json(const nlohmann::ordered_json& j) {
    std::string out;
    detail::write_json(out, j, 2, 0);
    out += "\n";
    return out;
}

/// Compact single-line variant for JSON-lines output.
inline std::string dump_json_line(const nlohmann::ordered_json& j) {
    std::string out;
    detail::write_json(out, j, 0, 0);
    std::string compact;
    compact.reserve(out.size());
    for (char c : out) {
        if (c != '\n') {
            compact += c;
        }
    }
    return compact;
}

/// Write-temp-then-rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out << content;
        if (!out.flush()) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path.string(), "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Dense traces (every point dense, common dimension) export as CSV, the
/// rest as JSON lines.
inline bool trace_is_dense(const Trace& t) {
    if (t.points.empty() || !t.points.front().dim()) {
        return false;
    }
    const auto d = t.points.front().dim();
    for (std::size_t n = 0; n < t.points.size(); ++n) {
        if (t.points[n].dim() != d || t.images[n].dim() != d) {
            return false;
        }
    }
    return true;
}

// step_norm on row n is ||x_n - x_{n-1}|| (0 on row 0); residual_norm is
// ||f(x_n) - x_n||.

inline std::string trace_to_csv(const Trace& t) {
    const std::size_t d = *t.points.front().dim();
    std::string out = "step";
    for (std::size_t i = 0; i < d; ++i) {
        out += ",x[" + std::to_string(i) + "]";
    }
    for (std::size_t i = 0; i < d; ++i) {
        out += ",fx[" + std::to_string(i) + "]";
    }
    out += ",step_norm,residual_norm\n";
    for (std::size_t n = 0; n < t.points.size(); ++n) {
        out += std::to_string(n);
        for (double v : t.points[n].to_dense(d)) {
            out += "," + format_double(v);
        }
        for (double v : t.images[n].to_dense(d)) {
            out += "," + format_double(v);
        }
        out += "," + format_double(n == 0 ? 0.0 : distance(t.points[n], t.points[n - 1]));
        out += "," + format_double(distance(t.images[n], t.points[n])) + "\n";
    }
    return out;
}

inline std::string trace_to_jsonl(const Trace& t) {
    std::string out;
    for (std::size_t n = 0; n < t.points.size(); ++n) {
        nlohmann::ordered_json row;
        row["step"] = n;
        row["point"] = to_json(t.points[n]);
        row["image"] = to_json(t.images[n]);
        row["step_norm"] = n == 0 ? 0.0 : distance(t.points[n], t.points[n - 1]);
        row["residual_norm"] = distance(t.images[n], t.points[n]);
        out += dump_json_line(row) + "\n";
    }
    return out;
}

inline std::string export_trace(const Trace& t) { return trace_is_dense(t) ? trace_to_csv(t) : trace_to_jsonl(t); }

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line, const std::string& column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size()) {
        throw ParseError("line " + std::to_string(line) + ", column " + column, "not a number: \"" + cell + "\"");
    }
    return v;
}

}  // namespace detail

inline Trace trace_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("line 1", "empty trace file");
    }
    const auto header = detail::split_csv(line);
    std::size_t dim = 0;
    while (1 + dim < header.size() && header[1 + dim] == "x[" + std::to_string(dim) + "]") {
        ++dim;
    }
    const std::size_t expected = 1 + 2 * dim + 2;
    if (header.empty() || header[0] != "step" || dim == 0 || header.size() != expected ||
        header[expected - 2] != "step_norm" || header[expected - 1] != "residual_norm") {
        throw ParseError("line 1", "header must be step,x[0..d-1],fx[0..d-1],step_norm,residual_norm");
    }
    Trace t;
    t.scheme = ImportedScheme{};
    t.stop_reason = StopReason::imported;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto cells = detail::split_csv(line);
        if (cells.size() != expected) {
            throw ParseError("line " + std::to_string(lineno),
                             "expected " + std::to_string(expected) + " columns, got " + std::to_string(cells.size()));
        }
        std::vector<double> x(dim);
        std::vector<double> fx(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = detail::parse_cell(cells[1 + i], lineno, header[1 + i]);
            fx[i] = detail::parse_cell(cells[1 + dim + i], lineno, header[1 + dim + i]);
        }
        t.points.push_back(Point::dense(x));
        t.images.push_back(Point::dense(fx));
    }
    if (t.points.empty()) {
        throw ParseError("line 2", "trace has no rows");
    }
    return t;
}

inline Trace trace_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Trace t;
    t.scheme = ImportedScheme{};
    t.stop_reason = StopReason::imported;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::string where = "line " + std::to_string(lineno);
        nlohmann::ordered_json row;
        try {
            row = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(where, e.what());
        }
        if (!row.is_object() || !row.contains("point") || !row.contains("image")) {
            throw ParseError(where, "row needs \"point\" and \"image\"");
        }
        t.points.push_back(point_from_json(row["point"], std::nullopt, where + ".point"));
        t.images.push_back(point_from_json(row["image"], std::nullopt, where + ".image"));
    }
    if (t.points.empty()) {
        throw ParseError("line 1", "trace has no rows");
    }
    return t;
}

/// Reads either export format; JSON lines are recognised by a leading '{'.
inline Trace import_trace(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        return trace_from_jsonl(text);
    }
    return trace_from_csv(text);
}

}  // namespace opialiter
