#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "opialiter/errors.hpp"

namespace opialiter {

/// An element of R^d (dense mode, `dim()` set) or a finite-support element
/// of l2 (sparse mode). Coefficients live in an ordered index map; an absent
/// index is a zero coefficient and exact zeros are never stored, so two
/// points are equal iff their maps are equal.
class Point {
public:
    using Coords = std::map<std::size_t, double>;

    /// The sparse zero point.
    Point() = default;

    Point(Coords coords, std::optional<std::size_t> dim) : coords_(std::move(coords)), dim_(dim) {
        if (dim_ && *dim_ == 0) {
            throw ValidationError("dim", "must be positive");
        }
        for (auto it = coords_.begin(); it != coords_.end();) {
            if (!std::isfinite(it->second)) {
                throw ValidationError("coords", "coefficient at index " + std::to_string(it->first) +
                                                    " is not finite");
            }
            if (dim_ && it->first >= *dim_) {
                throw DimensionMismatch("index " + std::to_string(it->first) +
                                        " outside dimension " + std::to_string(*dim_));
            }
            it = it->second == 0.0 ? coords_.erase(it) : std::next(it);
        }
    }

    static Point dense(const std::vector<double>& values) {
        Coords c;
        for (std::size_t i = 0; i < values.size(); ++i) {
            c.emplace(i, values[i]);
        }
        return Point(std::move(c), values.size());
    }

    static Point dense(std::initializer_list<double> values) {
        return dense(std::vector<double>(values));
    }

    static Point sparse(Coords coords) { return Point(std::move(coords), std::nullopt); }

    /// scale * e_index.
    static Point basis(std::size_t index, double scale = 1.0,
                       std::optional<std::size_t> dim = std::nullopt) {
        return Point(Coords{{index, scale}}, dim);
    }

    static Point zero(std::optional<std::size_t> dim = std::nullopt) { return Point({}, dim); }

    const Coords& coords() const noexcept { return coords_; }
    std::optional<std::size_t> dim() const noexcept { return dim_; }
    bool is_dense() const noexcept { return dim_.has_value(); }
    bool is_zero() const noexcept { return coords_.empty(); }

    double operator[](std::size_t index) const {
        auto it = coords_.find(index);
        return it == coords_.end() ? 0.0 : it->second;
    }

    /// One past the largest stored index (0 for the zero point).
    std::size_t support_end() const noexcept {
        return coords_.empty() ? 0 : coords_.rbegin()->first + 1;
    }

    std::vector<double> to_dense(std::size_t n) const {
        if (support_end() > n) {
            throw DimensionMismatch("point has support beyond dimension " + std::to_string(n));
        }
        std::vector<double> out(n, 0.0);
        for (const auto& [i, v] : coords_) {
            out[i] = v;
        }
        return out;
    }

    /// Same coefficients, re-tagged with a dense dimension (or made sparse).
    Point with_dim(std::optional<std::size_t> dim) const { return Point(coords_, dim); }

    friend bool operator==(const Point& a, const Point& b) { return a.coords_ == b.coords_; }

private:
    Coords coords_;
    std::optional<std::size_t> dim_;
};

namespace detail {

inline std::optional<std::size_t> merged_dim(const Point& x, const Point& y) {
    if (x.dim() && y.dim()) {
        if (*x.dim() != *y.dim()) {
            throw DimensionMismatch("dense dimensions " + std::to_string(*x.dim()) + " and " +
                                    std::to_string(*y.dim()) + " differ");
        }
        return x.dim();
    }
    const auto dim = x.dim() ? x.dim() : y.dim();
    if (dim && std::max(x.support_end(), y.support_end()) > *dim) {
        throw DimensionMismatch("sparse operand has support beyond dense dimension " +
                                std::to_string(*dim));
    }
    return dim;
}

}  // namespace detail

/// a*x + b*y in canonical form.
inline Point combine(double a, const Point& x, double b, const Point& y) {
    const auto dim = detail::merged_dim(x, y);
    Point::Coords out;
    auto ix = x.coords().begin();
    auto iy = y.coords().begin();
    const auto ex = x.coords().end();
    const auto ey = y.coords().end();
    while (ix != ex || iy != ey) {
        if (iy == ey || (ix != ex && ix->first < iy->first)) {
            out.emplace_hint(out.end(), ix->first, a * ix->second);
            ++ix;
        } else if (ix == ex || iy->first < ix->first) {
            out.emplace_hint(out.end(), iy->first, b * iy->second);
            ++iy;
        } else {
            out.emplace_hint(out.end(), ix->first, a * ix->second + b * iy->second);
            ++ix;
            ++iy;
        }
    }
    return Point(std::move(out), dim);
}

inline double inner_product(const Point& x, const Point& y) {
    double sum = 0.0;
    auto ix = x.coords().begin();
    auto iy = y.coords().begin();
    while (ix != x.coords().end() && iy != y.coords().end()) {
        if (ix->first < iy->first) {
            ++ix;
        } else if (iy->first < ix->first) {
            ++iy;
        } else {
            sum += ix->second * iy->second;
            ++ix;
            ++iy;
        }
    }
    return sum;
}

/// Euclidean / l2 norm. Accumulates a scaled sum of squares so that
/// tiny iterates (deep in a converging tail) do not underflow to zero.
inline double norm(const Point& x) {
    double scale = 0.0;
    for (const auto& [i, v] : x.coords()) {
        scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& [i, v] : x.coords()) {
        const double r = v / scale;
        sum += r * r;
    }
    return scale * std::sqrt(sum);
}

inline double distance(const Point& x, const Point& y) { return norm(combine(1.0, x, -1.0, y)); }

inline Point operator+(const Point& x, const Point& y) { return combine(1.0, x, 1.0, y); }
inline Point operator-(const Point& x, const Point& y) { return combine(1.0, x, -1.0, y); }
inline Point operator*(double a, const Point& x) { return combine(a, x, 0.0, Point::zero()); }

// JSON: {"coords": {"<index>": value, ...}, "dim": n | null}

inline nlohmann::ordered_json to_json(const Point& x) {
    nlohmann::ordered_json coords = nlohmann::ordered_json::object();
    for (const auto& [i, v] : x.coords()) {
        coords[std::to_string(i)] = v;
    }
    nlohmann::ordered_json j;
    j["coords"] = std::move(coords);
    j["dim"] = x.dim() ? nlohmann::ordered_json(*x.dim()) : nlohmann::ordered_json(nullptr);
    return j;
}

/// Accepts the canonical object form, or a plain array of coefficients
/// which is read as a dense point (optionally checked against `dense_dim`).
template <class Json>
Point point_from_json(const Json& j, std::optional<std::size_t> dense_dim = std::nullopt,
                      const std::string& field = "point") {
    if (j.is_array()) {
        std::vector<double> values;
        for (const auto& v : j) {
            if (!v.is_number()) {
                throw ParseError(field, "array entries must be numbers");
            }
            values.push_back(v.template get<double>());
        }
        if (values.empty()) {
            throw ParseError(field, "empty coefficient array");
        }
        if (dense_dim && values.size() != *dense_dim) {
            throw ParseError(field, "expected " + std::to_string(*dense_dim) + " coefficients, got " +
                                        std::to_string(values.size()));
        }
        return Point::dense(values);
    }
    if (!j.is_object()) {
        throw ParseError(field, "expected an array or {\"coords\", \"dim\"} object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "coords" && key != "dim") {
            throw ParseError(field + "." + key, "unknown field");
        }
    }
    if (!j.contains("coords") || !j["coords"].is_object()) {
        throw ParseError(field + ".coords", "missing or not an object");
    }
    std::optional<std::size_t> dim;
    if (j.contains("dim") && !j["dim"].is_null()) {
        if (!j["dim"].is_number_unsigned()) {
            throw ParseError(field + ".dim", "must be a positive integer or null");
        }
        dim = j["dim"].template get<std::size_t>();
    }
    Point::Coords coords;
    for (const auto& [key, value] : j["coords"].items()) {
        if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos) {
            throw ParseError(field + ".coords", "index \"" + key + "\" is not a decimal integer");
        }
        if (!value.is_number()) {
            throw ParseError(field + ".coords." + key, "coefficient must be a number");
        }
        coords[std::stoul(key)] = value.template get<double>();
    }
    try {
        return Point(std::move(coords), dim);
    } catch (const Error& e) {
        throw ParseError(field, e.what());
    }
}

}  // namespace opialiter
