#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "opialiter/errors.hpp"
#include "opialiter/space.hpp"

namespace opialiter {

/// Non-empty, bounded, closed, convex subsets with closed-form projection
/// and diameter.
class ConvexDomain {
public:
    struct Ball {
        Point center;
        double radius;
    };
    struct Box {
        Point lower;
        Point upper;
        std::size_t dim;
    };
    /// The probability simplex {x >= 0, sum x = 1} in R^dim.
    struct Simplex {
        std::size_t dim;
    };
    /// Norm ball of l2 centred at 0, used only to bound explicit sequences.
    struct WholeSpaceSparse {
        double radius_bound;
    };
    using Kind = std::variant<Ball, Box, Simplex, WholeSpaceSparse>;

    static ConvexDomain ball(Point center, double radius) {
        if (!(radius > 0.0) || !std::isfinite(radius)) {
            throw ValidationError("radius", "must be a positive finite number");
        }
        return ConvexDomain(Ball{std::move(center), radius});
    }

    static ConvexDomain box(const Point& lower, const Point& upper) {
        const auto dim = lower.dim() ? lower.dim() : upper.dim();
        if (!dim) {
            throw ValidationError("lower", "box bounds must be dense points");
        }
        const auto lo = lower.to_dense(*dim);
        const auto hi = upper.to_dense(*dim);
        for (std::size_t i = 0; i < *dim; ++i) {
            if (!(lo[i] < hi[i])) {
                throw ValidationError("upper", "must exceed lower in coordinate " + std::to_string(i));
            }
        }
        return ConvexDomain(Box{lower.with_dim(dim), upper.with_dim(dim), *dim});
    }

    static ConvexDomain simplex(std::size_t dim) {
        // dim 1 is the single point {1}, whose diameter is zero.
        if (dim < 2) {
            throw ValidationError("dim", "simplex needs dim >= 2");
        }
        return ConvexDomain(Simplex{dim});
    }

    static ConvexDomain whole_space_sparse(double radius_bound) {
        if (!(radius_bound > 0.0) || !std::isfinite(radius_bound)) {
            throw ValidationError("radius_bound", "must be a positive finite number");
        }
        return ConvexDomain(WholeSpaceSparse{radius_bound});
    }

    const Kind& kind() const noexcept { return kind_; }

    std::string kind_name() const {
        return std::visit(
            [](const auto& k) -> std::string {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Ball>) {
                    return "ball";
                } else if constexpr (std::is_same_v<K, Box>) {
                    return "box";
                } else if constexpr (std::is_same_v<K, Simplex>) {
                    return "simplex";
                } else {
                    return "sparse";
                }
            },
            kind_);
    }

    /// Dense ambient dimension, when the domain has one.
    std::optional<std::size_t> ambient_dim() const {
        return std::visit(
            [](const auto& k) -> std::optional<std::size_t> {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Ball>) {
                    return k.center.dim();
                } else if constexpr (std::is_same_v<K, WholeSpaceSparse>) {
                    return std::nullopt;
                } else {
                    return k.dim;
                }
            },
            kind_);
    }

    /// A distinguished interior point (ball centre, box midpoint, simplex
    /// barycentre, origin).
    Point center() const {
        return std::visit(
            [](const auto& k) -> Point {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Ball>) {
                    return k.center;
                } else if constexpr (std::is_same_v<K, Box>) {
                    return combine(0.5, k.lower, 0.5, k.upper);
                } else if constexpr (std::is_same_v<K, Simplex>) {
                    return Point::dense(std::vector<double>(k.dim, 1.0 / static_cast<double>(k.dim)));
                } else {
                    return Point::zero();
                }
            },
            kind_);
    }

private:
    explicit ConvexDomain(Kind kind) : kind_(std::move(kind)) {}

    Kind kind_;
};

namespace detail {

inline void require_within(const Point& x, std::size_t dim) {
    if ((x.dim() && *x.dim() != dim) || x.support_end() > dim) {
        throw DimensionMismatch("point does not live in R^" + std::to_string(dim));
    }
}

inline std::vector<double> project_simplex(std::vector<double> v) {
    // Sort-and-threshold; stable sort keeps equal values in index order.
    std::vector<double> sorted = v;
    std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) {
            theta = candidate;
        }
    }
    for (auto& x : v) {
        x = std::max(x - theta, 0.0);
    }
    return v;
}

}  // namespace detail

/// Exact projection onto the domain. WholeSpaceSparse has none.
inline Point project(const ConvexDomain& d, const Point& x) {
    return std::visit(
        [&](const auto& k) -> Point {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                const Point offset = x - k.center;
                const double r = norm(offset);
                // Points within a few ulps of the sphere count as projected,
                // which makes the projection exactly idempotent.
                if (r <= k.radius * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) {
                    return x.with_dim(k.center.dim() ? k.center.dim() : x.dim());
                }
                Point::Coords unit;
                for (const auto& [i, c] : offset.coords()) {
                    unit[i] = c / r * k.radius;
                }
                return combine(1.0, k.center, 1.0, Point(std::move(unit), offset.dim()));
            } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
                detail::require_within(x, k.dim);
                auto v = x.to_dense(k.dim);
                const auto lo = k.lower.to_dense(k.dim);
                const auto hi = k.upper.to_dense(k.dim);
                for (std::size_t i = 0; i < k.dim; ++i) {
                    v[i] = std::clamp(v[i], lo[i], hi[i]);
                }
                return Point::dense(v);
            } else if constexpr (std::is_same_v<K, ConvexDomain::Simplex>) {
                detail::require_within(x, k.dim);
                return Point::dense(detail::project_simplex(x.to_dense(k.dim)));
            } else {
                throw NotImplemented("projection onto a sparse whole-space domain");
            }
        },
        d.kind());
}

/// True iff x lies within distance `tol` of the domain.
inline bool contains(const ConvexDomain& d, const Point& x, double tol = 0.0) {
    return std::visit(
        [&](const auto& k) -> bool {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                return distance(x, k.center) <= k.radius + tol;
            } else if constexpr (std::is_same_v<K, ConvexDomain::WholeSpaceSparse>) {
                return norm(x) <= k.radius_bound + tol;
            } else {
                if ((x.dim() && *x.dim() != k.dim) || x.support_end() > k.dim) {
                    return false;
                }
                return distance(project(d, x), x) <= tol;
            }
        },
        d.kind());
}

/// Exact diameter sup ||v - w|| over the domain.
inline double diameter(const ConvexDomain& d) {
    return std::visit(
        [](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                return 2.0 * k.radius;
            } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
                return distance(k.upper, k.lower);
            } else if constexpr (std::is_same_v<K, ConvexDomain::Simplex>) {
                return std::sqrt(2.0);
            } else {
                return 2.0 * k.radius_bound;
            }
        },
        d.kind());
}

/// Uniform sample from a dense domain.
template <class Rng>
Point sample(const ConvexDomain& d, Rng& rng) {
    return std::visit(
        [&](const auto& k) -> Point {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                if (!k.center.dim()) {
                    throw NotImplemented("sampling a ball with a sparse centre");
                }
                const std::size_t n = *k.center.dim();
                std::normal_distribution<double> gauss;
                std::uniform_real_distribution<double> unit;
                std::vector<double> v(n);
                double len = 0.0;
                while (len == 0.0) {
                    for (auto& c : v) {
                        c = gauss(rng);
                    }
                    len = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
                }
                const double r = k.radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
                for (auto& c : v) {
                    c *= r / len;
                }
                return combine(1.0, k.center, 1.0, Point::dense(v));
            } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
                const auto lo = k.lower.to_dense(k.dim);
                const auto hi = k.upper.to_dense(k.dim);
                std::vector<double> v(k.dim);
                for (std::size_t i = 0; i < k.dim; ++i) {
                    v[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
                }
                return Point::dense(v);
            } else if constexpr (std::is_same_v<K, ConvexDomain::Simplex>) {
                std::exponential_distribution<double> expo;
                std::vector<double> v(k.dim);
                for (auto& c : v) {
                    c = expo(rng);
                }
                const double total = std::accumulate(v.begin(), v.end(), 0.0);
                for (auto& c : v) {
                    c /= total;
                }
                return Point::dense(v);
            } else {
                throw NotImplemented("sampling a sparse whole-space domain");
            }
        },
        d.kind());
}

// {"kind": "ball"|"box"|"simplex"|"sparse", ...}

inline nlohmann::ordered_json to_json(const ConvexDomain& d) {
    nlohmann::ordered_json j;
    j["kind"] = d.kind_name();
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConvexDomain::Ball>) {
                j["center"] = to_json(k.center);
                j["radius"] = k.radius;
            } else if constexpr (std::is_same_v<K, ConvexDomain::Box>) {
                j["lower"] = to_json(k.lower);
                j["upper"] = to_json(k.upper);
            } else if constexpr (std::is_same_v<K, ConvexDomain::Simplex>) {
                j["dim"] = k.dim;
            } else {
                j["radius_bound"] = k.radius_bound;
            }
        },
        d.kind());
    return j;
}

namespace detail {

template <class Json>
void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& field) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
            allowed.end()) {
            throw ParseError(field + "." + key, "unknown field");
        }
    }
}

template <class Json>
const Json& require(const Json& j, const char* key, const std::string& field) {
    if (!j.is_object() || !j.contains(key)) {
        throw ParseError(field + "." + key, "missing");
    }
    return j[key];
}

template <class Json>
double require_number(const Json& j, const char* key, const std::string& field) {
    const auto& v = require(j, key, field);
    if (!v.is_number()) {
        throw ParseError(field + "." + key, "must be a number");
    }
    return v.template get<double>();
}

template <class Json>
std::size_t require_count(const Json& j, const char* key, const std::string& field) {
    const auto& v = require(j, key, field);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.template get<std::int64_t>() < 0)) {
        throw ParseError(field + "." + key, "must be a non-negative integer");
    }
    return v.template get<std::size_t>();
}

/// Re-raise a constructor ValidationError with the enclosing field path.
template <class F>
auto with_field(const std::string& field, F&& make) {
    try {
        return make();
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        if (e.field().rfind(field, 0) == 0) {
            throw;
        }
        throw ValidationError(field + "." + e.field(), e.what());
    } catch (const DimensionMismatch& e) {
        throw ValidationError(field, e.what());
    }
}

}  // namespace detail

template <class Json>
ConvexDomain domain_from_json(const Json& j, std::optional<std::size_t> dense_dim = std::nullopt,
                              const std::string& field = "domain") {
    if (!j.is_object()) {
        throw ParseError(field, "expected an object");
    }
    const auto& kind_j = detail::require(j, "kind", field);
    if (!kind_j.is_string()) {
        throw ParseError(field + ".kind", "must be a string");
    }
    const std::string kind = kind_j.template get<std::string>();
    if (kind == "ball") {
        detail::reject_unknown(j, {"kind", "center", "radius"}, field);
        auto center = point_from_json(detail::require(j, "center", field), dense_dim, field + ".center");
        const double radius = detail::require_number(j, "radius", field);
        return detail::with_field(field, [&] { return ConvexDomain::ball(center, radius); });
    }
    if (kind == "box") {
        detail::reject_unknown(j, {"kind", "lower", "upper"}, field);
        auto lower = point_from_json(detail::require(j, "lower", field), dense_dim, field + ".lower");
        auto upper = point_from_json(detail::require(j, "upper", field), dense_dim, field + ".upper");
        return detail::with_field(field, [&] { return ConvexDomain::box(lower, upper); });
    }
    if (kind == "simplex") {
        detail::reject_unknown(j, {"kind", "dim"}, field);
        const auto dim = detail::require_count(j, "dim", field);
        return detail::with_field(field, [&] { return ConvexDomain::simplex(dim); });
    }
    if (kind == "sparse") {
        detail::reject_unknown(j, {"kind", "radius_bound"}, field);
        const double r = detail::require_number(j, "radius_bound", field);
        return detail::with_field(field, [&] { return ConvexDomain::whole_space_sparse(r); });
    }
    throw ParseError(field + ".kind", "unknown domain kind \"" + kind + "\"");
}

}  // namespace opialiter
