#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "opialiter/domains.hpp"
#include "opialiter/errors.hpp"
#include "opialiter/space.hpp"
#include "opialiter/verdict.hpp"

namespace opialiter {

namespace detail {
struct OperatorNode;
}

/// A mapping f: M -> X from a closed catalog. Cheap to copy (shared
/// immutable node); evaluation is pure.
class Operator {
public:
    struct Identity {};
    /// x -> A x + b, with A either a scalar multiple of the identity
    /// (`scale`) or a dense row-major matrix.
    struct AffineContraction {
        std::optional<double> scale;
        Eigen::MatrixXd matrix;
        Point shift;
    };
    /// Planar rotation acting on coordinates 0 and 1.
    struct Rotation {
        double theta;
        double cos_theta;
        double sin_theta;
    };
    struct Projection {
        ConvexDomain domain;
    };
    /// x -> (1 - alpha) x + alpha inner(x).
    struct Averaged {
        std::shared_ptr<const Operator> inner;
        double alpha;
    };
    /// f(0) = 0, f(x) = x / (2 ||x||) otherwise. Discontinuous at 0.
    struct HalfRadial {};
    struct Scaling {
        double c;
    };
    /// Applied left to right: the first part acts first.
    struct Composed {
        std::vector<Operator> parts;
    };
    using Kind = std::variant<Identity, AffineContraction, Rotation, Projection, Averaged, HalfRadial,
                              Scaling, Composed>;

    static Operator identity();
    static Operator affine_contraction(double scale, Point shift);
    static Operator affine_contraction(const Eigen::MatrixXd& matrix, Point shift);
    static Operator rotation(double theta);
    static Operator projection(ConvexDomain domain);
    static Operator averaged(Operator inner, double alpha);
    static Operator half_radial();
    static Operator scaling(double c);
    static Operator composed(std::vector<Operator> parts);

    Point operator()(const Point& x) const;

    const Kind& kind() const;
    std::string kind_name() const;

    /// Global Lipschitz bound; empty for maps that have none.
    std::optional<double> lipschitz_bound() const;
    bool nonexpansive() const {
        const auto l = lipschitz_bound();
        return l && *l <= 1.0 + 1e-12;
    }
    /// Known fixed points. Empty does not mean there are none.
    const std::vector<Point>& fixed_points() const;
    /// True when every point is fixed (identity, zero-angle rotation).
    bool fixes_everything() const;

    /// Override the metadata. A declared Lipschitz bound below the computed
    /// one, or a declared fixed point that is not fixed, is rejected.
    Operator with_metadata(std::optional<double> lipschitz, std::vector<Point> fixed_points) const;

private:
    explicit Operator(std::shared_ptr<const detail::OperatorNode> node) : node_(std::move(node)) {}
    static Operator make(Kind kind);

    std::shared_ptr<const detail::OperatorNode> node_;
};

namespace detail {

struct OperatorNode {
    Operator::Kind kind;
    std::optional<double> lipschitz;
    std::vector<Point> fixed_points;
    bool fixes_everything = false;
};

inline Eigen::VectorXd to_vector(const Point& x, std::size_t n) {
    const auto v = x.to_dense(n);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
}

inline Point from_vector(const Eigen::VectorXd& v) {
    return Point::dense(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Exact cosine/sine at multiples of a quarter turn, libm elsewhere.
inline std::pair<double, double> rotation_coefficients(double theta) {
    const double quarters = theta / (std::numbers::pi / 2.0);
    const double k = std::round(quarters);
    if (std::abs(quarters - k) < 1e-15 * std::max(1.0, std::abs(k))) {
        switch (((static_cast<long long>(k) % 4) + 4) % 4) {
            case 0:
                return {1.0, 0.0};
            case 1:
                return {0.0, 1.0};
            case 2:
                return {-1.0, 0.0};
            default:
                return {0.0, -1.0};
        }
    }
    return {std::cos(theta), std::sin(theta)};
}

inline Point evaluate(const Operator::Kind& kind, const Point& x) {
    return std::visit(
        [&](const auto& k) -> Point {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Operator::Identity>) {
                return x;
            } else if constexpr (std::is_same_v<K, Operator::AffineContraction>) {
                if (k.scale) {
                    return combine(*k.scale, x, 1.0, k.shift);
                }
                const auto n = static_cast<std::size_t>(k.matrix.rows());
                if ((x.dim() && *x.dim() != n) || x.support_end() > n) {
                    throw DimensionMismatch("affine map acts on R^" + std::to_string(n));
                }
                return from_vector(k.matrix * to_vector(x, n) + to_vector(k.shift, n));
            } else if constexpr (std::is_same_v<K, Operator::Rotation>) {
                if ((x.dim() && *x.dim() != 2) || x.support_end() > 2) {
                    throw DimensionMismatch("rotation acts on R^2");
                }
                const double a = x[0];
                const double b = x[1];
                return Point({{0, k.cos_theta * a - k.sin_theta * b}, {1, k.sin_theta * a + k.cos_theta * b}},
                             x.dim());
            } else if constexpr (std::is_same_v<K, Operator::Projection>) {
                return project(k.domain, x);
            } else if constexpr (std::is_same_v<K, Operator::Averaged>) {
                return combine(1.0 - k.alpha, x, k.alpha, (*k.inner)(x));
            } else if constexpr (std::is_same_v<K, Operator::HalfRadial>) {
                if (x.is_zero()) {
                    return x;
                }
                return combine(1.0 / (2.0 * norm(x)), x, 0.0, Point::zero());
            } else if constexpr (std::is_same_v<K, Operator::Scaling>) {
                return combine(k.c, x, 0.0, Point::zero());
            } else {
                Point y = x;
                for (const auto& part : k.parts) {
                    y = part(y);
                }
                return y;
            }
        },
        kind);
}

}  // namespace detail

inline Operator Operator::make(Kind kind) {
    auto node = std::make_shared<detail::OperatorNode>();
    node->kind = std::move(kind);
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Identity>) {
                node->lipschitz = 1.0;
                node->fixes_everything = true;
            } else if constexpr (std::is_same_v<K, AffineContraction>) {
                if (k.scale) {
                    node->lipschitz = std::abs(*k.scale);
                    node->fixed_points.push_back(combine(1.0 / (1.0 - *k.scale), k.shift, 0.0, Point::zero()));
                } else {
                    const auto n = k.matrix.rows();
                    node->lipschitz = Eigen::JacobiSVD<Eigen::MatrixXd>(k.matrix).singularValues()(0);
                    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - k.matrix;
                    node->fixed_points.push_back(detail::from_vector(
                        system.fullPivLu().solve(detail::to_vector(k.shift, static_cast<std::size_t>(n)))));
                }
            } else if constexpr (std::is_same_v<K, Rotation>) {
                node->lipschitz = 1.0;
                if (k.cos_theta == 1.0 && k.sin_theta == 0.0) {
                    node->fixes_everything = true;
                } else {
                    node->fixed_points.push_back(Point::zero(2));
                }
            } else if constexpr (std::is_same_v<K, Projection>) {
                node->lipschitz = 1.0;
                node->fixed_points.push_back(k.domain.center());
            } else if constexpr (std::is_same_v<K, Averaged>) {
                const auto inner = k.inner->lipschitz_bound();
                if (inner) {
                    node->lipschitz = (1.0 - k.alpha) + k.alpha * *inner;
                }
                node->fixed_points = k.inner->fixed_points();
                node->fixes_everything = k.inner->fixes_everything();
            } else if constexpr (std::is_same_v<K, HalfRadial>) {
                node->fixed_points.push_back(Point::zero());
            } else if constexpr (std::is_same_v<K, Scaling>) {
                node->lipschitz = std::abs(k.c);
                if (k.c == 1.0) {
                    node->fixes_everything = true;
                } else {
                    node->fixed_points.push_back(Point::zero());
                }
            } else {
                double product = 1.0;
                bool bounded = true;
                bool all_identity = true;
                for (const auto& part : k.parts) {
                    const auto l = part.lipschitz_bound();
                    bounded = bounded && l.has_value();
                    product *= l.value_or(1.0);
                    all_identity = all_identity && part.fixes_everything();
                }
                if (bounded) {
                    node->lipschitz = product;
                }
                node->fixes_everything = all_identity;
                // Candidates from the parts that survive the whole chain.
                for (const auto& part : k.parts) {
                    for (const auto& p : part.fixed_points()) {
                        try {
                            if (distance(detail::evaluate(node->kind, p), p) <= 1e-12) {
                                node->fixed_points.push_back(p);
                                break;
                            }
                        } catch (const DimensionMismatch&) {
                        }
                    }
                    if (!node->fixed_points.empty()) {
                        break;
                    }
                }
            }
        },
        node->kind);
    return Operator(std::move(node));
}

inline Operator Operator::identity() { return make(Identity{}); }

inline Operator Operator::affine_contraction(double scale, Point shift) {
    if (!(scale > 0.0 && scale < 1.0)) {
        throw ValidationError("scale", "contraction factor must lie in (0,1)");
    }
    return make(AffineContraction{scale, {}, std::move(shift)});
}

inline Operator Operator::affine_contraction(const Eigen::MatrixXd& matrix, Point shift) {
    if (matrix.rows() == 0 || matrix.rows() != matrix.cols()) {
        throw ValidationError("matrix", "must be square and non-empty");
    }
    if (!matrix.allFinite()) {
        throw ValidationError("matrix", "entries must be finite");
    }
    const auto n = static_cast<std::size_t>(matrix.rows());
    if ((shift.dim() && *shift.dim() != n) || shift.support_end() > n) {
        throw ValidationError("shift", "must live in R^" + std::to_string(n));
    }
    const double norm2 = Eigen::JacobiSVD<Eigen::MatrixXd>(matrix).singularValues()(0);
    if (!(norm2 < 1.0)) {
        throw ValidationError("matrix", "spectral norm " + std::to_string(norm2) + " is not below 1");
    }
    return make(AffineContraction{std::nullopt, matrix, shift.with_dim(n)});
}

inline Operator Operator::rotation(double theta) {
    if (!std::isfinite(theta)) {
        throw ValidationError("theta", "must be finite");
    }
    const auto [c, s] = detail::rotation_coefficients(theta);
    return make(Rotation{theta, c, s});
}

inline Operator Operator::projection(ConvexDomain domain) {
    if (std::holds_alternative<ConvexDomain::WholeSpaceSparse>(domain.kind())) {
        throw ValidationError("domain", "projection needs a ball, box, or simplex");
    }
    return make(Projection{std::move(domain)});
}

inline Operator Operator::averaged(Operator inner, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("alpha", "must lie in (0,1)");
    }
    return make(Averaged{std::make_shared<const Operator>(std::move(inner)), alpha});
}

inline Operator Operator::half_radial() { return make(HalfRadial{}); }

inline Operator Operator::scaling(double c) {
    if (!std::isfinite(c)) {
        throw ValidationError("c", "must be finite");
    }
    return make(Scaling{c});
}

inline Operator Operator::composed(std::vector<Operator> parts) {
    if (parts.empty()) {
        throw ValidationError("parts", "must not be empty");
    }
    return make(Composed{std::move(parts)});
}

inline Point Operator::operator()(const Point& x) const { return detail::evaluate(node_->kind, x); }

inline const Operator::Kind& Operator::kind() const { return node_->kind; }

inline std::string Operator::kind_name() const {
    static constexpr const char* names[] = {"identity",   "affine_contraction", "rotation", "projection",
                                            "averaged",   "half_radial",        "scaling",  "composed"};
    return names[node_->kind.index()];
}

inline std::optional<double> Operator::lipschitz_bound() const { return node_->lipschitz; }

inline const std::vector<Point>& Operator::fixed_points() const { return node_->fixed_points; }

inline bool Operator::fixes_everything() const { return node_->fixes_everything; }

inline Operator Operator::with_metadata(std::optional<double> lipschitz, std::vector<Point> fixed_points) const {
    auto node = std::make_shared<detail::OperatorNode>(*node_);
    if (lipschitz) {
        if (!node_->lipschitz) {
            throw ValidationError("lipschitz", kind_name() + " has no global Lipschitz bound");
        }
        if (*lipschitz < *node_->lipschitz - 1e-10) {
            throw ValidationError("lipschitz", "declared bound is below the map's actual constant " +
                                                   std::to_string(*node_->lipschitz));
        }
        node->lipschitz = *lipschitz;
    }
    for (std::size_t i = 0; i < fixed_points.size(); ++i) {
        if (distance((*this)(fixed_points[i]), fixed_points[i]) > 1e-9) {
            throw ValidationError("fixed_points[" + std::to_string(i) + "]", "is not a fixed point");
        }
    }
    if (!fixed_points.empty()) {
        node->fixed_points = std::move(fixed_points);
    }
    return Operator(std::move(node));
}

/// Free-function spelling of f(x).
inline Point evaluate(const Operator& f, const Point& x) { return f(x); }

/// The relaxed map g_tau(x) = tau x + (1 - tau) f(x).
inline Point relaxed_step(const Operator& f, double tau, const Point& x) {
    return combine(tau, x, 1.0 - tau, f(x));
}

/// The set B_eps = {(x, y) : ||y - f(x)|| <= eps}.
struct EpsilonBand {
    double epsilon;

    explicit EpsilonBand(double eps) : epsilon(eps) {
        if (!(eps > 0.0)) {
            throw ValidationError("epsilon", "must be positive");
        }
    }
};

/// Rejection-samples pairs (x, y) in D x D inside the band and checks the
/// Lipschitz-1 inequality on each. Gives up after 100 * samples draws.
inline Verdict local_nonexpansiveness_probe(const Operator& f, const ConvexDomain& domain,
                                            const EpsilonBand& band, std::size_t samples,
                                            std::uint64_t seed) {
    if (samples == 0) {
        throw ValidationError("samples", "must be at least 1");
    }
    Verdict v;
    v.check = "local_nonexpansiveness";
    v.threshold = 1.0;
    std::mt19937_64 rng(seed);
    std::size_t accepted = 0;
    std::size_t violations = 0;
    double max_ratio = 0.0;
    const std::size_t cap = 100 * samples;
    std::size_t attempts = 0;
    while (accepted < samples && attempts < cap) {
        ++attempts;
        const Point x = sample(domain, rng);
        const Point y = sample(domain, rng);
        const Point fx = f(x);
        if (distance(y, fx) > band.epsilon) {
            continue;
        }
        ++accepted;
        const double gap = distance(x, y);
        const double image_gap = distance(fx, f(y));
        if (image_gap > gap + 1e-12) {
            ++violations;
        }
        if (gap > 0.0) {
            max_ratio = std::max(max_ratio, image_gap / gap);
        }
    }
    v.witness("accepted_pairs", static_cast<double>(accepted));
    v.witness("attempts", static_cast<double>(attempts));
    if (accepted == 0) {
        v.status = Status::not_triggered;
        v.notes.push_back("no sampled pair fell inside the band");
        return v;
    }
    v.witness("max_ratio", max_ratio);
    v.witness("violations", static_cast<double>(violations));
    v.status = violations == 0 ? Status::holds : Status::fails;
    return v;
}

// Operator specs: {"kind": ..., parameters..., "lipschitz"?: L, "fixed_points"?: [points]}

inline nlohmann::ordered_json to_json(const Operator& f) {
    nlohmann::ordered_json j;
    j["kind"] = f.kind_name();
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Operator::AffineContraction>) {
                if (k.scale) {
                    j["scale"] = *k.scale;
                } else {
                    auto m = nlohmann::ordered_json::array();
                    for (Eigen::Index r = 0; r < k.matrix.rows(); ++r) {
                        for (Eigen::Index c = 0; c < k.matrix.cols(); ++c) {
                            m.push_back(k.matrix(r, c));
                        }
                    }
                    j["matrix"] = std::move(m);
                }
                j["shift"] = to_json(k.shift);
            } else if constexpr (std::is_same_v<K, Operator::Rotation>) {
                j["theta"] = k.theta;
            } else if constexpr (std::is_same_v<K, Operator::Projection>) {
                j["domain"] = to_json(k.domain);
            } else if constexpr (std::is_same_v<K, Operator::Averaged>) {
                j["alpha"] = k.alpha;
                j["inner"] = to_json(*k.inner);
            } else if constexpr (std::is_same_v<K, Operator::Scaling>) {
                j["c"] = k.c;
            } else if constexpr (std::is_same_v<K, Operator::Composed>) {
                j["parts"] = nlohmann::ordered_json::array();
                for (const auto& p : k.parts) {
                    j["parts"].push_back(to_json(p));
                }
            }
        },
        f.kind());
    return j;
}

template <class Json>
Operator make_operator(const Json& j, std::optional<std::size_t> dense_dim = std::nullopt,
                       const std::string& field = "operator") {
    using detail::reject_unknown;
    using detail::require;
    using detail::require_number;
    if (!j.is_object()) {
        throw ParseError(field, "expected an object");
    }
    const auto& kind_j = require(j, "kind", field);
    if (!kind_j.is_string()) {
        throw ParseError(field + ".kind", "must be a string");
    }
    const std::string kind = kind_j.template get<std::string>();

    auto build = [&]() -> Operator {
        if (kind == "identity") {
            reject_unknown(j, {"kind", "lipschitz", "fixed_points"}, field);
            return Operator::identity();
        }
        if (kind == "affine_contraction") {
            reject_unknown(j, {"kind", "scale", "matrix", "shift", "lipschitz", "fixed_points"}, field);
            Point shift = point_from_json(require(j, "shift", field), dense_dim, field + ".shift");
            if (j.contains("scale") == j.contains("matrix")) {
                throw ParseError(field + ".scale", "give exactly one of \"scale\" or \"matrix\"");
            }
            if (j.contains("scale")) {
                return Operator::affine_contraction(require_number(j, "scale", field), shift);
            }
            const auto& mj = j["matrix"];
            std::vector<double> flat;
            if (!mj.is_array()) {
                throw ParseError(field + ".matrix", "must be an array");
            }
            for (const auto& row : mj) {
                if (row.is_array()) {
                    for (const auto& e : row) {
                        if (!e.is_number()) {
                            throw ParseError(field + ".matrix", "entries must be numbers");
                        }
                        flat.push_back(e.template get<double>());
                    }
                } else if (row.is_number()) {
                    flat.push_back(row.template get<double>());
                } else {
                    throw ParseError(field + ".matrix", "entries must be numbers");
                }
            }
            const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
            if (n == 0 || n * n != flat.size()) {
                throw ParseError(field + ".matrix", "must hold n*n entries");
            }
            Eigen::MatrixXd m(n, n);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < n; ++c) {
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * n + c];
                }
            }
            return Operator::affine_contraction(m, shift);
        }
        if (kind == "rotation") {
            reject_unknown(j, {"kind", "theta", "lipschitz", "fixed_points"}, field);
            return Operator::rotation(require_number(j, "theta", field));
        }
        if (kind == "projection") {
            reject_unknown(j, {"kind", "domain", "lipschitz", "fixed_points"}, field);
            return Operator::projection(domain_from_json(require(j, "domain", field), dense_dim, field + ".domain"));
        }
        if (kind == "averaged") {
            reject_unknown(j, {"kind", "alpha", "inner", "lipschitz", "fixed_points"}, field);
            const double alpha = require_number(j, "alpha", field);
            auto inner = make_operator(require(j, "inner", field), dense_dim, field + ".inner");
            return Operator::averaged(std::move(inner), alpha);
        }
        if (kind == "half_radial") {
            reject_unknown(j, {"kind", "lipschitz", "fixed_points"}, field);
            return Operator::half_radial();
        }
        if (kind == "scaling") {
            reject_unknown(j, {"kind", "c", "lipschitz", "fixed_points"}, field);
            return Operator::scaling(require_number(j, "c", field));
        }
        if (kind == "composed") {
            reject_unknown(j, {"kind", "parts", "lipschitz", "fixed_points"}, field);
            const auto& pj = require(j, "parts", field);
            if (!pj.is_array()) {
                throw ParseError(field + ".parts", "must be an array");
            }
            std::vector<Operator> parts;
            for (std::size_t i = 0; i < pj.size(); ++i) {
                parts.push_back(make_operator(pj[i], dense_dim, field + ".parts[" + std::to_string(i) + "]"));
            }
            return Operator::composed(std::move(parts));
        }
        throw ParseError(field + ".kind", "unknown operator kind \"" + kind + "\"");
    };

    Operator f = detail::with_field(field, build);

    std::optional<double> lipschitz;
    if (j.contains("lipschitz")) {
        lipschitz = require_number(j, "lipschitz", field);
    }
    std::vector<Point> fixed;
    if (j.contains("fixed_points")) {
        const auto& fj = j["fixed_points"];
        if (!fj.is_array()) {
            throw ParseError(field + ".fixed_points", "must be an array");
        }
        for (std::size_t i = 0; i < fj.size(); ++i) {
            fixed.push_back(point_from_json(fj[i], dense_dim, field + ".fixed_points[" + std::to_string(i) + "]"));
        }
    }
    if (lipschitz || !fixed.empty()) {
        f = detail::with_field(field, [&] { return f.with_metadata(lipschitz, std::move(fixed)); });
    }
    return f;
}

/// One line per catalog entry: kind, parameters, and what it is for.
struct CatalogEntry {
    const char* kind;
    const char* parameters;
    const char* summary;
};

inline const std::vector<CatalogEntry>& operator_catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"identity", "", "every point is fixed; nonexpansive"},
        {"affine_contraction", "scale | matrix, shift", "x -> A x + b with ||A|| < 1; unique fixed point"},
        {"rotation", "theta", "planar rotation by theta radians; isometry with fixed point 0"},
        {"projection", "domain", "metric projection onto a ball, box, or simplex; nonexpansive"},
        {"averaged", "alpha, inner", "(1 - alpha) x + alpha inner(x), alpha in (0,1)"},
        {"half_radial", "", "0 -> 0, x -> x / (2||x||); discontinuous at 0"},
        {"scaling", "c", "x -> c x; expansive when |c| > 1"},
        {"composed", "parts", "composition, first listed applied first"},
    };
    return entries;
}

}  // namespace opialiter
