#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace opialiter {

/// Finite surrogate for lim inf / lim sup: statistics are taken over the
/// last `window` entries of a sequence that has at least
/// `burn_in + window` entries.
struct TailWindow {
    std::size_t burn_in = 0;
    std::size_t window = 2;

    friend bool operator==(const TailWindow&, const TailWindow&) = default;
};

/// burn_in = 50% of the sequence, window = min(100, 25% of it), at least 2.
inline TailWindow default_window(std::size_t length) {
    TailWindow w;
    w.burn_in = length / 2;
    w.window = std::max<std::size_t>(2, std::min<std::size_t>(100, length / 4));
    if (w.burn_in + w.window > length) {
        w.burn_in = length > w.window ? length - w.window : 0;
    }
    return w;
}

enum class Status { holds, fails, not_triggered, inconclusive };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::holds:
            return "holds";
        case Status::fails:
            return "fails";
        case Status::not_triggered:
            return "not_triggered";
        case Status::inconclusive:
            return "inconclusive";
    }
    return "inconclusive";
}

struct Witness {
    std::string name;
    double value;
};

/// Outcome of one diagnostic check on one run.
struct Verdict {
    std::string check;
    Status status = Status::inconclusive;
    double threshold = 0.0;
    std::optional<TailWindow> window;
    std::vector<Witness> witnesses;
    std::vector<std::string> notes;

    bool holds() const noexcept { return status == Status::holds; }

    Verdict& witness(std::string name, double value) {
        // Report values must be finite; overflowed estimates are clamped.
        if (!std::isfinite(value)) {
            value = std::isnan(value) ? 0.0 : std::copysign(1.7976931348623157e308, value);
            notes.push_back(name + " was not finite");
        }
        witnesses.push_back({std::move(name), value});
        return *this;
    }

    std::optional<double> find(const std::string& name) const {
        for (const auto& w : witnesses) {
            if (w.name == name) {
                return w.value;
            }
        }
        return std::nullopt;
    }
};

/// Decide a strict inequality `lhs < rhs` with a positive margin: holds when
/// rhs - lhs > margin, fails when lhs - rhs > margin, inconclusive inside.
inline Status strict_less(double lhs, double rhs, double margin) {
    if (rhs - lhs > margin) {
        return Status::holds;
    }
    if (lhs - rhs > margin) {
        return Status::fails;
    }
    return Status::inconclusive;
}

/// Combine per-item statuses: any failure fails, else any inconclusive is
/// inconclusive, else holds.
inline Status all_of(const std::vector<Status>& parts) {
    Status out = Status::holds;
    for (auto s : parts) {
        if (s == Status::fails) {
            return Status::fails;
        }
        if (s == Status::inconclusive) {
            out = Status::inconclusive;
        }
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Verdict& v) {
    nlohmann::ordered_json j;
    j["check"] = v.check;
    j["status"] = to_string(v.status);
    j["threshold"] = v.threshold;
    if (v.window) {
        j["window"] = {{"burn_in", v.window->burn_in}, {"window", v.window->window}};
    } else {
        j["window"] = nullptr;
    }
    j["witnesses"] = nlohmann::ordered_json::array();
    for (const auto& w : v.witnesses) {
        j["witnesses"].push_back({{"name", w.name}, {"value", w.value}});
    }
    if (!v.notes.empty()) {
        j["notes"] = v.notes;
    }
    return j;
}

}  // namespace opialiter
