#pragma once

#include "perfsig/error.hpp"
#include "perfsig/signature.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace perfsig {

/// Range over which deltas are normalized: the whole series, or a trailing window of transitions.
class NormScope {
public:
    static constexpr NormScope full_period() { return NormScope{0}; }
    static NormScope rolling(std::size_t window_n) {
        if (window_n == 0) {
            throw precondition_error("rolling window must hold at least one transition");
        }
        return NormScope{window_n};
    }

    constexpr bool is_rolling() const { return window_n_ != 0; }
    constexpr std::size_t window_n() const { return window_n_; }

private:
    constexpr explicit NormScope(std::size_t n) : window_n_(n) {}
    std::size_t window_n_;
};

/// Sign-wise normalization: negative deltas are divided by the largest negative magnitude in
/// scope, positive deltas by the largest positive delta. Results lie in [-1, 1] and zero stays zero.
inline std::vector<double> normalize_changes(std::span<const double> raw, NormScope scope = NormScope::full_period()) {
    std::vector<double> out(raw.size(), 0.0);
    auto normalize_one = [](double d, std::span<const double> in_scope) {
        if (d == 0.0) {
            return 0.0;
        }
        double extreme = 0.0;
        for (double v : in_scope) {
            if (d < 0.0 && v < 0.0) {
                extreme = std::max(extreme, -v);
            } else if (d > 0.0 && v > 0.0) {
                extreme = std::max(extreme, v);
            }
        }
        return d / extreme;
    };
    if (!scope.is_rolling()) {
        double neg = 0.0, pos = 0.0;
        for (double d : raw) {
            if (d < 0.0) {
                neg = std::max(neg, -d);
            } else if (d > 0.0) {
                pos = std::max(pos, d);
            }
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const double d = raw[i];
            out[i] = d < 0.0 ? d / neg : (d > 0.0 ? d / pos : 0.0);
        }
        return out;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto first = i + 1 >= scope.window_n() ? i + 1 - scope.window_n() : 0;
        out[i] = normalize_one(raw[i], raw.subspan(first, i - first + 1));
    }
    return out;
}

/// Change between two consecutive fitted windows; `window_index` names the newer window.
struct Transition {
    std::size_t window_index = 0;
    double delta_k_raw = 0.0;
    double delta_j_raw = 0.0;
    double delta_k_norm = 0.0;
    double delta_j_norm = 0.0;
};

struct ChangeProfile {
    std::vector<Transition> transitions;
};

/// Builds a profile straight from raw delta series (one entry per transition).
inline ChangeProfile make_change_profile(std::span<const double> dk_raw, std::span<const double> dj_raw,
                                         std::span<const std::size_t> window_indices,
                                         NormScope scope = NormScope::full_period()) {
    if (dk_raw.size() != dj_raw.size() || dk_raw.size() != window_indices.size()) {
        throw precondition_error("delta series lengths differ");
    }
    const auto nk = normalize_changes(dk_raw, scope);
    const auto nj = normalize_changes(dj_raw, scope);
    ChangeProfile profile;
    profile.transitions.reserve(dk_raw.size());
    for (std::size_t i = 0; i < dk_raw.size(); ++i) {
        profile.transitions.push_back({window_indices[i], dk_raw[i], dj_raw[i], nk[i], nj[i]});
    }
    return profile;
}

/// Computes normalized (k, j) changes over a per-window signature series. Entry i of
/// `signatures` belongs to window i; a transition exists only between two adjacent converged
/// windows, so an unconverged or unfittable window breaks the chain.
inline ChangeProfile compute_changes(std::span<const Signature> signatures, NormScope scope = NormScope::full_period()) {
    const auto converged = std::count_if(signatures.begin(), signatures.end(),
                                         [](const Signature& s) { return s.converged; });
    if (converged < 2) {
        throw precondition_error("change profile needs at least 2 converged signatures");
    }
    std::vector<double> dk, dj;
    std::vector<std::size_t> index;
    for (std::size_t i = 1; i < signatures.size(); ++i) {
        const auto& prev = signatures[i - 1];
        const auto& next = signatures[i];
        if (prev.converged && next.converged) {
            dk.push_back(next.k - prev.k);
            dj.push_back(next.j - prev.j);
            index.push_back(i);
        }
    }
    return make_change_profile(dk, dj, index, scope);
}

enum class Parameter { k, j };

/// Histogram of normalized changes over equal-width bins [-1, -1+w), ..., [1-w, 1].
struct ChangeDistribution {
    double bin_width = 0.1;
    std::vector<std::size_t> counts;
    std::vector<double> probabilities;
    std::size_t total = 0;

    std::size_t bin_count() const { return counts.size(); }
    double bin_low(std::size_t i) const { return -1.0 + static_cast<double>(i) * bin_width; }
    double bin_high(std::size_t i) const { return std::min(1.0, -1.0 + static_cast<double>(i + 1) * bin_width); }

    std::size_t bin_of(double v) const {
        double t = (v + 1.0) / bin_width;
        // Values a few ulps off a bin edge (e.g. -0.9 computed as -0.90000000000000002) snap onto it.
        const double nearest = std::round(t);
        if (std::abs(t - nearest) < 1e-9) {
            t = nearest;
        }
        const auto last = static_cast<double>(counts.size() - 1);
        return static_cast<std::size_t>(std::clamp(std::floor(t), 0.0, last));
    }

    double probability_of(double v) const { return probabilities[bin_of(v)]; }
};

inline std::size_t bin_count_for(double bin_width) {
    return static_cast<std::size_t>(std::ceil(2.0 / bin_width - 1e-9));
}

inline ChangeDistribution quantize_distribution(const ChangeProfile& profile, Parameter parameter, double bin_width = 0.1) {
    if (profile.transitions.empty()) {
        throw precondition_error("cannot quantize an empty change profile");
    }
    if (!(bin_width > 0.0 && bin_width <= 1.0)) {
        throw precondition_error("bin_width must lie in (0, 1]");
    }
    ChangeDistribution dist;
    dist.bin_width = bin_width;
    dist.counts.assign(bin_count_for(bin_width), 0);
    for (const auto& t : profile.transitions) {
        ++dist.counts[dist.bin_of(parameter == Parameter::k ? t.delta_k_norm : t.delta_j_norm)];
    }
    dist.total = profile.transitions.size();
    dist.probabilities.reserve(dist.counts.size());
    for (auto c : dist.counts) {
        dist.probabilities.push_back(static_cast<double>(c) / static_cast<double>(dist.total));
    }
    return dist;
}

enum class EventKind { slow_down, speed_up, tail_slow_down, tail_speed_up };

inline std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::slow_down:
        return "SlowDown";
    case EventKind::speed_up:
        return "SpeedUp";
    case EventKind::tail_slow_down:
        return "TailSlowDown";
    case EventKind::tail_speed_up:
        return "TailSpeedUp";
    }
    return "?";
}

/// A k change outside the stable band decides the event by its sign and overrides j.
/// Otherwise a j change outside the band marks a tail event. Both inside the band: no event.
inline std::optional<EventKind> classify_event(double delta_k_norm, double delta_j_norm, double stable_band) {
    if (std::abs(delta_k_norm) > stable_band) {
        return delta_k_norm < 0.0 ? EventKind::slow_down : EventKind::speed_up;
    }
    if (std::abs(delta_j_norm) > stable_band) {
        return delta_j_norm < 0.0 ? EventKind::tail_slow_down : EventKind::tail_speed_up;
    }
    return std::nullopt;
}

struct DetectOptions {
    double significance = 0.05;
    double stable_band = 0.1;
    /// Raise TailSlowDown events as alerts, not just informational entries.
    bool tail_alerts = false;
};

struct AnomalyEvent {
    std::size_t window_index = 0;
    EventKind kind = EventKind::slow_down;
    double delta_k_norm = 0.0;
    double delta_j_norm = 0.0;
    double bin_probability = 0.0;
    /// SlowDown events always alert; TailSlowDown only with `tail_alerts`.
    bool alert = false;
};

/// Reports every transition whose deciding change lands in a bin no more probable than the
/// significance level. k-driven events are tested against the k distribution, tail events
/// against the j distribution.
inline std::vector<AnomalyEvent> detect_anomalies(const ChangeProfile& profile, const ChangeDistribution& dist_k,
                                                  const ChangeDistribution& dist_j, DetectOptions opts = {}) {
    if (!(opts.significance > 0.0 && opts.significance < 0.5)) {
        throw precondition_error("significance must lie in (0, 0.5)");
    }
    if (!(opts.stable_band >= 0.0)) {
        throw precondition_error("stable_band must be non-negative");
    }
    std::vector<AnomalyEvent> events;
    for (const auto& t : profile.transitions) {
        const auto kind = classify_event(t.delta_k_norm, t.delta_j_norm, opts.stable_band);
        if (!kind) {
            continue;
        }
        const bool k_driven = *kind == EventKind::slow_down || *kind == EventKind::speed_up;
        const double p = k_driven ? dist_k.probability_of(t.delta_k_norm) : dist_j.probability_of(t.delta_j_norm);
        if (p > opts.significance) {
            continue;
        }
        AnomalyEvent e;
        e.window_index = t.window_index;
        e.kind = *kind;
        e.delta_k_norm = t.delta_k_norm;
        e.delta_j_norm = t.delta_j_norm;
        e.bin_probability = p;
        e.alert = *kind == EventKind::slow_down || (opts.tail_alerts && *kind == EventKind::tail_slow_down);
        events.push_back(e);
    }
    return events;
}

inline std::vector<AnomalyEvent> detect_anomalies(const ChangeProfile& profile, const ChangeDistribution& dist_k,
                                                  DetectOptions opts = {}) {
    return detect_anomalies(profile, dist_k, quantize_distribution(profile, Parameter::j, dist_k.bin_width), opts);
}

inline std::size_t count_kind(std::span<const AnomalyEvent> events, EventKind kind) {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [kind](const AnomalyEvent& e) { return e.kind == kind; }));
}

} // namespace perfsig
