#pragma once

#include "perfsig/error.hpp"
#include "perfsig/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace perfsig {

struct TypeShare {
    std::string label;
    double probability = 0.0;
};

/// Single-server FIFO queue with Poisson arrivals and exponential service. Rates are per ms.
struct SimConfig {
    double lambda = 0.0;
    double mu = 0.0;
    double duration_ms = 0.0;
    std::uint64_t seed = 0;
    std::vector<TypeShare> tx_type_mix;
    Timestamp start{};
    /// Permit rho >= 1, either globally or inside a schedule interval.
    bool allow_overload = false;

    double rho() const { return lambda / mu; }
};

/// During [start_ms, end_ms) of simulated time the service rate is mu * mu_factor.
struct AnomalyInterval {
    double start_ms = 0.0;
    double end_ms = 0.0;
    double mu_factor = 1.0;
};

using AnomalySchedule = std::vector<AnomalyInterval>;

/// Sojourn-time rate mu - lambda, the k an exact fit of M/M/1 output should recover.
inline double theoretical_k(double lambda, double mu) {
    if (!(mu > 0.0) || !(lambda >= 0.0)) {
        throw config_error("rates must satisfy lambda >= 0 and mu > 0");
    }
    if (lambda / mu >= 1.0) {
        throw config_error("traffic intensity rho must be below 1");
    }
    return mu * (1.0 - lambda / mu);
}

inline double theoretical_k(const SimConfig& config) {
    return theoretical_k(config.lambda, config.mu);
}

inline void validate(const SimConfig& config) {
    if (!(config.lambda > 0.0) || !(config.mu > 0.0) || !std::isfinite(config.lambda) || !std::isfinite(config.mu)) {
        throw config_error("lambda and mu must be positive and finite");
    }
    if (!(config.duration_ms > 0.0) || !std::isfinite(config.duration_ms)) {
        throw config_error("duration must be positive");
    }
    if (config.rho() >= 1.0 && !config.allow_overload) {
        throw config_error("traffic intensity rho = lambda / mu must be below 1");
    }
    if (!config.tx_type_mix.empty()) {
        double total = 0.0;
        for (const auto& share : config.tx_type_mix) {
            if (share.label.empty() || !(share.probability >= 0.0)) {
                throw config_error("transaction mix entries need a label and a non-negative probability");
            }
            total += share.probability;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw config_error("transaction mix probabilities must sum to 1");
        }
    }
}

inline void validate(const SimConfig& config, const AnomalySchedule& schedule) {
    validate(config);
    auto sorted = schedule;
    std::sort(sorted.begin(), sorted.end(),
              [](const AnomalyInterval& a, const AnomalyInterval& b) { return a.start_ms < b.start_ms; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& s = sorted[i];
        if (!(s.start_ms >= 0.0) || !(s.end_ms > s.start_ms) || s.end_ms > config.duration_ms) {
            throw config_error("schedule interval must satisfy 0 <= start < end <= duration");
        }
        if (!(s.mu_factor > 0.0) || s.mu_factor == 1.0 || !std::isfinite(s.mu_factor)) {
            throw config_error("mu_factor must be positive and different from 1");
        }
        if (i > 0 && s.start_ms < sorted[i - 1].end_ms) {
            throw config_error("schedule intervals overlap");
        }
        if (config.lambda >= config.mu * s.mu_factor && !config.allow_overload) {
            throw config_error("schedule interval overloads the server (lambda >= mu * mu_factor)");
        }
    }
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Open-interval uniform (0, 1) from the top 53 bits; identical on every standard library.
inline double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& rng, double rate) {
    return -std::log(open_uniform(rng)) / rate;
}

} // namespace detail

struct SimResult {
    /// Completed jobs in arrival order (FIFO makes this departure order as well).
    std::vector<TransactionRecord> records;
    /// Exact simulated arrival instants (ms since start), parallel to `records`.
    std::vector<double> arrival_ms;
    std::size_t arrivals = 0;
    /// Jobs still in the system when the horizon was reached.
    std::size_t dropped = 0;
};

/// Service rate in effect at simulated time t.
inline double effective_mu(const SimConfig& config, const AnomalySchedule& schedule, double t) {
    for (const auto& s : schedule) {
        if (t >= s.start_ms && t < s.end_ms) {
            return config.mu * s.mu_factor;
        }
    }
    return config.mu;
}

/// Event-driven simulation of an M/M/1 FIFO queue. Service demand is drawn at service start
/// from the rate in effect at that instant. Response time is the sojourn time.
inline SimResult simulate_mm1(const SimConfig& config, const AnomalySchedule& schedule = {}) {
    validate(config, schedule);

    std::uint64_t state = config.seed;
    std::mt19937_64 arrival_rng{detail::splitmix64(state)};
    std::mt19937_64 service_rng{detail::splitmix64(state)};
    std::mt19937_64 label_rng{detail::splitmix64(state)};

    auto draw_label = [&]() -> std::string {
        if (config.tx_type_mix.empty()) {
            return "tx";
        }
        const double u = detail::open_uniform(label_rng);
        double acc = 0.0;
        for (const auto& share : config.tx_type_mix) {
            acc += share.probability;
            if (u < acc) {
                return share.label;
            }
        }
        return config.tx_type_mix.back().label;
    };

    enum class Kind { arrival, departure };
    struct Event {
        double time;
        std::uint64_t seq;
        Kind kind;
    };
    auto later = [](const Event& a, const Event& b) { return a.time != b.time ? a.time > b.time : a.seq > b.seq; };
    std::priority_queue<Event, std::vector<Event>, decltype(later)> calendar{later};
    std::uint64_t seq = 0;

    struct Job {
        double arrival;
        std::string label;
    };
    std::deque<Job> in_system; // front is in service when busy
    bool busy = false;

    SimResult out;
    auto start_service = [&](double now) {
        busy = true;
        const double demand = detail::exponential(service_rng, effective_mu(config, schedule, now));
        calendar.push({now + demand, seq++, Kind::departure});
    };

    calendar.push({detail::exponential(arrival_rng, config.lambda), seq++, Kind::arrival});
    while (!calendar.empty()) {
        const Event ev = calendar.top();
        calendar.pop();
        if (ev.time > config.duration_ms) {
            break;
        }
        if (ev.kind == Kind::arrival) {
            ++out.arrivals;
            in_system.push_back({ev.time, draw_label()});
            const double next = ev.time + detail::exponential(arrival_rng, config.lambda);
            if (next <= config.duration_ms) {
                calendar.push({next, seq++, Kind::arrival});
            }
            if (!busy) {
                start_service(ev.time);
            }
        } else {
            Job job = std::move(in_system.front());
            in_system.pop_front();
            const auto offset = Duration{static_cast<std::int64_t>(std::floor(job.arrival))};
            out.records.push_back({config.start + offset, std::move(job.label), ev.time - job.arrival});
            out.arrival_ms.push_back(job.arrival);
            busy = false;
            if (!in_system.empty()) {
                start_service(ev.time);
            }
        }
    }
    out.dropped = in_system.size();
    return out;
}

/// Response times after the warm-up prefix of max(1000 jobs, 10 / (mu - lambda) ms).
inline std::vector<double> steady_state_responses(const SimResult& result, const SimConfig& config) {
    const double warmup_ms = 10.0 / (config.mu - config.lambda);
    std::vector<double> out;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        if (i >= 1000 && result.arrival_ms[i] >= warmup_ms) {
            out.push_back(result.records[i].response_ms);
        }
    }
    return out;
}

enum class WindowLabel { normal, degraded, improved };

inline std::string_view to_string(WindowLabel label) {
    switch (label) {
    case WindowLabel::normal:
        return "normal";
    case WindowLabel::degraded:
        return "degraded";
    case WindowLabel::improved:
        return "improved";
    }
    return "?";
}

struct LabeledWindow {
    Timestamp window_start;
    WindowLabel label = WindowLabel::normal;
};

struct LabeledRun {
    SimResult result;
    std::vector<LabeledWindow> labels;
};

/// Simulates with injected anomalies and labels every window. Schedule edges and the start
/// time must sit on window boundaries so each window has exactly one label.
inline LabeledRun inject_and_label(const SimConfig& config, const AnomalySchedule& schedule, Duration window_length) {
    if (window_length <= Duration::zero()) {
        throw config_error("window_length must be positive");
    }
    const auto len = static_cast<double>(window_length.count());
    if (epoch_ms(config.start) % window_length.count() != 0) {
        throw config_error("simulation start is not aligned to the window length");
    }
    for (const auto& s : schedule) {
        if (std::fmod(s.start_ms, len) != 0.0 || std::fmod(s.end_ms, len) != 0.0) {
            throw config_error("schedule interval is not aligned to window boundaries");
        }
    }
    LabeledRun run;
    run.result = simulate_mm1(config, schedule);
    const auto n_windows = static_cast<std::size_t>(std::ceil(config.duration_ms / len));
    run.labels.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        const double t = static_cast<double>(w) * len;
        LabeledWindow lw{config.start + window_length * static_cast<std::int64_t>(w), WindowLabel::normal};
        for (const auto& s : schedule) {
            if (t >= s.start_ms && t < s.end_ms) {
                lw.label = s.mu_factor < 1.0 ? WindowLabel::degraded : WindowLabel::improved;
            }
        }
        run.labels.push_back(lw);
    }
    return run;
}

inline void write_labels(std::ostream& out, const std::vector<LabeledWindow>& labels) {
    out << "window_start,label\n";
    for (const auto& l : labels) {
        out << format_rfc3339(l.window_start) << ',' << to_string(l.label) << '\n';
    }
}

} // namespace perfsig
