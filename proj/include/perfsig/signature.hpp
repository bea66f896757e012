#pragma once

#include "perfsig/error.hpp"
#include "perfsig/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace perfsig {

/// One point of an empirical CDF: response time and cumulative probability.
struct EcdfPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Empirical service-time CDF. Points have distinct, increasing x; y uses Hazen plotting
/// positions (i - 0.5) / n so that 0 < y < 1 always holds.
struct EmpiricalCDF {
    std::vector<EcdfPoint> points;
    std::size_t n_samples = 0;
    /// Fewer than two distinct response times; the two-parameter form cannot be identified.
    bool degenerate = false;
};

inline constexpr std::size_t default_max_points = 512;

/// Builds the ECDF from raw response times. Tied values collapse onto one point carrying the
/// highest plotting position of the tie. When more than `max_points` distinct values exist the
/// curve is thinned to `max_points` evenly spaced ranks, always keeping the largest value.
inline EmpiricalCDF build_ecdf(std::vector<double> times, std::size_t max_points = default_max_points) {
    if (times.empty()) {
        throw precondition_error("cannot build an ECDF from an empty sample");
    }
    if (max_points < 2) {
        throw precondition_error("max_points must be at least 2");
    }
    std::sort(times.begin(), times.end());
    const auto n = static_cast<double>(times.size());

    std::vector<EcdfPoint> distinct;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double y = (static_cast<double>(i + 1) - 0.5) / n;
        if (!distinct.empty() && distinct.back().x == times[i]) {
            distinct.back().y = y;
        } else {
            distinct.push_back({times[i], y});
        }
    }

    EmpiricalCDF ecdf;
    ecdf.n_samples = times.size();
    ecdf.degenerate = distinct.size() < 2;
    if (distinct.size() <= max_points) {
        ecdf.points = std::move(distinct);
        return ecdf;
    }
    ecdf.points.reserve(max_points);
    const auto last = distinct.size() - 1;
    for (std::size_t m = 0; m < max_points; ++m) {
        // Rounded even spacing; with more distinct points than slots the ranks never repeat.
        const auto rank = static_cast<std::size_t>(
            std::llround(static_cast<double>(m) * static_cast<double>(last) / static_cast<double>(max_points - 1)));
        ecdf.points.push_back(distinct[rank]);
    }
    return ecdf;
}

inline std::vector<double> response_times(const SampleWindow& window) {
    std::vector<double> times;
    times.reserve(window.records.size());
    for (const auto& r : window.records) {
        times.push_back(r.response_ms);
    }
    return times;
}

inline EmpiricalCDF build_ecdf(const SampleWindow& window, std::size_t max_points = default_max_points) {
    if (!window.fittable) {
        throw precondition_error("window is flagged unfittable");
    }
    return build_ecdf(response_times(window), max_points);
}

/// Grade-of-service summary for one window.
struct GoSSummary {
    std::size_t arrival_rate = 0; // transactions per window
    double p50 = 0.0;
    double p80 = 0.0;
    double p90 = 0.0;
    double p95 = 0.0;
    double p98 = 0.0;
    double p100 = 0.0;
};

/// Nearest-rank percentile, i.e. the ceil(p * n)-th order statistic of sorted data.
inline double nearest_rank(std::span<const double> sorted, unsigned percent) {
    const auto n = sorted.size();
    auto rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

inline GoSSummary gos_summary(std::vector<double> times) {
    if (times.empty()) {
        throw precondition_error("GoS summary needs a non-empty window");
    }
    std::sort(times.begin(), times.end());
    GoSSummary g;
    g.arrival_rate = times.size();
    g.p50 = nearest_rank(times, 50);
    g.p80 = nearest_rank(times, 80);
    g.p90 = nearest_rank(times, 90);
    g.p95 = nearest_rank(times, 95);
    g.p98 = nearest_rank(times, 98);
    g.p100 = times.back();
    return g;
}

inline GoSSummary gos_summary(const SampleWindow& window) {
    return gos_summary(response_times(window));
}

/// Starting point for the nonlinear fit.
struct InitialEstimate {
    double k = 0.0;
    double j = 0.0;
    /// Set when the log-linear regression was impossible and the median heuristic was used.
    bool fallback = false;
};

/// Linearizes Y = 1 - exp(-(kX + j)) as -ln(1 - Y) = kX + j and regresses by ordinary least squares.
inline InitialEstimate initial_estimate(const EmpiricalCDF& ecdf) {
    constexpr double eps = 1e-9;
    std::vector<EcdfPoint> usable;
    for (const auto& p : ecdf.points) {
        if (p.y < 1.0 - eps && std::isfinite(p.x)) {
            usable.push_back(p);
        }
    }
    const bool enough = usable.size() >= 2 &&
                        std::any_of(usable.begin(), usable.end(), [&](const EcdfPoint& p) { return p.x != usable.front().x; });
    if (enough) {
        const auto n = static_cast<double>(usable.size());
        double mean_x = 0.0, mean_z = 0.0;
        for (const auto& p : usable) {
            mean_x += p.x;
            mean_z += -std::log1p(-p.y);
        }
        mean_x /= n;
        mean_z /= n;
        double sxx = 0.0, sxz = 0.0;
        for (const auto& p : usable) {
            const double dx = p.x - mean_x;
            sxx += dx * dx;
            sxz += dx * (-std::log1p(-p.y) - mean_z);
        }
        const double slope = sxz / sxx;
        return {slope, mean_z - slope * mean_x, false};
    }

    InitialEstimate est;
    est.fallback = true;
    if (ecdf.points.empty()) {
        est.k = std::log(2.0);
        return est;
    }
    std::vector<double> xs;
    for (const auto& p : ecdf.points) {
        xs.push_back(p.x);
    }
    std::sort(xs.begin(), xs.end());
    const auto mid = xs.size() / 2;
    const double median = xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
    // A zero median would give an infinite rate; treat it as one millisecond.
    est.k = std::log(2.0) / (median > 0.0 ? median : 1.0);
    return est;
}

struct FitOptions {
    int max_iterations = 50;
    double tol = 1e-10;
};

/// Fitted performance signature (k, j) and fit diagnostics.
struct Signature {
    double k = 0.0;
    double j = 0.0;
    double sse = 0.0;
    int iterations = 0;
    bool converged = false;
    std::size_t n_points = 0;
    bool nonpositive_k = false;
    bool init_fallback = false;
};

/// Unclamped model value 1 - exp(-(kx + j)).
inline double predict_cdf_raw(double k, double j, double x) {
    return -std::expm1(-(k * x + j));
}

/// Model value clamped to [0, 1] for display.
inline double predict_cdf(double k, double j, double x) {
    return std::clamp(predict_cdf_raw(k, j, x), 0.0, 1.0);
}

inline double predict_cdf(const Signature& sig, double x) {
    return predict_cdf(sig.k, sig.j, x);
}

/// Partial derivatives of the model with respect to (k, j).
inline std::array<double, 2> cdf_gradient(double k, double j, double x) {
    const double e = std::exp(-(k * x + j));
    return {x * e, e};
}

inline double sum_squared_residuals(std::span<const EcdfPoint> points, double k, double j) {
    double sse = 0.0;
    for (const auto& p : points) {
        const double r = p.y - predict_cdf_raw(k, j, p.x);
        sse += r * r;
    }
    return sse;
}

/// Damped Gauss-Newton (Levenberg-Marquardt) least-squares fit of Y = 1 - exp(-(kX + j)).
/// Always returns the best parameters seen, with `converged` reporting whether a stopping
/// criterion was met inside the iteration budget.
inline Signature fit_signature(const EmpiricalCDF& ecdf, InitialEstimate init, FitOptions opts = {}) {
    if (opts.max_iterations < 1) {
        throw precondition_error("max_iterations must be at least 1");
    }
    if (ecdf.points.empty()) {
        throw precondition_error("cannot fit an empty ECDF");
    }
    constexpr double damping_floor = 1e-15;
    constexpr double damping_ceiling = 1e16;
    const std::span<const EcdfPoint> pts{ecdf.points};

    Signature sig;
    sig.n_points = ecdf.n_samples;
    sig.init_fallback = init.fallback;

    double k = init.k;
    double j = init.j;
    double sse = sum_squared_residuals(pts, k, j);
    double lambda = 1e-3;

    auto finish = [&](bool converged) {
        sig.k = k;
        sig.j = j;
        sig.sse = sse;
        sig.converged = converged;
        sig.nonpositive_k = converged && k <= 0.0;
        return sig;
    };
    if (!std::isfinite(sse)) {
        return finish(false);
    }
    if (sse == 0.0) {
        return finish(true);
    }

    while (sig.iterations < opts.max_iterations) {
        // Normal equations J^T J and J^T r, accumulated directly for the 2x2 case.
        double a = 0.0, b = 0.0, c = 0.0, gk = 0.0, gj = 0.0;
        for (const auto& p : pts) {
            const auto [dk, dj] = cdf_gradient(k, j, p.x);
            const double r = p.y - predict_cdf_raw(k, j, p.x);
            a += dk * dk;
            b += dk * dj;
            c += dj * dj;
            gk += dk * r;
            gj += dj * r;
        }
        const double scale = std::max({a, c, 1e-300});
        const double da = std::max(a, 1e-12 * scale);
        const double dc = std::max(c, 1e-12 * scale);

        bool accepted = false;
        while (!accepted) {
            const double a_d = a + lambda * da;
            const double c_d = c + lambda * dc;
            const double det = a_d * c_d - b * b;
            const double step_k = (c_d * gk - b * gj) / det;
            const double step_j = (a_d * gj - b * gk) / det;
            const double step_norm = std::hypot(step_k, step_j);
            const double param_norm = std::hypot(k, j);

            if (std::isfinite(step_norm) && det > 0.0) {
                if (step_norm <= opts.tol * (param_norm + opts.tol)) {
                    ++sig.iterations;
                    return finish(true);
                }
                const double trial = sum_squared_residuals(pts, k + step_k, j + step_j);
                if (std::isfinite(trial) && trial < sse) {
                    const double rel_decrease = (sse - trial) / sse;
                    k += step_k;
                    j += step_j;
                    sse = trial;
                    lambda = std::max(lambda / 10.0, damping_floor);
                    ++sig.iterations;
                    if (sse == 0.0 || rel_decrease < opts.tol) {
                        return finish(true);
                    }
                    accepted = true;
                    continue;
                }
            }
            lambda *= 10.0;
            if (lambda > damping_ceiling) {
                ++sig.iterations;
                return finish(false);
            }
        }
    }
    return finish(false);
}

inline Signature fit_signature(const EmpiricalCDF& ecdf, FitOptions opts = {}) {
    return fit_signature(ecdf, initial_estimate(ecdf), opts);
}

/// Side-by-side comparison of average signatures for two systems or periods.
struct SignatureComparison {
    enum class Higher { a, b, equal };

    double avg_k_a = 0.0;
    double avg_j_a = 0.0;
    double avg_k_b = 0.0;
    double avg_j_b = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    /// avg_k_a / avg_k_b
    double k_ratio = 0.0;
    Higher higher_k = Higher::equal;
};

/// Averages converged signatures on each side. Unconverged entries are ignored.
inline SignatureComparison compare_signatures(std::span<const Signature> a, std::span<const Signature> b) {
    auto average = [](std::span<const Signature> side, const char* name) {
        double sk = 0.0, sj = 0.0;
        std::size_t n = 0;
        for (const auto& s : side) {
            if (s.converged) {
                sk += s.k;
                sj += s.j;
                ++n;
            }
        }
        if (n == 0) {
            throw precondition_error(std::string("no converged signatures on side ") + name);
        }
        return std::array<double, 3>{sk / static_cast<double>(n), sj / static_cast<double>(n), static_cast<double>(n)};
    };
    const auto [ka, ja, na] = average(a, "a");
    const auto [kb, jb, nb] = average(b, "b");
    SignatureComparison cmp;
    cmp.avg_k_a = ka;
    cmp.avg_j_a = ja;
    cmp.avg_k_b = kb;
    cmp.avg_j_b = jb;
    cmp.n_a = static_cast<std::size_t>(na);
    cmp.n_b = static_cast<std::size_t>(nb);
    cmp.k_ratio = ka / kb;
    cmp.higher_k = ka > kb ? SignatureComparison::Higher::a
                           : (kb > ka ? SignatureComparison::Higher::b : SignatureComparison::Higher::equal);
    return cmp;
}

} // namespace perfsig
