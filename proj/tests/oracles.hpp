#pragma once

// Test-only reference computations. Nothing here calls into the fitting or detection code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

struct Point {
    double x;
    double y;
};

/// Samples y = 1 - exp(-(k x + j)) at the given abscissae.
inline std::vector<Point> forward_points(double k, double j, const std::vector<double>& xs) {
    std::vector<Point> pts;
    for (double x : xs) {
        pts.push_back({x, 1.0 - std::exp(-(k * x + j))});
    }
    return pts;
}

inline double sse(const std::vector<Point>& pts, double k, double j) {
    double s = 0.0;
    for (const auto& p : pts) {
        const double r = p.y - (1.0 - std::exp(-(k * p.x + j)));
        s += r * r;
    }
    return s;
}

/// Minimum SSE over a 200 x 200 grid spanning [k0/4, 4 k0] x [j0 - 1, j0 + 1].
inline double grid_min_sse(const std::vector<Point>& pts, double k0, double j0, int steps = 200) {
    double best = std::numeric_limits<double>::infinity();
    const double k_lo = k0 / 4.0, k_hi = 4.0 * k0;
    for (int a = 0; a < steps; ++a) {
        const double k = k_lo + (k_hi - k_lo) * a / (steps - 1);
        for (int b = 0; b < steps; ++b) {
            const double j = (j0 - 1.0) + 2.0 * b / (steps - 1);
            double s = 0.0;
            for (const auto& p : pts) {
                const double r = p.y - (1.0 - std::exp(-(k * p.x + j)));
                s += r * r;
            }
            best = std::min(best, s);
        }
    }
    return best;
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

inline double central_difference(const std::function<double(double)>& f, double at, double rel_step = 1e-6) {
    const double h = rel_step * std::max(std::abs(at), 1e-3);
    return (f(at + h) - f(at - h)) / (2.0 * h);
}

} // namespace oracle
