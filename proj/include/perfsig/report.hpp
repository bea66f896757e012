#pragma once

#include "perfsig/detect.hpp"
#include "perfsig/error.hpp"
#include "perfsig/ingest.hpp"
#include "perfsig/profile.hpp"
#include "perfsig/signature.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace perfsig {

struct AnalysisOptions {
    Duration window_length{300'000};
    std::size_t min_samples = 30;
    std::size_t max_points = default_max_points;
    FitOptions fit;
    double bin_width = 0.1;
    DetectOptions detect;
    NormScope scope = NormScope::full_period();
    CoverageRule coverage = CoverageRule::nearest;
};

struct WindowResult {
    std::size_t index = 0;
    Timestamp window_start;
    std::size_t arrival_count = 0;
    bool fittable = false;
    bool degenerate = false;
    /// Set for fittable, non-degenerate windows; otherwise `signature.converged` is false.
    bool fitted = false;
    Signature signature;
    std::optional<GoSSummary> gos;
};

struct Analysis {
    AnalysisOptions options;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<WindowResult> windows;
    ChangeProfile changes;
    std::optional<ChangeDistribution> dist_k;
    std::optional<ChangeDistribution> dist_j;
    std::vector<AnomalyEvent> events;
    std::optional<WorkloadProfile> profile;

    bool has_alerts() const {
        return std::any_of(events.begin(), events.end(), [](const AnomalyEvent& e) { return e.alert; });
    }
};

/// Fits one window: ECDF, initial estimate, nonlinear fit.
inline WindowResult analyze_window(const SampleWindow& window, const AnalysisOptions& opts) {
    WindowResult out;
    out.index = window.index;
    out.window_start = window.window_start;
    out.arrival_count = window.arrival_count;
    out.fittable = window.fittable;
    if (!window.records.empty()) {
        out.gos = gos_summary(window);
    }
    out.signature.n_points = window.arrival_count;
    if (!window.fittable) {
        return out;
    }
    const auto ecdf = build_ecdf(window, opts.max_points);
    out.degenerate = ecdf.degenerate;
    if (ecdf.degenerate) {
        return out;
    }
    out.signature = fit_signature(ecdf, initial_estimate(ecdf), opts.fit);
    out.fitted = true;
    return out;
}

/// Runs ingest output through windowing, fitting, change detection and workload profiling.
inline Analysis analyze(std::vector<TransactionRecord> records, const AnalysisOptions& opts, std::size_t rejected = 0) {
    Analysis a;
    a.options = opts;
    a.accepted = records.size();
    a.rejected = rejected;
    if (!records.empty()) {
        a.profile = workload_profile(records, opts.coverage);
    }
    const auto windows = window_records(std::move(records), opts.window_length, opts.min_samples);
    a.windows.reserve(windows.size());
    std::vector<Signature> series;
    series.reserve(windows.size());
    for (const auto& w : windows) {
        a.windows.push_back(analyze_window(w, opts));
        series.push_back(a.windows.back().signature);
    }
    const auto converged =
        std::count_if(series.begin(), series.end(), [](const Signature& s) { return s.converged; });
    if (converged >= 2) {
        a.changes = compute_changes(series, opts.scope);
    }
    if (!a.changes.transitions.empty()) {
        a.dist_k = quantize_distribution(a.changes, Parameter::k, opts.bin_width);
        a.dist_j = quantize_distribution(a.changes, Parameter::j, opts.bin_width);
        a.events = detect_anomalies(a.changes, *a.dist_k, *a.dist_j, opts.detect);
    }
    return a;
}

namespace detail {

/// Rounds to 10 significant digits so serialized reports are byte-stable.
inline nlohmann::ordered_json number(double v) {
    if (!std::isfinite(v)) {
        return nullptr;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::strtod(buf, nullptr);
}

inline std::string fmt10(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

inline nlohmann::ordered_json to_json(const GoSSummary& g) {
    using detail::number;
    return {{"arrival_rate", g.arrival_rate}, {"p50", number(g.p50)}, {"p80", number(g.p80)},
            {"p90", number(g.p90)},           {"p95", number(g.p95)}, {"p98", number(g.p98)},
            {"p100", number(g.p100)}};
}

inline nlohmann::ordered_json to_json(const ChangeDistribution& d) {
    auto bins = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < d.bin_count(); ++i) {
        bins.push_back({{"bin_low", detail::number(d.bin_low(i))},
                        {"bin_high", detail::number(d.bin_high(i))},
                        {"count", d.counts[i]},
                        {"probability", detail::number(d.probabilities[i])}});
    }
    return bins;
}

inline nlohmann::ordered_json to_json(const WorkloadProfile& p) {
    nlohmann::ordered_json j;
    j["total_tx"] = p.total_tx;
    j["n_types"] = p.n_types;
    j["top10_share"] = detail::number(p.top10_share);
    j["types_ge_1pct"] = p.types_ge_1pct;
    auto top5 = nlohmann::ordered_json::array();
    for (double s : p.top5_shares) {
        top5.push_back(detail::number(s));
    }
    j["top5_shares"] = top5;
    auto cover = nlohmann::ordered_json::object();
    for (const auto& [pct, n] : p.types_to_cover) {
        cover[std::to_string(pct)] = n;
    }
    j["types_to_cover"] = cover;
    auto ranked = nlohmann::ordered_json::array();
    for (const auto& t : p.ranked) {
        ranked.push_back({{"tx_type", t.tx_type}, {"count", t.count}, {"share", detail::number(t.share)}});
    }
    j["ranked"] = ranked;
    return j;
}

inline nlohmann::ordered_json to_json(const Analysis& a) {
    using detail::number;
    nlohmann::ordered_json j;
    const auto& o = a.options;
    j["config"] = {{"window_length_s", static_cast<double>(o.window_length.count()) / 1000.0},
                   {"min_samples", o.min_samples},
                   {"significance", number(o.detect.significance)},
                   {"bin_width", number(o.bin_width)},
                   {"stable_band", number(o.detect.stable_band)},
                   {"norm_mode", o.scope.is_rolling() ? "rolling" : "full_period"},
                   {"rolling_window", o.scope.window_n()},
                   {"max_points", o.max_points},
                   {"max_iterations", o.fit.max_iterations},
                   {"tol", number(o.fit.tol)},
                   {"tail_alerts", o.detect.tail_alerts},
                   {"coverage_rule", o.coverage == CoverageRule::nearest ? "nearest" : "at_least"}};
    j["input"] = {{"accepted", a.accepted}, {"rejected", a.rejected}};

    auto windows = nlohmann::ordered_json::array();
    for (const auto& w : a.windows) {
        const auto& s = w.signature;
        nlohmann::ordered_json row;
        row["index"] = w.index;
        row["window_start"] = format_rfc3339(w.window_start);
        row["k"] = w.fitted ? number(s.k) : nlohmann::ordered_json(nullptr);
        row["j"] = w.fitted ? number(s.j) : nlohmann::ordered_json(nullptr);
        row["sse"] = w.fitted ? number(s.sse) : nlohmann::ordered_json(nullptr);
        row["iterations"] = s.iterations;
        row["converged"] = s.converged;
        row["n_points"] = s.n_points;
        row["fittable"] = w.fittable;
        row["degenerate"] = w.degenerate;
        row["nonpositive_k"] = s.nonpositive_k;
        row["init_fallback"] = s.init_fallback;
        row["gos"] = w.gos ? to_json(*w.gos) : nlohmann::ordered_json(nullptr);
        windows.push_back(std::move(row));
    }
    j["windows"] = std::move(windows);

    auto start_of = [&](std::size_t index) { return format_rfc3339(a.windows.at(index).window_start); };
    auto changes = nlohmann::ordered_json::array();
    for (const auto& t : a.changes.transitions) {
        changes.push_back({{"window_start", start_of(t.window_index)},
                           {"delta_k_raw", number(t.delta_k_raw)},
                           {"delta_j_raw", number(t.delta_j_raw)},
                           {"delta_k_norm", number(t.delta_k_norm)},
                           {"delta_j_norm", number(t.delta_j_norm)}});
    }
    j["changes"] = std::move(changes);
    j["distributions"] = {{"k", a.dist_k ? to_json(*a.dist_k) : nlohmann::ordered_json::array()},
                          {"j", a.dist_j ? to_json(*a.dist_j) : nlohmann::ordered_json::array()}};

    auto events = nlohmann::ordered_json::array();
    for (const auto& e : a.events) {
        events.push_back({{"window_start", start_of(e.window_index)},
                          {"kind", std::string(to_string(e.kind))},
                          {"delta_k_norm", number(e.delta_k_norm)},
                          {"delta_j_norm", number(e.delta_j_norm)},
                          {"bin_probability", number(e.bin_probability)},
                          {"significance", number(o.detect.significance)},
                          {"alert", e.alert}});
    }
    j["events"] = std::move(events);
    j["profile"] = a.profile ? to_json(*a.profile) : nlohmann::ordered_json(nullptr);
    return j;
}

inline void write_distribution_csv(std::ostream& out, const nlohmann::json& bins) {
    out << "bin_low,bin_high,count,probability\n";
    for (const auto& b : bins) {
        out << detail::fmt10(b.at("bin_low").get<double>()) << ',' << detail::fmt10(b.at("bin_high").get<double>())
            << ',' << b.at("count").get<std::size_t>() << ',' << detail::fmt10(b.at("probability").get<double>())
            << '\n';
    }
}

inline void write_distribution_csv(std::ostream& out, const ChangeDistribution& d) {
    write_distribution_csv(out, nlohmann::json::parse(to_json(d).dump()));
}

// ---------------------------------------------------------------------------
// Static SVG charts
// ---------------------------------------------------------------------------

namespace svg {

struct Series {
    std::string name;
    std::string color;
    std::vector<std::optional<double>> values;
};

inline constexpr double width = 960.0;
inline constexpr double height = 360.0;
inline constexpr double left = 80.0;
inline constexpr double right = 150.0;
inline constexpr double top = 40.0;
inline constexpr double bottom = 50.0;

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline void header(std::ostream& out, const std::string& title) {
    out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << num(width) << R"(" height=")" << num(height)
        << R"(" font-family="sans-serif" font-size="11">)" << '\n'
        << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n'
        << R"(<text x=")" << num(width / 2) << R"(" y="22" text-anchor="middle" font-size="14">)" << escape(title)
        << "</text>\n";
}

/// Line chart over a shared x axis of category labels; gaps in a series break its polyline.
/// `markers` lists x positions highlighted on the first series.
inline void line_chart(std::ostream& out, const std::string& title, const std::vector<std::string>& x_labels,
                       const std::vector<Series>& series, const std::vector<std::size_t>& markers = {}) {
    header(out, title);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series) {
        for (const auto& v : s.values) {
            if (v && std::isfinite(*v)) {
                lo = std::min(lo, *v);
                hi = std::max(hi, *v);
            }
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) {
        hi = lo + (lo == 0.0 ? 1.0 : std::abs(lo) * 0.1);
        lo -= (hi - lo);
    }
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const auto n = x_labels.size();
    auto px = [&](std::size_t i) { return left + (n <= 1 ? plot_w / 2 : plot_w * static_cast<double>(i) / static_cast<double>(n - 1)); };
    auto py = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    out << R"(<rect x=")" << num(left) << R"(" y=")" << num(top) << R"(" width=")" << num(plot_w) << R"(" height=")"
        << num(plot_h) << R"(" fill="none" stroke="#888"/>)" << '\n';
    out << R"(<text x=")" << num(left - 6) << R"(" y=")" << num(top + 4) << R"(" text-anchor="end">)"
        << detail::fmt10(hi) << "</text>\n";
    out << R"(<text x=")" << num(left - 6) << R"(" y=")" << num(top + plot_h) << R"(" text-anchor="end">)"
        << detail::fmt10(lo) << "</text>\n";
    if (n > 0) {
        out << R"(<text x=")" << num(left) << R"(" y=")" << num(height - bottom + 18) << R"(" text-anchor="start">)"
            << escape(x_labels.front()) << "</text>\n";
        out << R"(<text x=")" << num(left + plot_w) << R"(" y=")" << num(height - bottom + 18)
            << R"(" text-anchor="end">)" << escape(x_labels.back()) << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::string points;
        auto flush = [&]() {
            if (!points.empty()) {
                out << R"(<polyline class="series" fill="none" stroke=")" << s.color << R"(" stroke-width="1.5" points=")"
                    << points << R"("/>)" << '\n';
                points.clear();
            }
        };
        for (std::size_t i = 0; i < s.values.size() && i < n; ++i) {
            if (s.values[i] && std::isfinite(*s.values[i])) {
                points += num(px(i)) + "," + num(py(*s.values[i])) + " ";
            } else {
                flush();
            }
        }
        flush();
        out << R"(<text x=")" << num(width - right + 10) << R"(" y=")" << num(top + 14.0 * static_cast<double>(si + 1))
            << R"(" fill=")" << s.color << R"(">)" << escape(s.name) << "</text>\n";
    }

    if (!series.empty()) {
        for (auto i : markers) {
            if (i < n && i < series.front().values.size() && series.front().values[i]) {
                out << R"(<circle class="event" cx=")" << num(px(i)) << R"(" cy=")" << num(py(*series.front().values[i]))
                    << R"(" r="5" fill="none" stroke="red" stroke-width="2"/>)" << '\n';
            }
        }
    }
    out << "</svg>\n";
}

/// Bar histogram of a change distribution (JSON bins).
inline void histogram(std::ostream& out, const std::string& title, const nlohmann::json& bins) {
    header(out, title);
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    double peak = 0.0;
    for (const auto& b : bins) {
        peak = std::max(peak, b.at("probability").get<double>());
    }
    if (peak <= 0.0) {
        peak = 1.0;
    }
    const double bar_w = bins.empty() ? 0.0 : plot_w / static_cast<double>(bins.size());
    out << R"(<rect x=")" << num(left) << R"(" y=")" << num(top) << R"(" width=")" << num(plot_w) << R"(" height=")"
        << num(plot_h) << R"(" fill="none" stroke="#888"/>)" << '\n';
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const double p = bins[i].at("probability").get<double>();
        const double h = plot_h * p / peak;
        out << R"(<rect class="bar" x=")" << num(left + bar_w * static_cast<double>(i) + 1) << R"(" y=")"
            << num(top + plot_h - h) << R"(" width=")" << num(std::max(bar_w - 2, 0.5)) << R"(" height=")" << num(h)
            << R"(" fill="#4477aa"><title>[)" << detail::fmt10(bins[i].at("bin_low").get<double>()) << ", "
            << detail::fmt10(bins[i].at("bin_high").get<double>()) << ") p=" << detail::fmt10(p)
            << "</title></rect>\n";
    }
    out << R"(<text x=")" << num(left) << R"(" y=")" << num(height - bottom + 18) << R"(">-1</text>)" << '\n';
    out << R"(<text x=")" << num(left + plot_w) << R"(" y=")" << num(height - bottom + 18)
        << R"(" text-anchor="end">+1</text>)" << '\n';
    out << R"(<text x=")" << num(left - 6) << R"(" y=")" << num(top + 4) << R"(" text-anchor="end">)"
        << detail::fmt10(peak) << "</text>\n";
    out << "</svg>\n";
}

} // namespace svg

struct RenderSummary {
    std::size_t windows = 0;
    std::size_t event_markers = 0;
    std::vector<std::filesystem::path> files;
};

/// Renders trend, grade-of-service and distribution charts plus CSV tables from a report.
/// Throws schema_error when the report lacks required fields.
inline RenderSummary render_report(const nlohmann::json& report, const std::filesystem::path& out_dir) {
    RenderSummary summary;
    std::vector<std::string> starts;
    std::vector<std::optional<double>> ks, js;
    std::array<std::vector<std::optional<double>>, 6> gos;
    static constexpr std::array<const char*, 6> gos_keys{"p50", "p80", "p90", "p95", "p98", "p100"};
    std::vector<std::size_t> markers;
    std::string csv;

    auto opt = [](const nlohmann::json& v) -> std::optional<double> {
        return v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt;
    };
    auto cell = [](const std::optional<double>& v) { return v ? detail::fmt10(*v) : std::string(); };

    try {
        const auto& windows = report.at("windows");
        if (!windows.is_array()) {
            throw schema_error("report field 'windows' is not an array");
        }
        std::ostringstream trend;
        trend << "window_start,arrival_count,converged,k,j,sse,p50,p80,p90,p95,p98,p100\n";
        for (const auto& w : windows) {
            starts.push_back(w.at("window_start").get<std::string>());
            ks.push_back(opt(w.at("k")));
            js.push_back(opt(w.at("j")));
            const auto& g = w.at("gos");
            std::size_t arrivals = 0;
            for (std::size_t i = 0; i < gos_keys.size(); ++i) {
                gos[i].push_back(g.is_object() ? opt(g.at(gos_keys[i])) : std::nullopt);
            }
            if (g.is_object()) {
                arrivals = g.at("arrival_rate").get<std::size_t>();
            }
            trend << starts.back() << ',' << arrivals << ',' << (w.at("converged").get<bool>() ? 1 : 0) << ','
                  << cell(ks.back()) << ',' << cell(js.back()) << ',' << cell(opt(w.at("sse")));
            for (const auto& series : gos) {
                trend << ',' << cell(series.back());
            }
            trend << '\n';
        }
        csv = trend.str();

        for (const auto& e : report.at("events")) {
            const auto ws = e.at("window_start").get<std::string>();
            const auto it = std::find(starts.begin(), starts.end(), ws);
            if (it == starts.end()) {
                throw schema_error("event references unknown window " + ws);
            }
            markers.push_back(static_cast<std::size_t>(it - starts.begin()));
        }
        std::filesystem::create_directories(out_dir);
        auto write = [&](const std::string& name, const std::string& body) {
            const auto path = out_dir / name;
            std::ofstream f(path, std::ios::binary);
            if (!f) {
                throw io_error("cannot write " + path.string());
            }
            f << body;
            summary.files.push_back(path);
        };
        write("trend.csv", csv);

        std::ostringstream k_svg, j_svg, gos_svg;
        svg::line_chart(k_svg, "k over time", starts, {{"k", "#1f77b4", ks}}, markers);
        svg::line_chart(j_svg, "j over time", starts, {{"j", "#ff7f0e", js}}, markers);
        static constexpr std::array<const char*, 6> colors{"#2ca02c", "#17becf", "#1f77b4", "#9467bd", "#ff7f0e", "#d62728"};
        std::vector<svg::Series> bands;
        for (std::size_t i = 0; i < gos.size(); ++i) {
            bands.push_back({gos_keys[i], colors[i], gos[i]});
        }
        svg::line_chart(gos_svg, "Grade of service (ms)", starts, bands);
        write("k_trend.svg", k_svg.str());
        write("j_trend.svg", j_svg.str());
        write("gos.svg", gos_svg.str());

        for (const char* param : {"k", "j"}) {
            const auto& bins = report.at("distributions").at(param);
            std::ostringstream dist_csv, dist_svg;
            write_distribution_csv(dist_csv, bins);
            svg::histogram(dist_svg, std::string("Change distribution of ") + param, bins);
            write(std::string("dist_") + param + ".csv", dist_csv.str());
            write(std::string("dist_") + param + ".svg", dist_svg.str());
        }
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("malformed report: ") + e.what());
    }
    summary.windows = starts.size();
    summary.event_markers = markers.size();
    return summary;
}

} // namespace perfsig
