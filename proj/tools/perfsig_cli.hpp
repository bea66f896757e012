#pragma once

#include "perfsig/perfsig.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace perfsig::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_gated = 2;

namespace detail {

inline RecordFormat resolve_format(const std::string& name, const std::filesystem::path& path) {
    if (name == "csv") {
        return RecordFormat::csv;
    }
    if (name == "ndjson") {
        return RecordFormat::ndjson;
    }
    return format_from_path(path);
}

inline Timestamp parse_start(const std::string& text) {
    if (auto t = parse_epoch_ms(text)) {
        return *t;
    }
    if (auto t = parse_rfc3339(text)) {
        return *t;
    }
    throw config_error("cannot parse start time '" + text + "'");
}

inline std::vector<TypeShare> parse_mix(const std::string& text) {
    std::vector<TypeShare> mix;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw config_error("mix entries look like label=probability");
        }
        try {
            mix.push_back({item.substr(0, eq), std::stod(item.substr(eq + 1))});
        } catch (const std::exception&) {
            throw config_error("bad mix probability in '" + item + "'");
        }
    }
    return mix;
}

/// Schedule file: JSON array of {"start_ms", "end_ms", "mu_factor"}.
inline AnomalySchedule read_schedule(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open schedule " + path.string());
    }
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw config_error("schedule must be a JSON array");
    }
    AnomalySchedule schedule;
    try {
        for (const auto& e : doc) {
            schedule.push_back({e.at("start_ms").get<double>(), e.at("end_ms").get<double>(),
                                e.at("mu_factor").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad schedule entry: ") + e.what());
    }
    return schedule;
}

inline ParseResult load(const std::string& input, const std::string& format, const std::string& rejects_path) {
    auto parsed = parse_records_file(input, resolve_format(format, input));
    if (!rejects_path.empty()) {
        std::ofstream rj(rejects_path, std::ios::binary);
        if (!rj) {
            throw io_error("cannot write " + rejects_path);
        }
        write_rejects(rj, parsed.rejects);
    }
    return parsed;
}

inline void emit(const std::string& path, const std::string& body, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << body;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw io_error("cannot write " + path);
    }
    f << body;
}

} // namespace detail

/// Runs the command line. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Performance-signature anomaly detection for transaction logs"};
    app.name("perfsig");
    app.require_subcommand(1);

    // analyze
    std::string input, format = "auto", output, rejects, norm_mode = "full_period", coverage = "nearest";
    double window_s = 300.0, significance = 0.05, bin_width = 0.1, stable_band = 0.1, tol = 1e-10;
    std::size_t min_samples = 30, rolling_window = 24, max_points = default_max_points;
    int max_iterations = 50;
    bool gate = false, tail_alerts = false;

    auto* analyze_cmd = app.add_subcommand("analyze", "Fit per-window signatures and detect slow-down events");
    analyze_cmd->add_option("-i,--input", input, "Transaction log (CSV or NDJSON)")->required()->envname("PERFSIG_INPUT");
    analyze_cmd->add_option("--format", format, "csv, ndjson or auto (by extension)")
        ->check(CLI::IsMember({"auto", "csv", "ndjson"}))->envname("PERFSIG_FORMAT");
    analyze_cmd->add_option("--window", window_s, "Window length in seconds")->check(CLI::PositiveNumber)->envname("PERFSIG_WINDOW");
    analyze_cmd->add_option("--min-samples", min_samples, "Minimum records for a window to be fitted")->envname("PERFSIG_MIN_SAMPLES");
    analyze_cmd->add_option("--significance", significance, "Maximum bin probability for an anomalous change")->envname("PERFSIG_SIGNIFICANCE");
    analyze_cmd->add_option("--bin-width", bin_width, "Quantization width for normalized changes")->envname("PERFSIG_BIN_WIDTH");
    analyze_cmd->add_option("--stable-band", stable_band, "|change| at or below this counts as stable")->envname("PERFSIG_STABLE_BAND");
    analyze_cmd->add_option("--norm-mode", norm_mode, "full_period or rolling")
        ->check(CLI::IsMember({"full_period", "rolling"}))->envname("PERFSIG_NORM_MODE");
    analyze_cmd->add_option("--rolling-window", rolling_window, "Transitions per rolling normalization scope")->envname("PERFSIG_ROLLING_WINDOW");
    analyze_cmd->add_option("--max-points", max_points, "ECDF points kept per window")->envname("PERFSIG_MAX_POINTS");
    analyze_cmd->add_option("--max-iterations", max_iterations, "Fit iteration budget")->envname("PERFSIG_MAX_ITERATIONS");
    analyze_cmd->add_option("--tol", tol, "Fit convergence tolerance")->envname("PERFSIG_TOL");
    analyze_cmd->add_option("--coverage", coverage, "Workload coverage rule: nearest or at_least")
        ->check(CLI::IsMember({"nearest", "at_least"}))->envname("PERFSIG_COVERAGE");
    analyze_cmd->add_flag("--tail-alerts", tail_alerts, "Alert on tail slow-downs too")->envname("PERFSIG_TAIL_ALERTS");
    analyze_cmd->add_flag("--gate", gate, "Exit with status 2 when alerts are present")->envname("PERFSIG_GATE");
    analyze_cmd->add_option("-o,--output", output, "Report path (default stdout)")->envname("PERFSIG_OUTPUT");
    analyze_cmd->add_option("--rejects", rejects, "Write rejected lines as NDJSON here")->envname("PERFSIG_REJECTS");

    // simulate
    double lambda = 0.0, mu = 0.0, duration = 0.0;
    std::uint64_t seed = 1;
    std::string schedule_path, out_path, labels_path, start = "0", mix, sim_format = "auto";
    double sim_window_s = 300.0;
    bool allow_overload = false;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate an M/M/1 transaction log with optional anomalies");
    simulate_cmd->add_option("--lambda", lambda, "Arrival rate, jobs per ms")->required()->envname("PERFSIG_LAMBDA");
    simulate_cmd->add_option("--mu", mu, "Service rate, jobs per ms")->required()->envname("PERFSIG_MU");
    simulate_cmd->add_option("--duration", duration, "Simulated time in ms")->required()->envname("PERFSIG_DURATION");
    simulate_cmd->add_option("--seed", seed, "RNG seed")->envname("PERFSIG_SEED");
    simulate_cmd->add_option("--schedule", schedule_path, "JSON anomaly schedule")->envname("PERFSIG_SCHEDULE");
    simulate_cmd->add_option("--window", sim_window_s, "Label window length in seconds")->check(CLI::PositiveNumber)->envname("PERFSIG_WINDOW");
    simulate_cmd->add_option("--start", start, "Start time (RFC 3339 or epoch ms)")->envname("PERFSIG_START");
    simulate_cmd->add_option("--mix", mix, "Transaction mix, e.g. login=0.3,pay=0.7")->envname("PERFSIG_MIX");
    simulate_cmd->add_option("--format", sim_format, "csv, ndjson or auto (by extension)")
        ->check(CLI::IsMember({"auto", "csv", "ndjson"}))->envname("PERFSIG_FORMAT");
    simulate_cmd->add_option("-o,--out", out_path, "Record file")->required()->envname("PERFSIG_OUT");
    simulate_cmd->add_option("--labels", labels_path, "Label CSV (default <out>.labels.csv)")->envname("PERFSIG_LABELS");
    simulate_cmd->add_flag("--allow-overload", allow_overload, "Permit rho >= 1")->envname("PERFSIG_ALLOW_OVERLOAD");

    // profile
    std::string profile_input, profile_format = "auto", profile_output, profile_coverage = "nearest";
    auto* profile_cmd = app.add_subcommand("profile", "Summarize the transaction mix");
    profile_cmd->add_option("-i,--input", profile_input, "Transaction log")->required()->envname("PERFSIG_INPUT");
    profile_cmd->add_option("--format", profile_format, "csv, ndjson or auto")
        ->check(CLI::IsMember({"auto", "csv", "ndjson"}))->envname("PERFSIG_FORMAT");
    profile_cmd->add_option("--coverage", profile_coverage, "nearest or at_least")
        ->check(CLI::IsMember({"nearest", "at_least"}))->envname("PERFSIG_COVERAGE");
    profile_cmd->add_option("-o,--output", profile_output, "Output path (default stdout)")->envname("PERFSIG_OUTPUT");

    // report
    std::string report_path, out_dir = "report";
    auto* report_cmd = app.add_subcommand("report", "Render charts and CSV tables from an analysis report");
    report_cmd->add_option("-r,--report", report_path, "Report JSON from analyze")->required()->envname("PERFSIG_REPORT");
    report_cmd->add_option("-d,--out-dir", out_dir, "Directory for SVG and CSV output")->envname("PERFSIG_OUT_DIR");

    std::vector<std::string> argv_storage{"perfsig"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_error;
    }

    try {
        if (analyze_cmd->parsed()) {
            AnalysisOptions opts;
            opts.window_length = Duration{static_cast<std::int64_t>(std::llround(window_s * 1000.0))};
            opts.min_samples = min_samples;
            opts.max_points = max_points;
            opts.fit = {max_iterations, tol};
            opts.bin_width = bin_width;
            opts.detect = {significance, stable_band, tail_alerts};
            opts.scope = norm_mode == "rolling" ? NormScope::rolling(rolling_window) : NormScope::full_period();
            opts.coverage = coverage == "nearest" ? CoverageRule::nearest : CoverageRule::at_least;
            if (!(significance > 0.0 && significance < 0.5)) {
                throw config_error("--significance must lie in (0, 0.5)");
            }
            if (!(bin_width > 0.0 && bin_width <= 1.0)) {
                throw config_error("--bin-width must lie in (0, 1]");
            }
            auto parsed = detail::load(input, format, rejects);
            const auto rejected = parsed.rejects.size();
            if (rejected > 0) {
                err << "warning: " << rejected << " malformed line(s) rejected\n";
            }
            const auto analysis = analyze(std::move(parsed.records), opts, rejected);
            detail::emit(output, to_json(analysis).dump(2) + "\n", out);
            return gate && analysis.has_alerts() ? exit_gated : exit_ok;
        }
        if (simulate_cmd->parsed()) {
            SimConfig config;
            config.lambda = lambda;
            config.mu = mu;
            config.duration_ms = duration;
            config.seed = seed;
            config.start = detail::parse_start(start);
            config.allow_overload = allow_overload;
            if (!mix.empty()) {
                config.tx_type_mix = detail::parse_mix(mix);
            }
            const auto schedule = schedule_path.empty() ? AnomalySchedule{} : detail::read_schedule(schedule_path);
            const auto window = Duration{static_cast<std::int64_t>(std::llround(sim_window_s * 1000.0))};
            const auto run = inject_and_label(config, schedule, window);
            std::ostringstream records, labels;
            write_records(records, run.result.records, detail::resolve_format(sim_format, out_path));
            write_labels(labels, run.labels);
            detail::emit(out_path, records.str(), out);
            detail::emit(labels_path.empty() ? out_path + ".labels.csv" : labels_path, labels.str(), out);
            err << "simulated " << run.result.arrivals << " arrivals, " << run.result.records.size()
                << " completed, " << run.result.dropped << " in flight at horizon\n";
            return exit_ok;
        }
        if (profile_cmd->parsed()) {
            const auto parsed = detail::load(profile_input, profile_format, "");
            const auto p = workload_profile(parsed.records,
                                            profile_coverage == "nearest" ? CoverageRule::nearest : CoverageRule::at_least);
            detail::emit(profile_output, to_json(p).dump(2) + "\n", out);
            return exit_ok;
        }
        if (report_cmd->parsed()) {
            std::ifstream in(report_path);
            if (!in) {
                throw io_error("cannot open " + report_path);
            }
            const auto doc = nlohmann::json::parse(in, nullptr, false);
            if (doc.is_discarded()) {
                throw schema_error("report is not valid JSON");
            }
            const auto summary = render_report(doc, out_dir);
            err << "rendered " << summary.windows << " windows, " << summary.event_markers << " event markers into "
                << out_dir << "\n";
            return exit_ok;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}

} // namespace perfsig::cli
