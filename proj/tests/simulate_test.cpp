#include "perfsig/simulate.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numeric>

using namespace perfsig;

namespace {

SimConfig config(double lambda, double mu, double duration, std::uint64_t seed = 1) {
    SimConfig c;
    c.lambda = lambda;
    c.mu = mu;
    c.duration_ms = duration;
    c.seed = seed;
    return c;
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

TEST(TheoreticalK, Substitution) {
    EXPECT_DOUBLE_EQ(theoretical_k(0.0, 0.01), 0.01);
    EXPECT_DOUBLE_EQ(theoretical_k(0.0005, 0.001), 0.0005);
    EXPECT_NEAR(theoretical_k(0.0009, 0.001), 0.0001, 1e-18);
    EXPECT_THROW(theoretical_k(0.001, 0.001), config_error);
    EXPECT_THROW(theoretical_k(0.002, 0.001), config_error);
}

TEST(SimulateMM1, NoQueueingAtVanishingLoad) {
    // Arrivals a million ms apart against 100 ms service: every job finds an empty system.
    std::vector<double> responses;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto r = simulate_mm1(config(1e-6, 0.01, 5e7, seed));
        for (const auto& rec : r.records) {
            responses.push_back(rec.response_ms);
        }
    }
    ASSERT_GT(responses.size(), 1000u);
    EXPECT_NEAR(mean(responses), 100.0, 10.0);
    EXPECT_LT(oracle::ks_distance(responses, [](double r) { return 1.0 - std::exp(-0.01 * r); }), 0.05);
}

TEST(SimulateMM1, SojournMatchesClosedForm) {
    const auto c = config(0.0005, 0.001, 1e8, 42);
    const auto r = simulate_mm1(c);
    const auto steady = steady_state_responses(r, c);
    ASSERT_GE(steady.size(), 10'000u);
    const double k = theoretical_k(c);
    EXPECT_LT(oracle::ks_distance(steady, [k](double x) { return 1.0 - std::exp(-k * x); }), 0.02);
}

TEST(SimulateMM1, Deterministic) {
    const auto c = config(0.0005, 0.001, 1e7, 9);
    const auto a = simulate_mm1(c);
    const auto b = simulate_mm1(c);
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.dropped, b.dropped);
    EXPECT_NE(simulate_mm1(config(0.0005, 0.001, 1e7, 10)).records, a.records);
}

TEST(SimulateMM1, ConservationFifoAndServiceDemands) {
    const auto c = config(0.0008, 0.001, 5e7, 3);
    const auto r = simulate_mm1(c);
    EXPECT_EQ(r.arrivals, r.records.size() + r.dropped);
    // Recover service demands from arrivals and departures (Lindley decomposition).
    std::vector<double> service;
    double prev_departure = 0.0;
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const double departure = r.arrival_ms[i] + r.records[i].response_ms;
        EXPECT_GE(departure, prev_departure);
        EXPECT_LE(departure, c.duration_ms);
        if (i > 0) {
            EXPECT_GE(r.arrival_ms[i], r.arrival_ms[i - 1]);
        }
        service.push_back(departure - std::max(r.arrival_ms[i], prev_departure));
        prev_departure = departure;
    }
    EXPECT_LT(oracle::ks_distance(service, [&](double s) { return 1.0 - std::exp(-c.mu * s); }), 0.02);
}

TEST(SimulateMM1, TransactionMix) {
    auto c = config(0.001, 0.01, 1e7, 5);
    c.tx_type_mix = {{"login", 0.25}, {"pay", 0.75}};
    const auto r = simulate_mm1(c);
    std::map<std::string, double> counts;
    for (const auto& rec : r.records) {
        counts[rec.tx_type] += 1.0;
    }
    ASSERT_EQ(counts.size(), 2u);
    EXPECT_NEAR(counts["login"] / static_cast<double>(r.records.size()), 0.25, 0.02);

    c.tx_type_mix = {{"a", 0.5}, {"b", 0.4}};
    EXPECT_THROW(simulate_mm1(c), config_error);
}

TEST(SimulateMM1, ConfigValidation) {
    EXPECT_THROW(simulate_mm1(config(0.001, 0.001, 1e6)), config_error);
    EXPECT_THROW(simulate_mm1(config(0.0, 0.001, 1e6)), config_error);
    EXPECT_THROW(simulate_mm1(config(0.0005, 0.001, 0.0)), config_error);

    auto overloaded = config(0.002, 0.001, 1e5);
    overloaded.allow_overload = true;
    EXPECT_NO_THROW(simulate_mm1(overloaded));

    const auto c = config(0.0005, 0.001, 1e6);
    EXPECT_THROW(simulate_mm1(c, {{0, 1000, 0.8}, {500, 2000, 0.9}}), config_error);
    EXPECT_THROW(simulate_mm1(c, {{0, 1000, 1.0}}), config_error);
    EXPECT_THROW(simulate_mm1(c, {{0, 2e6, 0.8}}), config_error);
    EXPECT_THROW(simulate_mm1(c, {{1000, 1000, 0.8}}), config_error);
    EXPECT_THROW(simulate_mm1(c, {{0, 1000, 0.4}}), config_error); // lambda >= mu * factor
    EXPECT_NO_THROW(simulate_mm1(c, {{1000, 2000, 0.8}, {0, 1000, 1.5}}));
}

TEST(InjectAndLabel, LabelBookkeeping) {
    const Duration window{300'000};
    const auto c = config(0.0002, 0.001, 100 * 300'000.0, 7);
    const auto run = inject_and_label(c, {{40 * 300'000.0, 43 * 300'000.0, 0.5}}, window);
    ASSERT_EQ(run.labels.size(), 100u);
    std::size_t degraded = 0;
    for (std::size_t w = 0; w < run.labels.size(); ++w) {
        if (run.labels[w].label == WindowLabel::degraded) {
            ++degraded;
            EXPECT_TRUE(w >= 40 && w <= 42);
        }
    }
    EXPECT_EQ(degraded, 3u);

    const auto plain = inject_and_label(c, {}, window);
    for (const auto& l : plain.labels) {
        EXPECT_EQ(l.label, WindowLabel::normal);
    }
    const auto improved = inject_and_label(c, {{0, 300'000.0, 2.0}}, window);
    EXPECT_EQ(improved.labels[0].label, WindowLabel::improved);
}

TEST(InjectAndLabel, MisalignedScheduleIsRejected) {
    const auto c = config(0.0002, 0.001, 10 * 300'000.0);
    EXPECT_THROW(inject_and_label(c, {{1000, 300'000.0, 0.5}}, Duration{300'000}), config_error);
    auto shifted = c;
    shifted.start = Timestamp{Duration{1}};
    EXPECT_THROW(inject_and_label(shifted, {}, Duration{300'000}), config_error);
}

TEST(InjectAndLabel, DegradedWindowIsSlower) {
    // rho = 0.3 normally, 0.6 while degraded. Closed-form means: 1/(mu - lambda) = 1428.6 ms
    // against 1/(0.5 mu - lambda) = 3333.3 ms.
    const double len = 300'000.0;
    const auto c = config(0.0003, 0.001, 30 * len, 11);
    const auto run = inject_and_label(c, {{15 * len, 16 * len, 0.5}}, Duration{300'000});
    std::vector<double> baseline, degraded;
    for (std::size_t i = 0; i < run.result.records.size(); ++i) {
        const auto w = static_cast<std::size_t>(run.result.arrival_ms[i] / len);
        (w == 15 ? degraded : baseline).push_back(run.result.records[i].response_ms);
    }
    EXPECT_GT(mean(degraded), mean(baseline));
    EXPECT_GT(mean(degraded), 1.5 * (1.0 / (c.mu - c.lambda)));
}

TEST(Labels, CsvFormat) {
    std::ostringstream out;
    write_labels(out, {{Timestamp{}, WindowLabel::normal}, {Timestamp{Duration{300'000}}, WindowLabel::degraded}});
    EXPECT_EQ(out.str(), "window_start,label\n1970-01-01T00:00:00.000Z,normal\n1970-01-01T00:05:00.000Z,degraded\n");
}
