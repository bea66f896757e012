#pragma once

#include "perfsig/error.hpp"
#include "perfsig/ingest.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace perfsig {

struct TypeCount {
    std::string tx_type;
    std::size_t count = 0;
    double share = 0.0;
};

/// How many top-ranked types "cover" a traffic percentile.
enum class CoverageRule {
    /// The type count whose cumulative share is closest to the percentile (ties go to the larger count).
    nearest,
    /// The smallest type count whose cumulative share reaches the percentile.
    at_least,
};

inline constexpr std::array<unsigned, 4> coverage_percentiles{80, 90, 95, 100};

/// Transaction-mix summary of a record stream.
struct WorkloadProfile {
    std::size_t total_tx = 0;
    std::size_t n_types = 0;
    double top10_share = 0.0;
    std::size_t types_ge_1pct = 0;
    std::vector<double> top5_shares;
    std::map<unsigned, std::size_t> types_to_cover;
    /// All types by descending count, ties broken by label.
    std::vector<TypeCount> ranked;
};

inline std::size_t types_to_cover(std::span<const TypeCount> ranked, std::size_t total, unsigned percent,
                                  CoverageRule rule) {
    // Shares are compared as integers: cumulative * 100 against percent * total.
    const auto target = static_cast<std::uint64_t>(percent) * total;
    std::uint64_t cum = 0;
    std::size_t best = ranked.size();
    std::uint64_t best_gap = UINT64_MAX;
    for (std::size_t m = 0; m < ranked.size(); ++m) {
        cum += ranked[m].count * 100ULL;
        if (rule == CoverageRule::at_least) {
            if (cum >= target) {
                return m + 1;
            }
            continue;
        }
        const auto gap = cum >= target ? cum - target : target - cum;
        if (gap <= best_gap) {
            best_gap = gap;
            best = m + 1;
        }
        if (cum >= target) {
            break;
        }
    }
    return best;
}

inline WorkloadProfile workload_profile(std::span<const TransactionRecord> records,
                                        CoverageRule rule = CoverageRule::nearest) {
    if (records.empty()) {
        throw precondition_error("workload profile needs at least one record");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        ++counts[r.tx_type];
    }
    WorkloadProfile p;
    p.total_tx = records.size();
    p.n_types = counts.size();
    const auto total = static_cast<double>(p.total_tx);
    for (const auto& [type, n] : counts) {
        p.ranked.push_back({type, n, static_cast<double>(n) / total});
    }
    std::sort(p.ranked.begin(), p.ranked.end(), [](const TypeCount& a, const TypeCount& b) {
        return a.count != b.count ? a.count > b.count : a.tx_type < b.tx_type;
    });

    std::size_t top10 = 0;
    for (std::size_t i = 0; i < p.ranked.size(); ++i) {
        const auto& t = p.ranked[i];
        if (i < 10) {
            top10 += t.count;
        }
        if (i < 5) {
            p.top5_shares.push_back(t.share);
        }
        if (t.count * 100 >= p.total_tx) {
            ++p.types_ge_1pct;
        }
    }
    p.top10_share = static_cast<double>(top10) / total;
    for (auto pct : coverage_percentiles) {
        p.types_to_cover[pct] = types_to_cover(p.ranked, p.total_tx, pct, rule);
    }
    return p;
}

} // namespace perfsig
