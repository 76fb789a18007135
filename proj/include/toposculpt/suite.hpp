#pragma once

// Phantom -> refine -> metrics evaluation over a list of seeds.
//
// Each seed draws its break and blob counts from the configured ranges,
// generates a corrupted phantom, refines it with the full loss and
// (optionally) with the correction-only ablation alpha = beta = 0, and scores
// the initial and refined maps binarized at 0.5.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "toposculpt/metrics.hpp"
#include "toposculpt/phantom.hpp"
#include "toposculpt/refine.hpp"

namespace toposculpt {

struct SuiteConfig {
    std::vector<std::uint64_t> seeds;
    PhantomConfig phantom{};  // seed, breaks and blobs are set per case
    int breaks_min = 4;
    int breaks_max = 6;
    int blobs_min = 3;
    int blobs_max = 5;
    RefineSettings refine{};
    bool ablation = false;
    MetricOptions metrics{};
};

void validate(const SuiteConfig& cfg);

// "1..10", "3,5,8" or a mix such as "1..3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Deterministic (breaks, blobs) for a seed.
std::pair<int, int> draw_corruption_counts(std::uint64_t seed, const SuiteConfig& cfg);

struct RefinedRun {
    Volume refined;
    std::vector<TrajectoryRecord> trajectory;
    MetricReport metrics;
    double elapsed_ms = 0.0;
};

struct CaseResult {
    std::uint64_t seed = 0;
    int breaks = 0;
    int blobs = 0;
    MetricReport initial;
    RefinedRun full;
    std::optional<RefinedRun> ablation;
};

struct SuiteSummary {
    std::size_t cases = 0;
    double mean_betti0_error_initial = 0.0;
    double mean_betti0_error_refined = 0.0;
    double betti0_error_reduction_pct = 0.0;
    std::size_t cases_betti0_error_le1 = 0;
    double mean_td_initial = 0.0;
    double mean_td_refined = 0.0;
    double mean_bd_initial = 0.0;
    double mean_bd_refined = 0.0;
    double worst_cldice_change = 0.0;  // min over cases of refined - initial
    double mean_cldice_refined = 0.0;
    std::optional<double> mean_cldice_ablation;
};

SuiteSummary summarize(const std::vector<CaseResult>& cases);

using CaseObserver = std::function<void(const CaseResult&)>;

// With `out_dir`, writes per-seed volumes, trajectories and corruption
// records under out_dir/seed_<s>/, then metrics.csv and report.json.
std::vector<CaseResult> run_suite(const SuiteConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {},
                                  const CaseObserver& observer = {});

}  // namespace toposculpt
