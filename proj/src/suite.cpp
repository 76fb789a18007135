#include "toposculpt/suite.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "toposculpt/error.hpp"
#include "toposculpt/io.hpp"

namespace toposculpt {

namespace fs = std::filesystem;

void validate(const SuiteConfig& cfg) {
    if (cfg.seeds.empty()) throw UsageError("eval-suite: no seeds given");
    if (cfg.breaks_min < 0 || cfg.breaks_max < cfg.breaks_min) throw UsageError("eval-suite: invalid break range");
    if (cfg.blobs_min < 0 || cfg.blobs_max < cfg.blobs_min) throw UsageError("eval-suite: invalid blob range");
    validate(cfg.phantom);
    validate(cfg.refine);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    const auto number = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("bad seed list '" + text + "'");
        }
        return std::stoull(s);
    };
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t dots = item.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(number(item));
        } else {
            const std::uint64_t lo = number(item.substr(0, dots));
            const std::uint64_t hi = number(item.substr(dots + 2));
            if (hi < lo || hi - lo > 100000) throw UsageError("bad seed range '" + item + "'");
            for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        }
        pos = comma + 1;
    }
    return seeds;
}

std::pair<int, int> draw_corruption_counts(std::uint64_t seed, const SuiteConfig& cfg) {
    PhantomRng rng(seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull);
    const int breaks = cfg.breaks_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.breaks_max - cfg.breaks_min + 1)));
    const int blobs = cfg.blobs_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.blobs_max - cfg.blobs_min + 1)));
    return {breaks, blobs};
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

RefinedRun refine_and_score(const PhantomCase& pc, const RefineSettings& settings, const MetricOptions& mopt) {
    const auto t0 = std::chrono::steady_clock::now();
    RefineResult r = run(pc.init_prob, settings);
    RefinedRun out{std::move(r.refined), std::move(r.trajectory), {}, ms_since(t0)};
    out.metrics = evaluate_case(binarize(out.refined, 0.5), pc.tree.gt_mask, pc.tree.centerline, mopt);
    return out;
}

double mean_of(const std::vector<CaseResult>& cases, double (*get)(const CaseResult&)) {
    double s = 0.0;
    for (const auto& c : cases) s += get(c);
    return cases.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(cases.size());
}

nlohmann::json summary_json(const SuiteSummary& s) {
    nlohmann::json j{
        {"cases", s.cases},
        {"mean_betti0_error_initial", s.mean_betti0_error_initial},
        {"mean_betti0_error_refined", s.mean_betti0_error_refined},
        {"betti0_error_reduction_pct", s.betti0_error_reduction_pct},
        {"cases_betti0_error_le1", s.cases_betti0_error_le1},
        {"mean_td_initial", s.mean_td_initial},
        {"mean_td_refined", s.mean_td_refined},
        {"mean_bd_initial", s.mean_bd_initial},
        {"mean_bd_refined", s.mean_bd_refined},
        {"worst_cldice_change", s.worst_cldice_change},
        {"mean_cldice_refined", s.mean_cldice_refined},
    };
    if (s.mean_cldice_ablation) j["mean_cldice_ablation"] = *s.mean_cldice_ablation;
    return j;
}

}  // namespace

SuiteSummary summarize(const std::vector<CaseResult>& cases) {
    SuiteSummary s;
    s.cases = cases.size();
    if (cases.empty()) return s;
    s.mean_betti0_error_initial = mean_of(cases, [](const CaseResult& c) { return double(c.initial.betti0_error); });
    s.mean_betti0_error_refined = mean_of(cases, [](const CaseResult& c) { return double(c.full.metrics.betti0_error); });
    s.betti0_error_reduction_pct =
        s.mean_betti0_error_initial > 0.0
            ? 100.0 * (s.mean_betti0_error_initial - s.mean_betti0_error_refined) / s.mean_betti0_error_initial
            : 0.0;
    for (const auto& c : cases) {
        if (c.full.metrics.betti0_error <= 1) ++s.cases_betti0_error_le1;
    }
    s.mean_td_initial = mean_of(cases, [](const CaseResult& c) { return c.initial.td_pct; });
    s.mean_td_refined = mean_of(cases, [](const CaseResult& c) { return c.full.metrics.td_pct; });
    s.mean_bd_initial = mean_of(cases, [](const CaseResult& c) { return c.initial.bd_pct; });
    s.mean_bd_refined = mean_of(cases, [](const CaseResult& c) { return c.full.metrics.bd_pct; });
    s.worst_cldice_change = std::numeric_limits<double>::infinity();
    for (const auto& c : cases) {
        s.worst_cldice_change = std::min(s.worst_cldice_change, c.full.metrics.cldice_pct - c.initial.cldice_pct);
    }
    s.mean_cldice_refined = mean_of(cases, [](const CaseResult& c) { return c.full.metrics.cldice_pct; });
    if (cases.front().ablation) {
        double sum = 0.0;
        for (const auto& c : cases) {
            if (!c.ablation) throw InputError("summarize: ablation missing for some cases");
            sum += c.ablation->metrics.cldice_pct;
        }
        s.mean_cldice_ablation = sum / static_cast<double>(cases.size());
    }
    return s;
}

std::vector<CaseResult> run_suite(const SuiteConfig& cfg, const std::optional<fs::path>& out_dir,
                                  const CaseObserver& observer) {
    validate(cfg);
    if (out_dir) fs::create_directories(*out_dir);

    RefineSettings ablation = cfg.refine;
    ablation.weights.alpha = 0.0;
    ablation.weights.beta = 0.0;

    std::vector<CaseResult> cases;
    std::vector<io::MetricsRow> rows;
    for (const std::uint64_t seed : cfg.seeds) {
        CaseResult c;
        c.seed = seed;
        std::tie(c.breaks, c.blobs) = draw_corruption_counts(seed, cfg);
        PhantomConfig pcfg = cfg.phantom;
        pcfg.seed = seed;
        pcfg.breaks = c.breaks;
        pcfg.blobs = c.blobs;
        const PhantomCase pc = generate_case(pcfg);

        c.initial = evaluate_case(binarize(pc.init_prob, 0.5), pc.tree.gt_mask, pc.tree.centerline, cfg.metrics);
        c.full = refine_and_score(pc, cfg.refine, cfg.metrics);
        if (cfg.ablation) c.ablation = refine_and_score(pc, ablation, cfg.metrics);

        const std::string id = "seed_" + std::to_string(seed);
        rows.push_back({id + "/init", c.initial});
        rows.push_back({id + "/refined", c.full.metrics});
        if (c.ablation) rows.push_back({id + "/ablation", c.ablation->metrics});

        if (out_dir) {
            const fs::path dir = *out_dir / id;
            fs::create_directories(dir);
            io::write_volume(pc.tree.gt_mask, dir / "gt.rvol");
            io::write_volume(pc.init_prob, dir / "init_prob.rvol");
            io::write_volume(io::centerline_volume(pc.tree.centerline, pc.tree.gt_mask), dir / "centerline.rvol",
                             io::DType::int16);
            io::write_text(dir / "corruption.json", io::corruption_to_json(pc.corruption).dump(2) + "\n");
            io::write_volume(c.full.refined, dir / "refined.rvol");
            io::export_trajectory(c.full.trajectory, dir / "trajectory.csv");
            if (c.ablation) {
                io::write_volume(c.ablation->refined, dir / "ablation_refined.rvol");
                io::export_trajectory(c.ablation->trajectory, dir / "ablation_trajectory.csv");
            }
        }
        if (observer) observer(c);
        cases.push_back(std::move(c));
    }

    if (out_dir) {
        io::export_metrics(rows, *out_dir / "metrics.csv");
        io::write_text(*out_dir / "report.json", summary_json(summarize(cases)).dump(2) + "\n");
    }
    return cases;
}

}  // namespace toposculpt
