#include "toposculpt/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"

#include "toposculpt/cubical_ph.hpp"
#include "toposculpt/error.hpp"
#include "toposculpt/io.hpp"
#include "toposculpt/kernels.hpp"
#include "toposculpt/metrics.hpp"
#include "toposculpt/phantom.hpp"
#include "toposculpt/refine.hpp"
#include "toposculpt/soft_skeleton.hpp"
#include "toposculpt/suite.hpp"

namespace toposculpt {

namespace fs = std::filesystem;

namespace {

// Options are parsed into holders and copied onto the target only when given
// on the command line, so a --config manifest can supply everything else.
class Overrides {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& desc) {
        auto holder = std::make_shared<T>(target);
        CLI::Option* o = app->add_option(name, *holder, desc)->capture_default_str();
        apply_.push_back([o, holder, &target] {
            if (o->count() > 0) target = *holder;
        });
        return o;
    }

    template <typename T, typename Setter>
    CLI::Option* add_as(CLI::App* app, const std::string& name, T initial, Setter set, const std::string& desc) {
        auto holder = std::make_shared<T>(std::move(initial));
        CLI::Option* o = app->add_option(name, *holder, desc)->capture_default_str();
        apply_.push_back([o, holder, set] {
            if (o->count() > 0) set(*holder);
        });
        return o;
    }

    void apply() const {
        for (const auto& f : apply_) f();
    }

private:
    std::vector<std::function<void()>> apply_;
};

Dims parse_size(const std::string& text) {
    std::vector<std::int64_t> v;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("bad size '" + text + "' (expected N or X,Y,Z)");
        }
        v.push_back(std::stoll(item));
        pos = comma + 1;
    }
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() != 3) throw UsageError("bad size '" + text + "' (expected N or X,Y,Z)");
    return {v[0], v[1], v[2]};
}

Spacing parse_spacing(const std::string& text) {
    double x = 0, y = 0, z = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> x >> c1 >> y >> c2 >> z) || c1 != ',' || c2 != ',' || !is.eof()) {
        throw UsageError("bad spacing '" + text + "' (expected X,Y,Z)");
    }
    return {x, y, z};
}

std::pair<int, int> parse_range(const std::string& text) {
    const std::size_t dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const int v = std::stoi(text);
            return {v, v};
        }
        return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
    } catch (const std::logic_error&) {
        throw UsageError("bad range '" + text + "' (expected N or LO..HI)");
    }
}

std::string join_size(const Dims& d) {
    return std::to_string(d.nx) + "," + std::to_string(d.ny) + "," + std::to_string(d.nz);
}

class Stopwatch {
public:
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

io::FileDigest digest(const fs::path& p) { return {p.string(), io::sha256_file(p)}; }

io::RunManifest start_manifest(const std::string& subcommand) {
    io::RunManifest m;
    m.tool_version = kToolVersion;
    m.subcommand = subcommand;
    return m;
}

nlohmann::json load_config(const std::string& path, const std::string& subcommand) {
    const io::RunManifest m = io::read_manifest(path);
    if (m.subcommand != subcommand) {
        throw UsageError("manifest '" + path + "' records subcommand '" + m.subcommand + "', not '" + subcommand + "'");
    }
    return m.config;
}

Volume read_probability(const std::string& path) {
    Volume v = io::read_volume(path);
    if (v.role() == Role::logit) {
        throw InputError("'" + path + "' holds values outside [0,1]; a probability map is required");
    }
    return v.role() == Role::probability ? v : v.retagged(Role::probability);
}

Volume read_mask(const std::string& path) {
    Volume v = io::read_volume(path);
    switch (v.role()) {
        case Role::binary: return v;
        case Role::probability: return binarize(v, 0.5);
        case Role::logit: break;
    }
    throw InputError("'" + path + "' is neither a mask nor a probability map");
}

void add_refine_options(CLI::App* app, Overrides& ov, RefineSettings& s) {
    ov.add(app, "--prior-beta0", s.prior.beta0, "Expected number of connected components");
    ov.add(app, "--alpha", s.weights.alpha, "Voxel-wise integrity weight");
    ov.add(app, "--beta", s.weights.beta, "Structural integrity weight");
    ov.add(app, "--gamma", s.weights.gamma, "Integrity down-weight after the dense phase");
    ov.add(app, "--t", s.curriculum.t, "Last dense-phase iteration");
    ov.add(app, "--T", s.curriculum.T, "Total iterations");
    ov.add(app, "--k", s.curriculum.k, "Late-phase persistence interval");
    ov.add(app, "--lr", s.optimizer.learning_rate, "Learning rate");
    ov.add_as(app, "--optimizer", to_string(s.optimizer.method),
              [&s](const std::string& v) { s.optimizer.method = optimizer_from_string(v); }, "adamw or gd");
    ov.add(app, "--adam-beta1", s.optimizer.beta1, "AdamW first-moment decay");
    ov.add(app, "--adam-beta2", s.optimizer.beta2, "AdamW second-moment decay");
    ov.add(app, "--weight-decay", s.optimizer.weight_decay, "AdamW decoupled weight decay");
    ov.add(app, "--skel-iters", s.skeleton.iterations, "Soft-skeleton iterations");
    ov.add_as(app, "--pooling", io::to_string(s.skeleton.pooling),
              [&s](const std::string& v) { s.skeleton.pooling = io::pooling_from_string(v); }, "separable3 or cubic3");
    ov.add_as(app, "--connectivity", to_int(s.connectivity),
              [&s](int v) { s.connectivity = connectivity_from_int(v); }, "6, 18 or 26");
}

struct PhantomArgs {
    PhantomConfig cfg;
    std::string out;
    std::string config;
};

int run_phantom(PhantomArgs& a, const Overrides& ov) {
    if (!a.config.empty()) a.cfg = io::phantom_config_from_json(load_config(a.config, "phantom"));
    ov.apply();
    validate(a.cfg);
    io::RunManifest m = start_manifest("phantom");
    m.config = io::to_json(a.cfg);
    Stopwatch sw;
    const PhantomCase pc = generate_case(a.cfg);
    m.timings_ms["generate"] = sw.lap_ms();

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const fs::path gt = dir / "gt.rvol", init = dir / "init_prob.rvol", cl = dir / "centerline.rvol",
                   rec = dir / "corruption.json";
    io::write_volume(pc.tree.gt_mask, gt);
    io::write_volume(pc.init_prob, init);
    io::write_volume(io::centerline_volume(pc.tree.centerline, pc.tree.gt_mask), cl, io::DType::int16);
    io::write_text(rec, io::corruption_to_json(pc.corruption).dump(2) + "\n");
    m.timings_ms["write"] = sw.lap_ms();
    for (const auto& p : {gt, init, cl, rec}) m.outputs.push_back(digest(p));
    io::write_manifest(m, dir / "manifest.json");
    return 0;
}

struct RefineArgs {
    RefineSettings settings;
    std::string input;
    std::string out;
    std::string trajectory;
    std::string manifest;
    std::string config;
};

int run_refine(RefineArgs& a, const Overrides& ov) {
    if (!a.config.empty()) a.settings = io::refine_settings_from_json(load_config(a.config, "refine"));
    ov.apply();
    validate(a.settings);
    io::RunManifest m = start_manifest("refine");
    m.config = io::to_json(a.settings);
    Stopwatch sw;
    const Volume p0 = read_probability(a.input);
    m.inputs.push_back(digest(a.input));
    m.timings_ms["read"] = sw.lap_ms();

    RefineResult r;
    try {
        r = run(p0, a.settings);
    } catch (const RefinementError& e) {
        if (!a.trajectory.empty()) io::export_trajectory(e.partial_trajectory(), a.trajectory);
        throw;
    }
    m.timings_ms["refine"] = sw.lap_ms();

    io::write_volume(r.refined, a.out);
    m.outputs.push_back(digest(a.out));
    if (!a.trajectory.empty()) {
        io::export_trajectory(r.trajectory, a.trajectory);
        m.outputs.push_back(digest(a.trajectory));
    }
    m.timings_ms["write"] = sw.lap_ms();
    io::write_manifest(m, a.manifest.empty() ? a.out + ".manifest.json" : a.manifest);
    return 0;
}

struct PhArgs {
    std::string input;
    std::string out;
    std::string manifest;
    std::optional<double> betti_at;
    int connectivity = 26;
};

int run_ph(PhArgs& a) {
    const Connectivity conn = connectivity_from_int(a.connectivity);
    if (a.betti_at && !(*a.betti_at >= 0.0 && *a.betti_at <= 1.0)) throw UsageError("--betti-at must lie in [0,1]");
    io::RunManifest m = start_manifest("ph");
    m.config = {{"connectivity", a.connectivity}};
    if (a.betti_at) m.config["betti_at"] = *a.betti_at;
    Stopwatch sw;
    const Volume p = read_probability(a.input);
    m.inputs.push_back(digest(a.input));
    m.timings_ms["read"] = sw.lap_ms();
    const Barcode b = compute_ph0(p, conn);
    m.timings_ms["persistence"] = sw.lap_ms();
    if (a.betti_at) std::cout << b.betti0_at_level(*a.betti_at) << "\n";
    if (!a.out.empty()) {
        io::export_barcode(b, a.out);
        m.outputs.push_back(digest(a.out));
    }
    const std::string manifest = !a.manifest.empty() ? a.manifest : (a.out.empty() ? "" : a.out + ".manifest.json");
    if (!manifest.empty()) io::write_manifest(m, manifest);
    return 0;
}

struct SkelArgs {
    std::string input;
    std::string out;
    std::string manifest;
    SkeletonParams params;
    std::string pooling = "separable3";
};

int run_skeletonize(SkelArgs& a) {
    a.params.pooling = io::pooling_from_string(a.pooling);
    validate(a.params);
    io::RunManifest m = start_manifest("skeletonize");
    m.config = {{"skeleton_iterations", a.params.iterations}, {"skeleton_pooling", a.pooling}};
    Stopwatch sw;
    const Volume v = io::read_volume(a.input);
    if (v.role() == Role::logit) throw InputError("'" + a.input + "' must hold a mask or probability map");
    m.inputs.push_back(digest(a.input));
    m.timings_ms["read"] = sw.lap_ms();
    const Volume skel = soft_skel(v, a.params);
    m.timings_ms["skeleton"] = sw.lap_ms();
    io::write_volume(skel, a.out);
    m.outputs.push_back(digest(a.out));
    io::write_manifest(m, a.manifest.empty() ? a.out + ".manifest.json" : a.manifest);
    return 0;
}

struct MetricsArgs {
    std::string pred;
    std::string gt;
    std::string centerline;
    std::string out;
    std::string manifest;
    std::string case_id;
    MetricOptions options;
    int connectivity = 26;
    std::string pooling = "separable3";
};

int run_metrics(MetricsArgs& a) {
    a.options.connectivity = connectivity_from_int(a.connectivity);
    a.options.skeleton.pooling = io::pooling_from_string(a.pooling);
    validate(a.options.skeleton);
    io::RunManifest m = start_manifest("metrics");
    m.config = io::to_json(a.options);
    Stopwatch sw;
    const Volume pred = read_mask(a.pred);
    const Volume gt = read_mask(a.gt);
    m.inputs.push_back(digest(a.pred));
    m.inputs.push_back(digest(a.gt));
    std::optional<CenterlineTruth> cl;
    if (!a.centerline.empty()) {
        cl = io::centerline_from_volume(io::read_volume(a.centerline));
        validate(*cl, gt);
        m.inputs.push_back(digest(a.centerline));
    }
    m.timings_ms["read"] = sw.lap_ms();
    const MetricReport r = evaluate_case(pred, gt, cl, a.options);
    m.timings_ms["metrics"] = sw.lap_ms();
    const std::string id = a.case_id.empty() ? fs::path(a.pred).stem().string() : a.case_id;
    io::export_metrics({{id, r}}, a.out);
    m.outputs.push_back(digest(a.out));
    io::write_manifest(m, a.manifest.empty() ? a.out + ".manifest.json" : a.manifest);
    return 0;
}

struct SuiteArgs {
    SuiteConfig cfg;
    std::string seeds;
    std::string out;
    std::string size = "96";
    std::string breaks = "4..6";
    std::string blobs = "3..5";
};

int run_eval_suite(SuiteArgs& a, const Overrides& ov) {
    ov.apply();
    a.cfg.seeds = parse_seed_list(a.seeds);
    a.cfg.phantom.dims = parse_size(a.size);
    std::tie(a.cfg.breaks_min, a.cfg.breaks_max) = parse_range(a.breaks);
    std::tie(a.cfg.blobs_min, a.cfg.blobs_max) = parse_range(a.blobs);
    validate(a.cfg);

    io::RunManifest m = start_manifest("eval-suite");
    m.config = {{"seeds", a.cfg.seeds},
                {"breaks_range", {a.cfg.breaks_min, a.cfg.breaks_max}},
                {"blobs_range", {a.cfg.blobs_min, a.cfg.blobs_max}},
                {"ablation", a.cfg.ablation},
                {"phantom", io::to_json(a.cfg.phantom)},
                {"refine", io::to_json(a.cfg.refine)},
                {"metrics", io::to_json(a.cfg.metrics)}};
    Stopwatch sw;
    const fs::path dir(a.out);
    run_suite(a.cfg, dir, [&m, &sw](const CaseResult& c) {
        m.timings_ms["seed_" + std::to_string(c.seed)] = sw.lap_ms();
        std::cerr << "seed " << c.seed << ": betti0 error " << c.initial.betti0_error << " -> "
                  << c.full.metrics.betti0_error << ", clDice " << io::format_float(c.initial.cldice_pct) << " -> "
                  << io::format_float(c.full.metrics.cldice_pct) << "\n";
    });
    for (const char* name : {"metrics.csv", "report.json"}) m.outputs.push_back(digest(dir / name));
    io::write_manifest(m, dir / "manifest.json");
    std::cout << (dir / "report.json").string() << "\n";
    return 0;
}

void apply_thread_env() {
    const char* env = std::getenv("TOPOSCULPT_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096) throw UsageError("TOPOSCULPT_THREADS must be a positive integer");
    kernels::set_thread_count(static_cast<int>(n));
}

int fail(const char* kind, const std::string& what, int code) {
    std::cerr << "ERROR " << kind << ": " << what << "\n";
    return code;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Betti-steered test-time refinement of 3D probability volumes", "toposculpt"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1, 1);

    Overrides phantom_ov, refine_ov, suite_ov;

    PhantomArgs ph_args;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a corrupted tubular-tree phantom");
    phantom_ov.add(phantom, "--seed", ph_args.cfg.seed, "Random seed");
    phantom_ov.add_as(phantom, "--size", join_size(ph_args.cfg.dims),
                      [&ph_args](const std::string& v) { ph_args.cfg.dims = parse_size(v); }, "N or X,Y,Z");
    phantom_ov.add_as(phantom, "--spacing", std::string("1,1,1"),
                      [&ph_args](const std::string& v) { ph_args.cfg.spacing = parse_spacing(v); }, "Voxel spacing in mm");
    phantom_ov.add(phantom, "--generations", ph_args.cfg.generations, "Branch generations");
    phantom_ov.add(phantom, "--root-radius", ph_args.cfg.root_radius, "Root radius in voxels");
    phantom_ov.add(phantom, "--breaks", ph_args.cfg.breaks, "Number of breaks");
    phantom_ov.add(phantom, "--blobs", ph_args.cfg.blobs, "Number of spurious blobs");
    phantom_ov.add(phantom, "--noise", ph_args.cfg.noise, "Uniform noise amplitude");
    phantom->add_option("--out", ph_args.out, "Output directory")->required();
    phantom->add_option("--config", ph_args.config, "Replay the config recorded in a manifest");

    RefineArgs rf_args;
    CLI::App* refine = app.add_subcommand("refine", "Refine a probability volume");
    refine->add_option("--input", rf_args.input, "Initial probability volume (.rvol or .nii)")->required();
    refine->add_option("--out", rf_args.out, "Refined probability volume")->required();
    refine->add_option("--trajectory", rf_args.trajectory, "Trajectory CSV");
    refine->add_option("--manifest", rf_args.manifest, "Manifest path (default: <out>.manifest.json)");
    refine->add_option("--config", rf_args.config, "Replay the config recorded in a manifest");
    add_refine_options(refine, refine_ov, rf_args.settings);

    PhArgs ph0_args;
    CLI::App* ph = app.add_subcommand("ph", "0-dimensional persistence barcode");
    ph->add_option("--input", ph0_args.input, "Probability volume")->required();
    ph->add_option("--out", ph0_args.out, "Barcode JSON");
    ph->add_option("--manifest", ph0_args.manifest, "Manifest path (default: <out>.manifest.json)");
    ph->add_option("--betti-at", ph0_args.betti_at, "Print Betti-0 at this level");
    ph->add_option("--connectivity", ph0_args.connectivity, "6, 18 or 26")->capture_default_str();

    SkelArgs sk_args;
    CLI::App* skel = app.add_subcommand("skeletonize", "Soft skeleton of a mask or probability map");
    skel->add_option("--input", sk_args.input, "Input volume")->required();
    skel->add_option("--out", sk_args.out, "Skeleton volume")->required();
    skel->add_option("--iters", sk_args.params.iterations, "Erosion iterations")->capture_default_str();
    skel->add_option("--pooling", sk_args.pooling, "separable3 or cubic3")->capture_default_str();
    skel->add_option("--manifest", sk_args.manifest, "Manifest path (default: <out>.manifest.json)");

    MetricsArgs mt_args;
    CLI::App* metrics = app.add_subcommand("metrics", "Score a prediction against ground truth");
    metrics->add_option("--pred", mt_args.pred, "Prediction (mask, or probabilities binarized at 0.5)")->required();
    metrics->add_option("--gt", mt_args.gt, "Ground-truth mask")->required();
    metrics->add_option("--centerline", mt_args.centerline, "Centerline label volume");
    metrics->add_option("--nsd-tol", mt_args.options.nsd_tolerance_mm, "NSD tolerance in mm")->capture_default_str();
    metrics->add_option("--out", mt_args.out, "Metrics CSV")->required();
    metrics->add_option("--case", mt_args.case_id, "Case id (default: prediction file stem)");
    metrics->add_option("--skel-iters", mt_args.options.skeleton.iterations, "Soft-skeleton iterations")
        ->capture_default_str();
    metrics->add_option("--pooling", mt_args.pooling, "separable3 or cubic3")->capture_default_str();
    metrics->add_option("--connectivity", mt_args.connectivity, "6, 18 or 26")->capture_default_str();
    metrics->add_option("--manifest", mt_args.manifest, "Manifest path (default: <out>.manifest.json)");

    SuiteArgs st_args;
    CLI::App* suite = app.add_subcommand("eval-suite", "Phantom -> refine -> metrics over a list of seeds");
    suite->add_option("--seeds", st_args.seeds, "Seed list, e.g. 1..10 or 1,4,7")->required();
    suite->add_option("--out", st_args.out, "Output directory")->required();
    suite->add_option("--size", st_args.size, "Phantom size, N or X,Y,Z")->capture_default_str();
    suite->add_option("--breaks", st_args.breaks, "Break count range LO..HI")->capture_default_str();
    suite->add_option("--blobs", st_args.blobs, "Blob count range LO..HI")->capture_default_str();
    suite_ov.add(suite, "--generations", st_args.cfg.phantom.generations, "Branch generations");
    suite_ov.add(suite, "--noise", st_args.cfg.phantom.noise, "Phantom noise amplitude");
    suite_ov.add(suite, "--nsd-tol", st_args.cfg.metrics.nsd_tolerance_mm, "NSD tolerance in mm");
    suite->add_flag("--ablation", st_args.cfg.ablation, "Also run the correction-only ablation (alpha = beta = 0)");
    add_refine_options(suite, suite_ov, st_args.cfg.refine);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "ERROR usage: " << e.what() << "\n";
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return 1;
    }

    try {
        apply_thread_env();
        if (phantom->parsed()) return run_phantom(ph_args, phantom_ov);
        if (refine->parsed()) return run_refine(rf_args, refine_ov);
        if (ph->parsed()) return run_ph(ph0_args);
        if (skel->parsed()) return run_skeletonize(sk_args);
        if (metrics->parsed()) return run_metrics(mt_args);
        if (suite->parsed()) return run_eval_suite(st_args, suite_ov);
        return fail("usage", "no subcommand", 1);
    } catch (const UsageError& e) {
        return fail("usage", e.what(), 1);
    } catch (const NumericalError& e) {
        return fail("numerical", e.what(), 3);
    } catch (const InputError& e) {
        return fail("input", e.what(), 2);
    } catch (const fs::filesystem_error& e) {
        return fail("input", e.what(), 2);
    } catch (const nlohmann::json::exception& e) {
        return fail("input", e.what(), 2);
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    argv.reserve(copy.size() + 1);
    for (auto& s : copy) argv.push_back(s.data());
    argv.push_back(nullptr);
    return cli_main(static_cast<int>(copy.size()), argv.data());
}

}  // namespace toposculpt
