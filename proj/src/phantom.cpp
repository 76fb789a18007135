#include "toposculpt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <set>

#include "toposculpt/error.hpp"
#include "toposculpt/cubical_ph.hpp"
#include "toposculpt/kernels.hpp"

namespace toposculpt {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t attempt) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream * 1315423911ull + attempt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) { return scale(a, 1.0 / norm(a)); }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 to_vec(VoxelCoord c) {
    return {static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.z)};
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = sub(b, a);
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(sub(p, a), ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(sub(p, add(a, scale(ab, t))));
}

double segment_distance(const BranchSegment& s1, const BranchSegment& s2) {
    // Sampled; segments are short relative to the sampling density.
    constexpr int kSamples = 64;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSamples; ++i) {
        const double t = static_cast<double>(i) / kSamples;
        const Vec3 p = add(s1.start, scale(sub(s1.end, s1.start), t));
        best = std::min(best, point_segment_distance(p, s2.start, s2.end));
    }
    return best;
}

// Unit vector perpendicular to d, rotated by phi around d.
Vec3 perpendicular(const Vec3& d, double phi) {
    const Vec3 helper = std::abs(d[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    const Vec3 u = normalized(cross(d, helper));
    const Vec3 v = cross(d, u);
    return add(scale(u, std::cos(phi)), scale(v, std::sin(phi)));
}

bool inside_margin(const Vec3& p, const Dims& d, double margin) {
    const double hi[3] = {static_cast<double>(d.nx - 1), static_cast<double>(d.ny - 1), static_cast<double>(d.nz - 1)};
    for (int a = 0; a < 3; ++a) {
        if (p[a] < margin || p[a] > hi[a] - margin) return false;
    }
    return true;
}

bool adjacent(const BranchSegment& a, const BranchSegment& b) {
    return a.parent == b.id || b.parent == a.id || (a.parent == b.parent && a.parent >= 0);
}

std::vector<BranchSegment> draw_branches(const PhantomConfig& cfg, PhantomRng& rng) {
    const double deg = std::numbers::pi / 180.0;
    std::vector<BranchSegment> out;

    // Root enters from the low-z side, tilted by at most 10 degrees.
    BranchSegment root;
    root.id = 0;
    root.generation = 0;
    root.radius = cfg.root_radius;
    const double margin = cfg.root_radius + 1.0;
    root.start = {static_cast<double>(cfg.dims.nx - 1) / 2.0, static_cast<double>(cfg.dims.ny - 1) / 2.0, margin + 1.0};
    const double tilt = rng.uniform(0.0, 10.0 * deg);
    const Vec3 axis{0.0, 0.0, 1.0};
    const Vec3 dir = normalized(add(scale(axis, std::cos(tilt)), scale(perpendicular(axis, rng.uniform(0.0, 2.0 * std::numbers::pi)), std::sin(tilt))));
    root.end = add(root.start, scale(dir, rng.uniform(cfg.min_length, cfg.max_length)));
    out.push_back(root);

    std::size_t frontier_begin = 0;
    for (int g = 1; g < cfg.generations; ++g) {
        const std::size_t frontier_end = out.size();
        for (std::size_t pi = frontier_begin; pi < frontier_end; ++pi) {
            const BranchSegment parent = out[pi];
            const Vec3 pdir = normalized(sub(parent.end, parent.start));
            const Vec3 side = perpendicular(pdir, rng.uniform(0.0, 2.0 * std::numbers::pi));
            for (int c = 0; c < 2; ++c) {
                const double angle = rng.uniform(cfg.min_angle_deg, cfg.max_angle_deg) * deg;
                const double sign = c == 0 ? 1.0 : -1.0;
                const Vec3 cdir = normalized(add(scale(pdir, std::cos(angle)), scale(side, sign * std::sin(angle))));
                const double length =
                    rng.uniform(cfg.min_length, cfg.max_length) * std::pow(cfg.length_decay, static_cast<double>(g));
                BranchSegment child;
                child.id = static_cast<int>(out.size());
                child.parent = parent.id;
                child.generation = g;
                child.radius = cfg.root_radius * std::pow(cfg.radius_decay, static_cast<double>(g));
                child.start = parent.end;
                child.end = add(child.start, scale(cdir, length));
                out.push_back(child);
            }
        }
        frontier_begin = frontier_end;
    }
    return out;
}

bool branches_fit(const std::vector<BranchSegment>& branches, const PhantomConfig& cfg) {
    const double margin = cfg.root_radius + 1.0;
    for (const auto& b : branches) {
        if (!inside_margin(b.start, cfg.dims, margin) || !inside_margin(b.end, cfg.dims, margin)) return false;
    }
    for (std::size_t i = 0; i < branches.size(); ++i) {
        for (std::size_t j = i + 1; j < branches.size(); ++j) {
            if (adjacent(branches[i], branches[j])) continue;
            if (segment_distance(branches[i], branches[j]) < branches[i].radius + branches[j].radius + 4.0) return false;
        }
    }
    return true;
}

void rasterize(const BranchSegment& b, Volume& mask) {
    const Dims& d = mask.dims();
    const auto lo = [&](int a) {
        return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(b.start[a], b.end[a]) - b.radius)));
    };
    const auto hi = [&](int a, std::int64_t n) {
        return std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::ceil(std::max(b.start[a], b.end[a]) + b.radius)));
    };
    for (std::int64_t z = lo(2); z <= hi(2, d.nz); ++z)
        for (std::int64_t y = lo(1); y <= hi(1, d.ny); ++y)
            for (std::int64_t x = lo(0); x <= hi(0, d.nx); ++x) {
                const Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
                if (point_segment_distance(p, b.start, b.end) <= b.radius) mask.at({x, y, z}) = 1.0;
            }
}

std::vector<VoxelCoord> trace_centerline(const BranchSegment& b) {
    std::vector<VoxelCoord> out;
    const double len = norm(sub(b.end, b.start));
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 10.0)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const Vec3 p = add(b.start, scale(sub(b.end, b.start), t));
        const VoxelCoord c{static_cast<std::int64_t>(std::lround(p[0])), static_cast<std::int64_t>(std::lround(p[1])),
                           static_cast<std::int64_t>(std::lround(p[2]))};
        if (out.empty() || out.back() != c) out.push_back(c);
    }
    return out;
}

void fill_sphere(Volume& mask, const Vec3& center, double radius, double value) {
    const Dims& d = mask.dims();
    const auto r = static_cast<std::int64_t>(std::ceil(radius));
    const auto cx = static_cast<std::int64_t>(std::lround(center[0]));
    const auto cy = static_cast<std::int64_t>(std::lround(center[1]));
    const auto cz = static_cast<std::int64_t>(std::lround(center[2]));
    for (std::int64_t z = std::max<std::int64_t>(0, cz - r); z <= std::min(d.nz - 1, cz + r); ++z)
        for (std::int64_t y = std::max<std::int64_t>(0, cy - r); y <= std::min(d.ny - 1, cy + r); ++y)
            for (std::int64_t x = std::max<std::int64_t>(0, cx - r); x <= std::min(d.nx - 1, cx + r); ++x) {
                const Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
                if (norm(sub(p, center)) <= radius) mask.at({x, y, z}) = value;
            }
}

std::vector<VoxelCoord> ellipsoid_voxels(const VoxelCoord& c, const Vec3& radii, const Dims& d) {
    std::vector<VoxelCoord> out;
    const auto rx = static_cast<std::int64_t>(std::ceil(radii[0]));
    const auto ry = static_cast<std::int64_t>(std::ceil(radii[1]));
    const auto rz = static_cast<std::int64_t>(std::ceil(radii[2]));
    for (std::int64_t z = c.z - rz; z <= c.z + rz; ++z)
        for (std::int64_t y = c.y - ry; y <= c.y + ry; ++y)
            for (std::int64_t x = c.x - rx; x <= c.x + rx; ++x) {
                const double ex = static_cast<double>(x - c.x) / radii[0];
                const double ey = static_cast<double>(y - c.y) / radii[1];
                const double ez = static_cast<double>(z - c.z) / radii[2];
                if (ex * ex + ey * ey + ez * ez > 1.0) continue;
                if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) continue;
                out.push_back({x, y, z});
            }
    return out;
}

// Places breaks and blobs into a copy of the mask; false when placement fails.
bool place_corruption(const PhantomTree& tree, const PhantomConfig& cfg, PhantomRng& rng,
                      const std::vector<double>& tree_distance, Volume& mask, std::vector<CorruptionEvent>& events) {
    const Dims& d = mask.dims();

    // Branch start/end points; breaks keep clear of them.
    std::vector<std::pair<Vec3, double>> keepout;
    for (const auto& b : tree.branches) {
        keepout.push_back({b.start, b.radius});
        keepout.push_back({b.end, b.radius});
    }

    std::vector<std::pair<Vec3, double>> breaks;
    for (int n = 0; n < cfg.breaks; ++n) {
        bool placed = false;
        for (int tries = 0; tries < 500 && !placed; ++tries) {
            const auto bi = static_cast<std::size_t>(rng.below(tree.branches.size()));
            const BranchSegment& b = tree.branches[bi];
            const auto& line = tree.centerline.branches[bi];
            const VoxelCoord c = line[static_cast<std::size_t>(rng.below(line.size()))];
            const Vec3 cv = to_vec(c);
            const double radius = b.radius + rng.uniform(cfg.break_margin_min, cfg.break_margin_max);
            bool ok = true;
            for (const auto& [p, r] : keepout) {
                if (norm(sub(cv, p)) < 2.0 * r + radius) ok = false;
            }
            for (const auto& [p, r] : breaks) {
                if (norm(sub(cv, p)) < r + radius + 6.0) ok = false;
            }
            if (!ok) continue;
            fill_sphere(mask, cv, radius, 0.0);
            breaks.push_back({cv, radius});
            events.push_back({CorruptionEvent::Kind::break_, c, {radius, radius, radius}, b.id});
            placed = true;
        }
        if (!placed) return false;
    }

    std::vector<std::pair<Vec3, double>> blobs;
    const double edge = cfg.blob_radius_max + 2.0;
    for (int n = 0; n < cfg.blobs; ++n) {
        bool placed = false;
        for (int tries = 0; tries < 2000 && !placed; ++tries) {
            const VoxelCoord c{static_cast<std::int64_t>(rng.uniform(edge, static_cast<double>(d.nx - 1) - edge)),
                               static_cast<std::int64_t>(rng.uniform(edge, static_cast<double>(d.ny - 1) - edge)),
                               static_cast<std::int64_t>(rng.uniform(edge, static_cast<double>(d.nz - 1) - edge))};
            const Vec3 radii{rng.uniform(cfg.blob_radius_min, cfg.blob_radius_max),
                             rng.uniform(cfg.blob_radius_min, cfg.blob_radius_max),
                             rng.uniform(cfg.blob_radius_min, cfg.blob_radius_max)};
            const double reach = std::max({radii[0], radii[1], radii[2]});
            bool ok = true;
            for (const auto& [p, r] : blobs) {
                if (norm(sub(to_vec(c), p)) < r + reach + cfg.blob_clearance) ok = false;
            }
            if (!ok) continue;
            const auto voxels = ellipsoid_voxels(c, radii, d);
            for (const VoxelCoord& v : voxels) {
                if (tree_distance[mask.index(v)] < cfg.blob_clearance) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            for (const VoxelCoord& v : voxels) mask.at(v) = 1.0;
            blobs.push_back({to_vec(c), reach});
            events.push_back({CorruptionEvent::Kind::blob, c, radii, -1});
            placed = true;
        }
        if (!placed) return false;
    }
    return true;
}

Volume to_probability(const Volume& mask, const PhantomConfig& cfg, PhantomRng& rng) {
    std::vector<double> mapped(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mapped[i] = mask[i] > 0.0 ? cfg.foreground_prob : cfg.background_prob;
    std::vector<double> blurred(mask.size());
    kernels::parallel::box_mean3(mapped, blurred, mask.dims());
    for (double& v : blurred) {
        if (cfg.noise > 0.0) v += rng.uniform(-cfg.noise, cfg.noise);
        v = std::clamp(v, 0.01, 0.99);
    }
    return Volume(mask.dims(), mask.spacing(), Role::probability, std::move(blurred));
}

}  // namespace

std::string to_string(CorruptionEvent::Kind kind) {
    return kind == CorruptionEvent::Kind::blob ? "blob" : "break";
}

void validate(const PhantomConfig& c) {
    if (c.dims.nx <= 0 || c.dims.ny <= 0 || c.dims.nz <= 0) throw UsageError("phantom dims must be positive");
    if (c.generations < 1) throw UsageError("phantom generations must be >= 1");
    if (c.generations > 12) throw UsageError("phantom generations must be <= 12");
    if (!(c.root_radius > 0.0)) throw UsageError("phantom root radius must be > 0");
    if (!(c.radius_decay > 0.0 && c.radius_decay < 1.0)) throw UsageError("radius decay must lie in (0,1)");
    if (!(c.length_decay > 0.0 && c.length_decay <= 1.0)) throw UsageError("length decay must lie in (0,1]");
    if (!(c.min_length > 0.0 && c.min_length < c.max_length)) throw UsageError("branch length range is degenerate");
    if (!(c.min_angle_deg >= 0.0 && c.min_angle_deg < c.max_angle_deg && c.max_angle_deg < 90.0)) {
        throw UsageError("branching angle range is degenerate");
    }
    if (c.breaks < 0 || c.blobs < 0) throw UsageError("break/blob counts must be >= 0");
    if (!(c.break_margin_min > 0.0 && c.break_margin_min < c.break_margin_max)) {
        throw UsageError("break radius range is degenerate");
    }
    if (!(c.blob_radius_min > 0.0 && c.blob_radius_min < c.blob_radius_max)) {
        throw UsageError("blob radius range is degenerate");
    }
    if (!(c.noise >= 0.0 && c.noise < 0.4)) throw UsageError("noise amplitude must lie in [0,0.4)");
    if (!(c.foreground_prob > 0.5 && c.foreground_prob <= 1.0 && c.background_prob >= 0.0 && c.background_prob < 0.5)) {
        throw UsageError("foreground/background probabilities must straddle 0.5");
    }
    if (c.max_retries < 1) throw UsageError("max retries must be >= 1");
}

PhantomTree generate_tree(const PhantomConfig& cfg) {
    validate(cfg);
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        PhantomRng rng(mix_seed(cfg.seed, 0, static_cast<std::uint64_t>(attempt)));
        std::vector<BranchSegment> branches = draw_branches(cfg, rng);
        if (!branches_fit(branches, cfg)) continue;

        PhantomTree tree;
        tree.gt_mask = Volume(cfg.dims, cfg.spacing, Role::binary, 0.0);
        for (const auto& b : branches) rasterize(b, tree.gt_mask);

        // Each centerline voxel belongs to the first branch (breadth-first) that reaches it.
        std::set<VoxelCoord> seen;
        for (const auto& b : branches) {
            std::vector<VoxelCoord> line;
            for (const VoxelCoord& c : trace_centerline(b)) {
                if (seen.insert(c).second) line.push_back(c);
            }
            tree.centerline.branches.push_back(std::move(line));
        }
        tree.centerline.flatten();
        tree.branches = std::move(branches);
        if (count_components(tree.gt_mask, Connectivity::vertex) != 1) continue;
        validate(tree.centerline, tree.gt_mask);
        return tree;
    }
    throw InputError("phantom tree placement failed after " + std::to_string(cfg.max_retries) +
                     " attempts; try larger dims or fewer generations");
}

Corruption corrupt(const PhantomTree& tree, const PhantomConfig& cfg) {
    validate(cfg);
    const Volume& gt = tree.gt_mask;

    std::vector<unsigned char> fg(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) fg[i] = gt[i] > 0.0 ? 1 : 0;
    std::vector<double> tree_distance(gt.size());
    kernels::parallel::squared_edt(fg, tree_distance, gt.dims(), Spacing{1.0, 1.0, 1.0});
    for (double& v : tree_distance) v = std::sqrt(v);

    const std::size_t expected = 1 + static_cast<std::size_t>(cfg.breaks) + static_cast<std::size_t>(cfg.blobs);
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        PhantomRng rng(mix_seed(cfg.seed, 1, static_cast<std::uint64_t>(attempt)));
        Volume mask = gt;
        std::vector<CorruptionEvent> events;
        if (!place_corruption(tree, cfg, rng, tree_distance, mask, events)) continue;
        Corruption out{to_probability(mask, cfg, rng), std::move(events)};
        // Every break must sever the tree and every blob must stand alone.
        if (betti0_at(out.init_prob, 0.5, Connectivity::vertex) != expected) continue;
        return out;
    }
    throw InputError("could not place " + std::to_string(cfg.breaks) + " breaks and " + std::to_string(cfg.blobs) +
                     " disjoint blobs after " + std::to_string(cfg.max_retries) + " attempts");
}

PhantomCase generate_case(const PhantomConfig& cfg) {
    PhantomCase out;
    out.tree = generate_tree(cfg);
    Corruption c = corrupt(out.tree, cfg);
    out.init_prob = std::move(c.init_prob);
    out.corruption = std::move(c.events);
    return out;
}

}  // namespace toposculpt
