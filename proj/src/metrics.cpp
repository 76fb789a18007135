#include "toposculpt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "toposculpt/error.hpp"
#include "toposculpt/kernels.hpp"

namespace toposculpt {

namespace {

void require_binary_pair(const Volume& pred, const Volume& gt, const std::string& op) {
    pred.require_role(Role::binary, op);
    gt.require_role(Role::binary, op);
    require_same_grid(pred, gt, op);
}

std::size_t count_set(std::span<const unsigned char> m) {
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), static_cast<unsigned char>(1)));
}

}  // namespace

void CenterlineTruth::flatten() {
    voxels.clear();
    for (std::size_t b = 0; b < branches.size(); ++b) {
        for (const VoxelCoord& v : branches[b]) voxels.push_back({v, static_cast<int>(b)});
    }
}

void validate(const CenterlineTruth& cl, const Volume& gt) {
    if (cl.branches.empty()) throw InputError("centerline has no branches");
    for (std::size_t b = 0; b < cl.branches.size(); ++b) {
        if (cl.branches[b].empty()) throw InputError("centerline branch " + std::to_string(b) + " is empty");
        for (const VoxelCoord& v : cl.branches[b]) {
            if (!gt.contains(v)) throw InputError("centerline voxel out of bounds in branch " + std::to_string(b));
            if (gt.at(v) <= 0.0) throw InputError("centerline voxel outside the mask in branch " + std::to_string(b));
        }
    }
}

std::size_t betti0_error(const Volume& pred, const Volume& gt, Connectivity conn) {
    require_same_grid(pred, gt, "betti0_error");
    const auto a = static_cast<std::int64_t>(count_components(pred, conn));
    const auto b = static_cast<std::int64_t>(count_components(gt, conn));
    return static_cast<std::size_t>(std::llabs(a - b));
}

ClDiceResult cl_dice(const Volume& pred, const Volume& gt, const CenterlineTruth* gt_centerline,
                     const SkeletonParams& params) {
    require_binary_pair(pred, gt, "cl_dice");
    const Volume pred_skel = soft_skel(pred, params);

    std::size_t skel_pred = 0, skel_pred_in_gt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred_skel[i] > 0.0) {
            ++skel_pred;
            if (gt[i] > 0.0) ++skel_pred_in_gt;
        }
    }

    std::size_t skel_gt = 0, skel_gt_in_pred = 0;
    if (gt_centerline != nullptr) {
        for (const auto& branch : gt_centerline->branches) {
            for (const VoxelCoord& v : branch) {
                ++skel_gt;
                if (pred.at(v) > 0.0) ++skel_gt_in_pred;
            }
        }
    } else {
        const Volume gt_skel = soft_skel(gt, params);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt_skel[i] > 0.0) {
                ++skel_gt;
                if (pred[i] > 0.0) ++skel_gt_in_pred;
            }
        }
    }

    ClDiceResult out;
    if (skel_pred == 0 || skel_gt == 0) {
        out.empty_skeleton = true;
        return out;
    }
    out.topo_precision = static_cast<double>(skel_pred_in_gt) / static_cast<double>(skel_pred);
    out.topo_sensitivity = static_cast<double>(skel_gt_in_pred) / static_cast<double>(skel_gt);
    const double denom = out.topo_precision + out.topo_sensitivity;
    out.percent = denom > 0.0 ? 200.0 * out.topo_precision * out.topo_sensitivity / denom : 0.0;
    return out;
}

std::vector<unsigned char> surface_mask(const Volume& mask) {
    const Dims& d = mask.dims();
    std::vector<unsigned char> out(mask.size(), 0);
    const std::span<const Offset3> six = neighbor_offsets(Connectivity::face);
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::size_t i = static_cast<std::size_t>(x + d.nx * (y + d.ny * z));
                if (!(mask[i] > 0.0)) continue;
                for (const Offset3& o : six) {
                    const std::int64_t xx = x + o.dx, yy = y + o.dy, zz = z + o.dz;
                    if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx || yy >= d.ny || zz >= d.nz ||
                        !(mask[static_cast<std::size_t>(xx + d.nx * (yy + d.ny * zz))] > 0.0)) {
                        out[i] = 1;
                        break;
                    }
                }
            }
    return out;
}

std::vector<double> surface_distances(std::span<const unsigned char> from, std::span<const unsigned char> to,
                                      const Dims& dims, const Spacing& spacing) {
    std::vector<double> sq(to.size());
    kernels::parallel::squared_edt(to, sq, dims, spacing);
    std::vector<double> out;
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i]) out.push_back(std::sqrt(sq[i]));
    }
    return out;
}

NsdResult nsdice(const Volume& pred, const Volume& gt, double tolerance_mm) {
    require_binary_pair(pred, gt, "nsdice");
    if (!(tolerance_mm >= 0.0)) throw UsageError("nsdice: tolerance must be >= 0");
    const auto sp = surface_mask(pred);
    const auto sg = surface_mask(gt);
    const std::size_t np = count_set(sp), ng = count_set(sg);
    NsdResult out;
    if (np == 0 || ng == 0) {
        out.flagged = true;
        const bool both_empty = np == 0 && ng == 0;
        out.percent = both_empty && std::equal(pred.values().begin(), pred.values().end(), gt.values().begin()) ? 100.0
                                                                                                                : 0.0;
        return out;
    }
    const auto d_pred = surface_distances(sp, sg, gt.dims(), gt.spacing());
    const auto d_gt = surface_distances(sg, sp, gt.dims(), gt.spacing());
    const auto within = [tolerance_mm](const std::vector<double>& d) {
        return static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [&](double v) { return v <= tolerance_mm; }));
    };
    out.percent = 100.0 * static_cast<double>(within(d_pred) + within(d_gt)) / static_cast<double>(np + ng);
    return out;
}

double percentile(std::vector<double> sample, double q) {
    if (sample.empty()) throw InputError("percentile of an empty sample");
    std::sort(sample.begin(), sample.end());
    const double h = q * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

double hd95(const Volume& pred, const Volume& gt) {
    require_binary_pair(pred, gt, "hd95");
    const auto sp = surface_mask(pred);
    const auto sg = surface_mask(gt);
    if (count_set(sp) == 0) throw InputError("hd95: prediction mask is empty");
    if (count_set(sg) == 0) throw InputError("hd95: ground-truth mask is empty");
    std::vector<double> pooled = surface_distances(sp, sg, gt.dims(), gt.spacing());
    const auto back = surface_distances(sg, sp, gt.dims(), gt.spacing());
    pooled.insert(pooled.end(), back.begin(), back.end());
    return percentile(std::move(pooled), 0.95);
}

TreeDetection tree_branch_detected(const Volume& pred, const CenterlineTruth& cl) {
    if (cl.branches.empty()) throw InputError("tree_branch_detected: empty centerline");
    std::size_t total = 0, inside = 0, detected = 0;
    for (const auto& branch : cl.branches) {
        std::size_t in_branch = 0;
        for (const VoxelCoord& v : branch) {
            if (!pred.contains(v)) throw InputError("tree_branch_detected: centerline voxel out of bounds");
            if (pred.at(v) > 0.0) ++in_branch;
        }
        total += branch.size();
        inside += in_branch;
        // strict: covered / size > 0.8, in integers
        if (5 * in_branch > 4 * branch.size()) ++detected;
    }
    if (total == 0) throw InputError("tree_branch_detected: empty centerline");
    TreeDetection out;
    out.td_pct = 100.0 * static_cast<double>(inside) / static_cast<double>(total);
    out.bd_pct = 100.0 * static_cast<double>(detected) / static_cast<double>(cl.branches.size());
    return out;
}

MetricReport evaluate_case(const Volume& pred, const Volume& gt, const std::optional<CenterlineTruth>& centerline,
                           const MetricOptions& opt) {
    require_binary_pair(pred, gt, "evaluate_case");
    MetricReport r;
    const ClDiceResult cl = cl_dice(pred, gt, centerline ? &*centerline : nullptr, opt.skeleton);
    r.cldice_pct = cl.percent;
    if (cl.empty_skeleton) r.flags.emplace_back("cldice_empty_skeleton");

    const NsdResult nsd = nsdice(pred, gt, opt.nsd_tolerance_mm);
    r.nsdice_pct = nsd.percent;
    if (nsd.flagged) r.flags.emplace_back("nsd_empty_surface");

    try {
        r.hd95_mm = hd95(pred, gt);
    } catch (const InputError&) {
        r.hd95_mm = std::numeric_limits<double>::quiet_NaN();
        r.flags.emplace_back("hd95_empty_mask");
    }

    if (centerline) {
        const TreeDetection td = tree_branch_detected(pred, *centerline);
        r.td_pct = td.td_pct;
        r.bd_pct = td.bd_pct;
    } else {
        r.td_pct = r.bd_pct = std::numeric_limits<double>::quiet_NaN();
        r.flags.emplace_back("no_centerline");
    }
    r.betti0_error = betti0_error(pred, gt, opt.connectivity);
    return r;
}

}  // namespace toposculpt
