#pragma once

// Evaluation metrics for binary tubular segmentations: clDice, normalized
// surface Dice, HD95, tree-length / branch detection rates and Betti-0 error.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "toposculpt/soft_skeleton.hpp"
#include "toposculpt/volume.hpp"

namespace toposculpt {

struct CenterlineVoxel {
    VoxelCoord voxel;
    int branch = 0;
};

struct CenterlineTruth {
    std::vector<CenterlineVoxel> voxels;
    std::vector<std::vector<VoxelCoord>> branches;  // index = branch id, voxels in order

    std::size_t branch_count() const noexcept { return branches.size(); }
    // Rebuilds `voxels` from `branches`.
    void flatten();
};

// Throws InputError on out-of-bounds voxels, voxels outside the mask, or empty branches.
void validate(const CenterlineTruth& cl, const Volume& gt_mask);

// Branch counts as detected when strictly more than this fraction of its centerline is covered.
inline constexpr double kBranchDetectFraction = 0.8;
inline constexpr double kDefaultNsdToleranceMm = 1.0;

std::size_t betti0_error(const Volume& pred, const Volume& gt, Connectivity conn = Connectivity::vertex);

struct ClDiceResult {
    double percent = 0.0;
    double topo_precision = 0.0;
    double topo_sensitivity = 0.0;
    bool empty_skeleton = false;
};

ClDiceResult cl_dice(const Volume& pred, const Volume& gt, const CenterlineTruth* gt_centerline,
                     const SkeletonParams& params);

// Foreground voxels with at least one 6-neighbor in the background (outside counts as background).
std::vector<unsigned char> surface_mask(const Volume& mask);

// Distance (mm) from each voxel flagged in `from` to the nearest voxel flagged in `to`.
std::vector<double> surface_distances(std::span<const unsigned char> from, std::span<const unsigned char> to,
                                      const Dims& dims, const Spacing& spacing);

struct NsdResult {
    double percent = 0.0;
    bool flagged = false;  // at least one surface empty
};

// Distances are computed with the spacing carried by `gt`.
NsdResult nsdice(const Volume& pred, const Volume& gt, double tolerance_mm = kDefaultNsdToleranceMm);

// 95th percentile (linear interpolation) of the pooled symmetric surface distances.
double hd95(const Volume& pred, const Volume& gt);

// Linear-interpolated percentile of an unsorted sample, q in [0,1].
double percentile(std::vector<double> sample, double q);

struct TreeDetection {
    double td_pct = 0.0;
    double bd_pct = 0.0;
};

TreeDetection tree_branch_detected(const Volume& pred, const CenterlineTruth& cl);

struct MetricOptions {
    double nsd_tolerance_mm = kDefaultNsdToleranceMm;
    SkeletonParams skeleton{};
    Connectivity connectivity = Connectivity::vertex;
};

struct MetricReport {
    double cldice_pct = 0.0;
    double nsdice_pct = 0.0;
    double hd95_mm = 0.0;
    double bd_pct = 0.0;
    double td_pct = 0.0;
    std::size_t betti0_error = 0;
    std::vector<std::string> flags;
};

// BD/TD need a centerline; without one they are reported as NaN and flagged.
MetricReport evaluate_case(const Volume& pred, const Volume& gt, const std::optional<CenterlineTruth>& centerline,
                           const MetricOptions& options);

}  // namespace toposculpt
