#pragma once

// Synthetic tubular-tree phantoms with exact centerlines, and their corruption
// into "initial prediction" probability maps (breaks + spurious blobs).
//
// All randomness comes from std::mt19937_64, whose output sequence is fixed by
// the standard; floating-point draws are derived from its raw 64-bit output so
// cases are identical across platforms.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "toposculpt/metrics.hpp"
#include "toposculpt/volume.hpp"

namespace toposculpt {

struct PhantomConfig {
    Dims dims{96, 96, 96};
    Spacing spacing{1.0, 1.0, 1.0};
    std::uint64_t seed = 1;

    int generations = 3;
    double root_radius = 3.0;   // voxels
    double radius_decay = 0.75; // per generation, in (0,1)
    double min_length = 24.0;   // root branch length range, voxels
    double max_length = 30.0;
    double length_decay = 0.8;  // per generation
    double min_angle_deg = 25.0;
    double max_angle_deg = 40.0;

    int breaks = 0;
    double break_margin_min = 0.3;  // break sphere radius = local tube radius + margin
    double break_margin_max = 0.8;

    int blobs = 0;
    double blob_radius_min = 1.2;  // ellipsoid semi-axes, voxels
    double blob_radius_max = 1.7;
    double blob_clearance = 5.0;   // min distance from any blob voxel to tree or other blobs

    double noise = 0.0;  // uniform +-amplitude added after blurring
    double foreground_prob = 0.9;
    double background_prob = 0.1;

    int max_retries = 200;
};

void validate(const PhantomConfig& cfg);

using Vec3 = std::array<double, 3>;

struct BranchSegment {
    int id = 0;
    int parent = -1;
    int generation = 0;
    Vec3 start{};
    Vec3 end{};
    double radius = 0.0;
};

struct PhantomTree {
    Volume gt_mask;  // binary
    CenterlineTruth centerline;
    std::vector<BranchSegment> branches;
};

struct CorruptionEvent {
    enum class Kind { break_, blob } kind = Kind::break_;
    VoxelCoord center{};
    Vec3 radii{};     // sphere: all equal
    int branch = -1;  // breaks only
};

std::string to_string(CorruptionEvent::Kind kind);

struct Corruption {
    Volume init_prob;
    std::vector<CorruptionEvent> events;
};

struct PhantomCase {
    PhantomTree tree;
    Volume init_prob;
    std::vector<CorruptionEvent> corruption;
};

// Portable draws on top of mt19937_64.
class PhantomRng {
public:
    explicit PhantomRng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

private:
    std::mt19937_64 engine_;
};

PhantomTree generate_tree(const PhantomConfig& cfg);

Corruption corrupt(const PhantomTree& tree, const PhantomConfig& cfg);

// generate_tree + corrupt, with the generation-time validity checks.
PhantomCase generate_case(const PhantomConfig& cfg);

}  // namespace toposculpt
