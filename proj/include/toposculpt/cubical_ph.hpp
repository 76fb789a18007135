#pragma once

// 0-dimensional persistent homology of the superlevel-set filtration of a
// probability volume (voxels are vertices, adjacency per Connectivity).
//
// Conventions:
//  - voxels enter in decreasing value; equal values enter in linear-index order;
//  - voxels with value exactly 0 never enter (an all-zero volume has no pairs);
//  - on a merge the younger component dies at the inserted voxel (elder rule);
//  - zero-persistence merges are not reported;
//  - surviving components are essential: death = 0, no death voxel.

#include <cstddef>
#include <optional>
#include <vector>

#include "toposculpt/volume.hpp"

namespace toposculpt {

struct PersistencePair {
    double birth = 0.0;
    double death = 0.0;
    VoxelCoord birth_voxel{};
    std::optional<VoxelCoord> death_voxel;  // empty for essential classes
    bool essential = false;

    double persistence() const noexcept { return birth - death; }
};

// Pairs sorted by persistence descending, then birth descending, then birth_voxel (x,y,z).
struct Barcode {
    std::vector<PersistencePair> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
    bool empty() const noexcept { return pairs.empty(); }
    // Number of pairs with birth >= level > death.
    std::size_t betti0_at_level(double level) const noexcept;
};

// Restores the Barcode ordering invariant.
void sort_barcode(std::vector<PersistencePair>& pairs);

Barcode compute_ph0(const Volume& p, Connectivity conn = Connectivity::vertex);

// Components of {voxel : value > threshold}; independent of compute_ph0.
std::size_t betti0_at(const Volume& p, double threshold, Connectivity conn = Connectivity::vertex);

}  // namespace toposculpt
