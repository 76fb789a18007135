#pragma once

// Morphological soft skeleton built from min/max pooling (clDice style).

#include "toposculpt/kernels.hpp"
#include "toposculpt/volume.hpp"

namespace toposculpt {

using kernels::Pooling;

struct SkeletonParams {
    int iterations = 3;  // must cover the largest tube radius, in voxels
    Pooling pooling = Pooling::separable3;
};

void validate(const SkeletonParams& params);

// Min over the pooling window, replicate-padded. Output keeps the input's tag.
Volume soft_erode(const Volume& v, Pooling pooling = Pooling::separable3);
// Max over the pooling window, replicate-padded.
Volume soft_dilate(const Volume& v, Pooling pooling = Pooling::separable3);

// skel = relu(v - open(v)); then `iterations` times:
//     v    <- erode(v)
//     skel <- skel + relu(relu(v - open(v)) * (1 - skel))
// Values in [0,1] with support inside the input's support.
Volume soft_skel(const Volume& v, const SkeletonParams& params);

}  // namespace toposculpt
