#pragma once

// Data-parallel voxel kernels.
//
// Each kernel exists twice: `parallel::` (OpenMP, used by the library) and
// `serial::` (plain loops, kept as the reference the tests and the benchmark
// compare against). Both variants must produce bit-identical output.

#include <cstddef>
#include <span>

#include "toposculpt/volume.hpp"

namespace toposculpt::kernels {

// separable3: the three axis-aligned 3-voxel windows through the voxel
//             (the 6-neighborhood plus the voxel itself).
// cubic3:     the full 3x3x3 window.
enum class Pooling { separable3, cubic3 };
enum class PoolOp { min, max };

// Number of OpenMP threads the parallel kernels will use.
int thread_count();
// Caps the thread count; n <= 0 leaves the runtime default.
void set_thread_count(int n);

namespace serial {

// Replicate padding at the borders.
void pool(std::span<const double> in, std::span<double> out, const Dims& dims, Pooling shape, PoolOp op);
void sigmoid(std::span<const double> in, std::span<double> out);
// 3x3x3 mean with replicate padding.
void box_mean3(std::span<const double> in, std::span<double> out, const Dims& dims);
// Squared Euclidean distance (mm^2) from every voxel to the nearest voxel with
// feature[i] != 0; +inf when there is no feature voxel.
void squared_edt(std::span<const unsigned char> feature, std::span<double> out, const Dims& dims,
                 const Spacing& spacing);

}  // namespace serial

namespace parallel {

void pool(std::span<const double> in, std::span<double> out, const Dims& dims, Pooling shape, PoolOp op);
void sigmoid(std::span<const double> in, std::span<double> out);
void box_mean3(std::span<const double> in, std::span<double> out, const Dims& dims);
void squared_edt(std::span<const unsigned char> feature, std::span<double> out, const Dims& dims,
                 const Spacing& spacing);

}  // namespace parallel

// Scalar logistic used by both variants.
double sigmoid_scalar(double v) noexcept;

}  // namespace toposculpt::kernels
