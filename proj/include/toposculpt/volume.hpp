#pragma once

// Dense 3D scalar grids and voxel neighborhoods.
//
// Linearization is x-fastest, then y, then z:
//     index = x + nx * (y + ny * z)
// Every module and both file formats use this order.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace toposculpt {

struct Dims {
    std::int64_t nx = 0;
    std::int64_t ny = 0;
    std::int64_t nz = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool empty() const noexcept { return count() == 0; }
    auto operator<=>(const Dims&) const = default;
};

// Millimetres per voxel along each axis.
struct Spacing {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;
    auto operator<=>(const Spacing&) const = default;
};

struct VoxelCoord {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;
    auto operator<=>(const VoxelCoord&) const = default;
};

enum class Connectivity : int { face = 6, edge = 18, vertex = 26 };

// Accepts 6, 18 or 26; anything else throws UsageError.
Connectivity connectivity_from_int(int kind);
inline int to_int(Connectivity c) noexcept { return static_cast<int>(c); }

struct Offset3 {
    int dx, dy, dz;
};

// Offsets of the neighborhood (origin excluded), in a fixed order.
std::span<const Offset3> neighbor_offsets(Connectivity conn);

enum class Role { probability, logit, binary };
std::string to_string(Role role);

// Probability excursions up to this far outside [0,1] are clamped; larger ones are errors.
inline constexpr double kProbabilityTolerance = 1e-9;

class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, Role role, double fill = 0.0);
    // Validates length, spacing and the role's value range.
    Volume(Dims dims, Spacing spacing, Role role, std::vector<double> data);

    const Dims& dims() const noexcept { return dims_; }
    const Spacing& spacing() const noexcept { return spacing_; }
    Role role() const noexcept { return role_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t index(VoxelCoord c) const noexcept {
        return static_cast<std::size_t>(c.x + dims_.nx * (c.y + dims_.ny * c.z));
    }
    VoxelCoord coord(std::size_t idx) const noexcept;
    bool contains(VoxelCoord c) const noexcept {
        return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < dims_.nx && c.y < dims_.ny && c.z < dims_.nz;
    }

    double operator[](std::size_t idx) const noexcept { return data_[idx]; }
    double& operator[](std::size_t idx) noexcept { return data_[idx]; }
    double at(VoxelCoord c) const noexcept { return data_[index(c)]; }
    double& at(VoxelCoord c) noexcept { return data_[index(c)]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    // Throws InputError naming `op` when the role tag differs.
    void require_role(Role expected, const std::string& op) const;
    // Re-checks the role's value invariant after in-place mutation (clamping tiny excursions).
    void validate();
    // Same payload under a different tag; validated against the new role.
    Volume retagged(Role role) const;

    bool same_grid(const Volume& other) const noexcept { return dims_ == other.dims_; }

private:
    Dims dims_{};
    Spacing spacing_{};
    Role role_ = Role::probability;
    std::vector<double> data_;
};

VoxelCoord coord_of(std::size_t idx, const Dims& dims) noexcept;

// Throws InputError unless both volumes share dims.
void require_same_grid(const Volume& a, const Volume& b, const std::string& op);

// All in-bounds voxels adjacent to `v`; never includes `v`.
std::vector<VoxelCoord> neighbors(VoxelCoord v, const Dims& dims, Connectivity conn);

// 1 where p > threshold (strict), else 0.
Volume binarize(const Volume& p, double threshold);

// Elementwise logistic function; output strictly inside (0,1).
Volume sigmoid(const Volume& logits);

// Elementwise log(p/(1-p)) after clamping to [eps, 1-eps].
Volume logit(const Volume& p, double eps = 1e-6);

// Connected components of {v : v > 0} under conn.
std::size_t count_components(const Volume& mask, Connectivity conn);

// Component label per voxel (0 = background, labels from 1), plus the label count.
std::pair<std::vector<std::uint32_t>, std::size_t> label_components(const Volume& mask, Connectivity conn);

}  // namespace toposculpt
