#include "toposculpt/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "toposculpt/error.hpp"
#include "toposculpt/kernels.hpp"

namespace toposculpt {

namespace {

std::vector<Offset3> make_offsets(int kind) {
    std::vector<Offset3> out;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0) continue;
                if (kind == 6 && manhattan > 1) continue;
                if (kind == 18 && manhattan > 2) continue;
                out.push_back({dx, dy, dz});
            }
    return out;
}

std::string describe(VoxelCoord c) {
    std::ostringstream os;
    os << "(" << c.x << "," << c.y << "," << c.z << ")";
    return os.str();
}

struct DisjointSet {
    std::vector<std::uint32_t> parent;

    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }

    std::uint32_t find(std::uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) std::swap(a, b);
        parent[a] = b;
    }
};

}  // namespace

Connectivity connectivity_from_int(int kind) {
    switch (kind) {
        case 6: return Connectivity::face;
        case 18: return Connectivity::edge;
        case 26: return Connectivity::vertex;
        default: throw UsageError("connectivity must be 6, 18 or 26, got " + std::to_string(kind));
    }
}

std::span<const Offset3> neighbor_offsets(Connectivity conn) {
    static const std::vector<Offset3> six = make_offsets(6);
    static const std::vector<Offset3> eighteen = make_offsets(18);
    static const std::vector<Offset3> twentysix = make_offsets(26);
    switch (conn) {
        case Connectivity::face: return six;
        case Connectivity::edge: return eighteen;
        case Connectivity::vertex: break;
    }
    return twentysix;
}

std::string to_string(Role role) {
    switch (role) {
        case Role::probability: return "probability";
        case Role::logit: return "logit";
        case Role::binary: return "binary";
    }
    return "unknown";
}

VoxelCoord coord_of(std::size_t idx, const Dims& dims) noexcept {
    const auto i = static_cast<std::int64_t>(idx);
    return {i % dims.nx, (i / dims.nx) % dims.ny, i / (dims.nx * dims.ny)};
}

Volume::Volume(Dims dims, Spacing spacing, Role role, double fill)
    : Volume(dims, spacing, role, std::vector<double>(dims.count(), fill)) {}

Volume::Volume(Dims dims, Spacing spacing, Role role, std::vector<double> data)
    : dims_(dims), spacing_(spacing), role_(role), data_(std::move(data)) {
    if (dims.nx < 0 || dims.ny < 0 || dims.nz < 0) throw InputError("volume dims must be non-negative");
    if (data_.size() != dims.count()) {
        throw InputError("volume data length " + std::to_string(data_.size()) + " != nx*ny*nz = " +
                         std::to_string(dims.count()));
    }
    if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) throw InputError("voxel spacing must be positive");
    validate();
}

VoxelCoord Volume::coord(std::size_t idx) const noexcept { return coord_of(idx, dims_); }

void Volume::require_role(Role expected, const std::string& op) const {
    if (role_ != expected) {
        throw InputError(op + ": expected a " + to_string(expected) + " volume, got " + to_string(role_));
    }
}

void Volume::validate() {
    switch (role_) {
        case Role::probability:
            for (std::size_t i = 0; i < data_.size(); ++i) {
                double& v = data_[i];
                if (!(v >= -kProbabilityTolerance && v <= 1.0 + kProbabilityTolerance)) {
                    throw InputError("probability out of [0,1] at voxel " + describe(coord(i)) + ": " +
                                     std::to_string(v));
                }
                v = std::clamp(v, 0.0, 1.0);
            }
            break;
        case Role::binary:
            for (std::size_t i = 0; i < data_.size(); ++i) {
                if (data_[i] != 0.0 && data_[i] != 1.0) {
                    throw InputError("binary volume holds non-0/1 value at voxel " + describe(coord(i)));
                }
            }
            break;
        case Role::logit: break;
    }
}

Volume Volume::retagged(Role role) const {
    return Volume(dims_, spacing_, role, data_);
}

void require_same_grid(const Volume& a, const Volume& b, const std::string& op) {
    if (!a.same_grid(b)) throw InputError(op + ": volume dims differ");
}

std::vector<VoxelCoord> neighbors(VoxelCoord v, const Dims& dims, Connectivity conn) {
    std::vector<VoxelCoord> out;
    for (const Offset3& o : neighbor_offsets(conn)) {
        const VoxelCoord n{v.x + o.dx, v.y + o.dy, v.z + o.dz};
        if (n.x >= 0 && n.y >= 0 && n.z >= 0 && n.x < dims.nx && n.y < dims.ny && n.z < dims.nz) out.push_back(n);
    }
    return out;
}

Volume binarize(const Volume& p, double threshold) {
    p.require_role(Role::probability, "binarize");
    if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("binarize: threshold must lie in (0,1)");
    Volume out(p.dims(), p.spacing(), Role::binary, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > threshold ? 1.0 : 0.0;
    return out;
}

Volume sigmoid(const Volume& logits) {
    logits.require_role(Role::logit, "sigmoid");
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) {
            throw NumericalError("sigmoid: non-finite logit at voxel " + describe(logits.coord(i)));
        }
    }
    std::vector<double> out(logits.size());
    kernels::parallel::sigmoid(logits.values(), out);
    return Volume(logits.dims(), logits.spacing(), Role::probability, std::move(out));
}

Volume logit(const Volume& p, double eps) {
    p.require_role(Role::probability, "logit");
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], eps, 1.0 - eps);
        out[i] = std::log(q / (1.0 - q));
    }
    return Volume(p.dims(), p.spacing(), Role::logit, std::move(out));
}

std::pair<std::vector<std::uint32_t>, std::size_t> label_components(const Volume& mask, Connectivity conn) {
    const Dims& d = mask.dims();
    const std::size_t n = mask.size();
    DisjointSet ds(n);
    // Only "backward" offsets are needed to see every edge once.
    std::vector<Offset3> back;
    for (const Offset3& o : neighbor_offsets(conn)) {
        if (o.dz < 0 || (o.dz == 0 && (o.dy < 0 || (o.dy == 0 && o.dx < 0)))) back.push_back(o);
    }
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::size_t i = static_cast<std::size_t>(x + d.nx * (y + d.ny * z));
                if (!(mask[i] > 0.0)) continue;
                for (const Offset3& o : back) {
                    const std::int64_t xx = x + o.dx, yy = y + o.dy, zz = z + o.dz;
                    if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx || yy >= d.ny || zz >= d.nz) continue;
                    const std::size_t j = static_cast<std::size_t>(xx + d.nx * (yy + d.ny * zz));
                    if (mask[j] > 0.0) ds.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
                }
            }
    std::vector<std::uint32_t> labels(n, 0);
    std::vector<std::uint32_t> root_label(n, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mask[i] > 0.0)) continue;
        const std::uint32_t r = ds.find(static_cast<std::uint32_t>(i));
        if (root_label[r] == 0) root_label[r] = static_cast<std::uint32_t>(++count);
        labels[i] = root_label[r];
    }
    return {std::move(labels), count};
}

std::size_t count_components(const Volume& mask, Connectivity conn) {
    return label_components(mask, conn).second;
}

}  // namespace toposculpt
