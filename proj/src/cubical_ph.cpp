#include "toposculpt/cubical_ph.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>

#include "toposculpt/error.hpp"

namespace toposculpt {

namespace {

constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();

// Union-find whose roots remember the oldest birth voxel of their component.
class ComponentForest {
public:
    explicit ComponentForest(std::size_t n) : parent_(n, kAbsent), size_(n, 0), birth_(n, kAbsent) {}

    void make(std::uint32_t v) {
        parent_[v] = v;
        size_[v] = 1;
        birth_[v] = v;
    }
    std::uint32_t find(std::uint32_t v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }
    std::uint32_t birth(std::uint32_t root) const { return birth_[root]; }
    // Links two roots; the merged root keeps `elder_birth`.
    void link(std::uint32_t a, std::uint32_t b, std::uint32_t elder_birth) {
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        birth_[a] = elder_birth;
    }
    bool is_root(std::uint32_t v) const { return parent_[v] == v; }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
    std::vector<std::uint32_t> birth_;
};

bool voxel_less(const VoxelCoord& a, const VoxelCoord& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
}

}  // namespace

std::size_t Barcode::betti0_at_level(double level) const noexcept {
    std::size_t n = 0;
    for (const auto& pr : pairs) {
        if (pr.birth >= level && level > pr.death) ++n;
    }
    return n;
}

void sort_barcode(std::vector<PersistencePair>& pairs) {
    std::stable_sort(pairs.begin(), pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
        const double pa = a.persistence();
        const double pb = b.persistence();
        if (pa != pb) return pa > pb;
        if (a.birth != b.birth) return a.birth > b.birth;
        return voxel_less(a.birth_voxel, b.birth_voxel);
    });
}

Barcode compute_ph0(const Volume& p, Connectivity conn) {
    p.require_role(Role::probability, "compute_ph0");
    if (p.dims().empty()) throw InputError("compute_ph0: empty volume");
    if (p.size() >= kAbsent) throw InputError("compute_ph0: volume too large for 32-bit voxel indices");

    const Dims& d = p.dims();
    const std::span<const double> val = p.values();

    std::vector<std::uint32_t> order;
    order.reserve(p.size());
    for (std::uint32_t i = 0; i < p.size(); ++i) {
        if (val[i] > 0.0) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (val[a] != val[b]) return val[a] > val[b];
        return a < b;
    });

    // position in the filtration; kAbsent for voxels not yet inserted (or never).
    std::vector<std::uint32_t> position(p.size(), kAbsent);
    const std::span<const Offset3> offsets = neighbor_offsets(conn);

    ComponentForest forest(p.size());
    Barcode out;
    for (std::uint32_t pos = 0; pos < order.size(); ++pos) {
        const std::uint32_t v = order[pos];
        position[v] = pos;
        forest.make(v);
        const VoxelCoord c = p.coord(v);
        for (const Offset3& o : offsets) {
            const std::int64_t x = c.x + o.dx, y = c.y + o.dy, z = c.z + o.dz;
            if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) continue;
            const auto u = static_cast<std::uint32_t>(x + d.nx * (y + d.ny * z));
            if (position[u] == kAbsent) continue;
            const std::uint32_t ru = forest.find(u);
            const std::uint32_t rv = forest.find(v);
            if (ru == rv) continue;
            std::uint32_t elder = forest.birth(ru);
            std::uint32_t younger = forest.birth(rv);
            if (position[younger] < position[elder]) std::swap(elder, younger);
            if (val[younger] > val[v]) {
                PersistencePair pr;
                pr.birth = val[younger];
                pr.death = val[v];
                pr.birth_voxel = p.coord(younger);
                pr.death_voxel = c;
                out.pairs.push_back(pr);
            }
            forest.link(ru, rv, elder);
        }
    }
    for (const std::uint32_t v : order) {
        if (!forest.is_root(v)) continue;
        PersistencePair pr;
        const std::uint32_t b = forest.birth(v);
        pr.birth = val[b];
        pr.death = 0.0;
        pr.birth_voxel = p.coord(b);
        pr.essential = true;
        out.pairs.push_back(pr);
    }
    sort_barcode(out.pairs);
    return out;
}

std::size_t betti0_at(const Volume& p, double threshold, Connectivity conn) {
    Volume mask(p.dims(), p.spacing(), Role::binary, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) mask[i] = p[i] > threshold ? 1.0 : 0.0;
    return count_components(mask, conn);
}

}  // namespace toposculpt
