#include "toposculpt/tib_loss.hpp"

#include <algorithm>
#include <cstdint>

#include "toposculpt/error.hpp"

namespace toposculpt {

void validate(const TopoPrior& prior) {
    if (prior.beta0 < 1) throw UsageError("prior beta0 must be >= 1");
}

void validate(const TibWeights& w) {
    if (!(w.alpha >= 0.0)) throw UsageError("alpha must be >= 0");
    if (!(w.beta >= 0.0)) throw UsageError("beta must be >= 0");
    if (!(w.gamma >= 0.0 && w.gamma <= 1.0)) throw UsageError("gamma must lie in [0,1]");
}

FeatureSplit split_features(const Barcode& barcode, const TopoPrior& prior) {
    FeatureSplit out;
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(prior.beta0, 0)), barcode.size());
    out.faithful.assign(barcode.pairs.begin(), barcode.pairs.begin() + static_cast<std::ptrdiff_t>(keep));
    out.superfluous.assign(barcode.pairs.begin() + static_cast<std::ptrdiff_t>(keep), barcode.pairs.end());
    return out;
}

CorrectionTerm l_tib_cor(const Barcode& barcode, const TopoPrior& prior) {
    validate(prior);
    CorrectionTerm out;
    out.vacuous = barcode.empty();
    const FeatureSplit split = split_features(barcode, prior);
    for (const PersistencePair& pr : split.faithful) {
        out.topo_f += pr.persistence();
        out.grads[pr.birth_voxel] -= 1.0;
        if (!pr.essential && pr.death_voxel) out.grads[*pr.death_voxel] += 1.0;
    }
    for (const PersistencePair& pr : split.superfluous) {
        out.topo_s += pr.persistence();
        out.grads[pr.birth_voxel] += 1.0;
        if (!pr.essential && pr.death_voxel) out.grads[*pr.death_voxel] -= 1.0;
    }
    out.loss = static_cast<double>(prior.beta0) - out.topo_f + out.topo_s;
    return out;
}

Volume structural_skeleton(const Volume& p, const SkeletonParams& params) {
    return soft_skel(binarize(p, 0.5), params);
}

StructuralSimilarity struc_similarity(const Volume& p_next, const Volume& p_prev, const SkeletonParams& params) {
    require_same_grid(p_next, p_prev, "struc_similarity");
    return struc_similarity(p_next, structural_skeleton(p_next, params), p_prev, structural_skeleton(p_prev, params));
}

StructuralSimilarity struc_similarity(const Volume& p_next, const Volume& skel_next, const Volume& p_prev,
                                      const Volume& skel_prev) {
    p_next.require_role(Role::probability, "struc_similarity");
    p_prev.require_role(Role::probability, "struc_similarity");
    require_same_grid(p_next, p_prev, "struc_similarity");
    require_same_grid(p_next, skel_next, "struc_similarity");
    require_same_grid(p_prev, skel_prev, "struc_similarity");

    const auto n = static_cast<std::int64_t>(p_next.size());
    // prec = A / B with A = sum(Sn*pn*pp), B = sum(Sn*pn); sens = C / D with C = sum(Sp*pp*pn), D = sum(Sp*pp)
    double a = 0.0, b = 0.0, c = 0.0, dsum = 0.0;
#pragma omp parallel for reduction(+ : a, b, c, dsum) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double sp_next = skel_next[i] * p_next[i];
        const double sp_prev = skel_prev[i] * p_prev[i];
        a += sp_next * p_prev[i];
        b += sp_next;
        c += sp_prev * p_next[i];
        dsum += sp_prev;
    }

    StructuralSimilarity out;
    out.grad.assign(p_next.size(), 0.0);
    if (b < kSkeletonEpsilon || dsum < kSkeletonEpsilon) {
        out.degenerate = true;
        return out;
    }
    const double prec = a / b;
    const double sens = c / dsum;
    out.precision = prec;
    out.sensitivity = sens;
    const double denom = prec + sens;
    if (denom <= 0.0) return out;
    out.f_score = 2.0 * prec * sens / denom;

    const double df_dprec = 2.0 * sens * sens / (denom * denom);
    const double df_dsens = 2.0 * prec * prec / (denom * denom);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double dprec = skel_next[i] * (p_prev[i] - prec) / b;
        const double dsens = skel_prev[i] * p_prev[i] / dsum;
        out.grad[i] = df_dprec * dprec + df_dsens * dsens;
    }
    return out;
}

IntegrityTerm l_tib_com(const Volume& p_next, const Volume& p_prev, const TibWeights& weights,
                        const SkeletonParams& params) {
    require_same_grid(p_next, p_prev, "l_tib_com");
    return l_tib_com(p_next, structural_skeleton(p_next, params), p_prev, structural_skeleton(p_prev, params),
                     weights);
}

IntegrityTerm l_tib_com(const Volume& p_next, const Volume& skel_next, const Volume& p_prev,
                        const Volume& skel_prev, const TibWeights& weights) {
    validate(weights);
    require_same_grid(p_next, p_prev, "l_tib_com");
    const auto n = static_cast<std::int64_t>(p_next.size());
    const double inv_n = 1.0 / static_cast<double>(n);

    IntegrityTerm out;
    out.grad.assign(p_next.size(), 0.0);

    double sq = 0.0;
#pragma omp parallel for reduction(+ : sq) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double diff = p_next[i] - p_prev[i];
        sq += diff * diff;
        out.grad[i] = weights.alpha * 2.0 * inv_n * diff;
    }
    out.voxel = weights.alpha * sq * inv_n;

    if (weights.beta != 0.0) {
        const StructuralSimilarity sim = struc_similarity(p_next, skel_next, p_prev, skel_prev);
        out.degenerate = sim.degenerate;
        out.f_score = sim.f_score;
        out.structural = -weights.beta * sim.f_score;
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) out.grad[i] -= weights.beta * sim.grad[i];
    }
    out.value = out.voxel + out.structural;
    return out;
}

namespace {

TibLossReport assemble(const Barcode& barcode, const TopoPrior& prior, IntegrityTerm com, const Volume& p_next,
                       double phase_gamma) {
    if (!(phase_gamma >= 0.0 && phase_gamma <= 1.0)) throw UsageError("phase gamma must lie in [0,1]");
    CorrectionTerm cor = l_tib_cor(barcode, prior);

    TibLossReport r;
    r.l_cor = cor.loss;
    r.topo_f = cor.topo_f;
    r.topo_s = cor.topo_s;
    r.vacuous_barcode = cor.vacuous;
    r.l_com_voxel = com.voxel;
    r.l_com_struct = com.structural;
    r.degenerate_skeleton = com.degenerate;
    r.phase_gamma = phase_gamma;
    r.l_total = r.l_cor + phase_gamma * (r.l_com_voxel + r.l_com_struct);

    r.gradient = std::move(com.grad);
    for (double& g : r.gradient) g *= phase_gamma;
    for (const auto& [voxel, g] : cor.grads) r.gradient[p_next.index(voxel)] += g;
    r.critical_grads = std::move(cor.grads);
    return r;
}

}  // namespace

TibLossReport l_tib_total(const Barcode& barcode, const TopoPrior& prior, const Volume& p_next,
                          const Volume& p_prev, const TibWeights& weights, const SkeletonParams& params,
                          double phase_gamma) {
    return assemble(barcode, prior, l_tib_com(p_next, p_prev, weights, params), p_next, phase_gamma);
}

TibLossReport l_tib_total(const Barcode& barcode, const TopoPrior& prior, const Volume& p_next,
                          const Volume& skel_next, const Volume& p_prev, const Volume& skel_prev,
                          const TibWeights& weights, double phase_gamma) {
    return assemble(barcode, prior, l_tib_com(p_next, skel_next, p_prev, skel_prev, weights), p_next,
                    phase_gamma);
}

}  // namespace toposculpt
