#pragma once

// Topological Integrity Betti loss.
//
//   L_cor = beta0 * 1 - Topo_F + Topo_S
//   L_com = alpha * mean((p_next - p_prev)^2) - beta * F(struc_prec, struc_sens)
//   L     = L_cor + phase_gamma * L_com
//
// Gradients are taken with respect to the probabilities of the current
// iterate p_next. Everything derived from p_prev is a constant, and the
// thresholded skeleton masks are constants as well.

#include <cstddef>
#include <map>
#include <vector>

#include "toposculpt/cubical_ph.hpp"
#include "toposculpt/soft_skeleton.hpp"
#include "toposculpt/volume.hpp"

namespace toposculpt {

struct TopoPrior {
    int beta0 = 1;  // expected number of connected components; ideal persistence 1 each
};

struct TibWeights {
    double alpha = 1e4;  // voxel-wise integrity
    double beta = 1e3;   // structural integrity
    double gamma = 0.1;  // integrity down-weight after the dense phase
};

void validate(const TopoPrior& prior);
void validate(const TibWeights& weights);

inline constexpr double kSkeletonEpsilon = 1e-8;

// Sparse d(loss)/d(probability) at critical voxels.
using SparseGradient = std::map<VoxelCoord, double>;

struct FeatureSplit {
    std::vector<PersistencePair> faithful;
    std::vector<PersistencePair> superfluous;
};

// First min(beta0, |pairs|) pairs are faithful; the rest are superfluous.
FeatureSplit split_features(const Barcode& barcode, const TopoPrior& prior);

struct CorrectionTerm {
    double loss = 0.0;
    double topo_f = 0.0;
    double topo_s = 0.0;
    SparseGradient grads;
    bool vacuous = false;  // empty barcode
};

CorrectionTerm l_tib_cor(const Barcode& barcode, const TopoPrior& prior);

// soft_skel(p > 0.5): the gradient-constant mask used by the structural term.
Volume structural_skeleton(const Volume& p, const SkeletonParams& params);

struct StructuralSimilarity {
    double f_score = 0.0;
    double precision = 0.0;
    double sensitivity = 0.0;
    std::vector<double> grad;  // d f_score / d p_next, dense
    bool degenerate = false;
};

StructuralSimilarity struc_similarity(const Volume& p_next, const Volume& p_prev, const SkeletonParams& params);
// Same, with both skeleton masks precomputed by structural_skeleton().
StructuralSimilarity struc_similarity(const Volume& p_next, const Volume& skel_next, const Volume& p_prev,
                                      const Volume& skel_prev);

struct IntegrityTerm {
    double value = 0.0;       // voxel + structural
    double voxel = 0.0;       // alpha * MSE
    double structural = 0.0;  // -beta * f_score
    double f_score = 0.0;
    std::vector<double> grad;  // d value / d p_next, dense
    bool degenerate = false;
};

IntegrityTerm l_tib_com(const Volume& p_next, const Volume& p_prev, const TibWeights& weights,
                        const SkeletonParams& params);
IntegrityTerm l_tib_com(const Volume& p_next, const Volume& skel_next, const Volume& p_prev,
                        const Volume& skel_prev, const TibWeights& weights);

struct TibLossReport {
    double l_cor = 0.0;
    double l_com_voxel = 0.0;   // unscaled by phase_gamma
    double l_com_struct = 0.0;  // unscaled by phase_gamma
    double l_total = 0.0;       // l_cor + phase_gamma * (l_com_voxel + l_com_struct)
    double topo_f = 0.0;
    double topo_s = 0.0;
    double phase_gamma = 1.0;
    SparseGradient critical_grads;  // of l_cor
    std::vector<double> gradient;   // of l_total w.r.t. p_next, dense
    bool vacuous_barcode = false;
    bool degenerate_skeleton = false;
};

TibLossReport l_tib_total(const Barcode& barcode, const TopoPrior& prior, const Volume& p_next,
                          const Volume& p_prev, const TibWeights& weights, const SkeletonParams& params,
                          double phase_gamma);
TibLossReport l_tib_total(const Barcode& barcode, const TopoPrior& prior, const Volume& p_next,
                          const Volume& skel_next, const Volume& p_prev, const Volume& skel_prev,
                          const TibWeights& weights, double phase_gamma);

}  // namespace toposculpt
