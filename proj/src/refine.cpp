#include "toposculpt/refine.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace toposculpt {

namespace {

void require_finite(double v, int iteration, const char* term, const RefinementState& state) {
    if (!std::isfinite(v)) {
        throw RefinementError("non-finite " + std::string(term) + " at iteration " + std::to_string(iteration),
                              state.trajectory);
    }
}

struct Evaluation {
    Volume probs;
    Volume skeleton;
    TibLossReport report;
    TrajectoryRecord record;
};

Evaluation evaluate(RefinementState& state, const RefineSettings& s) {
    const int i = state.iteration;
    Evaluation ev;
    try {
        ev.probs = sigmoid(state.logits);
    } catch (const NumericalError& e) {
        throw RefinementError("iteration " + std::to_string(i) + ": " + e.what(), state.trajectory);
    }

    const bool recompute = schedule_j(i, s.curriculum) == i || state.barcode_iteration < 0;
    if (recompute) {
        state.cached_barcode = compute_ph0(ev.probs, s.connectivity);
        state.barcode_iteration = i;
    }
    const Barcode barcode = recompute ? state.cached_barcode : revalue(state.cached_barcode, ev.probs);

    ev.skeleton = s.weights.beta != 0.0 ? structural_skeleton(ev.probs, s.skeleton)
                                        : Volume(ev.probs.dims(), ev.probs.spacing(), Role::probability, 0.0);
    const Volume& p_prev = state.prev_probs ? *state.prev_probs : ev.probs;
    const Volume& skel_prev = state.prev_skeleton ? *state.prev_skeleton : ev.skeleton;
    const double phase_gamma = i <= s.curriculum.t ? 1.0 : s.weights.gamma;

    ev.report = l_tib_total(barcode, s.prior, ev.probs, ev.skeleton, p_prev, skel_prev, s.weights, phase_gamma);

    require_finite(ev.report.l_cor, i, "l_cor", state);
    require_finite(ev.report.l_com_voxel, i, "l_com_voxel", state);
    require_finite(ev.report.l_com_struct, i, "l_com_struct", state);
    require_finite(ev.report.l_total, i, "l_total", state);

    ev.record.iteration = i;
    ev.record.beta0 = betti0_at(ev.probs, 0.5, s.connectivity);
    ev.record.l_cor = ev.report.l_cor;
    ev.record.l_com_voxel = ev.report.l_com_voxel;
    ev.record.l_com_struct = ev.report.l_com_struct;
    ev.record.l_total = ev.report.l_total;
    ev.record.ph_recomputed = recompute;
    return ev;
}

void apply_update(RefinementState& state, const OptimizerConfig& opt, const Volume& probs,
                  const std::vector<double>& grad_prob) {
    const auto n = static_cast<std::int64_t>(grad_prob.size());
    std::span<double> theta = state.logits.values();
    const double lr = opt.learning_rate;

    if (opt.method == OptimizerMethod::plain_gradient) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const double g = grad_prob[i] * probs[i] * (1.0 - probs[i]);
            theta[i] -= lr * g;
        }
        return;
    }

    if (state.m.size() != grad_prob.size()) {
        state.m.assign(grad_prob.size(), 0.0);
        state.v.assign(grad_prob.size(), 0.0);
    }
    ++state.optimizer_steps;
    const double t = static_cast<double>(state.optimizer_steps);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double g = grad_prob[i] * probs[i] * (1.0 - probs[i]);
        state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
        state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + opt.epsilon) + opt.weight_decay * theta[i]);
    }
}

}  // namespace

void validate(const CurriculumConfig& cfg) {
    if (cfg.t < 0) throw UsageError("curriculum t must be >= 0");
    if (cfg.T < 0) throw UsageError("curriculum T must be >= 0");
    if (cfg.t > cfg.T) throw UsageError("curriculum requires t <= T");
    if (cfg.k < 1) throw UsageError("curriculum k must be >= 1");
}

void validate(const OptimizerConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw UsageError("learning rate must be finite and >= 0");
    }
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw UsageError("moment decay rates must lie in [0,1)");
    }
    if (!(cfg.weight_decay >= 0.0)) throw UsageError("weight decay must be >= 0");
    if (!(cfg.epsilon > 0.0)) throw UsageError("optimizer epsilon must be > 0");
}

void validate(const RefineSettings& s) {
    validate(s.prior);
    validate(s.weights);
    validate(s.skeleton);
    validate(s.optimizer);
    validate(s.curriculum);
}

std::string to_string(OptimizerMethod method) {
    return method == OptimizerMethod::adamw ? "adamw" : "gd";
}

OptimizerMethod optimizer_from_string(const std::string& name) {
    if (name == "adamw" || name == "adam") return OptimizerMethod::adamw;
    if (name == "gd" || name == "sgd" || name == "plain") return OptimizerMethod::plain_gradient;
    throw UsageError("unknown optimizer '" + name + "' (expected adamw or gd)");
}

RefinementState init_state(const Volume& p0) {
    p0.require_role(Role::probability, "init_state");
    RefinementState state;
    state.logits = logit(p0, kInitClamp);
    return state;
}

int schedule_j(int i, const CurriculumConfig& cfg) {
    if (i <= cfg.t) return i;
    return (i / cfg.k) * cfg.k;
}

int expected_ph_computations(const CurriculumConfig& cfg) {
    if (cfg.T == 0) return 0;
    int n = 0;
    for (int i = 0; i <= cfg.T; ++i) {
        if (schedule_j(i, cfg) == i) ++n;
    }
    return n;
}

Barcode revalue(const Barcode& cached, const Volume& p) {
    Barcode out;
    out.pairs.reserve(cached.size());
    for (PersistencePair pr : cached.pairs) {
        pr.birth = p.at(pr.birth_voxel);
        if (!pr.essential) {
            pr.death = p.at(*pr.death_voxel);
            if (!(pr.birth > pr.death)) continue;
        }
        out.pairs.push_back(pr);
    }
    sort_barcode(out.pairs);
    return out;
}

void step(RefinementState& state, const RefineSettings& s) {
    if (state.iteration >= s.curriculum.T) {
        throw UsageError("step: iteration " + std::to_string(state.iteration) + " is not below T");
    }
    Evaluation ev = evaluate(state, s);
    for (const double g : ev.report.gradient) {
        if (!std::isfinite(g)) {
            throw RefinementError("non-finite gradient at iteration " + std::to_string(state.iteration), state.trajectory);
        }
    }
    apply_update(state, s.optimizer, ev.probs, ev.report.gradient);
    state.trajectory.push_back(ev.record);
    state.prev_probs = std::move(ev.probs);
    state.prev_skeleton = std::move(ev.skeleton);
    ++state.iteration;
}

void finish(RefinementState& state, const RefineSettings& s) {
    Evaluation ev = evaluate(state, s);
    state.trajectory.push_back(ev.record);
}

RefineResult run(const Volume& p0, const RefineSettings& s, const TrajectoryObserver& observer) {
    validate(s);
    if (s.curriculum.T == 0) return {p0, {}};
    RefinementState state = init_state(p0);
    while (state.iteration < s.curriculum.T) {
        step(state, s);
        if (observer) observer(state.trajectory.back());
    }
    finish(state, s);
    if (observer) observer(state.trajectory.back());
    return {sigmoid(state.logits), std::move(state.trajectory)};
}

}  // namespace toposculpt
