#include "vectordream/optim.hpp"

#include <cmath>

#include "vectordream/error.hpp"

namespace vectordream {

double lr_at(const LrSchedule& sched, int iter) {
    if (iter < 0 || iter > sched.warmup_iters + sched.decay_iters)
        throw ContractError("lr_at: iteration outside the schedule");
    if (iter == 0) return sched.warmup_start;
    if (iter == sched.warmup_iters) return sched.warmup_end;
    if (iter < sched.warmup_iters) {
        double f = static_cast<double>(iter) / sched.warmup_iters;
        return sched.warmup_start + (sched.warmup_end - sched.warmup_start) * f;
    }
    if (iter == sched.warmup_iters + sched.decay_iters) return sched.decay_end;
    double f = static_cast<double>(iter - sched.warmup_iters) / sched.decay_iters;
    return sched.decay_start * std::pow(sched.decay_end / sched.decay_start, f);
}

void adam_step_slice(std::vector<double>& params, const std::vector<double>& grad,
                     AdamState& state, const AdamConfig& cfg, double lr, std::size_t offset,
                     std::size_t count) {
    if (params.size() != grad.size() || state.m.size() != params.size() ||
        offset + count > params.size())
        throw ContractError("adam_step: shape mismatch");
    if (state.step < 1) throw ContractError("adam_step: step counter not advanced");

    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = offset; i < offset + count; ++i) {
        double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

void adam_step(ParamVector& params, const ParamGradient& grad, AdamState& state,
               const AdamConfig& cfg, double lr) {
    if (state.m.size() != params.values.size()) state.resize(params.values.size());
    ++state.step;
    adam_step_slice(params.values, grad.values, state, cfg, lr, 0, params.values.size());
}

double family_lr(const LrSchedule& sched, ParamFamily family, int iter) {
    switch (family) {
        case ParamFamily::Points: {
            int end = sched.warmup_iters + sched.decay_iters;
            return lr_at(sched, iter > end ? end : iter);
        }
        case ParamFamily::StrokeWidth:
            return sched.width_lr;
        case ParamFamily::Fill:
        case ParamFamily::StrokeColor:
        case ParamFamily::Opacity:
            return sched.color_lr;
    }
    return sched.color_lr;
}

}  // namespace vectordream
