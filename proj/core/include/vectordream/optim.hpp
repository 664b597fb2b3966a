#pragma once

#include <cstddef>
#include <vector>

#include "vectordream/scene.hpp"

namespace vectordream {

// Control-point learning rate: linear warmup 0.01 -> 0.9 over the first 50
// iterations, then exponential interpolation 0.8 -> 0.4 over the remaining
// 650. Color and stroke-width rates are constant.
struct LrSchedule {
    double warmup_start = 0.01;
    double warmup_end = 0.9;
    int warmup_iters = 50;
    double decay_start = 0.8;
    double decay_end = 0.4;
    int decay_iters = 650;
    double color_lr = 0.1;
    double width_lr = 0.01;
};

double lr_at(const LrSchedule& sched, int iter);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.9;  // 0.9 for path parameters; estimators use 0.999
    double eps = 1e-6;
};

// First/second moment state for one parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    void resize(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// One bias-corrected Adam update over [offset, offset+count) of params.
// The caller picks the slice so each parameter family can use its own lr,
// and advances `state.step` once per iteration before the first slice.
void adam_step_slice(std::vector<double>& params, const std::vector<double>& grad,
                     AdamState& state, const AdamConfig& cfg, double lr, std::size_t offset,
                     std::size_t count);

// Whole-vector convenience form.
void adam_step(ParamVector& params, const ParamGradient& grad, AdamState& state,
               const AdamConfig& cfg, double lr);

// Per-family learning rates for a scene update at iteration `iter`.
double family_lr(const LrSchedule& sched, ParamFamily family, int iter);

}  // namespace vectordream
