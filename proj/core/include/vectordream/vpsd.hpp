#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vectordream/optim.hpp"
#include "vectordream/score.hpp"
#include "vectordream/sive.hpp"

namespace vectordream {

// One member of the ensemble: a complete SVG parameter set plus its
// optimizer state.
struct Particle {
    Scene scene;
    AdamState adam;
    int id = 0;
};

struct ParticleSet {
    std::vector<Particle> particles;

    int k() const { return static_cast<int>(particles.size()); }
};

struct ReinitPolicy {
    double opacity_floor = 0.05;
    double area_floor_frac = 1e-4;  // of canvas area
    int period = 50;                // iterations; 0 disables
    double radius_min_frac = 0.01;  // of min(W,H)
    double radius_max_frac = 0.05;
};

struct ReFLConfig {
    double lambda_inner = 1e-3;  // lambda inside the reward loss
    double lambda_r = 1.0;       // weight of the reward term in the total objective
    int samples_w = 6;           // samples drawn per update, <= k
    double keep_fraction = 0.5;
    int ddim_steps = 20;
    double margin = 0.0;
    int active_until_iter = 350;
    int period = 1;  // run every `period` iterations while active; 0 disables
};

class RewardOracle {
public:
    virtual ~RewardOracle() = default;
    // Higher is better. Deterministic.
    virtual double score(std::string_view condition, const RasterImage& image) const = 0;
};

// Desk-scale reward stand-ins.
class StubReward final : public RewardOracle {
public:
    // score = -MSE(image, reference); maximized exactly at the reference.
    static StubReward target_affinity(RasterImage reference);
    // score = mean over RGB channels of the per-channel std over pixels.
    static StubReward colorfulness();

    double score(std::string_view condition, const RasterImage& image) const override;

private:
    enum class Mode { TargetAffinity, Colorfulness };
    Mode mode_ = Mode::Colorfulness;
    RasterImage reference_;
};

enum class EstimatorKind {
    Desk,       // trainable gain+bias estimator (the LoRA role)
    EchoNoise,  // returns the injected noise: VPSD reduces to SDS
};

struct RunConfig {
    int k = 6;
    int total_iters = 700;
    double cfg_scale = 7.5;
    double t_min = 0.05;
    double t_max = 0.95;
    PrimitiveStyle style = PrimitiveStyle::Iconography;
    int n_paths = 16;
    int m_points = 0;  // 0 = style default (12 closed / 13 open)
    std::uint64_t seed = 0;
    int canvas_w = 224;
    int canvas_h = 224;
    std::string condition;
    bool w_t_sigma2 = false;  // w(t) = sigma_t^2 instead of the constant 1
    LrSchedule lr;
    AdamConfig adam;
    double estimator_lr = 1e-5;
    EstimatorKind estimator = EstimatorKind::Desk;
    ReinitPolicy reinit;
    ReFLConfig refl;
    RenderOptions render_opts;
    AugmentConfig augment;
    double init_radius_frac = 0.05;
    double init_stroke_width = 1.5;
    double seed_jitter = 1.0;     // px std-dev when cloning a SIVE scene into particles
    std::string out_dir;          // when set: checkpoints + report.txt
    int checkpoint_every = 100;
};

struct IterStat {
    int iter = 0;
    double vpsd_loss = 0.0;
    double lora_loss = 0.0;
    double reward_loss = 0.0;
    double mean_reward = 0.0;
    double lr = 0.0;
    int reinit_count = 0;

    double total_objective(double lambda_r) const {
        return vpsd_loss + lora_loss + lambda_r * reward_loss;
    }
};

struct RunReport {
    std::vector<IterStat> iters;

    std::string to_text() const;  // one line per iteration
};

double sample_timestep(Rng& rng, double t_min = 0.05, double t_max = 0.95);
int select_particle(Rng& rng, const ParticleSet& set);

// Deterministic (eta = 0) DDIM over a uniformly spaced decreasing t grid in
// [t_min, t_max], starting from z ~ N(0, I). Returns the final x-hat.
Grid ddim_sample(const ResidualEstimator& estimator, const NoiseSchedule& sched, int steps,
                 int width, int height, int channels, std::string_view condition, Rng& rng,
                 double t_min = 0.05, double t_max = 0.95);

struct ReflResult {
    double reward_loss = 0.0;
    double mean_reward = 0.0;       // over all drawn samples
    double mean_reward_kept = 0.0;  // over the kept fraction
    int n_kept = 0;
    bool skipped = false;
};

// Reward feedback: sample from the estimator via DDIM, score, keep the top
// keep_fraction, take one estimator fit step on the kept samples. The reward
// loss is lambda_inner * mean over kept of relu(margin - r).
ReflResult refl_update(ResidualEstimator& estimator, const RewardOracle& reward,
                       const ReFLConfig& cfg, std::string_view condition,
                       const NoiseSchedule& sched, const LatentCodec& codec, int width,
                       int height, Rng& rng, double estimator_lr);

// Replace paths whose fill opacity or area dropped below the policy floors
// with a fresh randomly placed shape appended at the top of the z-order.
// Only closed-fill styles participate; others are returned unchanged.
struct ReinitResult {
    Scene scene;
    int reinitialized = 0;
};
ReinitResult reinit_paths(const Scene& scene, const ReinitPolicy& policy,
                          const StyleConfig& style, const RasterImage* target, Rng& rng);

// Fresh random scene for a style: first points uniform on the canvas, the
// rest within the init radius; pixel-art and low-poly start from a grid of
// squares.
Scene random_scene(const RunConfig& cfg, const StyleConfig& style, Rng& rng);

struct VpsdOutcome {
    ParticleSet set;
    RunReport report;
};

// The full particle loop: per iteration pick one particle, step it along the
// VPSD gradient, fit the estimator on all particles' renders, run reward
// feedback while active, periodically reinitialize degenerate paths.
VpsdOutcome vpsd_run(const RunConfig& cfg, const ScoreOracle& oracle, const RewardOracle* reward,
                     ParticleSet init = {});

struct PipelineOutcome {
    SiveResult sive;
    VpsdOutcome vpsd;
};

// SIVE then VPSD: vectorize the target, clone the result into k jittered
// particles, refine with the particle loop.
PipelineOutcome sive_then_vpsd(const RasterImage& target, const std::vector<RegionSpec>& regions,
                               const SiveConfig& sive_cfg, const RunConfig& run_cfg,
                               const ScoreOracle& oracle, const RewardOracle* reward);

}  // namespace vectordream
