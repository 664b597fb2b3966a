#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vectordream/grid.hpp"
#include "vectordream/raster.hpp"
#include "vectordream/rng.hpp"

namespace vectordream {

// Variance-preserving scaled-linear schedule (the Stable Diffusion one):
// beta_i = (sqrt(b0) + i/(N-1) * (sqrt(b1) - sqrt(b0)))^2, alpha_t^2 = prod(1-beta).
// Continuous t in (0,1) interpolates log alpha-bar between the integer steps.
class NoiseSchedule {
public:
    static NoiseSchedule scaled_linear(double beta_start = 0.00085, double beta_end = 0.012,
                                       int train_steps = 1000);

    double alpha(double t) const;
    double sigma(double t) const;
    int train_steps() const { return static_cast<int>(log_alpha_bar_.size()); }

private:
    std::vector<double> log_alpha_bar_;
    double log_alpha_bar(double t) const;
};

std::pair<double, double> noise_coeffs(const NoiseSchedule& sched, double t);

// z_t = alpha_t x + sigma_t eps
Grid perturb(const Grid& x, const Grid& eps, double t, const NoiseSchedule& sched);

// eps_uncond + scale * (eps_cond - eps_uncond)
Grid cfg_combine(const Grid& eps_cond, const Grid& eps_uncond, double scale);

struct GuidanceConfig {
    double scale = 7.5;
    std::string uncond_condition;  // empty prompt
};

// Image <-> latent transport. The identity codec keeps RGB and drops alpha;
// a real VAE would plug in behind this interface.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual Grid encode(const RasterImage& img) const = 0;
    virtual RasterImage decode(const Grid& z) const = 0;
    // Pull a latent-space adjoint back to image space at encoding point x.
    virtual RasterImage encode_vjp(const RasterImage& x, const Grid& adj) const = 0;
    virtual int downsample_factor() const = 0;
};

class IdentityCodec final : public LatentCodec {
public:
    Grid encode(const RasterImage& img) const override;
    RasterImage decode(const Grid& z) const override;
    RasterImage encode_vjp(const RasterImage& x, const Grid& adj) const override;
    int downsample_factor() const override { return 1; }
};

// Noise predictor standing in for the pretrained diffusion model.
class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;
    virtual Grid predict(const Grid& z_t, double t, std::string_view condition) const = 0;
};

// Exact score of a point-mass data distribution at `target`:
// predict = (z_t - alpha_t target) / sigma_t.
class DeltaOracle final : public ScoreOracle {
public:
    DeltaOracle(Grid target, NoiseSchedule sched);
    Grid predict(const Grid& z_t, double t, std::string_view condition) const override;
    const Grid& target() const { return target_; }

private:
    Grid target_;
    NoiseSchedule sched_;
};

// Exact score of an isotropic Gaussian mixture with means `means` and
// common spread s. Multi-modal stand-in for the distribution of plausible
// images behind a prompt.
class GmmOracle final : public ScoreOracle {
public:
    GmmOracle(std::vector<Grid> means, std::vector<double> weights, double spread,
              NoiseSchedule sched);
    Grid predict(const Grid& z_t, double t, std::string_view condition) const override;
    std::vector<double> responsibilities(const Grid& z_t, double t) const;
    const std::vector<Grid>& means() const { return means_; }

private:
    std::vector<Grid> means_;
    std::vector<double> weights_;
    double spread_;
    NoiseSchedule sched_;
};

// Trainable noise predictor playing the LoRA role: fit on the particles'
// renders (squared error against the injected noise), queried inside the
// VPSD residual.
class ResidualEstimator {
public:
    virtual ~ResidualEstimator() = default;
    virtual Grid predict(const Grid& z_t, double t, std::string_view condition) const = 0;
    // One descent step toward target_eps; returns the pre-update loss.
    virtual double fit_step(const Grid& z_t, double t, std::string_view condition,
                            const Grid& target_eps, double lr) = 0;
};

// Smallest estimator that can track the particle population: a trainable
// scalar gain on z_t plus a per-condition bias grid, plain gradient descent.
class DeskEstimator final : public ResidualEstimator {
public:
    Grid predict(const Grid& z_t, double t, std::string_view condition) const override;
    double fit_step(const Grid& z_t, double t, std::string_view condition,
                    const Grid& target_eps, double lr) override;

private:
    struct State {
        double gain = 0.0;
        Grid bias;
    };
    std::map<std::string, State, std::less<>> states_;
};

// Test/baseline estimator that echoes a caller-provided noise grid. With the
// injected noise plugged in, the VPSD residual reduces to the SDS one.
class EchoNoiseEstimator final : public ResidualEstimator {
public:
    void set_noise(Grid eps) { noise_ = std::move(eps); }
    Grid predict(const Grid& z_t, double t, std::string_view condition) const override;
    double fit_step(const Grid& z_t, double t, std::string_view condition,
                    const Grid& target_eps, double lr) override;

private:
    Grid noise_;
};

// Optional augmentation of the render before encoding (off by default).
struct AugmentConfig {
    bool crop_resize = false;
    double min_scale = 0.7;
    double max_scale = 1.0;
};

// Codec decorator implementing the random crop-and-resize augmentation.
// encode() draws a fresh crop; encode_vjp() pulls back through the crop drawn
// by the most recent encode, so one gradient evaluation sees one augmentation.
// Not safe for concurrent use.
class AugmentingCodec final : public LatentCodec {
public:
    AugmentingCodec(const LatentCodec& inner, AugmentConfig cfg, Rng& rng)
        : inner_(inner), cfg_(cfg), rng_(rng) {}

    Grid encode(const RasterImage& img) const override;
    RasterImage decode(const Grid& z) const override { return inner_.decode(z); }
    RasterImage encode_vjp(const RasterImage& x, const Grid& adj) const override;
    int downsample_factor() const override { return inner_.downsample_factor(); }

private:
    const LatentCodec& inner_;
    AugmentConfig cfg_;
    Rng& rng_;
    mutable double ox_ = 0.0, oy_ = 0.0, scale_ = 1.0;
    mutable bool has_crop_ = false;
};

// Gradient assemblies. Both render the scene, encode, perturb with the given
// (t, eps) sample, and pull w_t * residual back through codec and rasterizer.
// The residual is cfg(eps_phi) - eps for SDS and cfg(eps_phi) - eps_est for
// VPSD. `surrogate` (optional out) receives w_t * mean(residual * z), the
// scalar whose single-sample gradient the returned vector is.
ParamGradient sds_grad(const Scene& scene, const StyleConfig& style, const LatentCodec& codec,
                       const ScoreOracle& oracle, const GuidanceConfig& guidance,
                       std::string_view condition, const NoiseSchedule& sched, double t,
                       const Grid& eps, double w_t, const RenderOptions& opts,
                       double* surrogate = nullptr);

ParamGradient vpsd_grad(const Scene& scene, const StyleConfig& style, const LatentCodec& codec,
                        const ScoreOracle& oracle, const ResidualEstimator& estimator,
                        const GuidanceConfig& guidance, std::string_view condition,
                        const NoiseSchedule& sched, double t, const Grid& eps, double w_t,
                        const RenderOptions& opts, double* surrogate = nullptr);

// One pass of estimator training on a batch of clean latents: per item draw
// t ~ U(0.05,0.95) and eps ~ N(0,I), perturb, descend on the squared error.
// Returns the mean pre-update loss.
double estimator_fit_step(ResidualEstimator& estimator, const std::vector<Grid>& latents,
                          std::string_view condition, const NoiseSchedule& sched, Rng& rng,
                          double lr);

}  // namespace vectordream
