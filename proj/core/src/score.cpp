#include "vectordream/score.hpp"

#include <algorithm>
#include <cmath>

namespace vectordream {

NoiseSchedule NoiseSchedule::scaled_linear(double beta_start, double beta_end, int train_steps) {
    if (train_steps < 2 || !(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
        throw ContractError("NoiseSchedule: bad scaled-linear parameters");
    NoiseSchedule s;
    s.log_alpha_bar_.resize(train_steps);
    double sqrt0 = std::sqrt(beta_start);
    double sqrt1 = std::sqrt(beta_end);
    double acc = 0.0;
    for (int i = 0; i < train_steps; ++i) {
        double sq = sqrt0 + (sqrt1 - sqrt0) * static_cast<double>(i) / (train_steps - 1);
        acc += std::log1p(-sq * sq);
        s.log_alpha_bar_[i] = acc;
    }
    return s;
}

double NoiseSchedule::log_alpha_bar(double t) const {
    if (!(t > 0.0 && t < 1.0)) throw ContractError("NoiseSchedule: t outside (0,1)");
    double u = t * (log_alpha_bar_.size() - 1);
    auto lo = static_cast<std::size_t>(u);
    if (lo + 1 >= log_alpha_bar_.size()) return log_alpha_bar_.back();
    double f = u - static_cast<double>(lo);
    return log_alpha_bar_[lo] * (1.0 - f) + log_alpha_bar_[lo + 1] * f;
}

double NoiseSchedule::alpha(double t) const { return std::exp(0.5 * log_alpha_bar(t)); }

double NoiseSchedule::sigma(double t) const {
    double a = alpha(t);
    return std::sqrt(std::max(0.0, 1.0 - a * a));
}

std::pair<double, double> noise_coeffs(const NoiseSchedule& sched, double t) {
    return {sched.alpha(t), sched.sigma(t)};
}

Grid perturb(const Grid& x, const Grid& eps, double t, const NoiseSchedule& sched) {
    require_same_shape(x, eps, "perturb");
    auto [a, s] = noise_coeffs(sched, t);
    Grid z = x;
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] = a * x.v[i] + s * eps.v[i];
    return z;
}

Grid cfg_combine(const Grid& eps_cond, const Grid& eps_uncond, double scale) {
    require_same_shape(eps_cond, eps_uncond, "cfg_combine");
    Grid out = eps_uncond;
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = eps_uncond.v[i] + scale * (eps_cond.v[i] - eps_uncond.v[i]);
    return out;
}

Grid IdentityCodec::encode(const RasterImage& img) const {
    Grid z(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) z.at(x, y, c) = img.at(x, y, c);
    return z;
}

RasterImage IdentityCodec::decode(const Grid& z) const {
    if (z.channels != 3) throw ContractError("IdentityCodec: latent must have 3 channels");
    RasterImage img(z.width, z.height);
    auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    for (int y = 0; y < z.height; ++y)
        for (int x = 0; x < z.width; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = clamp01(z.at(x, y, c));
            img.at(x, y, 3) = 1.0;
        }
    return img;
}

RasterImage IdentityCodec::encode_vjp(const RasterImage& x, const Grid& adj) const {
    if (adj.width != x.width || adj.height != x.height || adj.channels != 3)
        throw ContractError("IdentityCodec: adjoint shape mismatch");
    RasterImage out(x.width, x.height);  // alpha adjoint stays zero
    for (int y = 0; y < x.height; ++y)
        for (int px = 0; px < x.width; ++px)
            for (int c = 0; c < 3; ++c) out.at(px, y, c) = adj.at(px, y, c);
    return out;
}

DeltaOracle::DeltaOracle(Grid target, NoiseSchedule sched)
    : target_(std::move(target)), sched_(std::move(sched)) {}

Grid DeltaOracle::predict(const Grid& z_t, double t, std::string_view) const {
    require_same_shape(z_t, target_, "DeltaOracle::predict");
    auto [a, s] = noise_coeffs(sched_, t);
    Grid out = z_t;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = (z_t.v[i] - a * target_.v[i]) / s;
    return out;
}

GmmOracle::GmmOracle(std::vector<Grid> means, std::vector<double> weights, double spread,
                     NoiseSchedule sched)
    : means_(std::move(means)), weights_(std::move(weights)), spread_(spread),
      sched_(std::move(sched)) {
    if (means_.empty() || means_.size() != weights_.size())
        throw ContractError("GmmOracle: means/weights size mismatch");
    if (!(spread_ > 0.0)) throw ContractError("GmmOracle: spread must be positive");
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0)) throw ContractError("GmmOracle: weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("GmmOracle: weights must sum to 1");
    for (std::size_t i = 1; i < means_.size(); ++i)
        require_same_shape(means_[0], means_[i], "GmmOracle");
}

std::vector<double> GmmOracle::responsibilities(const Grid& z_t, double t) const {
    require_same_shape(z_t, means_[0], "GmmOracle::responsibilities");
    auto [a, s] = noise_coeffs(sched_, t);
    double var = s * s + a * a * spread_ * spread_;
    std::vector<double> logits(means_.size());
    for (std::size_t k = 0; k < means_.size(); ++k) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < z_t.v.size(); ++i) {
            double d = z_t.v[i] - a * means_[k].v[i];
            d2 += d * d;
        }
        logits[k] = std::log(weights_[k]) - d2 / (2.0 * var);
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        denom += l;
    }
    for (double& l : logits) l /= denom;
    return logits;
}

Grid GmmOracle::predict(const Grid& z_t, double t, std::string_view) const {
    auto gamma = responsibilities(z_t, t);
    auto [a, s] = noise_coeffs(sched_, t);
    Grid out = z_t;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        double xbar = 0.0;
        for (std::size_t k = 0; k < means_.size(); ++k) xbar += gamma[k] * means_[k].v[i];
        out.v[i] = (z_t.v[i] - a * xbar) / s;
    }
    return out;
}

Grid DeskEstimator::predict(const Grid& z_t, double, std::string_view condition) const {
    Grid out = z_t;
    auto it = states_.find(condition);
    if (it == states_.end()) {
        for (double& v : out.v) v = 0.0;
        return out;
    }
    const State& st = it->second;
    bool has_bias = st.bias.same_shape(z_t);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = st.gain * z_t.v[i] + (has_bias ? st.bias.v[i] : 0.0);
    return out;
}

double DeskEstimator::fit_step(const Grid& z_t, double, std::string_view condition,
                               const Grid& target_eps, double lr) {
    require_same_shape(z_t, target_eps, "DeskEstimator::fit_step");
    auto it = states_.find(condition);
    if (it == states_.end())
        it = states_.emplace(std::string(condition), State{}).first;
    State& st = it->second;
    if (!st.bias.same_shape(z_t)) st.bias = Grid(z_t.width, z_t.height, z_t.channels);

    // Per-element residual step for the bias (its curvature does not depend
    // on the grid size that way), grid-averaged step for the scalar gain.
    double n = static_cast<double>(z_t.v.size());
    double loss = 0.0;
    double d_gain = 0.0;
    for (std::size_t i = 0; i < z_t.v.size(); ++i) {
        double pred = st.gain * z_t.v[i] + st.bias.v[i];
        double r = pred - target_eps.v[i];
        loss += r * r;
        st.bias.v[i] -= lr * 2.0 * r;
        d_gain += 2.0 * r * z_t.v[i];
    }
    st.gain -= lr * d_gain / n;
    return loss / n;
}

Grid EchoNoiseEstimator::predict(const Grid& z_t, double, std::string_view) const {
    require_same_shape(z_t, noise_, "EchoNoiseEstimator::predict");
    return noise_;
}

double EchoNoiseEstimator::fit_step(const Grid& z_t, double, std::string_view,
                                    const Grid& target_eps, double) {
    require_same_shape(z_t, target_eps, "EchoNoiseEstimator::fit_step");
    double loss = 0.0;
    for (std::size_t i = 0; i < noise_.v.size(); ++i) {
        double r = noise_.v[i] - target_eps.v[i];
        loss += r * r;
    }
    return loss / static_cast<double>(noise_.v.size());
}

namespace {

struct BilinearTap {
    int x0, y0, x1, y1;
    double w00, w01, w10, w11;
};

BilinearTap tap_at(double sx, double sy, int w, int h) {
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    BilinearTap t;
    t.x0 = static_cast<int>(sx);
    t.y0 = static_cast<int>(sy);
    t.x1 = std::min(t.x0 + 1, w - 1);
    t.y1 = std::min(t.y0 + 1, h - 1);
    double fx = sx - t.x0;
    double fy = sy - t.y0;
    t.w00 = (1.0 - fx) * (1.0 - fy);
    t.w10 = fx * (1.0 - fy);
    t.w01 = (1.0 - fx) * fy;
    t.w11 = fx * fy;
    return t;
}

}  // namespace

Grid AugmentingCodec::encode(const RasterImage& img) const {
    if (!cfg_.crop_resize) return inner_.encode(img);
    scale_ = rng_.uniform(cfg_.min_scale, cfg_.max_scale);
    ox_ = rng_.uniform(0.0, img.width * (1.0 - scale_));
    oy_ = rng_.uniform(0.0, img.height * (1.0 - scale_));
    has_crop_ = true;

    RasterImage out(img.width, img.height);
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
            double sx = ox_ + (u + 0.5) * scale_ - 0.5;
            double sy = oy_ + (v + 0.5) * scale_ - 0.5;
            BilinearTap t = tap_at(sx, sy, img.width, img.height);
            for (int c = 0; c < 4; ++c)
                out.at(u, v, c) = t.w00 * img.at(t.x0, t.y0, c) + t.w10 * img.at(t.x1, t.y0, c) +
                                  t.w01 * img.at(t.x0, t.y1, c) + t.w11 * img.at(t.x1, t.y1, c);
        }
    return inner_.encode(out);
}

RasterImage AugmentingCodec::encode_vjp(const RasterImage& x, const Grid& adj) const {
    if (!cfg_.crop_resize) return inner_.encode_vjp(x, adj);
    if (!has_crop_) throw ContractError("AugmentingCodec: encode_vjp before encode");
    // Rebuild the augmented image so the inner codec differentiates at the
    // point it actually encoded.
    RasterImage x_aug(x.width, x.height);
    for (int v = 0; v < x.height; ++v)
        for (int u = 0; u < x.width; ++u) {
            double sx = ox_ + (u + 0.5) * scale_ - 0.5;
            double sy = oy_ + (v + 0.5) * scale_ - 0.5;
            BilinearTap t = tap_at(sx, sy, x.width, x.height);
            for (int c = 0; c < 4; ++c)
                x_aug.at(u, v, c) = t.w00 * x.at(t.x0, t.y0, c) + t.w10 * x.at(t.x1, t.y0, c) +
                                    t.w01 * x.at(t.x0, t.y1, c) + t.w11 * x.at(t.x1, t.y1, c);
        }
    RasterImage adj_aug = inner_.encode_vjp(x_aug, adj);
    RasterImage out(x.width, x.height);
    for (int v = 0; v < x.height; ++v)
        for (int u = 0; u < x.width; ++u) {
            double sx = ox_ + (u + 0.5) * scale_ - 0.5;
            double sy = oy_ + (v + 0.5) * scale_ - 0.5;
            BilinearTap t = tap_at(sx, sy, x.width, x.height);
            for (int c = 0; c < 4; ++c) {
                double a = adj_aug.at(u, v, c);
                out.at(t.x0, t.y0, c) += t.w00 * a;
                out.at(t.x1, t.y0, c) += t.w10 * a;
                out.at(t.x0, t.y1, c) += t.w01 * a;
                out.at(t.x1, t.y1, c) += t.w11 * a;
            }
        }
    return out;
}

namespace {

ParamGradient score_grad(const Scene& scene, const StyleConfig& style, const LatentCodec& codec,
                         const ScoreOracle& oracle, const ResidualEstimator* estimator,
                         const GuidanceConfig& guidance, std::string_view condition,
                         const NoiseSchedule& sched, double t, const Grid& eps, double w_t,
                         const RenderOptions& opts, double* surrogate) {
    if (!(t > 0.0 && t < 1.0)) throw ContractError("score gradient: t outside (0,1)");
    if (!(guidance.scale >= 0.0)) throw ContractError("score gradient: negative CFG scale");

    RasterImage x = render(scene, opts);
    Grid z = codec.encode(x);
    require_same_shape(z, eps, "score gradient: eps");
    Grid z_t = perturb(z, eps, t, sched);

    Grid eps_cond = oracle.predict(z_t, t, condition);
    Grid eps_uncond = oracle.predict(z_t, t, guidance.uncond_condition);
    Grid guided = cfg_combine(eps_cond, eps_uncond, guidance.scale);

    const Grid& ref = estimator ? estimator->predict(z_t, t, condition) : eps;
    Grid residual = guided;  // w_t * (guided - ref), used as the adjoint on z
    double dot_rz = 0.0;
    for (std::size_t i = 0; i < residual.v.size(); ++i) {
        residual.v[i] = w_t * (guided.v[i] - ref.v[i]);
        dot_rz += residual.v[i] * z.v[i];
    }
    if (surrogate) *surrogate = dot_rz / static_cast<double>(residual.v.size());

    RasterImage adj = codec.encode_vjp(x, residual);
    return render_vjp(scene, opts, adj, style);
}

}  // namespace

ParamGradient sds_grad(const Scene& scene, const StyleConfig& style, const LatentCodec& codec,
                       const ScoreOracle& oracle, const GuidanceConfig& guidance,
                       std::string_view condition, const NoiseSchedule& sched, double t,
                       const Grid& eps, double w_t, const RenderOptions& opts,
                       double* surrogate) {
    return score_grad(scene, style, codec, oracle, nullptr, guidance, condition, sched, t, eps,
                      w_t, opts, surrogate);
}

ParamGradient vpsd_grad(const Scene& scene, const StyleConfig& style, const LatentCodec& codec,
                        const ScoreOracle& oracle, const ResidualEstimator& estimator,
                        const GuidanceConfig& guidance, std::string_view condition,
                        const NoiseSchedule& sched, double t, const Grid& eps, double w_t,
                        const RenderOptions& opts, double* surrogate) {
    return score_grad(scene, style, codec, oracle, &estimator, guidance, condition, sched, t, eps,
                      w_t, opts, surrogate);
}

double estimator_fit_step(ResidualEstimator& estimator, const std::vector<Grid>& latents,
                          std::string_view condition, const NoiseSchedule& sched, Rng& rng,
                          double lr) {
    if (latents.empty()) throw ContractError("estimator_fit_step: empty batch");
    double total = 0.0;
    for (const Grid& z : latents) {
        double t = rng.uniform(0.05, 0.95);
        Grid eps = gaussian_grid(z.width, z.height, z.channels, rng);
        Grid z_t = perturb(z, eps, t, sched);
        total += estimator.fit_step(z_t, t, condition, eps, lr);
    }
    return total / static_cast<double>(latents.size());
}

}  // namespace vectordream
