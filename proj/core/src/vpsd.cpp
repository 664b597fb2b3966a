#include "vectordream/vpsd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "vectordream/svg.hpp"

namespace vectordream {

StubReward StubReward::target_affinity(RasterImage reference) {
    StubReward r;
    r.mode_ = Mode::TargetAffinity;
    r.reference_ = std::move(reference);
    return r;
}

StubReward StubReward::colorfulness() {
    StubReward r;
    r.mode_ = Mode::Colorfulness;
    return r;
}

double StubReward::score(std::string_view, const RasterImage& image) const {
    if (mode_ == Mode::TargetAffinity) {
        if (!image.same_dims(reference_))
            throw ContractError("StubReward: image dimensions do not match the reference");
        double mse = 0.0;
        std::size_t n = 0;
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    double d = image.at(x, y, c) - reference_.at(x, y, c);
                    mse += d * d;
                    ++n;
                }
        return -mse / static_cast<double>(n);
    }
    // colorfulness: mean per-channel std over pixels
    double total = 0.0;
    std::size_t n = static_cast<std::size_t>(image.width) * image.height;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, sq = 0.0;
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) {
                double v = image.at(x, y, c);
                mean += v;
                sq += v * v;
            }
        mean /= static_cast<double>(n);
        double var = sq / static_cast<double>(n) - mean * mean;
        total += std::sqrt(std::max(0.0, var));
    }
    return total / 3.0;
}

double sample_timestep(Rng& rng, double t_min, double t_max) {
    if (!(t_min > 0.0 && t_max < 1.0 && t_min < t_max))
        throw ContractError("sample_timestep: bad range");
    return rng.uniform(t_min, t_max);
}

int select_particle(Rng& rng, const ParticleSet& set) {
    if (set.particles.empty()) throw ContractError("select_particle: empty particle set");
    return rng.uniform_int(set.k());
}

Grid ddim_sample(const ResidualEstimator& estimator, const NoiseSchedule& sched, int steps,
                 int width, int height, int channels, std::string_view condition, Rng& rng,
                 double t_min, double t_max) {
    if (steps < 1) throw ContractError("ddim_sample: steps must be >= 1");
    Grid z = gaussian_grid(width, height, channels, rng);
    Grid xhat(width, height, channels);
    for (int i = 0; i < steps; ++i) {
        double t = steps == 1 ? t_max
                              : t_max - (t_max - t_min) * static_cast<double>(i) / (steps - 1);
        auto [a, s] = noise_coeffs(sched, t);
        Grid eps = estimator.predict(z, t, condition);
        // Clip the denoised prediction to the data range; keeps the sampler
        // stable when the estimator is far from trained.
        for (std::size_t j = 0; j < z.v.size(); ++j) {
            double x = (z.v[j] - s * eps.v[j]) / a;
            xhat.v[j] = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
        }
        if (i + 1 == steps) break;
        double t_next = t_max - (t_max - t_min) * static_cast<double>(i + 1) / (steps - 1);
        auto [an, sn] = noise_coeffs(sched, t_next);
        for (std::size_t j = 0; j < z.v.size(); ++j) z.v[j] = an * xhat.v[j] + sn * eps.v[j];
    }
    return xhat;
}

ReflResult refl_update(ResidualEstimator& estimator, const RewardOracle& reward,
                       const ReFLConfig& cfg, std::string_view condition,
                       const NoiseSchedule& sched, const LatentCodec& codec, int width,
                       int height, Rng& rng, double estimator_lr) {
    if (!(cfg.keep_fraction > 0.0 && cfg.keep_fraction <= 1.0) || cfg.samples_w < 1)
        throw ContractError("refl_update: bad config");

    ReflResult out;
    std::vector<Grid> samples;
    std::vector<double> rewards;
    samples.reserve(cfg.samples_w);
    for (int i = 0; i < cfg.samples_w; ++i) {
        Grid xhat = ddim_sample(estimator, sched, cfg.ddim_steps, width, height, 3, condition,
                                rng);
        try {
            rewards.push_back(reward.score(condition, codec.decode(xhat)));
        } catch (const Error&) {
            out.skipped = true;
            return out;
        }
        samples.push_back(std::move(xhat));
    }

    out.mean_reward =
        std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());

    // Keep the top fraction by reward.
    int n_keep = std::clamp(static_cast<int>(std::lround(cfg.keep_fraction * cfg.samples_w)), 1,
                            cfg.samples_w);
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rewards[a] > rewards[b]; });
    out.n_kept = n_keep;

    double kept_sum = 0.0, loss_sum = 0.0;
    std::vector<Grid> kept;
    for (int i = 0; i < n_keep; ++i) {
        kept_sum += rewards[order[i]];
        loss_sum += std::max(0.0, cfg.margin - rewards[order[i]]);
        kept.push_back(std::move(samples[order[i]]));
    }
    out.mean_reward_kept = kept_sum / n_keep;
    out.reward_loss = cfg.lambda_inner * loss_sum / n_keep;

    // One squared-error fit pass restricted to the kept samples.
    estimator_fit_step(estimator, kept, condition, sched, rng, estimator_lr);
    return out;
}

namespace {

constexpr double kCircleHandle = 0.5522847498307936;  // 4/3 * tan(pi/8)

Path circle_path(const ControlPoint& center, double radius) {
    Path p;
    p.closed = true;
    p.points.resize(12);
    const double c = kCircleHandle * radius;
    auto pt = [&](double dx, double dy) { return ControlPoint{center.x + dx, center.y + dy}; };
    // anchor, out-handle, in-handle-of-next per quadrant
    p.points[0] = pt(radius, 0);
    p.points[1] = pt(radius, c);
    p.points[2] = pt(c, radius);
    p.points[3] = pt(0, radius);
    p.points[4] = pt(-c, radius);
    p.points[5] = pt(-radius, c);
    p.points[6] = pt(-radius, 0);
    p.points[7] = pt(-radius, -c);
    p.points[8] = pt(-c, -radius);
    p.points[9] = pt(0, -radius);
    p.points[10] = pt(c, -radius);
    p.points[11] = pt(radius, -c);
    return p;
}

Path square_path(const ControlPoint& center, double radius) {
    // Same area as the circle it replaces.
    double half = 0.5 * radius * std::sqrt(kPi);
    Path p;
    p.closed = true;
    std::vector<ControlPoint> corners = {{center.x - half, center.y - half},
                                         {center.x + half, center.y - half},
                                         {center.x + half, center.y + half},
                                         {center.x - half, center.y + half}};
    set_polygon_corners(p, corners);
    return p;
}

ColorRGBA random_opaque(const RasterImage* target, const ControlPoint& at, Rng& rng) {
    if (target) {
        int x = std::clamp(static_cast<int>(at.x), 0, target->width - 1);
        int y = std::clamp(static_cast<int>(at.y), 0, target->height - 1);
        ColorRGBA c = target->pixel(x, y);
        c.a = 1.0;
        return c;
    }
    return {rng.uniform(), rng.uniform(), rng.uniform(), 1.0};
}

}  // namespace

ReinitResult reinit_paths(const Scene& scene, const ReinitPolicy& policy,
                          const StyleConfig& style, const RasterImage* target, Rng& rng) {
    ReinitResult out;
    out.scene = scene;
    bool closed_fill = style.shape == ShapeConstraint::ClosedCubic ||
                       style.shape == ShapeConstraint::AxisAlignedSquare ||
                       style.shape == ShapeConstraint::Polygon;
    if (!closed_fill) return out;

    double area_floor = policy.area_floor_frac * scene.canvas_w * scene.canvas_h;
    std::vector<Path> kept;
    std::vector<std::string> replaced_tags;
    kept.reserve(scene.paths.size());
    for (const Path& p : scene.paths) {
        bool weak = false;
        if (p.fill && p.fill->a < policy.opacity_floor) weak = true;
        if (!weak && p.closed && std::abs(path_signed_area(p, 0.01)) < area_floor) weak = true;
        if (weak)
            replaced_tags.push_back(p.region_tag);
        else
            kept.push_back(p);
    }
    out.reinitialized = static_cast<int>(replaced_tags.size());

    double unit = std::min(scene.canvas_w, scene.canvas_h);
    for (const std::string& tag : replaced_tags) {
        ControlPoint center{rng.uniform(0.0, scene.canvas_w), rng.uniform(0.0, scene.canvas_h)};
        double radius = unit * rng.uniform(policy.radius_min_frac, policy.radius_max_frac);
        Path fresh = style.shape == ShapeConstraint::ClosedCubic ? circle_path(center, radius)
                                                                 : square_path(center, radius);
        fresh.fill = random_opaque(target, center, rng);
        fresh.region_tag = tag;
        kept.push_back(std::move(fresh));
    }
    out.scene.paths = std::move(kept);
    return out;
}

Scene random_scene(const RunConfig& cfg, const StyleConfig& style, Rng& rng) {
    Scene scene;
    scene.canvas_w = cfg.canvas_w;
    scene.canvas_h = cfg.canvas_h;

    bool grid_style = style.shape == ShapeConstraint::AxisAlignedSquare ||
                      style.shape == ShapeConstraint::Polygon;
    if (grid_style) {
        int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_paths))));
        double cell_w = static_cast<double>(cfg.canvas_w) / side;
        double cell_h = static_cast<double>(cfg.canvas_h) / side;
        double size = std::min(cell_w, cell_h);
        for (int i = 0; i < cfg.n_paths; ++i) {
            int gx = i % side;
            int gy = i / side;
            double x0 = gx * cell_w + 0.5 * (cell_w - size);
            double y0 = gy * cell_h + 0.5 * (cell_h - size);
            Path p;
            p.closed = true;
            set_polygon_corners(p, {{x0, y0}, {x0 + size, y0}, {x0 + size, y0 + size},
                                    {x0, y0 + size}});
            p.fill = ColorRGBA{rng.uniform(), rng.uniform(), rng.uniform(), 1.0};
            scene.paths.push_back(std::move(p));
        }
        return scene;
    }

    bool closed = style.shape == ShapeConstraint::ClosedCubic;
    int m = cfg.m_points > 0 ? cfg.m_points : (closed ? 12 : 13);
    double radius = cfg.init_radius_frac * std::min(cfg.canvas_w, cfg.canvas_h);
    for (int i = 0; i < cfg.n_paths; ++i) {
        Path p;
        p.closed = closed;
        p.points.resize(m);
        ControlPoint first{rng.uniform(0.0, cfg.canvas_w), rng.uniform(0.0, cfg.canvas_h)};
        p.points[0] = first;
        for (int j = 1; j < m; ++j) {
            double r = radius * std::sqrt(rng.uniform());
            double theta = 2.0 * kPi * rng.uniform();
            p.points[j] = {first.x + r * std::cos(theta), first.y + r * std::sin(theta)};
        }
        if (closed) {
            p.fill = ColorRGBA{rng.uniform(), rng.uniform(), rng.uniform(), 1.0};
        } else {
            StrokeStyle st;
            bool black = style.style == PrimitiveStyle::Sketch ||
                         style.style == PrimitiveStyle::InkWash;
            st.color = black ? ColorRGBA{0, 0, 0, 1}
                             : ColorRGBA{rng.uniform(), rng.uniform(), rng.uniform(), 1.0};
            st.width = cfg.init_stroke_width;
            p.stroke = st;
        }
        scene.paths.push_back(std::move(p));
    }
    return scene;
}

std::string RunReport::to_text() const {
    std::string out;
    char line[256];
    for (const IterStat& s : iters) {
        std::snprintf(line, sizeof line, "%d %.9e %.9e %.9e %.9e %.9e %d\n", s.iter, s.vpsd_loss,
                      s.lora_loss, s.reward_loss, s.mean_reward, s.lr, s.reinit_count);
        out += line;
    }
    return out;
}

namespace {

void write_checkpoints(const RunConfig& cfg, const ParticleSet& set, int iter) {
    namespace fs = std::filesystem;
    for (const Particle& p : set.particles) {
        fs::path dir = fs::path(cfg.out_dir) / ("particle_" + std::to_string(p.id));
        fs::create_directories(dir);
        std::ofstream f(dir / ("iter_" + std::to_string(iter) + ".svg"), std::ios::binary);
        f << write_svg(scene_to_doc(p.scene));
    }
}

void check_finite(const ParamGradient& g, int iter) {
    for (double v : g.values)
        if (!std::isfinite(v))
            throw NumericalError("vpsd_run: non-finite gradient at iteration " +
                                 std::to_string(iter));
}

}  // namespace

VpsdOutcome vpsd_run(const RunConfig& cfg, const ScoreOracle& oracle, const RewardOracle* reward,
                     ParticleSet init) {
    if (cfg.k < 1 || cfg.total_iters < 0 || !(cfg.cfg_scale >= 0.0))
        throw ContractError("vpsd_run: bad config");
    StyleConfig style = StyleConfig::make(cfg.style);
    NoiseSchedule sched = NoiseSchedule::scaled_linear();
    IdentityCodec identity;
    Rng master(cfg.seed);
    Rng loop_rng = master.split(1);

    VpsdOutcome out;
    if (init.particles.empty()) {
        for (int i = 0; i < cfg.k; ++i) {
            Rng init_rng = master.split(1000 + static_cast<std::uint64_t>(i));
            Particle p;
            p.id = i;
            p.scene = random_scene(cfg, style, init_rng);
            out.set.particles.push_back(std::move(p));
        }
    } else {
        out.set = std::move(init);
    }
    for (Particle& p : out.set.particles) {
        auto issues = validate_scene(p.scene, style);
        if (!issues.empty())
            throw ContractError("vpsd_run: invalid particle scene: " + issues.front());
    }

    DeskEstimator desk;
    EchoNoiseEstimator echo;
    bool use_echo = cfg.estimator == EstimatorKind::EchoNoise;
    ResidualEstimator& estimator = use_echo ? static_cast<ResidualEstimator&>(echo)
                                            : static_cast<ResidualEstimator&>(desk);

    AugmentingCodec augmented(identity, cfg.augment, loop_rng);
    const LatentCodec& codec =
        cfg.augment.crop_resize ? static_cast<const LatentCodec&>(augmented)
                                : static_cast<const LatentCodec&>(identity);

    GuidanceConfig guidance;
    guidance.scale = cfg.cfg_scale;

    for (int iter = 0; iter < cfg.total_iters; ++iter) {
        IterStat stat;
        stat.iter = iter;

        int idx = select_particle(loop_rng, out.set);
        Particle& particle = out.set.particles[idx];

        double t = sample_timestep(loop_rng, cfg.t_min, cfg.t_max);
        Grid eps = gaussian_grid(cfg.canvas_w, cfg.canvas_h, 3, loop_rng);
        if (use_echo) echo.set_noise(eps);
        double w_t = cfg.w_t_sigma2 ? sched.sigma(t) * sched.sigma(t) : 1.0;

        ParamGradient grad =
            vpsd_grad(particle.scene, style, codec, oracle, estimator, guidance, cfg.condition,
                      sched, t, eps, w_t, cfg.render_opts, &stat.vpsd_loss);
        check_finite(grad, iter);

        ParamVector params = pack_params(particle.scene, style);
        if (particle.adam.m.size() != params.values.size())
            particle.adam.resize(params.values.size());
        ++particle.adam.step;
        for (const ParamSlice& s : params.layout.slices)
            adam_step_slice(params.values, grad.values, particle.adam, cfg.adam,
                            family_lr(cfg.lr, s.family, iter), s.offset, s.count);
        particle.scene = unpack_params(params, particle.scene, style);
        stat.lr = family_lr(cfg.lr, ParamFamily::Points, iter);

        // Estimator training batch: renders of all particles (Eq. 5).
        std::vector<Grid> latents;
        latents.reserve(out.set.particles.size());
        for (const Particle& p : out.set.particles)
            latents.push_back(identity.encode(render(p.scene, cfg.render_opts)));
        stat.lora_loss =
            estimator_fit_step(estimator, latents, cfg.condition, sched, loop_rng,
                               cfg.estimator_lr);

        // Reward feedback on the estimator during the early stage.
        if (reward && !use_echo && cfg.refl.period > 0 && iter < cfg.refl.active_until_iter &&
            iter % cfg.refl.period == 0) {
            ReflResult r = refl_update(estimator, *reward, cfg.refl, cfg.condition, sched,
                                       identity, cfg.canvas_w, cfg.canvas_h, loop_rng,
                                       cfg.estimator_lr);
            stat.reward_loss = r.reward_loss;
            stat.mean_reward = r.mean_reward;
        }

        if (cfg.reinit.period > 0 && (iter + 1) % cfg.reinit.period == 0) {
            for (Particle& p : out.set.particles) {
                ReinitResult r = reinit_paths(p.scene, cfg.reinit, style, nullptr, loop_rng);
                if (r.reinitialized > 0) {
                    p.scene = std::move(r.scene);
                    p.adam.resize(pack_params(p.scene, style).values.size());
                    stat.reinit_count += r.reinitialized;
                }
            }
        }

        out.report.iters.push_back(stat);
        if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
            (iter + 1) % cfg.checkpoint_every == 0)
            write_checkpoints(cfg, out.set, iter + 1);
    }

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        std::ofstream f(fs::path(cfg.out_dir) / "report.txt", std::ios::binary);
        f << out.report.to_text();
    }
    return out;
}

PipelineOutcome sive_then_vpsd(const RasterImage& target, const std::vector<RegionSpec>& regions,
                               const SiveConfig& sive_cfg, const RunConfig& run_cfg,
                               const ScoreOracle& oracle, const RewardOracle* reward) {
    PipelineOutcome out;
    out.sive = sive_optimize(target, regions, StyleConfig::make(run_cfg.style), sive_cfg);

    RunConfig cfg = run_cfg;
    cfg.canvas_w = out.sive.scene.canvas_w;
    cfg.canvas_h = out.sive.scene.canvas_h;

    Rng master(cfg.seed);
    StyleConfig style = StyleConfig::make(cfg.style);
    ParticleSet set;
    for (int i = 0; i < cfg.k; ++i) {
        Rng jitter_rng = master.split(2000 + static_cast<std::uint64_t>(i));
        Particle p;
        p.id = i;
        p.scene = out.sive.scene;
        // Identical particles would collapse the distribution estimate.
        if (cfg.seed_jitter > 0.0 && style.train_points) {
            for (Path& path : p.scene.paths) {
                if (style.shape == ShapeConstraint::Polygon) {
                    auto corners = polygon_corners(path);
                    for (ControlPoint& pt : corners) {
                        pt.x += cfg.seed_jitter * jitter_rng.normal();
                        pt.y += cfg.seed_jitter * jitter_rng.normal();
                    }
                    set_polygon_corners(path, corners);
                } else {
                    for (ControlPoint& pt : path.points) {
                        pt.x += cfg.seed_jitter * jitter_rng.normal();
                        pt.y += cfg.seed_jitter * jitter_rng.normal();
                    }
                }
            }
        }
        set.particles.push_back(std::move(p));
    }
    out.vpsd = vpsd_run(cfg, oracle, reward, std::move(set));
    return out;
}

}  // namespace vectordream
