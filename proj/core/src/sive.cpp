#include "vectordream/sive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace vectordream {

AttentionMap background_map(const std::vector<AttentionMap>& fg_maps) {
    if (fg_maps.empty()) throw ContractError("background_map: no foreground maps");
    for (const AttentionMap& m : fg_maps)
        require_same_shape(fg_maps[0].values, m.values, "background_map");
    AttentionMap bg;
    bg.token_label = "background";
    bg.values = Grid(fg_maps[0].values.width, fg_maps[0].values.height, 1);
    for (std::size_t i = 0; i < bg.values.v.size(); ++i) {
        double sum = 0.0;
        for (const AttentionMap& m : fg_maps) sum += m.values.v[i];
        bg.values.v[i] = std::max(0.0, 1.0 - sum);
    }
    return bg;
}

Grid softmax_grid(const AttentionMap& map, double temperature) {
    if (!(temperature > 0.0)) throw ContractError("softmax_grid: temperature must be positive");
    if (!map.values.finite()) throw ContractError("softmax_grid: non-finite attention values");
    Grid out = map.values;
    double mx = *std::max_element(out.v.begin(), out.v.end());
    double denom = 0.0;
    for (double& v : out.v) {
        v = std::exp((v - mx) / temperature);
        denom += v;
    }
    for (double& v : out.v) v /= denom;
    return out;
}

namespace {

// Min-max normalization; constant maps come back all-zero with a flag.
Grid minmax_normalize(const Grid& g, bool& constant) {
    auto [lo_it, hi_it] = std::minmax_element(g.v.begin(), g.v.end());
    double lo = *lo_it, hi = *hi_it;
    Grid out = g;
    constant = !(hi > lo);
    if (constant) {
        for (double& v : out.v) v = 0.0;
        return out;
    }
    for (double& v : out.v) v = (v - lo) / (hi - lo);
    return out;
}

}  // namespace

BinaryMask threshold_mask(const AttentionMap& map, double tau) {
    bool constant = false;
    Grid norm = minmax_normalize(map.values, constant);
    BinaryMask mask;
    mask.label = map.token_label;
    mask.values = Grid(norm.width, norm.height, 1);
    if (constant) {
        std::fprintf(stderr, "threshold_mask: constant attention map '%s', mask set to all ones\n",
                     map.token_label.c_str());
        for (double& v : mask.values.v) v = 1.0;
        return mask;
    }
    for (std::size_t i = 0; i < norm.v.size(); ++i)
        mask.values.v[i] = norm.v[i] > tau ? 1.0 : 0.0;
    return mask;
}

std::vector<BinaryMask> make_disjoint_masks(const std::vector<RegionSpec>& regions) {
    int n_bg = 0;
    for (const RegionSpec& r : regions)
        if (r.kind == RegionKind::Background) ++n_bg;
    if (n_bg != 1) throw ContractError("make_disjoint_masks: exactly one background region required");
    for (std::size_t i = 1; i < regions.size(); ++i)
        require_same_shape(regions[0].map.values, regions[i].map.values, "make_disjoint_masks");

    std::size_t n = regions.size();
    std::vector<BinaryMask> masks(n);
    std::vector<Grid> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        masks[i] = threshold_mask(regions[i].map, regions[i].tau);
        bool constant = false;
        norms[i] = minmax_normalize(regions[i].map.values, constant);
        if (constant)
            for (double& v : norms[i].v) v = 1.0;
    }

    // Contested foreground pixels go to the highest normalized score;
    // the background owns whatever no foreground claims.
    std::size_t cells = masks[0].values.v.size();
    for (std::size_t px = 0; px < cells; ++px) {
        int winner = -1;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (regions[i].kind != RegionKind::Foreground) continue;
            if (masks[i].values.v[px] == 0.0) continue;
            if (norms[i].v[px] > best) {
                best = norms[i].v[px];
                winner = static_cast<int>(i);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (regions[i].kind == RegionKind::Background)
                masks[i].values.v[px] = winner < 0 ? 1.0 : 0.0;
            else
                masks[i].values.v[px] = static_cast<int>(i) == winner ? 1.0 : 0.0;
        }
    }
    return masks;
}

namespace {

ColorRGBA paint_from(const RasterImage* target, const ControlPoint& p, Rng& rng) {
    if (target) {
        int x = std::clamp(static_cast<int>(p.x), 0, target->width - 1);
        int y = std::clamp(static_cast<int>(p.y), 0, target->height - 1);
        ColorRGBA c = target->pixel(x, y);
        c.a = 1.0;
        return c;
    }
    return {rng.uniform(), rng.uniform(), rng.uniform(), 1.0};
}

}  // namespace

std::vector<Path> init_region_paths(const Grid& prob, const BinaryMask& mask,
                                    const RegionSpec& spec, double radius_frac, Rng& rng,
                                    const StyleConfig& style, const RasterImage* target,
                                    double init_stroke_width) {
    require_same_shape(prob, mask.values, "init_region_paths");
    if (spec.n_paths == 0) return {};
    if (spec.n_paths < 0) throw ContractError("init_region_paths: negative n_paths");

    bool closed = style.shape != ShapeConstraint::OpenCubic;
    if (closed && spec.m_points % 3 != 0)
        throw ContractError("init_region_paths: closed style needs 3k control points");
    if (!closed && spec.m_points % 3 != 1)
        throw ContractError("init_region_paths: open style needs 3k+1 control points");

    // CDF over grid probability restricted to the mask support.
    std::vector<double> cdf(prob.v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < prob.v.size(); ++i) {
        if (mask.values.v[i] != 0.0) acc += prob.v[i];
        cdf[i] = acc;
    }
    if (!(acc > 0.0)) throw ContractError("init_region_paths: empty mask support");

    double radius = radius_frac * std::min(prob.width, prob.height);
    std::vector<Path> out;
    out.reserve(spec.n_paths);
    for (int i = 0; i < spec.n_paths; ++i) {
        double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t cell = std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        ControlPoint first{static_cast<double>(cell % prob.width),
                           static_cast<double>(cell / prob.width)};

        Path path;
        path.closed = closed;
        path.region_tag = spec.label;
        path.points.resize(spec.m_points);
        path.points[0] = first;
        for (int j = 1; j < spec.m_points; ++j) {
            double r = radius * std::sqrt(rng.uniform());
            double theta = 2.0 * kPi * rng.uniform();
            path.points[j] = {first.x + r * std::cos(theta), first.y + r * std::sin(theta)};
        }
        if (closed) {
            path.fill = paint_from(target, first, rng);
        } else {
            StrokeStyle stroke;
            bool black = style.style == PrimitiveStyle::Sketch ||
                         style.style == PrimitiveStyle::InkWash;
            stroke.color = black ? ColorRGBA{0, 0, 0, 1} : paint_from(target, first, rng);
            stroke.width = init_stroke_width;
            path.stroke = stroke;
        }
        out.push_back(std::move(path));
    }
    return out;
}

SiveLoss sive_loss(const RasterImage& target, const RasterImage& render,
                   const std::vector<BinaryMask>& masks) {
    if (!target.same_dims(render)) throw ContractError("sive_loss: image dimensions differ");
    for (const BinaryMask& m : masks)
        if (m.values.width != target.width || m.values.height != target.height)
            throw ContractError("sive_loss: mask dimensions differ");

    SiveLoss out;
    out.adjoint = RasterImage(target.width, target.height);
    for (const BinaryMask& m : masks) {
        for (int y = 0; y < target.height; ++y)
            for (int x = 0; x < target.width; ++x) {
                double w = m.at(x, y);
                if (w == 0.0) continue;
                for (int c = 0; c < 3; ++c) {
                    double d = w * (render.at(x, y, c) - target.at(x, y, c));
                    out.loss += d * d;
                    out.adjoint.at(x, y, c) += 2.0 * w * d;
                }
            }
    }
    return out;
}

SiveResult sive_optimize(const RasterImage& target, const std::vector<RegionSpec>& regions,
                         const StyleConfig& style, const SiveConfig& cfg) {
    for (const RegionSpec& r : regions)
        if (r.map.values.width != target.width || r.map.values.height != target.height)
            throw ContractError("sive_optimize: map dimensions do not match the target");

    SiveResult result;
    result.masks = make_disjoint_masks(regions);

    Rng rng(cfg.seed, 0x51e5);
    Scene scene;
    scene.canvas_w = target.width;
    scene.canvas_h = target.height;

    // Background paths first so they sit below every foreground object.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i].kind == RegionKind::Background) order.push_back(i);
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i].kind == RegionKind::Foreground) order.push_back(i);

    for (std::size_t i : order) {
        Grid prob = softmax_grid(regions[i].map, cfg.temperature);
        auto paths = init_region_paths(prob, result.masks[i], regions[i], cfg.radius_frac, rng,
                                       style, &target, cfg.init_stroke_width);
        for (Path& p : paths) scene.paths.push_back(std::move(p));
    }

    std::set<std::string> active(cfg.active_labels.begin(), cfg.active_labels.end());
    auto region_active = [&](const std::string& label) {
        return active.empty() || active.find(label) != active.end();
    };

    AdamState adam;
    adam.resize(pack_params(scene, style).values.size());
    int sched_end = cfg.lr.warmup_iters + cfg.lr.decay_iters;

    for (int iter = 0; iter < cfg.iters; ++iter) {
        RasterImage img = render(scene, cfg.render_opts);
        double total_loss = 0.0;
        ParamVector params = pack_params(scene, style);
        ParamGradient grad;
        grad.layout = params.layout;
        grad.values.assign(params.values.size(), 0.0);

        if (cfg.joint_loss) {
            SiveLoss l = sive_loss(target, img, result.masks);
            total_loss = l.loss;
            grad = render_vjp(scene, cfg.render_opts, l.adjoint, style);
        } else {
            // Region R's paths only see gradients from pixels inside R's mask.
            for (std::size_t ri = 0; ri < order.size(); ++ri) {
                std::size_t region = order[ri];
                const std::string& label = regions[region].label;
                SiveLoss l = sive_loss(target, img, {result.masks[region]});
                total_loss += l.loss;
                if (!region_active(label)) continue;
                ParamGradient rg = render_vjp(scene, cfg.render_opts, l.adjoint, style);
                for (const ParamSlice& s : rg.layout.slices) {
                    if (scene.paths[s.path_index].region_tag != label) continue;
                    for (std::size_t i = 0; i < s.count; ++i)
                        grad.values[s.offset + i] = rg.values[s.offset + i];
                }
            }
        }
        result.losses.push_back(total_loss);
        for (double v : grad.values)
            if (!std::isfinite(v))
                throw NumericalError("sive_optimize: non-finite gradient at iteration " +
                                     std::to_string(iter));

        ++adam.step;
        int it = std::min(iter, sched_end);
        for (const ParamSlice& s : params.layout.slices) {
            if (!region_active(scene.paths[s.path_index].region_tag)) continue;
            double lr = family_lr(cfg.lr, s.family, it);
            if (s.family == ParamFamily::Points) lr *= cfg.point_lr_scale;
            adam_step_slice(params.values, grad.values, adam, cfg.adam, lr, s.offset, s.count);
        }
        Scene next = unpack_params(params, scene, style);
        for (std::size_t i = 0; i < next.paths.size(); ++i) {
            // Inactive regions stay bit-identical.
            if (!region_active(scene.paths[i].region_tag)) {
                next.paths[i] = scene.paths[i];
                continue;
            }
            if (cfg.clamp_points_to_canvas && style.train_points) {
                auto clamp_pt = [&](ControlPoint& pt) {
                    pt.x = std::clamp(pt.x, 0.0, static_cast<double>(next.canvas_w));
                    pt.y = std::clamp(pt.y, 0.0, static_cast<double>(next.canvas_h));
                };
                if (style.shape == ShapeConstraint::Polygon) {
                    auto corners = polygon_corners(next.paths[i]);
                    for (ControlPoint& c : corners) clamp_pt(c);
                    set_polygon_corners(next.paths[i], corners);
                } else {
                    for (ControlPoint& pt : next.paths[i].points) clamp_pt(pt);
                }
            }
        }
        scene = std::move(next);
    }
    result.scene = std::move(scene);
    return result;
}

}  // namespace vectordream
