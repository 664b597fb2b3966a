#include "vectordream/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <thread>

namespace vectordream {

namespace {

int thread_budget() {
    if (const char* env = std::getenv("VECTORDREAM_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static stride assignment: job i runs on worker i % T. Each job writes only
// its own output slots, so results do not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn) {
    int threads = std::min(thread_budget(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Width of the smooth-min blend between the two nearest edges. Blending the
// top two keeps the distance field C1 across medial-axis ties (a hard min
// has kinks there that finite differences would straddle); the field dips by
// at most kTieBlend/4 right on a tie.
constexpr double kTieBlend = 0.25;

struct Box {
    double x0 = std::numeric_limits<double>::max();
    double y0 = std::numeric_limits<double>::max();
    double x1 = std::numeric_limits<double>::lowest();
    double y1 = std::numeric_limits<double>::lowest();

    void include(const ControlPoint& p) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    void inflate(double pad) {
        x0 -= pad;
        y0 -= pad;
        x1 += pad;
        y1 += pad;
    }
    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    bool empty() const { return x1 < x0; }
};

struct FlatPath {
    int path_index = 0;
    std::vector<FlatVertex> verts;  // closed: no duplicate of the start vertex
    bool closed = false;
    bool fill = false;
    bool stroke = false;
    ColorRGBA fill_color;
    ColorRGBA stroke_color;
    double half_width = 0.0;
    Box box;  // inflated by the coverage support radius
    int point_count = 0;
};

struct Precomp {
    std::vector<FlatPath> paths;
};

FlatPath flatten_for_render(const Path& path, int path_index, int curve_samples,
                            double soft_band) {
    FlatPath fp;
    fp.path_index = path_index;
    fp.closed = path.closed;
    fp.point_count = static_cast<int>(path.points.size());
    int segs = path.segment_count();
    if (segs > 0) {
        fp.verts.push_back({path.points[0], 0, 0.0});
        for (int i = 0; i < segs; ++i) sample_segment(path.segment(i), curve_samples, i, fp.verts);
        if (path.closed) fp.verts.pop_back();  // wrap vertex duplicates the start
    }
    fp.fill = path.closed && path.fill.has_value() && segs > 0;
    fp.stroke = path.stroke.has_value() && segs > 0;
    if (fp.fill) fp.fill_color = *path.fill;
    if (fp.stroke) {
        fp.stroke_color = path.stroke->color;
        fp.half_width = 0.5 * path.stroke->width;
    }
    for (const FlatVertex& v : fp.verts) fp.box.include(v.p);
    // Support radius: half the ramp band plus the stroke half width plus the
    // worst-case smooth-min depression.
    if (!fp.box.empty()) fp.box.inflate(0.5 * soft_band + fp.half_width + kTieBlend + 1e-9);
    return fp;
}

Precomp precompute(const Scene& scene, const RenderOptions& opts) {
    Precomp pre;
    pre.paths.reserve(scene.paths.size());
    for (int i = 0; i < static_cast<int>(scene.paths.size()); ++i)
        pre.paths.push_back(
            flatten_for_render(scene.paths[i], i, opts.curve_samples, opts.soft_band));
    return pre;
}

int edge_count(const FlatPath& fp) {
    int n = static_cast<int>(fp.verts.size());
    if (n < 2) return 0;
    return fp.closed ? n : n - 1;
}

struct EdgeHit {
    double dist = std::numeric_limits<double>::max();
    int edge = -1;
    double h = 0.0;
};

// Blended nearest-edge query: `dist` is the smooth-min distance; gradients
// flow to `best` and `second` with weights w1/w2.
struct NearestHit {
    EdgeHit best;
    EdgeHit second;
    double dist = std::numeric_limits<double>::max();
    double w1 = 1.0;
    double w2 = 0.0;
};

NearestHit nearest_edge(const FlatPath& fp, double px, double py) {
    EdgeHit first, second;
    ControlPoint p{px, py};
    int n = static_cast<int>(fp.verts.size());
    int edges = edge_count(fp);
    for (int e = 0; e < edges; ++e) {
        const ControlPoint& a = fp.verts[e].p;
        const ControlPoint& b = fp.verts[(e + 1) % n].p;
        // Cheap reject on the edge's bounding box against the current top two.
        double bx0 = std::min(a.x, b.x), bx1 = std::max(a.x, b.x);
        double by0 = std::min(a.y, b.y), by1 = std::max(a.y, b.y);
        double dx = px < bx0 ? bx0 - px : (px > bx1 ? px - bx1 : 0.0);
        double dy = py < by0 ? by0 - py : (py > by1 ? py - by1 : 0.0);
        if (dx * dx + dy * dy >= second.dist * second.dist) continue;
        double h;
        double d = point_segment_distance(p, a, b, h);
        if (d < first.dist) {
            second = first;
            first = {d, e, h};
        } else if (d < second.dist) {
            second = {d, e, h};
        }
    }
    NearestHit hit;
    hit.best = first;
    hit.second = second;
    hit.dist = first.dist;
    // Blend the top two only away from the zero level set: smoothing the
    // unsigned distance right at the boundary would flip sign across it and
    // tear the coverage field. dist = d1 - F(d1) Q(gap), with F fading the
    // blend in over d1 in [blend, 2 blend]; w1/w2 are the exact partials.
    double gap = second.dist - first.dist;
    if (second.edge >= 0 && gap < kTieBlend && first.dist > kTieBlend) {
        double q = (kTieBlend - gap) * (kTieBlend - gap) / (4.0 * kTieBlend);
        double dq = -(kTieBlend - gap) / (2.0 * kTieBlend);
        double f = 1.0, df = 0.0;
        if (first.dist < 2.0 * kTieBlend) {
            double u = first.dist / kTieBlend - 1.0;  // 0..1
            f = u * u * (3.0 - 2.0 * u);
            df = 6.0 * u * (1.0 - u) / kTieBlend;
        }
        hit.dist = first.dist - f * q;
        hit.w1 = 1.0 - df * q + f * dq;
        hit.w2 = -f * dq;
    }
    return hit;
}

bool winding_nonzero(const FlatPath& fp, double px, double py) {
    int winding = 0;
    int n = static_cast<int>(fp.verts.size());
    int edges = edge_count(fp);
    for (int e = 0; e < edges; ++e) {
        const ControlPoint& a = fp.verts[e].p;
        const ControlPoint& b = fp.verts[(e + 1) % n].p;
        if ((a.y <= py) != (b.y <= py)) {
            // Crossing abscissa relative to the sample, translation-stable.
            double xat = (a.x - px) + (py - a.y) * (b.x - a.x) / (b.y - a.y);
            if (xat > 0.0) winding += (b.y > a.y) ? 1 : -1;
        }
    }
    return winding != 0;
}

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// C1 coverage ramp. The smoothstep profile keeps the derivative continuous
// at the band edges, so finite differences agree with the analytic gradient
// even for parameters that push samples across the clamp boundary.
double ramp_cov(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * (3.0 - 2.0 * x);
}

double ramp_dcov(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 6.0 * x * (1.0 - x);
}

// One compositing layer at a sample: a source color with a coverage plus
// everything the reverse pass needs to differentiate that coverage.
struct Layer {
    int path_index = 0;
    bool is_stroke = false;
    ColorRGBA col;
    double cov = 0.0;
    // coverage geometry
    NearestHit hit;
    double sign = 1.0;     // fill: +1 inside, -1 outside
    double ramp = 0.0;     // pre-smoothstep ramp coordinate
    bool in_band = false;  // ramp interior -> coverage has a derivative
};

// Collect the compositing layers of one sample, bottom to top.
void sample_layers(const Precomp& pre, const RenderOptions& opts, double px, double py,
                   std::vector<Layer>& out) {
    out.clear();
    for (const FlatPath& fp : pre.paths) {
        if (fp.verts.size() < 2) continue;
        if (!fp.box.contains(px, py)) continue;
        NearestHit hit = nearest_edge(fp, px, py);
        if (fp.fill) {
            Layer layer;
            layer.path_index = fp.path_index;
            layer.is_stroke = false;
            layer.col = fp.fill_color;
            layer.hit = hit;
            layer.sign = winding_nonzero(fp, px, py) ? 1.0 : -1.0;
            layer.ramp = 0.5 + layer.sign * hit.dist / opts.soft_band;
            layer.cov = ramp_cov(layer.ramp);
            layer.in_band = layer.ramp > 0.0 && layer.ramp < 1.0;
            if (layer.cov > 0.0 || layer.in_band) out.push_back(layer);
        }
        if (fp.stroke) {
            Layer layer;
            layer.path_index = fp.path_index;
            layer.is_stroke = true;
            layer.col = fp.stroke_color;
            layer.hit = hit;
            layer.ramp = 0.5 + (fp.half_width - hit.dist) / opts.soft_band;
            layer.cov = ramp_cov(layer.ramp);
            layer.in_band = layer.ramp > 0.0 && layer.ramp < 1.0;
            if (layer.cov > 0.0 || layer.in_band) out.push_back(layer);
        }
    }
}

// Premultiplied source-over accumulation for one sample.
ColorRGBA composite_sample(const std::vector<Layer>& layers, const ColorRGBA& bg) {
    double q[3] = {bg.r * bg.a, bg.g * bg.a, bg.b * bg.a};
    double alpha = bg.a;
    for (const Layer& layer : layers) {
        double sa = layer.col.a * layer.cov;
        q[0] = layer.col.r * sa + q[0] * (1.0 - sa);
        q[1] = layer.col.g * sa + q[1] * (1.0 - sa);
        q[2] = layer.col.b * sa + q[2] * (1.0 - sa);
        alpha = sa + alpha * (1.0 - sa);
    }
    if (alpha <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    return {clamp01(q[0] / alpha), clamp01(q[1] / alpha), clamp01(q[2] / alpha), clamp01(alpha)};
}

struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open

    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

void render_rect(const Scene& scene, const RenderOptions& opts, const Precomp& pre,
                 const PixelRect& rect, RasterImage& img, bool parallel) {
    int ss = opts.supersample;
    double inv_samples = 1.0 / (ss * ss);
    int rows = rect.y1 - rect.y0;
    auto row_job = [&](int r) {
        int py = rect.y0 + r;
        std::vector<Layer> layers;
        for (int px = rect.x0; px < rect.x1; ++px) {
            double acc[4] = {0, 0, 0, 0};
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    double x = px + (sx + 0.5) / ss;
                    double y = py + (sy + 0.5) / ss;
                    sample_layers(pre, opts, x, y, layers);
                    ColorRGBA c = composite_sample(layers, scene.background);
                    acc[0] += c.r;
                    acc[1] += c.g;
                    acc[2] += c.b;
                    acc[3] += c.a;
                }
            }
            for (int c = 0; c < 4; ++c) img.at(px, py, c) = acc[c] * inv_samples;
        }
    };
    if (parallel)
        parallel_for(rows, row_job);
    else
        for (int r = 0; r < rows; ++r) row_job(r);
}

// Reverse pass over one sample. Adjoint arrives w.r.t. the sample's straight
// RGBA; raw gradients accumulate per path.
void backward_sample(const Scene& scene, const Precomp& pre, const RenderOptions& opts,
                     double px, double py, const double adj[4], std::vector<Layer>& layers,
                     std::vector<double>& stack, std::vector<PathRawGrad>& raw) {
    sample_layers(pre, opts, px, py, layers);

    const ColorRGBA& bg = scene.background;
    std::size_t n = layers.size();
    // Forward premultiplied chain; stack holds (q0,q1,q2,alpha) before each layer.
    stack.resize(4 * (n + 1));
    stack[0] = bg.r * bg.a;
    stack[1] = bg.g * bg.a;
    stack[2] = bg.b * bg.a;
    stack[3] = bg.a;
    for (std::size_t k = 0; k < n; ++k) {
        const Layer& layer = layers[k];
        double sa = layer.col.a * layer.cov;
        const double* prev = &stack[4 * k];
        double* cur = &stack[4 * (k + 1)];
        cur[0] = layer.col.r * sa + prev[0] * (1.0 - sa);
        cur[1] = layer.col.g * sa + prev[1] * (1.0 - sa);
        cur[2] = layer.col.b * sa + prev[2] * (1.0 - sa);
        cur[3] = sa + prev[3] * (1.0 - sa);
    }

    // Straight output = (q/alpha, alpha); pull the adjoint back through the division.
    const double* fin = &stack[4 * n];
    double alpha = fin[3];
    double dq[3] = {0, 0, 0};
    double dalpha = adj[3];
    if (alpha > 0.0) {
        double inv = 1.0 / alpha;
        for (int c = 0; c < 3; ++c) {
            dq[c] = adj[c] * inv;
            dalpha -= adj[c] * fin[c] * inv * inv;
        }
    }

    for (std::size_t k = n; k-- > 0;) {
        const Layer& layer = layers[k];
        const double* prev = &stack[4 * k];
        double sa = layer.col.a * layer.cov;
        // d/d sa of this over step
        double d_sa = dq[0] * (layer.col.r - prev[0]) + dq[1] * (layer.col.g - prev[1]) +
                      dq[2] * (layer.col.b - prev[2]) + dalpha * (1.0 - prev[3]);
        double d_rgb[3] = {dq[0] * sa, dq[1] * sa, dq[2] * sa};
        // adjoint for the layer below
        for (int c = 0; c < 3; ++c) dq[c] *= (1.0 - sa);
        dalpha *= (1.0 - sa);

        double d_cov = d_sa * layer.col.a;
        double d_cola = d_sa * layer.cov;

        PathRawGrad& rg = raw[layer.path_index];
        if (layer.is_stroke) {
            for (int c = 0; c < 3; ++c) rg.d_stroke_rgb[c] += d_rgb[c];
            rg.d_stroke_alpha += d_cola;
        } else {
            for (int c = 0; c < 3; ++c) rg.d_fill[c] += d_rgb[c];
            rg.d_fill[3] += d_cola;
        }

        if (!layer.in_band || layer.hit.best.edge < 0) continue;
        double d_ramp = d_cov * ramp_dcov(layer.ramp);
        double d_dist;
        if (layer.is_stroke) {
            rg.d_stroke_width += d_ramp / (2.0 * opts.soft_band);
            d_dist = -d_ramp / opts.soft_band;
        } else {
            d_dist = layer.sign * d_ramp / opts.soft_band;
        }

        const FlatPath& fp = pre.paths[layer.path_index];
        int nverts = static_cast<int>(fp.verts.size());
        int m = fp.point_count;
        auto scatter_edge = [&](const EdgeHit& eh, double weight) {
            if (eh.edge < 0 || eh.dist < 1e-12 || weight == 0.0) return;
            const FlatVertex& va = fp.verts[eh.edge];
            const FlatVertex& vb = fp.verts[(eh.edge + 1) % nverts];
            double h = eh.h;
            // Same relative formulation as the distance query.
            double rx = (va.p.x - px) + (vb.p.x - va.p.x) * h;
            double ry = (va.p.y - py) + (vb.p.y - va.p.y) * h;
            double nx = -rx / eh.dist;
            double ny = -ry / eh.dist;
            // d dist/d a = -(1-h) n, d dist/d b = -h n; chain into the
            // cubic control points of the vertices' source segments.
            double wa = -(1.0 - h) * d_dist * weight;
            double wb = -h * d_dist * weight;
            auto scatter = [&](const FlatVertex& v, double w) {
                auto bern = bernstein3(v.t);
                std::size_t base = static_cast<std::size_t>(v.segment) * 3;
                for (int j = 0; j < 4; ++j) {
                    std::size_t pt = (base + j) % static_cast<std::size_t>(m);
                    rg.d_points[2 * pt] += bern[j] * w * nx;
                    rg.d_points[2 * pt + 1] += bern[j] * w * ny;
                }
            };
            scatter(va, wa);
            scatter(vb, wb);
        };
        scatter_edge(layer.hit.best, layer.hit.w1);
        scatter_edge(layer.hit.second, layer.hit.w2);
    }
}

PixelRect full_rect(const Scene& scene) { return {0, 0, scene.canvas_w, scene.canvas_h}; }

}  // namespace

ColorRGBA composite_over(const ColorRGBA& dst, const ColorRGBA& src, double coverage) {
    if (!(coverage >= 0.0 && coverage <= 1.0))
        throw ContractError("composite_over: coverage outside [0,1]");
    double sa = src.a * coverage;
    double out_a = sa + dst.a * (1.0 - sa);
    if (out_a <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    auto blend = [&](double s, double d) { return (s * sa + d * dst.a * (1.0 - sa)) / out_a; };
    return {blend(src.r, dst.r), blend(src.g, dst.g), blend(src.b, dst.b), out_a};
}

RasterImage render(const Scene& scene, const RenderOptions& opts) {
    if (scene.canvas_w < 1 || scene.canvas_h < 1)
        throw ContractError("render: canvas dimensions must be >= 1");
    if (!(opts.soft_band > 0.0) || opts.supersample < 1 || opts.curve_samples < 1)
        throw ContractError("render: bad options");
    Precomp pre = precompute(scene, opts);
    RasterImage img(scene.canvas_w, scene.canvas_h);
    render_rect(scene, opts, pre, full_rect(scene), img, /*parallel=*/true);
    return img;
}

ParamGradient render_vjp(const Scene& scene, const RenderOptions& opts,
                         const RasterImage& adjoint, const StyleConfig& style) {
    if (adjoint.width != scene.canvas_w || adjoint.height != scene.canvas_h)
        throw ContractError("render_vjp: adjoint dimensions do not match the canvas");
    Precomp pre = precompute(scene, opts);

    int ss = opts.supersample;
    double inv_samples = 1.0 / (ss * ss);
    int n_paths = static_cast<int>(scene.paths.size());

    auto make_raw = [&] {
        std::vector<PathRawGrad> raw(n_paths);
        for (int i = 0; i < n_paths; ++i)
            raw[i].d_points.assign(2 * scene.paths[i].points.size(), 0.0);
        return raw;
    };

    // Fixed-height tiles with per-tile accumulators, reduced in tile order:
    // the result does not depend on the thread count.
    constexpr int kTileRows = 16;
    int tiles = (scene.canvas_h + kTileRows - 1) / kTileRows;
    std::vector<std::vector<PathRawGrad>> tile_raw(tiles);

    parallel_for(tiles, [&](int tile) {
        std::vector<PathRawGrad> raw = make_raw();
        std::vector<Layer> layers;
        std::vector<double> stack;
        int y0 = tile * kTileRows;
        int y1 = std::min(scene.canvas_h, y0 + kTileRows);
        for (int py = y0; py < y1; ++py) {
            for (int px = 0; px < scene.canvas_w; ++px) {
                double adj[4];
                bool any = false;
                for (int c = 0; c < 4; ++c) {
                    adj[c] = adjoint.at(px, py, c) * inv_samples;
                    any = any || adj[c] != 0.0;
                }
                if (!any) continue;
                for (int sy = 0; sy < ss; ++sy)
                    for (int sx = 0; sx < ss; ++sx)
                        backward_sample(scene, pre, opts, px + (sx + 0.5) / ss,
                                        py + (sy + 0.5) / ss, adj, layers, stack, raw);
            }
        }
        tile_raw[tile] = std::move(raw);
    });

    std::vector<PathRawGrad> total = make_raw();
    for (int tile = 0; tile < tiles; ++tile) {
        const auto& raw = tile_raw[tile];
        for (int i = 0; i < n_paths; ++i) {
            for (std::size_t j = 0; j < total[i].d_points.size(); ++j)
                total[i].d_points[j] += raw[i].d_points[j];
            for (int c = 0; c < 4; ++c) total[i].d_fill[c] += raw[i].d_fill[c];
            for (int c = 0; c < 3; ++c) total[i].d_stroke_rgb[c] += raw[i].d_stroke_rgb[c];
            total[i].d_stroke_alpha += raw[i].d_stroke_alpha;
            total[i].d_stroke_width += raw[i].d_stroke_width;
        }
    }
    return project_raw_grad(scene, style, total);
}

namespace {

// Pixel rect outside of which the given path's coverage is exactly zero for
// every scene variant whose control points stay inside `box`.
PixelRect influence_rect(const Scene& scene, const RenderOptions& opts, const Path& path,
                         const Box& box) {
    double hw = path.stroke ? 0.5 * path.stroke->width : 0.0;
    double pad = 0.5 * opts.soft_band + hw + kTieBlend + 1.5;
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(box.x0 - pad)));
    r.y0 = std::max(0, static_cast<int>(std::floor(box.y0 - pad)));
    r.x1 = std::min(scene.canvas_w, static_cast<int>(std::ceil(box.x1 + pad)) + 1);
    r.y1 = std::min(scene.canvas_h, static_cast<int>(std::ceil(box.y1 + pad)) + 1);
    return r;
}

double rect_loss(const Scene& scene, const RenderOptions& opts, const RasterImage& adjoint,
                 const PixelRect& rect) {
    Precomp pre = precompute(scene, opts);
    RasterImage img(scene.canvas_w, scene.canvas_h);
    render_rect(scene, opts, pre, rect, img, /*parallel=*/false);
    double loss = 0.0;
    for (int py = rect.y0; py < rect.y1; ++py)
        for (int px = rect.x0; px < rect.x1; ++px)
            for (int c = 0; c < 4; ++c) loss += adjoint.at(px, py, c) * img.at(px, py, c);
    return loss;
}

}  // namespace

ParamGradient finite_diff_grad(const Scene& scene, const RenderOptions& opts,
                               const RasterImage& adjoint, const StyleConfig& style, double h) {
    if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be positive");
    if (adjoint.width != scene.canvas_w || adjoint.height != scene.canvas_h)
        throw ContractError("finite_diff_grad: adjoint dimensions do not match the canvas");

    ParamVector base = pack_params(scene, style);
    ParamGradient grad;
    grad.layout = base.layout;
    grad.values.assign(base.values.size(), 0.0);

    // slice lookup per flat index
    std::vector<const ParamSlice*> owner(base.values.size(), nullptr);
    for (const ParamSlice& s : base.layout.slices)
        for (std::size_t i = 0; i < s.count; ++i) owner[s.offset + i] = &s;

    parallel_for(static_cast<int>(base.values.size()), [&](int j) {
        const ParamSlice& slice = *owner[j];
        const Path& path = scene.paths[slice.path_index];

        // The perturbation only changes pixels near this path: renders agree
        // bit-for-bit wherever its coverage is exactly zero both ways.
        Box box;
        for (const ControlPoint& p : path.points) box.include(p);
        box.inflate(std::abs(h) + 1e-6);
        PixelRect rect = influence_rect(scene, opts, path, box);
        if (rect.empty()) {
            grad.values[j] = 0.0;
            return;
        }

        ParamVector plus = base, minus = base;
        plus.values[j] += h;
        minus.values[j] -= h;
        double lp = rect_loss(unpack_params(plus, scene, style), opts, adjoint, rect);
        double lm = rect_loss(unpack_params(minus, scene, style), opts, adjoint, rect);
        grad.values[j] = (lp - lm) / (2.0 * h);
    });
    return grad;
}

double psnr(const RasterImage& a, const RasterImage& b) {
    if (!a.same_dims(b)) throw ContractError("psnr: image dimensions differ");
    double mse = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double d = a.at(x, y, c) - b.at(x, y, c);
                mse += d * d;
                ++n;
            }
    mse /= static_cast<double>(n);
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace vectordream
