#include "vectordream/scene.hpp"

#include <cmath>
#include <cstdio>

namespace vectordream {

const char* to_string(PrimitiveStyle s) {
    switch (s) {
        case PrimitiveStyle::Iconography: return "iconography";
        case PrimitiveStyle::Sketch: return "sketch";
        case PrimitiveStyle::PixelArt: return "pixel_art";
        case PrimitiveStyle::LowPoly: return "low_poly";
        case PrimitiveStyle::Painting: return "painting";
        case PrimitiveStyle::InkWash: return "ink_wash";
    }
    return "?";
}

const char* to_string(ParamFamily f) {
    switch (f) {
        case ParamFamily::Points: return "points";
        case ParamFamily::Fill: return "fill";
        case ParamFamily::StrokeColor: return "stroke_color";
        case ParamFamily::StrokeWidth: return "stroke_width";
        case ParamFamily::Opacity: return "opacity";
    }
    return "?";
}

std::optional<PrimitiveStyle> parse_style(const std::string& name) {
    for (PrimitiveStyle s : {PrimitiveStyle::Iconography, PrimitiveStyle::Sketch,
                             PrimitiveStyle::PixelArt, PrimitiveStyle::LowPoly,
                             PrimitiveStyle::Painting, PrimitiveStyle::InkWash}) {
        if (name == to_string(s)) return s;
    }
    return std::nullopt;
}

StyleConfig StyleConfig::make(PrimitiveStyle style) {
    StyleConfig c;
    c.style = style;
    switch (style) {
        case PrimitiveStyle::Iconography:
            c.shape = ShapeConstraint::ClosedCubic;
            c.train_points = true;
            c.train_fill = true;
            break;
        case PrimitiveStyle::Sketch:
            c.shape = ShapeConstraint::OpenCubic;
            c.train_points = true;
            c.train_fill = false;
            c.train_opacity = true;
            break;
        case PrimitiveStyle::PixelArt:
            c.shape = ShapeConstraint::AxisAlignedSquare;
            c.train_points = false;
            c.train_fill = true;
            break;
        case PrimitiveStyle::LowPoly:
            c.shape = ShapeConstraint::Polygon;
            c.train_points = true;
            c.train_fill = true;
            break;
        case PrimitiveStyle::Painting:
            c.shape = ShapeConstraint::OpenCubic;
            c.train_points = true;
            c.train_fill = false;
            c.train_stroke_color = true;
            c.train_stroke_width = true;
            break;
        case PrimitiveStyle::InkWash:
            c.shape = ShapeConstraint::OpenCubic;
            c.train_points = true;
            c.train_fill = false;
            c.train_opacity = true;
            c.train_stroke_width = true;
            break;
    }
    return c;
}

std::vector<ControlPoint> polygon_corners(const Path& path) {
    std::vector<ControlPoint> corners;
    for (std::size_t i = 0; i < path.points.size(); i += 3) corners.push_back(path.points[i]);
    return corners;
}

void set_polygon_corners(Path& path, const std::vector<ControlPoint>& corners) {
    std::size_t k = corners.size();
    path.points.resize(3 * k);
    for (std::size_t i = 0; i < k; ++i) {
        const ControlPoint& a = corners[i];
        const ControlPoint& b = corners[(i + 1) % k];
        ControlPoint d = b - a;
        path.points[3 * i] = a;
        path.points[3 * i + 1] = a + d * (1.0 / 3.0);
        path.points[3 * i + 2] = a + d * (2.0 / 3.0);
    }
}

namespace {

// Number of packed scalars of family f for this path, or 0 if the family
// does not apply.
std::size_t family_count(const Path& path, const StyleConfig& style, ParamFamily f) {
    switch (f) {
        case ParamFamily::Points:
            if (style.shape == ShapeConstraint::Polygon)
                return 2 * polygon_corners(path).size();
            return 2 * path.points.size();
        case ParamFamily::Fill:
            return path.fill ? 4 : 0;
        case ParamFamily::StrokeColor:
            return path.stroke ? 3 : 0;
        case ParamFamily::StrokeWidth:
            return path.stroke ? 1 : 0;
        case ParamFamily::Opacity:
            return (path.stroke || path.fill) ? 1 : 0;
    }
    return 0;
}

constexpr ParamFamily kFamilyOrder[] = {ParamFamily::Points, ParamFamily::Fill,
                                        ParamFamily::StrokeColor, ParamFamily::StrokeWidth,
                                        ParamFamily::Opacity};

}  // namespace

ParamLayout ParamLayout::build(const Scene& scene, const StyleConfig& style) {
    ParamLayout layout;
    std::size_t offset = 0;
    for (int pi = 0; pi < static_cast<int>(scene.paths.size()); ++pi) {
        for (ParamFamily f : kFamilyOrder) {
            if (!style.trainable(f)) continue;
            std::size_t n = family_count(scene.paths[pi], style, f);
            if (n == 0) continue;
            layout.slices.push_back({pi, f, offset, n});
            offset += n;
        }
    }
    layout.total = offset;
    return layout;
}

ParamVector pack_params(const Scene& scene, const StyleConfig& style) {
    ParamVector vec;
    vec.layout = ParamLayout::build(scene, style);
    vec.values.resize(vec.layout.total);
    for (const ParamSlice& s : vec.layout.slices) {
        const Path& path = scene.paths[s.path_index];
        double* out = vec.values.data() + s.offset;
        switch (s.family) {
            case ParamFamily::Points: {
                if (style.shape == ShapeConstraint::Polygon) {
                    auto corners = polygon_corners(path);
                    for (std::size_t i = 0; i < corners.size(); ++i) {
                        out[2 * i] = corners[i].x;
                        out[2 * i + 1] = corners[i].y;
                    }
                } else {
                    for (std::size_t i = 0; i < path.points.size(); ++i) {
                        out[2 * i] = path.points[i].x;
                        out[2 * i + 1] = path.points[i].y;
                    }
                }
                break;
            }
            case ParamFamily::Fill:
                out[0] = path.fill->r;
                out[1] = path.fill->g;
                out[2] = path.fill->b;
                out[3] = path.fill->a;
                break;
            case ParamFamily::StrokeColor:
                out[0] = path.stroke->color.r;
                out[1] = path.stroke->color.g;
                out[2] = path.stroke->color.b;
                break;
            case ParamFamily::StrokeWidth:
                out[0] = path.stroke->width;
                break;
            case ParamFamily::Opacity:
                out[0] = path.stroke ? path.stroke->color.a : path.fill->a;
                break;
        }
    }
    return vec;
}

Scene unpack_params(const ParamVector& vec, const Scene& scene, const StyleConfig& style) {
    ParamLayout expect = ParamLayout::build(scene, style);
    if (!(expect == vec.layout) || vec.values.size() != expect.total)
        throw ContractError("unpack_params: layout does not match scene/style");

    Scene out = scene;
    auto clamp01 = [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); };
    for (const ParamSlice& s : vec.layout.slices) {
        Path& path = out.paths[s.path_index];
        const double* in = vec.values.data() + s.offset;
        switch (s.family) {
            case ParamFamily::Points: {
                if (style.shape == ShapeConstraint::Polygon) {
                    std::vector<ControlPoint> corners(s.count / 2);
                    for (std::size_t i = 0; i < corners.size(); ++i)
                        corners[i] = {in[2 * i], in[2 * i + 1]};
                    set_polygon_corners(path, corners);
                } else {
                    for (std::size_t i = 0; i < path.points.size(); ++i)
                        path.points[i] = {in[2 * i], in[2 * i + 1]};
                }
                break;
            }
            case ParamFamily::Fill:
                path.fill = ColorRGBA{clamp01(in[0]), clamp01(in[1]), clamp01(in[2]),
                                      clamp01(in[3])};
                break;
            case ParamFamily::StrokeColor:
                path.stroke->color.r = clamp01(in[0]);
                path.stroke->color.g = clamp01(in[1]);
                path.stroke->color.b = clamp01(in[2]);
                break;
            case ParamFamily::StrokeWidth:
                path.stroke->width = in[0] < 0.0 ? 0.0 : in[0];
                break;
            case ParamFamily::Opacity:
                if (path.stroke)
                    path.stroke->color.a = clamp01(in[0]);
                else
                    path.fill->a = clamp01(in[0]);
                break;
        }
    }
    return out;
}

namespace {

void check_path_shape(const Path& p, const StyleConfig& style, int index,
                      std::vector<std::string>& out) {
    auto fail = [&](const std::string& msg) {
        out.push_back("path " + std::to_string(index) + ": " + msg);
    };
    switch (style.shape) {
        case ShapeConstraint::ClosedCubic:
            if (!p.closed) fail("style requires closed paths");
            break;
        case ShapeConstraint::OpenCubic:
            if (p.closed) fail("style requires open paths");
            if (p.fill) fail("open-stroke style forbids fill");
            if (!p.stroke) fail("open-stroke style requires a stroke");
            break;
        case ShapeConstraint::AxisAlignedSquare:
        case ShapeConstraint::Polygon: {
            if (!p.closed) {
                fail("polygon style requires closed paths");
                break;
            }
            if (p.points.size() % 3 != 0) break;  // reported by the generic check
            // Handles must sit at thirds of each edge.
            auto corners = polygon_corners(p);
            std::size_t k = corners.size();
            for (std::size_t i = 0; i < k; ++i) {
                ControlPoint a = corners[i];
                ControlPoint b = corners[(i + 1) % k];
                ControlPoint d = b - a;
                ControlPoint h1 = p.points[3 * i + 1] - (a + d * (1.0 / 3.0));
                ControlPoint h2 = p.points[3 * i + 2] - (a + d * (2.0 / 3.0));
                // tolerance covers the 4-decimal serialization quantum
                if (norm(h1) > 5e-4 || norm(h2) > 5e-4) {
                    fail("segment " + std::to_string(i) + " is not a straight edge");
                    break;
                }
            }
            if (style.shape == ShapeConstraint::AxisAlignedSquare) {
                if (k != 4) {
                    fail("square must have 4 corners");
                    break;
                }
                double side = -1.0;
                for (std::size_t i = 0; i < 4; ++i) {
                    ControlPoint d = corners[(i + 1) % 4] - corners[i];
                    bool horizontal = std::abs(d.y) < 5e-4;
                    bool vertical = std::abs(d.x) < 5e-4;
                    if (horizontal == vertical) {
                        fail("square edges must be axis-aligned");
                        break;
                    }
                    double len = horizontal ? std::abs(d.x) : std::abs(d.y);
                    if (side < 0.0)
                        side = len;
                    else if (std::abs(len - side) > 1e-3) {
                        fail("square edges must have equal length");
                        break;
                    }
                }
            }
            break;
        }
    }

    if (style.style == PrimitiveStyle::Iconography || style.style == PrimitiveStyle::PixelArt ||
        style.style == PrimitiveStyle::LowPoly) {
        if (!p.fill) fail("fill style requires a fill color");
        if (p.stroke) fail("fill style forbids strokes");
    }
    if (style.style == PrimitiveStyle::InkWash && p.stroke) {
        const ColorRGBA& c = p.stroke->color;
        if (c.r != 0.0 || c.g != 0.0 || c.b != 0.0) fail("ink-wash strokes must be black");
    }
}

}  // namespace

std::vector<std::string> validate_scene(const Scene& scene, const StyleConfig& style) {
    std::vector<std::string> out;
    if (scene.canvas_w < 1 || scene.canvas_h < 1) out.push_back("canvas dimensions must be >= 1");
    if (!scene.background.in_range()) out.push_back("background color out of [0,1]");

    for (int i = 0; i < static_cast<int>(scene.paths.size()); ++i) {
        const Path& p = scene.paths[i];
        auto fail = [&](const std::string& msg) {
            out.push_back("path " + std::to_string(i) + ": " + msg);
        };
        for (const ControlPoint& pt : p.points)
            if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) {
                fail("non-finite control point");
                break;
            }
        std::size_t m = p.points.size();
        if (m < 4) fail("needs at least 4 control points");
        if (p.closed && m % 3 != 0) fail("closed chain needs 3k control points");
        if (!p.closed && m % 3 != 1) fail("open chain needs 3k+1 control points");
        if (p.closed && !p.fill && !p.stroke) fail("closed path needs fill or stroke");
        if (p.fill && !p.fill->in_range()) fail("fill color out of [0,1]");
        if (p.stroke) {
            if (!p.stroke->color.in_range()) fail("stroke color out of [0,1]");
            if (!(p.stroke->width >= 0.0) || !std::isfinite(p.stroke->width))
                fail("stroke width must be >= 0");
        }
        check_path_shape(p, style, i, out);
    }
    return out;
}

std::vector<FlatVertex> flatten_path(const Path& path, double tol) {
    if (!(tol > 0.0)) throw ContractError("flatten_path: tol must be positive");
    std::vector<FlatVertex> poly;
    int segs = path.segment_count();
    if (segs == 0) return poly;
    poly.push_back({path.points[0], 0, 0.0});
    for (int i = 0; i < segs; ++i) flatten_segment(path.segment(i), tol, i, poly);
    return poly;
}

double path_signed_area(const Path& path, double tol) {
    if (!path.closed) throw ContractError("path_signed_area: path must be closed");
    auto poly = flatten_path(path, tol);
    if (poly.size() < 3) return 0.0;
    // flatten_path of a closed path ends back at the start; drop the duplicate.
    poly.pop_back();
    return polyline_signed_area(poly);
}

ParamGradient project_raw_grad(const Scene& scene, const StyleConfig& style,
                               const std::vector<PathRawGrad>& raw) {
    ParamGradient grad;
    grad.layout = ParamLayout::build(scene, style);
    grad.values.assign(grad.layout.total, 0.0);
    for (const ParamSlice& s : grad.layout.slices) {
        const PathRawGrad& rg = raw[s.path_index];
        const Path& path = scene.paths[s.path_index];
        double* out = grad.values.data() + s.offset;
        switch (s.family) {
            case ParamFamily::Points: {
                if (style.shape == ShapeConstraint::Polygon) {
                    // Corner j owns point 3j and a share of the four
                    // neighboring handles (thirds of each straight edge).
                    std::size_t k = s.count / 2;
                    for (std::size_t j = 0; j < k; ++j) {
                        for (int axis = 0; axis < 2; ++axis) {
                            std::size_t prev = (j + k - 1) % k;
                            double g = rg.d_points[2 * (3 * j) + axis] +
                                       (2.0 / 3.0) * rg.d_points[2 * (3 * j + 1) + axis] +
                                       (1.0 / 3.0) * rg.d_points[2 * (3 * j + 2) + axis] +
                                       (1.0 / 3.0) * rg.d_points[2 * (3 * prev + 1) + axis] +
                                       (2.0 / 3.0) * rg.d_points[2 * (3 * prev + 2) + axis];
                            out[2 * j + axis] = g;
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < 2 * path.points.size(); ++i)
                        out[i] = rg.d_points[i];
                }
                break;
            }
            case ParamFamily::Fill:
                for (int i = 0; i < 4; ++i) out[i] = rg.d_fill[i];
                break;
            case ParamFamily::StrokeColor:
                for (int i = 0; i < 3; ++i) out[i] = rg.d_stroke_rgb[i];
                break;
            case ParamFamily::StrokeWidth:
                out[0] = rg.d_stroke_width;
                break;
            case ParamFamily::Opacity:
                out[0] = path.stroke ? rg.d_stroke_alpha : rg.d_fill[3];
                break;
        }
    }
    return grad;
}

}  // namespace vectordream
