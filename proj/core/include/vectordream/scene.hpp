#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vectordream/geometry.hpp"

namespace vectordream {

struct ColorRGBA {
    double r = 0.0, g = 0.0, b = 0.0, a = 1.0;

    bool operator==(const ColorRGBA&) const = default;

    ColorRGBA clamped() const {
        auto c = [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); };
        return {c(r), c(g), c(b), c(a)};
    }
    bool in_range() const {
        return r >= 0 && r <= 1 && g >= 0 && g <= 1 && b >= 0 && b <= 1 && a >= 0 && a <= 1;
    }
};

struct StrokeStyle {
    ColorRGBA color;
    double width = 1.0;

    bool operator==(const StrokeStyle&) const = default;
};

// One path: a chain of cubic segments. Open chains store 3k+1 points; closed
// chains store 3k points and wrap implicitly back to points[0].
struct Path {
    std::vector<ControlPoint> points;
    bool closed = false;
    std::optional<ColorRGBA> fill;
    std::optional<StrokeStyle> stroke;
    std::string region_tag;  // empty = untagged

    int segment_count() const {
        if (points.size() < 3) return 0;
        return closed ? static_cast<int>(points.size()) / 3
                      : static_cast<int>(points.size() - 1) / 3;
    }
    // Control points of segment i, honoring the closed wrap.
    CubicSegment segment(int i) const {
        std::size_t base = static_cast<std::size_t>(i) * 3;
        CubicSegment s;
        for (int j = 0; j < 4; ++j) s[j] = points[(base + j) % points.size()];
        return s;
    }
};

struct Scene {
    int canvas_w = 0;
    int canvas_h = 0;
    ColorRGBA background{1.0, 1.0, 1.0, 1.0};
    std::vector<Path> paths;  // painter order, index 0 at the bottom
};

enum class PrimitiveStyle { Iconography, Sketch, PixelArt, LowPoly, Painting, InkWash };
enum class ShapeConstraint { ClosedCubic, OpenCubic, AxisAlignedSquare, Polygon };
enum class ParamFamily { Points, Fill, StrokeColor, StrokeWidth, Opacity };

const char* to_string(PrimitiveStyle s);
const char* to_string(ParamFamily f);
std::optional<PrimitiveStyle> parse_style(const std::string& name);

// Which parameter families an optimizer may touch, and the shape rule paths
// must satisfy. The six presets follow the vector-primitive styles.
struct StyleConfig {
    PrimitiveStyle style = PrimitiveStyle::Iconography;
    ShapeConstraint shape = ShapeConstraint::ClosedCubic;
    bool train_points = true;
    bool train_fill = true;
    bool train_stroke_color = false;
    bool train_stroke_width = false;
    bool train_opacity = false;

    static StyleConfig make(PrimitiveStyle style);

    bool trainable(ParamFamily f) const {
        switch (f) {
            case ParamFamily::Points: return train_points;
            case ParamFamily::Fill: return train_fill;
            case ParamFamily::StrokeColor: return train_stroke_color;
            case ParamFamily::StrokeWidth: return train_stroke_width;
            case ParamFamily::Opacity: return train_opacity;
        }
        return false;
    }
};

// Maps a contiguous slice of the flat parameter vector back to one path's
// parameter family.
struct ParamSlice {
    int path_index = 0;
    ParamFamily family = ParamFamily::Points;
    std::size_t offset = 0;
    std::size_t count = 0;

    bool operator==(const ParamSlice&) const = default;
};

struct ParamLayout {
    std::vector<ParamSlice> slices;
    std::size_t total = 0;

    bool operator==(const ParamLayout&) const = default;
    static ParamLayout build(const Scene& scene, const StyleConfig& style);
};

struct ParamVector {
    ParamLayout layout;
    std::vector<double> values;
};

// Gradient w.r.t. the packed parameters; same layout as pack_params output.
using ParamGradient = ParamVector;

// Corner points of a polygon-constrained path (every third control point).
std::vector<ControlPoint> polygon_corners(const Path& path);
// Rebuild the cubic chain of a polygon path from its corners.
void set_polygon_corners(Path& path, const std::vector<ControlPoint>& corners);

ParamVector pack_params(const Scene& scene, const StyleConfig& style);
Scene unpack_params(const ParamVector& vec, const Scene& scene, const StyleConfig& style);

std::vector<std::string> validate_scene(const Scene& scene, const StyleConfig& style);

// Flatten a path to a polyline within tol canvas units of the true curve.
// Closed paths yield closed polylines (last vertex equals the first).
std::vector<FlatVertex> flatten_path(const Path& path, double tol);

// Shoelace area of the flattened outline; sign encodes orientation.
double path_signed_area(const Path& path, double tol = 0.05);

// Raw (unprojected) per-path gradients as produced by the rasterizer:
// all control point coordinates plus every paint scalar, before the style
// layout picks and combines the trainable ones.
struct PathRawGrad {
    std::vector<double> d_points;  // 2m, interleaved x,y
    double d_fill[4] = {0, 0, 0, 0};
    double d_stroke_rgb[3] = {0, 0, 0};
    double d_stroke_alpha = 0.0;
    double d_stroke_width = 0.0;
};

// Project raw per-path gradients into the packed layout (polygon styles
// reduce point gradients onto their corners).
ParamGradient project_raw_grad(const Scene& scene, const StyleConfig& style,
                               const std::vector<PathRawGrad>& raw);

}  // namespace vectordream
