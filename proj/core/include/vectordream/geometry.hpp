#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "vectordream/error.hpp"

namespace vectordream {

// A 2D point in canvas units. Canvas x grows right, y grows down (SVG
// convention); points may lie outside the canvas and are clipped at render
// time.
struct ControlPoint {
    double x = 0.0;
    double y = 0.0;

    ControlPoint() = default;
    ControlPoint(double px, double py) : x(px), y(py) {}

    ControlPoint operator+(const ControlPoint& o) const { return {x + o.x, y + o.y}; }
    ControlPoint operator-(const ControlPoint& o) const { return {x - o.x, y - o.y}; }
    ControlPoint operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const ControlPoint& o) const = default;
};

inline double dot(const ControlPoint& a, const ControlPoint& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const ControlPoint& a) { return std::sqrt(dot(a, a)); }
inline double norm2(const ControlPoint& a) { return dot(a, a); }

using CubicSegment = std::array<ControlPoint, 4>;

// Cubic Bernstein basis at t.
inline std::array<double, 4> bernstein3(double t) {
    double u = 1.0 - t;
    return {u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t};
}

// Evaluate one cubic segment at t in [0,1].
ControlPoint bezier_point(const CubicSegment& seg, double t);

// One polyline vertex produced by flattening, remembering where on the
// source curve it came from (needed for the rasterizer's reverse pass).
struct FlatVertex {
    ControlPoint p;
    int segment = 0;  // index of the cubic segment within the path
    double t = 0.0;   // curve parameter on that segment
};

// Adaptive flattening of a single segment. Appends vertices strictly after
// the segment start (the caller owns the start vertex).
void flatten_segment(const CubicSegment& seg, double tol, int segment_index,
                     std::vector<FlatVertex>& out);

// Fixed-grid sampling of a segment: vertices at t = 1/n .. 1. Structure is
// independent of the control points, which keeps the rendered image a
// continuous function of them.
void sample_segment(const CubicSegment& seg, int n, int segment_index,
                    std::vector<FlatVertex>& out);

// Distance from p to the segment [a,b]; writes the clamped projection
// parameter h so callers can chain derivatives through the endpoints.
double point_segment_distance(const ControlPoint& p, const ControlPoint& a,
                              const ControlPoint& b, double& h);

// Shoelace area of a polyline (implicitly closed).
double polyline_signed_area(const std::vector<FlatVertex>& poly);

}  // namespace vectordream
