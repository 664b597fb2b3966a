#include "vectordream/geometry.hpp"

namespace vectordream {

ControlPoint bezier_point(const CubicSegment& seg, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ContractError("bezier_point: t outside [0,1]");
    auto b = bernstein3(t);
    return seg[0] * b[0] + seg[1] * b[1] + seg[2] * b[2] + seg[3] * b[3];
}

namespace {

double dist_to_chord(const ControlPoint& p, const ControlPoint& a, const ControlPoint& b) {
    ControlPoint ab = b - a;
    double len2 = norm2(ab);
    if (len2 < 1e-24) return norm(p - a);
    // Unclamped perpendicular distance to the chord line.
    double cross = (p.x - a.x) * ab.y - (p.y - a.y) * ab.x;
    return std::abs(cross) / std::sqrt(len2);
}

void subdivide(const CubicSegment& seg, double t0, double t1, double tol, int depth,
               int segment_index, std::vector<FlatVertex>& out) {
    double d1 = dist_to_chord(seg[1], seg[0], seg[3]);
    double d2 = dist_to_chord(seg[2], seg[0], seg[3]);
    if ((d1 <= tol && d2 <= tol) || depth >= 24) {
        out.push_back({seg[3], segment_index, t1});
        return;
    }
    // de Casteljau split at t = 0.5
    ControlPoint p01 = (seg[0] + seg[1]) * 0.5;
    ControlPoint p12 = (seg[1] + seg[2]) * 0.5;
    ControlPoint p23 = (seg[2] + seg[3]) * 0.5;
    ControlPoint p012 = (p01 + p12) * 0.5;
    ControlPoint p123 = (p12 + p23) * 0.5;
    ControlPoint mid = (p012 + p123) * 0.5;
    double tm = 0.5 * (t0 + t1);
    subdivide({seg[0], p01, p012, mid}, t0, tm, tol, depth + 1, segment_index, out);
    subdivide({mid, p123, p23, seg[3]}, tm, t1, tol, depth + 1, segment_index, out);
}

}  // namespace

void flatten_segment(const CubicSegment& seg, double tol, int segment_index,
                     std::vector<FlatVertex>& out) {
    if (!(tol > 0.0)) throw ContractError("flatten_segment: tol must be positive");
    subdivide(seg, 0.0, 1.0, tol, 0, segment_index, out);
}

void sample_segment(const CubicSegment& seg, int n, int segment_index,
                    std::vector<FlatVertex>& out) {
    for (int i = 1; i <= n; ++i) {
        double t = static_cast<double>(i) / n;
        out.push_back({bezier_point(seg, t), segment_index, t});
    }
}

double point_segment_distance(const ControlPoint& p, const ControlPoint& a,
                              const ControlPoint& b, double& h) {
    ControlPoint ab = b - a;
    double len2 = norm2(ab);
    if (len2 < 1e-24) {
        h = 0.0;
        return norm(p - a);
    }
    h = dot(p - a, ab) / len2;
    if (h < 0.0) h = 0.0;
    if (h > 1.0) h = 1.0;
    // Work relative to p: translating p, a, b together leaves ap and ab (and
    // hence the distance bits) unchanged.
    ControlPoint ap = a - p;
    return norm(ap + ab * h);
}

double polyline_signed_area(const std::vector<FlatVertex>& poly) {
    double area = 0.0;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const ControlPoint& a = poly[i].p;
        const ControlPoint& b = poly[(i + 1) % n].p;
        area += a.x * b.y - b.x * a.y;
    }
    return 0.5 * area;
}

}  // namespace vectordream
