#pragma once

#include <vector>

#include "vectordream/scene.hpp"

namespace vectordream {

// H x W x 4 image, straight (non-premultiplied) alpha, values in [0,1].
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // row-major, 4 channels

    RasterImage() = default;
    RasterImage(int w, int h, ColorRGBA c = {0, 0, 0, 0})
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 4) {
        for (std::size_t i = 0; i < data.size(); i += 4) {
            data[i] = c.r;
            data[i + 1] = c.g;
            data[i + 2] = c.b;
            data[i + 3] = c.a;
        }
    }

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 4 + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 4 + c];
    }
    ColorRGBA pixel(int x, int y) const {
        return {at(x, y, 0), at(x, y, 1), at(x, y, 2), at(x, y, 3)};
    }
    void set_pixel(int x, int y, const ColorRGBA& c) {
        at(x, y, 0) = c.r;
        at(x, y, 1) = c.g;
        at(x, y, 2) = c.b;
        at(x, y, 3) = c.a;
    }
    bool same_dims(const RasterImage& o) const {
        return width == o.width && height == o.height;
    }
};

struct RenderOptions {
    // Width in pixels of the smooth coverage ramp around every boundary.
    double soft_band = 1.0;
    // Samples per axis per pixel.
    int supersample = 2;
    // Polyline vertices per cubic segment. A fixed count keeps the flattened
    // structure independent of the control points, so the rendered image is a
    // continuous function of them.
    int curve_samples = 16;
};

// Standard source-over with the source alpha scaled by coverage.
ColorRGBA composite_over(const ColorRGBA& dst, const ColorRGBA& src, double coverage);

// Forward render: paths composited bottom-to-top over the background.
// Closed-path interiors by nonzero winding on a soft signed distance field,
// strokes by distance-to-centerline against width/2.
RasterImage render(const Scene& scene, const RenderOptions& opts = {});

// Reverse pass: propagate an image-space adjoint to the packed parameter
// gradient, restricted to the style's trainable families.
ParamGradient render_vjp(const Scene& scene, const RenderOptions& opts,
                         const RasterImage& adjoint, const StyleConfig& style);

// Central finite differences of sum(adjoint * render(theta)), one packed
// parameter at a time. The independent oracle for render_vjp.
ParamGradient finite_diff_grad(const Scene& scene, const RenderOptions& opts,
                               const RasterImage& adjoint, const StyleConfig& style, double h);

// 10*log10(1/MSE) over RGB, capped at 99 dB for identical images.
double psnr(const RasterImage& a, const RasterImage& b);

}  // namespace vectordream
