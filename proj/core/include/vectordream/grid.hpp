#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vectordream/error.hpp"
#include "vectordream/rng.hpp"

namespace vectordream {

// Dense row-major H x W x C grid of doubles. Latents, noise tensors and
// attention values all use this; RasterImage is the fixed 4-channel case.
struct Grid {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> v;

    Grid() = default;
    Grid(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          v(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return v[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return v[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline Grid gaussian_grid(int w, int h, int c, Rng& rng) {
    Grid g(w, h, c);
    for (double& x : g.v) x = rng.normal();
    return g;
}

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) throw ContractError(std::string(what) + ": shape mismatch");
}

}  // namespace vectordream
