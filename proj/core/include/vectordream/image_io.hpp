#pragma once

#include <string>

#include "vectordream/grid.hpp"
#include "vectordream/raster.hpp"

namespace vectordream {

// 8-bit RGBA PNG, no color management (raw value / 255).
void write_png(const RasterImage& img, const std::string& path);
RasterImage read_png(const std::string& path);

// 16-bit grayscale PNG for attention maps, values rescaled to [0,1].
// 8-bit grayscale inputs are accepted and rescaled by 255.
void write_png_gray16(const Grid& map, const std::string& path);
Grid read_png_gray(const std::string& path);

// Dependency-free fallback: binary PPM (P6), 8-bit RGB, alpha forced to 1.
void write_ppm(const RasterImage& img, const std::string& path);
RasterImage read_ppm(const std::string& path);

// Dispatch on file extension (.png / .ppm).
RasterImage read_image(const std::string& path);
void write_image(const RasterImage& img, const std::string& path);

}  // namespace vectordream
