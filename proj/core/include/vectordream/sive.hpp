#pragma once

#include <string>
#include <vector>

#include "vectordream/grid.hpp"
#include "vectordream/optim.hpp"
#include "vectordream/raster.hpp"
#include "vectordream/rng.hpp"

namespace vectordream {

// Per-object cross-attention scores. The maps arrive as files; how they were
// produced is out of scope here.
struct AttentionMap {
    Grid values;  // 1 channel, >= 0
    std::string token_label;
};

// 1-channel grid of {0,1}.
struct BinaryMask {
    Grid values;
    std::string label;

    double at(int x, int y) const { return values.at(x, y, 0); }
};

enum class RegionKind { Foreground, Background };

struct RegionSpec {
    std::string label;
    AttentionMap map;
    int n_paths = 0;
    int m_points = 12;
    RegionKind kind = RegionKind::Foreground;
    double tau = 0.5;  // mask threshold after min-max normalization
};

// Background score per pixel: max(0, 1 - sum of foreground maps).
AttentionMap background_map(const std::vector<AttentionMap>& fg_maps);

// Spatial softmax with temperature; result sums to 1.
Grid softmax_grid(const AttentionMap& map, double temperature);

// Min-max normalize, then 1 where value > tau. A constant map thresholds to
// all ones (with a warning on stderr).
BinaryMask threshold_mask(const AttentionMap& map, double tau);

// Threshold every region and make the foreground masks disjoint: contested
// pixels go to the highest (normalized) score; the background mask is the
// complement of the foreground union. Order matches `regions`.
std::vector<BinaryMask> make_disjoint_masks(const std::vector<RegionSpec>& regions);

// Region-tagged path initialization: first control point sampled from `grid`
// renormalized over the mask support, remaining points uniform in a disc of
// radius radius_frac * min(W,H) around it. Paint comes from `target` under
// the first point when given, else from rng.
std::vector<Path> init_region_paths(const Grid& prob, const BinaryMask& mask,
                                    const RegionSpec& spec, double radius_frac, Rng& rng,
                                    const StyleConfig& style, const RasterImage* target,
                                    double init_stroke_width = 1.5);

// Masked reconstruction: loss = sum_i sum_px (M_i*target - M_i*render)^2 over
// RGB, plus its adjoint d loss / d render.
struct SiveLoss {
    double loss = 0.0;
    RasterImage adjoint;
};
SiveLoss sive_loss(const RasterImage& target, const RasterImage& render,
                   const std::vector<BinaryMask>& masks);

struct SiveConfig {
    int iters = 500;
    double temperature = 0.5;
    double radius_frac = 0.05;
    double init_stroke_width = 1.5;
    std::uint64_t seed = 0;
    LrSchedule lr;
    AdamConfig adam;
    RenderOptions render_opts;
    // Project control points back into the canvas after each step. Path
    // portions outside the canvas are invisible to every region's masked
    // loss, so without the projection unused geometry drifts away freely.
    bool clamp_points_to_canvas = true;
    // Joint mode: every path follows the sum of all masked losses, so paths
    // intruding into a foreign region feel that region's reconstruction
    // error and get pushed back out. Per-region mode restricts each path to
    // its own region's loss (foreign coverage becomes invisible to it).
    bool joint_loss = true;
    // Scale applied to the control-point schedule; reconstruction wants
    // gentler point motion than score distillation.
    double point_lr_scale = 0.3;
    // Optimize only these region labels, freezing the rest (empty = all).
    std::vector<std::string> active_labels;
};

struct SiveResult {
    Scene scene;
    std::vector<BinaryMask> masks;
    std::vector<double> losses;  // one entry per iteration
};

// Full SIVE stage: initialize paths per region (background at the bottom of
// the z-order), then optimize all regions jointly under the masked loss.
SiveResult sive_optimize(const RasterImage& target, const std::vector<RegionSpec>& regions,
                         const StyleConfig& style, const SiveConfig& cfg);

}  // namespace vectordream
