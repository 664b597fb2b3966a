#include <doctest.h>

#include <cmath>

#include "vectordream/sive.hpp"

using namespace vectordream;

namespace {

AttentionMap constant_map(int w, int h, double v, const std::string& label) {
    AttentionMap m;
    m.token_label = label;
    m.values = Grid(w, h, 1, v);
    return m;
}

// Gaussian bump attention centered at (cx, cy).
AttentionMap bump_map(int w, int h, double cx, double cy, double sigma, const std::string& label) {
    AttentionMap m;
    m.token_label = label;
    m.values = Grid(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            m.values.at(x, y, 0) = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return m;
}

double entropy(const Grid& p) {
    double h = 0.0;
    for (double v : p.v)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

// Two-region fixture: a bump on the left is "object", the rest background.
std::vector<RegionSpec> two_region_specs(int w, int h, int n_fg, int n_bg) {
    AttentionMap fg = bump_map(w, h, w * 0.3, h * 0.5, w * 0.12, "object");
    AttentionMap bg = background_map({fg});
    bg.token_label = "background";
    std::vector<RegionSpec> specs;
    specs.push_back({"object", fg, n_fg, 12, RegionKind::Foreground, 0.5});
    specs.push_back({"background", bg, n_bg, 12, RegionKind::Background, 0.5});
    return specs;
}

}  // namespace

TEST_CASE("background_map is the clamped complement") {
    auto ones = constant_map(4, 3, 1.0, "a");
    auto bg1 = background_map({ones});
    for (double v : bg1.values.v) CHECK(v == 0.0);

    auto zeros = constant_map(4, 3, 0.0, "a");
    auto bg2 = background_map({zeros});
    for (double v : bg2.values.v) CHECK(v == 1.0);

    auto m1 = constant_map(4, 3, 0.3, "a");
    auto m2 = constant_map(4, 3, 0.4, "b");
    auto bg3 = background_map({m1, m2});
    for (double v : bg3.values.v) CHECK(v == doctest::Approx(0.3));

    // clamp at zero when foregrounds overshoot
    auto hot = constant_map(4, 3, 0.8, "a");
    auto bg4 = background_map({hot, hot});
    for (double v : bg4.values.v) CHECK(v == 0.0);

    // where sum fg <= 1, all maps sum to exactly 1
    for (std::size_t i = 0; i < bg3.values.v.size(); ++i)
        CHECK(bg3.values.v[i] + m1.values.v[i] + m2.values.v[i] == doctest::Approx(1.0));

    CHECK_THROWS_AS(background_map({m1, constant_map(5, 3, 0.1, "c")}), ContractError);
}

TEST_CASE("softmax_grid normalizes and sharpens") {
    auto uniform = constant_map(8, 4, 0.7, "u");
    Grid p = softmax_grid(uniform, 1.0);
    for (double v : p.v) CHECK(v == doctest::Approx(1.0 / 32.0));

    auto peaked = constant_map(8, 4, 0.0, "p");
    peaked.values.at(3, 2, 0) = 10.0;
    Grid sharp = softmax_grid(peaked, 0.1);
    CHECK(sharp.at(3, 2, 0) > 0.99);

    double prev = -1.0;
    for (double tau : {0.1, 1.0, 10.0}) {
        Grid q = softmax_grid(peaked, tau);
        double sum = 0.0;
        for (double v : q.v) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        double h = entropy(q);
        CHECK(h >= prev);
        prev = h;
    }
    CHECK_THROWS_AS(softmax_grid(uniform, 0.0), ContractError);
}

TEST_CASE("threshold_mask normalizes then thresholds") {
    auto constant = constant_map(4, 4, 0.9, "c");
    BinaryMask all = threshold_mask(constant, 0.5);
    for (double v : all.values.v) CHECK(v == 1.0);

    AttentionMap two = constant_map(4, 4, 0.1, "t");
    two.values.at(1, 1, 0) = 0.9;
    two.values.at(2, 2, 0) = 0.9;
    BinaryMask m = threshold_mask(two, 0.5);
    int count = 0;
    for (double v : m.values.v) count += v == 1.0;
    CHECK(count == 2);
    CHECK(m.at(1, 1) == 1.0);
    CHECK(m.at(2, 2) == 1.0);

    // monotone: larger tau, smaller area
    auto bump = bump_map(16, 16, 8, 8, 3, "b");
    int prev_area = 16 * 16 + 1;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        BinaryMask bm = threshold_mask(bump, tau);
        int area = 0;
        for (double v : bm.values.v) area += v == 1.0;
        CHECK(area <= prev_area);
        prev_area = area;
    }
}

TEST_CASE("make_disjoint_masks partitions the canvas") {
    AttentionMap a = bump_map(24, 24, 8, 12, 4, "a");
    AttentionMap b = bump_map(24, 24, 16, 12, 4, "b");
    AttentionMap bg = background_map({a, b});
    bg.token_label = "background";
    std::vector<RegionSpec> specs{{"a", a, 1, 12, RegionKind::Foreground, 0.5},
                                  {"b", b, 1, 12, RegionKind::Foreground, 0.5},
                                  {"background", bg, 1, 12, RegionKind::Background, 0.5}};
    auto masks = make_disjoint_masks(specs);
    REQUIRE(masks.size() == 3);
    for (std::size_t px = 0; px < masks[0].values.v.size(); ++px) {
        double sum = masks[0].values.v[px] + masks[1].values.v[px] + masks[2].values.v[px];
        CHECK(sum == 1.0);  // exactly one owner per pixel
    }

    // two background regions rejected
    specs.push_back({"background2", bg, 1, 12, RegionKind::Background, 0.5});
    CHECK_THROWS_AS(make_disjoint_masks(specs), ContractError);
}

TEST_CASE("init_region_paths samples inside the mask") {
    int w = 40, h = 40;
    Grid prob(w, h, 1, 0.0);
    BinaryMask mask;
    mask.label = "m";
    mask.values = Grid(w, h, 1, 0.0);
    // mask = left half; uniform probability there
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x) {
            mask.values.at(x, y, 0) = 1.0;
            prob.at(x, y, 0) = 1.0 / (w * h);
        }
    // nonzero probability outside the mask must be ignored
    for (int y = 0; y < h; ++y)
        for (int x = w / 2; x < w; ++x) prob.at(x, y, 0) = 10.0 / (w * h);

    RegionSpec spec{"m", {}, 1, 12, RegionKind::Foreground, 0.5};
    auto style = StyleConfig::make(PrimitiveStyle::Iconography);
    Rng rng(77);
    double radius = 0.05 * std::min(w, h);

    int n = 10000;
    for (int i = 0; i < n; ++i) {
        spec.n_paths = 1;
        auto paths = init_region_paths(prob, mask, spec, 0.05, rng, style, nullptr);
        REQUIRE(paths.size() == 1);
        const ControlPoint& first = paths[0].points[0];
        CHECK(first.x < w / 2);  // inside the mask support
        CHECK(mask.at(static_cast<int>(first.x), static_cast<int>(first.y)) == 1.0);
        for (const ControlPoint& p : paths[0].points) {
            double d = norm(p - first);
            CHECK(d <= radius + 1e-9);
        }
    }
}

TEST_CASE("init_region_paths delta distribution pins the first point") {
    Grid prob(32, 32, 1, 0.0);
    prob.at(10, 12, 0) = 1.0;
    BinaryMask mask;
    mask.values = Grid(32, 32, 1, 1.0);
    RegionSpec spec{"d", {}, 8, 12, RegionKind::Foreground, 0.5};
    Rng rng(3);
    auto paths = init_region_paths(prob, mask, spec, 0.05, rng,
                                   StyleConfig::make(PrimitiveStyle::Iconography), nullptr);
    REQUIRE(paths.size() == 8);
    for (const Path& p : paths) {
        CHECK(p.points[0].x == 10.0);
        CHECK(p.points[0].y == 12.0);
        CHECK(p.region_tag == "d");
        CHECK(p.closed);
        CHECK(p.fill.has_value());
    }
}

TEST_CASE("init_region_paths edge cases") {
    Grid prob(8, 8, 1, 1.0 / 64);
    BinaryMask mask;
    mask.values = Grid(8, 8, 1, 1.0);
    RegionSpec spec{"e", {}, 0, 12, RegionKind::Foreground, 0.5};
    Rng rng(1);
    auto style = StyleConfig::make(PrimitiveStyle::Iconography);
    CHECK(init_region_paths(prob, mask, spec, 0.05, rng, style, nullptr).empty());

    BinaryMask empty;
    empty.values = Grid(8, 8, 1, 0.0);
    spec.n_paths = 1;
    CHECK_THROWS_AS(init_region_paths(prob, empty, spec, 0.05, rng, style, nullptr),
                    ContractError);
}

TEST_CASE("sive_loss matches the masked reconstruction formula") {
    RasterImage target(4, 4, {0.5, 0.5, 0.5, 1});
    RasterImage rendered = target;
    BinaryMask all;
    all.values = Grid(4, 4, 1, 1.0);

    auto zero = sive_loss(target, rendered, {all});
    CHECK(zero.loss == 0.0);

    BinaryMask none;
    none.values = Grid(4, 4, 1, 0.0);
    rendered.at(1, 1, 0) = 1.0;
    CHECK(sive_loss(target, rendered, {none}).loss == 0.0);

    // one masked pixel differing by 0.5 in one channel
    auto one = sive_loss(target, rendered, {all});
    CHECK(one.loss == doctest::Approx(0.25));
    CHECK(one.adjoint.at(1, 1, 0) == doctest::Approx(2.0 * 0.5));
    CHECK(one.adjoint.at(2, 2, 0) == 0.0);
}

TEST_CASE("sive_loss adjoint matches finite differences") {
    Rng rng(9);
    RasterImage target(6, 6);
    RasterImage rendered(6, 6);
    for (double& v : target.data) v = rng.uniform();
    for (double& v : rendered.data) v = rng.uniform();
    BinaryMask left, right;
    left.values = Grid(6, 6, 1, 0.0);
    right.values = Grid(6, 6, 1, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) (x < 3 ? left : right).values.at(x, y, 0) = 1.0;

    auto base = sive_loss(target, rendered, {left, right});
    double h = 1e-6;
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c) {
                RasterImage plus = rendered, minus = rendered;
                plus.at(x, y, c) += h;
                minus.at(x, y, c) -= h;
                double fd = (sive_loss(target, plus, {left, right}).loss -
                             sive_loss(target, minus, {left, right}).loss) /
                            (2 * h);
                CHECK(base.adjoint.at(x, y, c) == doctest::Approx(fd).epsilon(1e-4));
            }
}

TEST_CASE("sive_optimize with zero iterations returns the initialization") {
    RasterImage target(32, 32, {0.9, 0.2, 0.2, 1});
    auto specs = two_region_specs(32, 32, 4, 4);
    SiveConfig cfg;
    cfg.iters = 0;
    cfg.seed = 5;
    auto result = sive_optimize(target, specs, StyleConfig::make(PrimitiveStyle::Iconography), cfg);
    CHECK(result.scene.paths.size() == 8);
    CHECK(result.losses.empty());
    // background paths sit at the bottom of the z-order
    for (int i = 0; i < 4; ++i) CHECK(result.scene.paths[i].region_tag == "background");
    for (int i = 4; i < 8; ++i) CHECK(result.scene.paths[i].region_tag == "object");
}

TEST_CASE("sive_optimize reduces the masked loss on a synthetic target") {
    // Target: red disc on green, reconstructible by a few paths.
    Scene truth;
    truth.canvas_w = truth.canvas_h = 32;
    Path bgp;
    bgp.closed = true;
    set_polygon_corners(bgp, {{-4, -4}, {36, -4}, {36, 36}, {-4, 36}});
    bgp.fill = ColorRGBA{0.1, 0.7, 0.2, 1.0};
    truth.paths.push_back(bgp);
    Path disc;
    disc.closed = true;
    const double r = 6, c = 0.5522847498307936 * r, cx = 10, cy = 16;
    disc.points = {{cx + r, cy},     {cx + r, cy + c}, {cx + c, cy + r}, {cx, cy + r},
                   {cx - c, cy + r}, {cx - r, cy + c}, {cx - r, cy},     {cx - r, cy - c},
                   {cx - c, cy - r}, {cx, cy - r},     {cx + c, cy - r}, {cx + r, cy - c}};
    disc.fill = ColorRGBA{0.9, 0.1, 0.1, 1.0};
    truth.paths.push_back(disc);
    RasterImage target = render(truth, {});

    auto specs = two_region_specs(32, 32, 6, 6);
    SiveConfig cfg;
    cfg.iters = 120;
    cfg.seed = 2;
    auto result = sive_optimize(target, specs, StyleConfig::make(PrimitiveStyle::Iconography), cfg);
    REQUIRE(result.losses.size() == 120);
    CHECK(result.losses.back() < 0.3 * result.losses.front());
}

TEST_CASE("frozen regions stay bit-identical") {
    RasterImage target(24, 24, {0.3, 0.3, 0.8, 1});
    auto specs = two_region_specs(24, 24, 3, 3);
    SiveConfig init_cfg;
    init_cfg.iters = 0;
    init_cfg.seed = 7;
    auto style = StyleConfig::make(PrimitiveStyle::Iconography);
    Scene init = sive_optimize(target, specs, style, init_cfg).scene;

    SiveConfig cfg;
    cfg.iters = 5;
    cfg.seed = 7;
    cfg.active_labels = {"object"};
    Scene tuned = sive_optimize(target, specs, style, cfg).scene;

    for (std::size_t i = 0; i < tuned.paths.size(); ++i) {
        if (tuned.paths[i].region_tag != "background") continue;
        CHECK(tuned.paths[i].points == init.paths[i].points);
        CHECK(*tuned.paths[i].fill == *init.paths[i].fill);
    }
}
