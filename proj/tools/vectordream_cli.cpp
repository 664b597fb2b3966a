// vectordream: text-free vector graphics synthesis pipeline.
// Subcommands: vectorize, synthesize, render, compose, gradcheck, psnr.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "vectordream/image_io.hpp"
#include "vectordream/manifest.hpp"
#include "vectordream/svg.hpp"

namespace fs = std::filesystem;
using namespace vectordream;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> style;
    std::optional<int> iters;
    std::optional<int> k;
    std::optional<std::string> oracle;
    std::optional<std::string> reward;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Override the manifest seed");
        cmd->add_option("--style", style, "Override the vector style");
        cmd->add_option("--iters", iters, "Override total iterations");
        cmd->add_option("--k", k, "Override the particle count");
        cmd->add_option("--oracle", oracle, "Override the score oracle spec");
        cmd->add_option("--reward", reward, "Override the reward spec");
    }
    void apply(Manifest& m) const {
        if (seed) m.set("seed", std::to_string(*seed));
        if (style) m.set("style", *style);
        if (iters) m.set("total_iters", std::to_string(*iters));
        if (k) m.set("k", std::to_string(*k));
        if (oracle) m.set("oracle", *oracle);
        if (reward) m.set("reward", *reward);
    }
};

Manifest load_manifest(const std::string& path) {
    if (path.empty()) return Manifest{};
    return Manifest::parse_file(path);
}

// File references inside specs become absolute so the resolved manifest a
// run writes next to its outputs reproduces the run from anywhere.
std::string absolutize_spec(const std::string& spec, const fs::path& base) {
    std::size_t colon = spec.find(':');
    if (colon == std::string::npos) return spec;
    fs::path file(spec.substr(colon + 1));
    if (file.is_absolute() || base.empty()) return spec;
    return spec.substr(0, colon + 1) + fs::absolute(base / file).lexically_normal().string();
}

void absolutize_file_specs(ResolvedRun& rr, const std::string& manifest_path) {
    fs::path base = manifest_path.empty() ? fs::current_path()
                                          : fs::absolute(fs::path(manifest_path)).parent_path();
    rr.oracle_spec = absolutize_spec(rr.oracle_spec, base);
    rr.reward_spec = absolutize_spec(rr.reward_spec, base);
}

Grid encode_file(const std::string& path) {
    IdentityCodec codec;
    return codec.encode(read_image(path));
}

std::unique_ptr<ScoreOracle> build_oracle(const std::string& spec, const fs::path& base) {
    auto resolve = [&](const std::string& p) {
        fs::path f(p);
        return (f.is_absolute() || base.empty()) ? f : base / f;
    };
    NoiseSchedule sched = NoiseSchedule::scaled_linear();
    if (spec.rfind("delta:", 0) == 0) {
        return std::make_unique<DeltaOracle>(encode_file(resolve(spec.substr(6)).string()),
                                             sched);
    }
    if (spec.rfind("gmm:", 0) == 0) {
        fs::path gm_path = resolve(spec.substr(4));
        Manifest gm = Manifest::parse_file(gm_path.string());
        fs::path gm_base = gm_path.parent_path();
        double spread = 0.1;
        std::vector<Grid> means;
        std::vector<double> weights;
        for (const auto& [key, value] : gm.entries()) {
            if (key == "spread") {
                spread = std::strtod(value.c_str(), nullptr);
            } else if (key.rfind("mean.", 0) == 0) {
                std::size_t sp = value.find_last_of(" \t");
                if (sp == std::string::npos)
                    throw ContractError("gmm manifest: mean entries are '<image> <weight>'");
                fs::path mean_file(value.substr(0, sp));
                if (!mean_file.is_absolute()) mean_file = gm_base / mean_file;
                means.push_back(encode_file(mean_file.string()));
                weights.push_back(std::strtod(value.c_str() + sp + 1, nullptr));
            } else {
                throw ContractError("gmm manifest: unknown key '" + key + "'");
            }
        }
        return std::make_unique<GmmOracle>(std::move(means), std::move(weights), spread, sched);
    }
    throw ContractError("oracle spec must be delta:<image> or gmm:<manifest>, got '" + spec + "'");
}

std::unique_ptr<RewardOracle> build_reward(const std::string& spec, const fs::path& base) {
    if (spec.empty() || spec == "none") return nullptr;
    if (spec == "colorfulness")
        return std::make_unique<StubReward>(StubReward::colorfulness());
    if (spec.rfind("target-affinity:", 0) == 0) {
        fs::path f(spec.substr(16));
        if (!f.is_absolute() && !base.empty()) f = base / f;
        return std::make_unique<StubReward>(StubReward::target_affinity(read_image(f.string())));
    }
    throw ContractError("reward spec must be none, colorfulness or target-affinity:<image>");
}

int cmd_vectorize(const std::string& target_path, const std::string& maps_dir,
                  const std::string& manifest_path, const std::string& out_dir,
                  const Overrides& ov) {
    Manifest m = load_manifest(manifest_path);
    ov.apply(m);
    ResolvedRun rr = resolve_run(m);
    if (rr.regions.empty()) throw ContractError("vectorize needs at least one region.* entry");

    RasterImage target = read_image(target_path);

    std::vector<RegionSpec> regions;
    std::vector<AttentionMap> fg_maps;
    const RegionDecl* bg_decl = nullptr;
    for (const RegionDecl& d : rr.regions) {
        if (d.kind == RegionKind::Background) {
            bg_decl = &d;
            continue;
        }
        fs::path map_file = fs::path(maps_dir) / (d.label + ".png");
        if (!fs::exists(map_file)) throw IoError("missing attention map '" + map_file.string() + "'");
        AttentionMap map{read_png_gray(map_file.string()), d.label};
        if (map.values.width != target.width || map.values.height != target.height)
            throw ContractError("attention map '" + d.label + "' does not match target dims");
        StyleConfig style = StyleConfig::make(rr.run.style);
        int m_points = d.m_points > 0 ? d.m_points
                       : style.shape == ShapeConstraint::OpenCubic ? 13 : 12;
        regions.push_back({d.label, std::move(map), d.n_paths, m_points,
                           RegionKind::Foreground, d.tau});
        fg_maps.push_back(regions.back().map);
    }
    if (!bg_decl) throw ContractError("vectorize needs a background region");
    {
        const RegionDecl& d = *bg_decl;
        fs::path map_file = fs::path(maps_dir) / (d.label + ".png");
        AttentionMap map;
        if (fs::exists(map_file)) {
            map = {read_png_gray(map_file.string()), d.label};
            if (map.values.width != target.width || map.values.height != target.height)
                throw ContractError("attention map '" + d.label + "' does not match target dims");
        } else {
            if (fg_maps.empty()) throw ContractError("background map requires foreground maps");
            map = background_map(fg_maps);
            map.token_label = d.label;
        }
        StyleConfig style = StyleConfig::make(rr.run.style);
        int m_points = d.m_points > 0 ? d.m_points
                       : style.shape == ShapeConstraint::OpenCubic ? 13 : 12;
        regions.push_back({d.label, std::move(map), d.n_paths, m_points,
                           RegionKind::Background, d.tau});
    }

    StyleConfig style = StyleConfig::make(rr.run.style);
    SiveResult result = sive_optimize(target, regions, style, rr.sive);

    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "sive.svg").string(),
                    write_svg(scene_to_doc(result.scene)));
    write_png(render(result.scene, rr.sive.render_opts),
              (fs::path(out_dir) / "render.png").string());
    std::string report;
    for (std::size_t i = 0; i < result.losses.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof line, "%zu %.9e\n", i, result.losses[i]);
        report += line;
    }
    write_text_file((fs::path(out_dir) / "report.txt").string(), report);
    write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest_from(rr).to_text());
    return kExitOk;
}

int cmd_synthesize(const std::string& manifest_path, const std::string& out_dir,
                   const Overrides& ov) {
    Manifest m = load_manifest(manifest_path);
    ov.apply(m);
    ResolvedRun rr = resolve_run(m);
    if (rr.oracle_spec.empty())
        throw ContractError("synthesize needs an oracle (manifest key 'oracle' or --oracle)");
    absolutize_file_specs(rr, manifest_path);

    auto oracle = build_oracle(rr.oracle_spec, {});
    auto reward = build_reward(rr.reward_spec, {});

    RunConfig cfg = rr.run;
    cfg.out_dir = out_dir;
    fs::create_directories(out_dir);

    VpsdOutcome outcome = vpsd_run(cfg, *oracle, reward.get());

    for (const Particle& p : outcome.set.particles)
        write_text_file((fs::path(out_dir) / ("particle_" + std::to_string(p.id) + ".svg")).string(),
                        write_svg(scene_to_doc(p.scene)));
    write_text_file((fs::path(out_dir) / "manifest.txt").string(), manifest_from(rr).to_text());
    return kExitOk;
}

int cmd_render(const std::string& svg_path, const std::string& out_path,
               const RenderOptions& opts) {
    SvgDocument doc = parse_svg(read_text_file(svg_path));
    write_image(render(doc_to_scene(doc), opts), out_path);
    return kExitOk;
}

struct ComposeOp {
    int input = 0;
    TransformOp op;
};

int cmd_compose(const std::vector<std::string>& inputs, const std::string& out_path,
                const std::vector<std::string>& op_specs, int out_w, int out_h) {
    std::vector<std::pair<SvgDocument, std::vector<TransformOp>>> docs;
    for (const std::string& path : inputs)
        docs.emplace_back(parse_svg(read_text_file(path)), std::vector<TransformOp>{});

    for (const std::string& spec : op_specs) {
        // <input>:translate:<dx>:<dy>[:<group>] | <input>:scale:<sx>:<sy>[:<group>]
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            std::size_t colon = spec.find(':', start);
            if (colon == std::string::npos) {
                parts.push_back(spec.substr(start));
                break;
            }
            parts.push_back(spec.substr(start, colon - start));
            start = colon + 1;
        }
        if (parts.size() < 4 || parts.size() > 5)
            throw ContractError("bad --op '" + spec +
                                "' (want <input>:translate|scale:<a>:<b>[:<group>])");
        int idx = std::atoi(parts[0].c_str());
        if (idx < 0 || idx >= static_cast<int>(docs.size()))
            throw ContractError("--op input index out of range in '" + spec + "'");
        TransformOp op;
        if (parts[1] == "translate")
            op.kind = TransformOp::Kind::Translate;
        else if (parts[1] == "scale")
            op.kind = TransformOp::Kind::Scale;
        else
            throw ContractError("--op kind must be translate or scale in '" + spec + "'");
        op.a = std::strtod(parts[2].c_str(), nullptr);
        op.b = std::strtod(parts[3].c_str(), nullptr);
        if (parts.size() == 5) op.target_group = parts[4];
        docs[idx].second.push_back(op);
    }

    write_text_file(out_path, write_svg(compose(docs, out_w, out_h)));
    return kExitOk;
}

// Seeded random scene for gradient checking. Paints stay away from the [0,1]
// clamp boundaries so central differences are two-sided, and the geometry is
// generic and non-self-crossing: the distance field has subgradient kinks on
// its medial ties, and a finite-difference probe straddling one measures the
// kink, not the gradient. Star-shaped blobs and x-sorted strokes keep
// boundary branches out of each other's coverage band.
Scene gradcheck_scene(int index, std::uint64_t seed, PrimitiveStyle style_kind, int max_paths) {
    Rng rng(seed, 77 + static_cast<std::uint64_t>(index));
    StyleConfig style = StyleConfig::make(style_kind);
    Scene scene;
    scene.canvas_w = scene.canvas_h = 64;
    int n_paths = 1 + rng.uniform_int(max_paths);
    auto interior_color = [&] {
        return ColorRGBA{0.1 + 0.8 * rng.uniform(), 0.1 + 0.8 * rng.uniform(),
                         0.1 + 0.8 * rng.uniform(), 0.3 + 0.6 * rng.uniform()};
    };
    for (int i = 0; i < n_paths; ++i) {
        Path p;
        double cx = rng.uniform(14.0, 50.0);
        double cy = rng.uniform(14.0, 50.0);
        if (style.shape == ShapeConstraint::OpenCubic) {
            // Sweeping stroke: x strictly increasing, no folds.
            p.closed = false;
            double x = rng.uniform(4.0, 16.0);
            for (int j = 0; j < 7; ++j) {
                p.points.push_back({x, rng.uniform(8.0, 56.0)});
                x += rng.uniform(4.0, 9.0);
            }
            StrokeStyle st;
            st.color = interior_color();
            st.width = 2.0 + 2.0 * rng.uniform();
            p.stroke = st;
        } else if (style.shape == ShapeConstraint::Polygon ||
                   style.shape == ShapeConstraint::AxisAlignedSquare) {
            // Convex quad from sorted angles.
            p.closed = true;
            std::vector<ControlPoint> corners;
            for (int j = 0; j < 4; ++j) {
                double ang = 2.0 * kPi * (j + rng.uniform(0.1, 0.9)) / 4.0;
                double r = rng.uniform(6.0, 14.0);
                corners.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang)});
            }
            set_polygon_corners(p, corners);
            p.fill = interior_color();
        } else {
            // Star-shaped blob: control points at sorted angles, radii varied.
            p.closed = true;
            for (int j = 0; j < 6; ++j) {
                double ang = 2.0 * kPi * (j + rng.uniform(0.1, 0.9)) / 6.0;
                double r = rng.uniform(5.0, 14.0);
                p.points.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang)});
            }
            p.fill = interior_color();
        }
        scene.paths.push_back(std::move(p));
    }
    return scene;
}

int cmd_gradcheck(std::uint64_t seed, int n_scenes, bool corrupt, double h, double tol) {
    const PrimitiveStyle styles[] = {PrimitiveStyle::Iconography, PrimitiveStyle::Painting,
                                     PrimitiveStyle::Sketch, PrimitiveStyle::LowPoly};
    RenderOptions opts;
    int checked = 0, failed = 0;
    double worst = 0.0;
    int worst_scene = -1, worst_coord = -1;
    double worst_analytic = 0.0, worst_fd = 0.0;

    for (int i = 0; i < n_scenes; ++i) {
        PrimitiveStyle style_kind = styles[i % 4];
        StyleConfig style = StyleConfig::make(style_kind);
        Scene scene = gradcheck_scene(i, seed, style_kind, 8);

        Rng rng(seed ^ 0xad101ull, 13 + static_cast<std::uint64_t>(i));
        RasterImage adjoint(scene.canvas_w, scene.canvas_h);
        for (double& v : adjoint.data) v = rng.uniform(-1.0, 1.0);

        ParamGradient analytic = render_vjp(scene, opts, adjoint, style);
        if (corrupt && !analytic.values.empty()) analytic.values[0] += 0.5;
        ParamGradient fd = finite_diff_grad(scene, opts, adjoint, style, h);

        for (std::size_t j = 0; j < analytic.values.size(); ++j) {
            double a = analytic.values[j];
            double f = fd.values[j];
            if (std::abs(a) <= 1e-6) continue;
            ++checked;
            double rel = std::abs(a - f) / std::max(std::abs(a), std::abs(f));
            if (rel > worst) {
                worst = rel;
                worst_scene = i;
                worst_coord = static_cast<int>(j);
                worst_analytic = a;
                worst_fd = f;
            }
            if (rel > tol) {
                ++failed;
                std::printf("fail: scene %d (%s) coord %zu analytic %+.6e fd %+.6e rel %.3e\n",
                            i, to_string(style_kind), j, a, f, rel);
            }
        }
    }

    std::printf("gradcheck: %d scenes, %d coordinates checked, %d over tolerance %.3g\n",
                n_scenes, checked, failed, tol);
    if (worst_scene >= 0)
        std::printf("worst: scene %d coord %d analytic %.9e fd %.9e rel %.3e\n", worst_scene,
                    worst_coord, worst_analytic, worst_fd, worst);
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_psnr(const std::string& a_path, const std::string& b_path) {
    double db = psnr(read_image(a_path), read_image(b_path));
    std::printf("%.6f\n", db);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vectordream: semantic image vectorization and particle-based SVG synthesis"};
    app.require_subcommand(1);

    // vectorize
    auto* vec = app.add_subcommand("vectorize", "SIVE: vectorize an image guided by attention maps");
    std::string vec_target, vec_maps, vec_manifest, vec_out = "out";
    Overrides vec_ov;
    vec->add_option("--target", vec_target, "Target image (png/ppm)")->required();
    vec->add_option("--maps", vec_maps, "Directory with <label>.png attention maps")->required();
    vec->add_option("--manifest", vec_manifest, "Run manifest (key=value)");
    vec->add_option("--out", vec_out, "Output directory");
    vec_ov.add_flags(vec);

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "VPSD: synthesize k SVG particles from an oracle");
    std::string syn_manifest, syn_out = "out";
    Overrides syn_ov;
    syn->add_option("--manifest", syn_manifest, "Run manifest (key=value)");
    syn->add_option("--out", syn_out, "Output directory");
    syn_ov.add_flags(syn);

    // render
    auto* ren = app.add_subcommand("render", "Rasterize an SVG to png/ppm");
    std::string ren_in, ren_out = "out.png";
    RenderOptions ren_opts;
    ren->add_option("input", ren_in, "Input SVG")->required();
    ren->add_option("--out", ren_out, "Output image path");
    ren->add_option("--supersample", ren_opts.supersample, "Samples per axis per pixel");
    ren->add_option("--soft-band", ren_opts.soft_band, "Coverage ramp width in pixels");
    ren->add_option("--curve-samples", ren_opts.curve_samples, "Polyline vertices per segment");

    // compose
    auto* cmp = app.add_subcommand("compose", "Concatenate SVG documents with baked transforms");
    std::vector<std::string> cmp_inputs, cmp_ops;
    std::string cmp_out = "composed.svg";
    int cmp_w = 0, cmp_h = 0;
    cmp->add_option("inputs", cmp_inputs, "Input SVG files (later ones on top)")->required();
    cmp->add_option("--out", cmp_out, "Output SVG path");
    cmp->add_option("--op", cmp_ops,
                    "Transform op: <input>:translate|scale:<a>:<b>[:<group>] (repeatable)");
    cmp->add_option("--width", cmp_w, "Output canvas width (default: first input)");
    cmp->add_option("--height", cmp_h, "Output canvas height");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
    std::uint64_t gc_seed = 0;
    int gc_scenes = 5;
    bool gc_corrupt = false;
    double gc_h = 1e-3, gc_tol = 2e-2;
    gc->add_option("--seed", gc_seed, "Scene generator seed");
    gc->add_option("--scenes", gc_scenes, "Number of random scenes");
    gc->add_option("--step", gc_h, "Finite-difference step");
    gc->add_option("--tol", gc_tol, "Relative error tolerance");
    gc->add_flag("--corrupt", gc_corrupt, "Corrupt one gradient entry (harness self-test)");

    // psnr
    auto* ps = app.add_subcommand("psnr", "Peak signal-to-noise ratio between two images");
    std::string ps_a, ps_b;
    ps->add_option("a", ps_a, "First image")->required();
    ps->add_option("b", ps_b, "Second image")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (vec->parsed()) return cmd_vectorize(vec_target, vec_maps, vec_manifest, vec_out, vec_ov);
        if (syn->parsed()) return cmd_synthesize(syn_manifest, syn_out, syn_ov);
        if (ren->parsed()) return cmd_render(ren_in, ren_out, ren_opts);
        if (cmp->parsed()) return cmd_compose(cmp_inputs, cmp_out, cmp_ops, cmp_w, cmp_h);
        if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_scenes, gc_corrupt, gc_h, gc_tol);
        if (ps->parsed()) return cmd_psnr(ps_a, ps_b);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return kExitOk;
}
