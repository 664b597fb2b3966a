#include "vectordream/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace vectordream {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Manifest Manifest::parse_text(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ContractError("manifest line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ContractError("manifest line " + std::to_string(lineno) + ": empty key");
        m.entries_[key] = value;
    }
    return m;
}

Manifest Manifest::parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open manifest '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
}

const std::string& Manifest::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ContractError("manifest: missing key '" + key + "'");
    return it->second;
}

std::string Manifest::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

namespace {

class Resolver {
public:
    explicit Resolver(const Manifest& m) : entries_(m.entries()) {}

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    double num(const std::string& key, double fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(key);
        char* end = nullptr;
        double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0' || !std::isfinite(v))
            throw ContractError("manifest: bad number for '" + key + "': " + it->second);
        return v;
    }

    int integer(const std::string& key, int fallback) {
        double v = num(key, fallback);
        if (v != std::floor(v)) throw ContractError("manifest: '" + key + "' must be an integer");
        return static_cast<int>(v);
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        used_.insert(key);
        try {
            return std::stoull(it->second);
        } catch (...) {
            throw ContractError("manifest: bad unsigned integer for '" + key + "'");
        }
    }

    // Region declarations: region.<label>.{kind,n_paths,m_points,tau}
    std::vector<RegionDecl> regions() {
        std::map<std::string, RegionDecl> decls;
        for (const auto& [key, value] : entries_) {
            if (key.rfind("region.", 0) != 0) continue;
            std::size_t dot = key.rfind('.');
            if (dot == 6)  // "region." with no field
                throw ContractError("manifest: malformed region key '" + key + "'");
            std::string label = key.substr(7, dot - 7);
            std::string field = key.substr(dot + 1);
            if (label.empty() || field.empty())
                throw ContractError("manifest: malformed region key '" + key + "'");
            RegionDecl& d = decls.emplace(label, RegionDecl{label, RegionKind::Foreground, 8, 0,
                                                            0.5}).first->second;
            used_.insert(key);
            if (field == "kind") {
                if (value == "foreground")
                    d.kind = RegionKind::Foreground;
                else if (value == "background")
                    d.kind = RegionKind::Background;
                else
                    throw ContractError("manifest: region kind must be foreground|background");
            } else if (field == "n_paths") {
                d.n_paths = integer(key, d.n_paths);
            } else if (field == "m_points") {
                d.m_points = integer(key, d.m_points);
            } else if (field == "tau") {
                d.tau = num(key, d.tau);
            } else {
                throw ContractError("manifest: unknown region field '" + field + "'");
            }
        }
        std::vector<RegionDecl> out;
        for (auto& [label, d] : decls) out.push_back(std::move(d));
        return out;
    }

    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [key, value] : entries_)
            if (used_.find(key) == used_.end()) unknown.push_back(key);
        if (!unknown.empty()) {
            std::string msg = "manifest: unknown key(s):";
            for (const std::string& k : unknown) msg += " " + k;
            throw ContractError(msg);
        }
    }

private:
    const std::map<std::string, std::string>& entries_;
    std::set<std::string> used_;
};

// Shortest representation that still parses back to the same double.
std::string fmt_num(double v) {
    char buf[64];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace

ResolvedRun resolve_run(const Manifest& m) {
    Resolver r(m);
    ResolvedRun out;
    RunConfig& c = out.run;

    std::string style = r.str("style", "iconography");
    auto parsed = parse_style(style);
    if (!parsed) throw ContractError("manifest: unknown style '" + style + "'");
    c.style = *parsed;

    c.k = r.integer("k", c.k);
    c.total_iters = r.integer("total_iters", c.total_iters);
    c.cfg_scale = r.num("cfg_scale", c.cfg_scale);
    c.t_min = r.num("t_min", c.t_min);
    c.t_max = r.num("t_max", c.t_max);
    c.n_paths = r.integer("n_paths", c.n_paths);
    c.m_points = r.integer("m_points", c.m_points);
    c.seed = r.u64("seed", c.seed);
    c.canvas_w = r.integer("canvas_w", c.canvas_w);
    c.canvas_h = r.integer("canvas_h", c.canvas_h);
    c.condition = r.str("condition", c.condition);

    std::string wt = r.str("w_t", "constant");
    if (wt == "constant")
        c.w_t_sigma2 = false;
    else if (wt == "sigma2")
        c.w_t_sigma2 = true;
    else
        throw ContractError("manifest: w_t must be constant|sigma2");

    std::string est = r.str("estimator", "desk");
    if (est == "desk")
        c.estimator = EstimatorKind::Desk;
    else if (est == "echo_noise")
        c.estimator = EstimatorKind::EchoNoise;
    else
        throw ContractError("manifest: estimator must be desk|echo_noise");
    c.estimator_lr = r.num("estimator.lr", c.estimator_lr);

    c.lr.warmup_start = r.num("lr.warmup_start", c.lr.warmup_start);
    c.lr.warmup_end = r.num("lr.warmup_end", c.lr.warmup_end);
    c.lr.warmup_iters = r.integer("lr.warmup_iters", c.lr.warmup_iters);
    c.lr.decay_start = r.num("lr.decay_start", c.lr.decay_start);
    c.lr.decay_end = r.num("lr.decay_end", c.lr.decay_end);
    c.lr.decay_iters = r.integer("lr.decay_iters", c.lr.decay_iters);
    c.lr.color_lr = r.num("lr.color", c.lr.color_lr);
    c.lr.width_lr = r.num("lr.width", c.lr.width_lr);

    c.adam.beta1 = r.num("adam.beta1", c.adam.beta1);
    c.adam.beta2 = r.num("adam.beta2", c.adam.beta2);
    c.adam.eps = r.num("adam.eps", c.adam.eps);

    c.reinit.opacity_floor = r.num("reinit.opacity_floor", c.reinit.opacity_floor);
    c.reinit.area_floor_frac = r.num("reinit.area_floor_frac", c.reinit.area_floor_frac);
    c.reinit.period = r.integer("reinit.period", c.reinit.period);
    c.reinit.radius_min_frac = r.num("reinit.radius_min_frac", c.reinit.radius_min_frac);
    c.reinit.radius_max_frac = r.num("reinit.radius_max_frac", c.reinit.radius_max_frac);

    c.refl.lambda_inner = r.num("refl.lambda_inner", c.refl.lambda_inner);
    c.refl.lambda_r = r.num("refl.lambda_r", c.refl.lambda_r);
    c.refl.samples_w = r.integer("refl.samples", c.refl.samples_w);
    c.refl.keep_fraction = r.num("refl.keep_fraction", c.refl.keep_fraction);
    c.refl.ddim_steps = r.integer("refl.ddim_steps", c.refl.ddim_steps);
    c.refl.margin = r.num("refl.margin", c.refl.margin);
    c.refl.active_until_iter = r.integer("refl.active_until", c.refl.active_until_iter);
    c.refl.period = r.integer("refl.period", c.refl.period);

    c.render_opts.soft_band = r.num("render.soft_band", c.render_opts.soft_band);
    c.render_opts.supersample = r.integer("render.supersample", c.render_opts.supersample);
    c.render_opts.curve_samples = r.integer("render.curve_samples", c.render_opts.curve_samples);

    std::string aug = r.str("augment", "none");
    if (aug == "none")
        c.augment.crop_resize = false;
    else if (aug == "crop_resize")
        c.augment.crop_resize = true;
    else
        throw ContractError("manifest: augment must be none|crop_resize");
    c.augment.min_scale = r.num("augment.min_scale", c.augment.min_scale);
    c.augment.max_scale = r.num("augment.max_scale", c.augment.max_scale);

    c.init_radius_frac = r.num("init.radius_frac", c.init_radius_frac);
    c.init_stroke_width = r.num("init.stroke_width", c.init_stroke_width);
    c.seed_jitter = r.num("seed_jitter", c.seed_jitter);
    c.checkpoint_every = r.integer("checkpoint_every", c.checkpoint_every);

    SiveConfig& s = out.sive;
    s.iters = r.integer("sive.iters", s.iters);
    s.temperature = r.num("sive.temperature", s.temperature);
    s.radius_frac = r.num("sive.radius_frac", s.radius_frac);
    s.seed = c.seed;
    s.lr = c.lr;
    s.adam = c.adam;
    s.render_opts = c.render_opts;
    s.init_stroke_width = c.init_stroke_width;

    out.oracle_spec = r.str("oracle", "");
    out.reward_spec = r.str("reward", "none");
    out.regions = r.regions();

    r.finish();

    if (c.k < 1 || c.total_iters < 0 || c.n_paths < 0)
        throw ContractError("manifest: k must be >= 1 and counts nonnegative");
    if (!(c.t_min > 0.0 && c.t_max < 1.0 && c.t_min < c.t_max))
        throw ContractError("manifest: t range must satisfy 0 < t_min < t_max < 1");
    if (!(c.cfg_scale >= 0.0)) throw ContractError("manifest: cfg_scale must be >= 0");
    if (c.canvas_w < 1 || c.canvas_h < 1) throw ContractError("manifest: bad canvas dims");
    int n_bg = 0;
    for (const RegionDecl& d : out.regions)
        if (d.kind == RegionKind::Background) ++n_bg;
    if (!out.regions.empty() && n_bg != 1)
        throw ContractError("manifest: exactly one background region required");
    return out;
}

Manifest manifest_from(const ResolvedRun& r) {
    Manifest m;
    const RunConfig& c = r.run;
    m.set("style", to_string(c.style));
    m.set("k", std::to_string(c.k));
    m.set("total_iters", std::to_string(c.total_iters));
    m.set("cfg_scale", fmt_num(c.cfg_scale));
    m.set("t_min", fmt_num(c.t_min));
    m.set("t_max", fmt_num(c.t_max));
    m.set("n_paths", std::to_string(c.n_paths));
    m.set("m_points", std::to_string(c.m_points));
    m.set("seed", std::to_string(c.seed));
    m.set("canvas_w", std::to_string(c.canvas_w));
    m.set("canvas_h", std::to_string(c.canvas_h));
    m.set("condition", c.condition);
    m.set("w_t", c.w_t_sigma2 ? "sigma2" : "constant");
    m.set("estimator", c.estimator == EstimatorKind::Desk ? "desk" : "echo_noise");
    m.set("estimator.lr", fmt_num(c.estimator_lr));
    m.set("lr.warmup_start", fmt_num(c.lr.warmup_start));
    m.set("lr.warmup_end", fmt_num(c.lr.warmup_end));
    m.set("lr.warmup_iters", std::to_string(c.lr.warmup_iters));
    m.set("lr.decay_start", fmt_num(c.lr.decay_start));
    m.set("lr.decay_end", fmt_num(c.lr.decay_end));
    m.set("lr.decay_iters", std::to_string(c.lr.decay_iters));
    m.set("lr.color", fmt_num(c.lr.color_lr));
    m.set("lr.width", fmt_num(c.lr.width_lr));
    m.set("adam.beta1", fmt_num(c.adam.beta1));
    m.set("adam.beta2", fmt_num(c.adam.beta2));
    m.set("adam.eps", fmt_num(c.adam.eps));
    m.set("reinit.opacity_floor", fmt_num(c.reinit.opacity_floor));
    m.set("reinit.area_floor_frac", fmt_num(c.reinit.area_floor_frac));
    m.set("reinit.period", std::to_string(c.reinit.period));
    m.set("reinit.radius_min_frac", fmt_num(c.reinit.radius_min_frac));
    m.set("reinit.radius_max_frac", fmt_num(c.reinit.radius_max_frac));
    m.set("refl.lambda_inner", fmt_num(c.refl.lambda_inner));
    m.set("refl.lambda_r", fmt_num(c.refl.lambda_r));
    m.set("refl.samples", std::to_string(c.refl.samples_w));
    m.set("refl.keep_fraction", fmt_num(c.refl.keep_fraction));
    m.set("refl.ddim_steps", std::to_string(c.refl.ddim_steps));
    m.set("refl.margin", fmt_num(c.refl.margin));
    m.set("refl.active_until", std::to_string(c.refl.active_until_iter));
    m.set("refl.period", std::to_string(c.refl.period));
    m.set("render.soft_band", fmt_num(c.render_opts.soft_band));
    m.set("render.supersample", std::to_string(c.render_opts.supersample));
    m.set("render.curve_samples", std::to_string(c.render_opts.curve_samples));
    m.set("augment", c.augment.crop_resize ? "crop_resize" : "none");
    m.set("augment.min_scale", fmt_num(c.augment.min_scale));
    m.set("augment.max_scale", fmt_num(c.augment.max_scale));
    m.set("init.radius_frac", fmt_num(c.init_radius_frac));
    m.set("init.stroke_width", fmt_num(c.init_stroke_width));
    m.set("seed_jitter", fmt_num(c.seed_jitter));
    m.set("checkpoint_every", std::to_string(c.checkpoint_every));
    m.set("sive.iters", std::to_string(r.sive.iters));
    m.set("sive.temperature", fmt_num(r.sive.temperature));
    m.set("sive.radius_frac", fmt_num(r.sive.radius_frac));
    m.set("oracle", r.oracle_spec);
    m.set("reward", r.reward_spec);
    for (const RegionDecl& d : r.regions) {
        std::string base = "region." + d.label + ".";
        m.set(base + "kind", d.kind == RegionKind::Background ? "background" : "foreground");
        m.set(base + "n_paths", std::to_string(d.n_paths));
        m.set(base + "m_points", std::to_string(d.m_points));
        m.set(base + "tau", fmt_num(d.tau));
    }
    return m;
}

}  // namespace vectordream
