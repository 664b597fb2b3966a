#pragma once

#include <map>
#include <string>
#include <vector>

#include "vectordream/sive.hpp"
#include "vectordream/vpsd.hpp"

namespace vectordream {

// Plain-text key=value configuration. '#' starts a comment, values keep
// internal spaces, later assignments win. Unknown keys are rejected when the
// manifest is resolved.
class Manifest {
public:
    static Manifest parse_text(const std::string& text);
    static Manifest parse_file(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

    const std::map<std::string, std::string>& entries() const { return entries_; }

    // Deterministic serialization: sorted key=value lines.
    std::string to_text() const;

private:
    std::map<std::string, std::string> entries_;
};

struct RegionDecl {
    std::string label;
    RegionKind kind = RegionKind::Foreground;
    int n_paths = 8;
    int m_points = 0;  // 0 = style default
    double tau = 0.5;
};

// Everything a run needs, with defaults applied.
struct ResolvedRun {
    RunConfig run;
    SiveConfig sive;
    std::vector<RegionDecl> regions;  // sorted by label
    std::string oracle_spec;          // "delta:<image>" | "gmm:<manifest>"
    std::string reward_spec;          // "none" | "target-affinity:<image>" | "colorfulness"
};

// Validates every key, applies defaults, and returns the run description.
// Throws ContractError on unknown keys or bad values.
ResolvedRun resolve_run(const Manifest& m);

// Fully-resolved manifest (every default materialized) for reproducibility.
Manifest manifest_from(const ResolvedRun& r);

}  // namespace vectordream
