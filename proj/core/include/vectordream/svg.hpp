#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vectordream/scene.hpp"

namespace vectordream {

// Parse failure with position. `kind` is a stable machine-readable tag:
// malformed-path-data, unsupported-command, unsupported-element,
// unknown-attribute, missing-dims, bad-number, malformed-xml, duplicate-id.
struct SvgParseError : Error {
    SvgParseError(std::string kind_, int line_, int col_, const std::string& msg)
        : Error("svg:" + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg +
                " [" + kind_ + "]"),
          kind(std::move(kind_)), line(line_), col(col_) {}

    std::string kind;
    int line = 0;
    int col = 0;
};

// One path element: a single cubic chain. Points are stored verbatim
// (3k+1 of them, the first is the start); `closed` records a trailing Z.
struct SvgPath {
    std::vector<ControlPoint> points;
    bool closed = false;
    std::optional<ColorRGBA> fill;    // alpha = fill-opacity
    std::optional<StrokeStyle> stroke;
};

struct SvgGroup {
    std::string id;
    std::vector<SvgPath> paths;
};

struct SvgDocument {
    int width = 0;
    int height = 0;
    ColorRGBA background{1.0, 1.0, 1.0, 1.0};
    std::vector<SvgGroup> groups;
};

bool operator==(const SvgPath& a, const SvgPath& b);
bool operator==(const SvgGroup& a, const SvgGroup& b);
bool operator==(const SvgDocument& a, const SvgDocument& b);

// Scene -> document. One group per region tag (untagged paths go to "main"),
// groups ordered by first occurrence walking the scene bottom to top, path
// order preserved. Coordinates are quantized to the serialized precision so
// that parse(write(doc)) == doc holds exactly.
SvgDocument scene_to_doc(const Scene& scene);

// Document -> scene. Closed chains whose final point returns to the start
// drop the duplicate; otherwise the Z gap is closed with a straight segment.
Scene doc_to_scene(const SvgDocument& doc);

// Deterministic serialization: fixed attribute order, absolute M/C commands,
// 4-decimal coordinates, one path per line.
std::string write_svg(const SvgDocument& doc);

// Parser for the emitted subset: svg/g/path elements, d with absolute
// M/L/C/Z, fill as #rrggbb or rgb(r,g,b) plus fill-opacity, stroke attrs,
// width/height/viewBox. Unknown elements and attributes are rejected with
// line/column diagnostics.
SvgDocument parse_svg(const std::string& text);

struct TransformOp {
    enum class Kind { Translate, Scale };
    Kind kind = Kind::Translate;
    double a = 0.0;            // dx or sx
    double b = 0.0;            // dy or sy
    std::string target_group;  // empty = all groups of the document
};

// Concatenate documents (later ones composite on top), baking the transforms
// into path coordinates. Group ids are disambiguated on collision. Canvas
// size comes from the first document unless overridden.
SvgDocument compose(const std::vector<std::pair<SvgDocument, std::vector<TransformOp>>>& docs,
                    int out_w = 0, int out_h = 0);

}  // namespace vectordream
