#include "vectordream/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <set>

namespace vectordream {

bool operator==(const SvgPath& a, const SvgPath& b) {
    return a.points == b.points && a.closed == b.closed && a.fill == b.fill &&
           a.stroke == b.stroke;
}
bool operator==(const SvgGroup& a, const SvgGroup& b) {
    return a.id == b.id && a.paths == b.paths;
}
bool operator==(const SvgDocument& a, const SvgDocument& b) {
    return a.width == b.width && a.height == b.height && a.background == b.background &&
           a.groups == b.groups;
}

namespace {

constexpr ColorRGBA kWhite{1.0, 1.0, 1.0, 1.0};

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Quantize to the serialized precision so parse(write(doc)) == doc.
double q4(double v) {
    return std::strtod(fmt4(v).c_str(), nullptr);
}

int to_byte(double v) {
    double x = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<int>(x * 255.0 + 0.5);
}

// Paint components quantize to the fractional rgb() precision the writer
// emits; 8-bit steps would stack visibly across translucent layers.
double q4_255(double v) {
    double x = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return std::strtod(fmt4(x * 255.0).c_str(), nullptr) / 255.0;
}

ColorRGBA quantize_color(const ColorRGBA& c) {
    return {q4_255(c.r), q4_255(c.g), q4_255(c.b), q4(c.a)};
}

// The background attribute serializes as #rrggbb, so it quantizes to bytes.
ColorRGBA quantize_color_byte(const ColorRGBA& c) {
    return {to_byte(c.r) / 255.0, to_byte(c.g) / 255.0, to_byte(c.b) / 255.0, q4(c.a)};
}

std::string rgb_color(const ColorRGBA& c) {
    return "rgb(" + fmt4(c.r * 255.0) + "," + fmt4(c.g * 255.0) + "," + fmt4(c.b * 255.0) + ")";
}

std::string hex_color(const ColorRGBA& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", to_byte(c.r), to_byte(c.g), to_byte(c.b));
    return buf;
}

}  // namespace

SvgDocument scene_to_doc(const Scene& scene) {
    SvgDocument doc;
    doc.width = scene.canvas_w;
    doc.height = scene.canvas_h;
    doc.background = quantize_color(scene.background);

    // Groups in order of first occurrence. Scenes from the vectorizer keep
    // each region contiguous in z, so grouping preserves the paint order;
    // interleaved tags would be reordered group by group.
    std::map<std::string, std::size_t> group_index;
    for (const Path& p : scene.paths) {
        std::string id = p.region_tag.empty() ? "main" : p.region_tag;
        auto it = group_index.find(id);
        if (it == group_index.end()) {
            it = group_index.emplace(id, doc.groups.size()).first;
            doc.groups.push_back({id, {}});
        }
        SvgPath sp;
        sp.closed = p.closed;
        for (const ControlPoint& pt : p.points) sp.points.push_back({q4(pt.x), q4(pt.y)});
        if (p.closed && !p.points.empty()) sp.points.push_back(sp.points.front());
        if (p.fill) sp.fill = quantize_color(*p.fill);
        if (p.stroke)
            sp.stroke = StrokeStyle{quantize_color(p.stroke->color), q4(p.stroke->width)};
        doc.groups[it->second].paths.push_back(std::move(sp));
    }
    return doc;
}

Scene doc_to_scene(const SvgDocument& doc) {
    Scene scene;
    scene.canvas_w = doc.width;
    scene.canvas_h = doc.height;
    scene.background = doc.background;
    for (const SvgGroup& g : doc.groups) {
        for (const SvgPath& sp : g.paths) {
            Path p;
            p.closed = sp.closed;
            p.fill = sp.fill;
            p.stroke = sp.stroke;
            p.region_tag = g.id == "main" ? "" : g.id;
            p.points = sp.points;
            if (sp.closed && p.points.size() >= 4) {
                if (p.points.back() == p.points.front()) {
                    p.points.pop_back();
                } else {
                    // Z closes the gap with a straight segment.
                    ControlPoint last = p.points.back();
                    ControlPoint first = p.points.front();
                    ControlPoint d = first - last;
                    p.points.push_back(last + d * (1.0 / 3.0));
                    p.points.push_back(last + d * (2.0 / 3.0));
                }
            }
            scene.paths.push_back(std::move(p));
        }
    }
    return scene;
}

std::string write_svg(const SvgDocument& doc) {
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(doc.width) +
           "\" height=\"" + std::to_string(doc.height) + "\" viewBox=\"0 0 " +
           std::to_string(doc.width) + " " + std::to_string(doc.height) + "\"";
    if (!(doc.background == kWhite)) {
        out += " data-background=\"" + hex_color(doc.background) + "\"";
        out += " data-background-opacity=\"" + fmt4(doc.background.a) + "\"";
    }
    out += ">\n";

    for (const SvgGroup& g : doc.groups) {
        out += "<g id=\"" + g.id + "\">\n";
        for (const SvgPath& p : g.paths) {
            out += "<path d=\"";
            if (!p.points.empty()) {
                out += "M " + fmt4(p.points[0].x) + " " + fmt4(p.points[0].y);
                for (std::size_t i = 1; i + 2 < p.points.size(); i += 3) {
                    out += " C";
                    for (int j = 0; j < 3; ++j)
                        out += " " + fmt4(p.points[i + j].x) + " " + fmt4(p.points[i + j].y);
                }
                if (p.closed) out += " Z";
            }
            out += "\"";
            out += " fill=\"" + (p.fill ? rgb_color(*p.fill) : std::string("none")) + "\"";
            if (p.fill) out += " fill-opacity=\"" + fmt4(p.fill->a) + "\"";
            if (p.stroke) {
                out += " stroke=\"" + rgb_color(p.stroke->color) + "\"";
                out += " stroke-opacity=\"" + fmt4(p.stroke->color.a) + "\"";
                out += " stroke-width=\"" + fmt4(p.stroke->width) + "\"";
            }
            out += "/>\n";
        }
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

namespace {

struct Cursor {
    const char* p;
    const char* end;
    int line = 1;
    int col = 1;

    bool eof() const { return p >= end; }
    char peek() const { return eof() ? '\0' : *p; }
    char get() {
        char c = *p++;
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            get();
    }
    bool consume(const char* s) {
        std::size_t n = std::strlen(s);
        if (static_cast<std::size_t>(end - p) < n || std::strncmp(p, s, n) != 0) return false;
        for (std::size_t i = 0; i < n; ++i) get();
        return true;
    }
};

[[noreturn]] void fail(const Cursor& c, const char* kind, const std::string& msg) {
    throw SvgParseError(kind, c.line, c.col, msg);
}

bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' ||
           c == '.';
}

struct Attr {
    std::string name;
    std::string value;
    int line = 0;
    int col = 0;  // of the value start
};

struct Tag {
    std::string name;
    std::vector<Attr> attrs;
    bool closing = false;
    bool self_closing = false;
    int line = 0;
    int col = 0;

    const Attr* find(const char* n) const {
        for (const Attr& a : attrs)
            if (a.name == n) return &a;
        return nullptr;
    }
};

// Reads the next tag, skipping declarations, comments and whitespace.
// Returns false at end of input. Non-whitespace text content is rejected.
bool next_tag(Cursor& c, Tag& tag) {
    for (;;) {
        c.skip_ws();
        if (c.eof()) return false;
        if (c.peek() != '<') fail(c, "malformed-xml", "unexpected text content");
        if (c.consume("<?")) {
            while (!c.eof() && !c.consume("?>")) c.get();
            continue;
        }
        if (c.consume("<!--")) {
            while (!c.eof() && !c.consume("-->")) c.get();
            continue;
        }
        break;
    }
    tag = Tag{};
    tag.line = c.line;
    tag.col = c.col;
    c.get();  // '<'
    if (c.peek() == '/') {
        c.get();
        tag.closing = true;
    }
    while (!c.eof() && name_char(c.peek())) tag.name.push_back(c.get());
    if (tag.name.empty()) fail(c, "malformed-xml", "expected element name");

    for (;;) {
        c.skip_ws();
        if (c.eof()) fail(c, "malformed-xml", "unterminated tag");
        if (c.peek() == '>') {
            c.get();
            return true;
        }
        if (c.consume("/>")) {
            tag.self_closing = true;
            return true;
        }
        if (tag.closing) fail(c, "malformed-xml", "attributes on closing tag");
        Attr a;
        a.line = c.line;
        a.col = c.col;
        while (!c.eof() && name_char(c.peek())) a.name.push_back(c.get());
        if (a.name.empty()) fail(c, "malformed-xml", "expected attribute name");
        c.skip_ws();
        if (c.peek() != '=') fail(c, "malformed-xml", "expected '=' after attribute name");
        c.get();
        c.skip_ws();
        char quote = c.peek();
        if (quote != '"' && quote != '\'') fail(c, "malformed-xml", "expected quoted value");
        c.get();
        a.line = c.line;
        a.col = c.col;
        while (!c.eof() && c.peek() != quote) a.value.push_back(c.get());
        if (c.eof()) fail(c, "malformed-xml", "unterminated attribute value");
        c.get();
        tag.attrs.push_back(std::move(a));
    }
}

void check_attrs(const Tag& tag, std::initializer_list<const char*> allowed) {
    for (const Attr& a : tag.attrs) {
        bool ok = false;
        for (const char* n : allowed)
            if (a.name == n) ok = true;
        if (!ok)
            throw SvgParseError("unknown-attribute", a.line, a.col,
                                "unknown attribute '" + a.name + "' on <" + tag.name + ">");
    }
}

// Position-tracking reader over one attribute value.
struct ValueCursor {
    const char* p;
    const char* end;
    int line;
    int col;

    explicit ValueCursor(const Attr& a)
        : p(a.value.c_str()), end(a.value.c_str() + a.value.size()), line(a.line), col(a.col) {}

    bool eof() const { return p >= end; }
    char peek() const { return eof() ? '\0' : *p; }
    void advance(const char* to) {
        while (p < to) {
            if (*p == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++p;
        }
    }
    void skip_sep() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r' ||
                          peek() == ','))
            advance(p + 1);
    }
    double number(const char* kind) {
        skip_sep();
        char* out = nullptr;
        double v = std::strtod(p, &out);
        if (out == p || !std::isfinite(v))
            throw SvgParseError(kind, line, col, "expected a number");
        advance(out);
        return v;
    }
};

std::vector<ControlPoint> parse_path_data(const Attr& d, bool& closed) {
    ValueCursor c(d);
    std::vector<ControlPoint> pts;
    closed = false;
    bool seen_move = false;

    c.skip_sep();
    while (!c.eof()) {
        char cmd = c.peek();
        int at_line = c.line, at_col = c.col;
        if (std::strchr("AQSTHVaqsthv", cmd) ||
            std::strchr("mlcz", cmd))  // relative forms are out of subset too
            throw SvgParseError("unsupported-command", at_line, at_col,
                                std::string("unsupported path command '") + cmd + "'");
        if (cmd != 'M' && cmd != 'C' && cmd != 'L' && cmd != 'Z')
            throw SvgParseError("malformed-path-data", at_line, at_col,
                                std::string("unexpected character '") + cmd + "' in path data");
        c.advance(c.p + 1);

        if (cmd == 'M') {
            if (seen_move)
                throw SvgParseError("malformed-path-data", at_line, at_col,
                                    "multiple subpaths are not supported");
            seen_move = true;
            double x = c.number("malformed-path-data");
            double y = c.number("malformed-path-data");
            pts.push_back({x, y});
        } else if (cmd == 'Z') {
            closed = true;
            c.skip_sep();
            if (!c.eof())
                throw SvgParseError("malformed-path-data", c.line, c.col,
                                    "content after Z");
            break;
        } else {
            if (!seen_move)
                throw SvgParseError("malformed-path-data", at_line, at_col,
                                    "path data must start with M");
            do {
                if (cmd == 'C') {
                    for (int i = 0; i < 3; ++i) {
                        double x = c.number("malformed-path-data");
                        double y = c.number("malformed-path-data");
                        pts.push_back({x, y});
                    }
                } else {  // L -> degree-elevated cubic
                    double x = c.number("malformed-path-data");
                    double y = c.number("malformed-path-data");
                    ControlPoint a = pts.back();
                    ControlPoint b{x, y};
                    ControlPoint dd = b - a;
                    pts.push_back(a + dd * (1.0 / 3.0));
                    pts.push_back(a + dd * (2.0 / 3.0));
                    pts.push_back(b);
                }
                c.skip_sep();
            } while (!c.eof() && (std::isdigit(static_cast<unsigned char>(c.peek())) ||
                                  c.peek() == '-' || c.peek() == '+' || c.peek() == '.'));
        }
        c.skip_sep();
    }
    if (!seen_move)
        throw SvgParseError("malformed-path-data", d.line, d.col, "empty path data");
    if ((pts.size() % 3) != 1)
        throw SvgParseError("malformed-path-data", d.line, d.col,
                            "path data is not a chain of cubic segments");
    return pts;
}

int hex_nibble(char ch, const Attr& a) {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return 10 + ch - 'a';
    if (ch >= 'A' && ch <= 'F') return 10 + ch - 'A';
    throw SvgParseError("bad-number", a.line, a.col, "bad hex digit in color");
}

ColorRGBA parse_color(const Attr& a) {
    const std::string& s = a.value;
    if (s.size() == 7 && s[0] == '#') {
        auto byte = [&](int i) { return (hex_nibble(s[i], a) << 4) | hex_nibble(s[i + 1], a); };
        return {byte(1) / 255.0, byte(3) / 255.0, byte(5) / 255.0, 1.0};
    }
    if (s.rfind("rgb(", 0) == 0 && s.back() == ')') {
        Attr inner = a;
        inner.value = s.substr(4, s.size() - 5);
        ValueCursor c(inner);
        double r = c.number("bad-number");
        double g = c.number("bad-number");
        double b = c.number("bad-number");
        c.skip_sep();
        if (!c.eof()) throw SvgParseError("bad-number", c.line, c.col, "trailing rgb() content");
        return {r / 255.0, g / 255.0, b / 255.0, 1.0};
    }
    throw SvgParseError("bad-number", a.line, a.col, "expected #rrggbb or rgb(r,g,b)");
}

double parse_number_attr(const Attr& a, double lo, double hi) {
    ValueCursor c(a);
    double v = c.number("bad-number");
    c.skip_sep();
    if (!c.eof()) throw SvgParseError("bad-number", c.line, c.col, "trailing content in number");
    if (v < lo || v > hi)
        throw SvgParseError("bad-number", a.line, a.col, "number out of range");
    return v;
}

SvgPath parse_path_element(const Tag& tag) {
    check_attrs(tag, {"d", "fill", "fill-opacity", "stroke", "stroke-opacity", "stroke-width"});
    const Attr* d = tag.find("d");
    if (!d)
        throw SvgParseError("malformed-path-data", tag.line, tag.col, "<path> without d");

    SvgPath p;
    p.points = parse_path_data(*d, p.closed);

    if (const Attr* fill = tag.find("fill")) {
        if (fill->value != "none") p.fill = parse_color(*fill);
    } else {
        p.fill = ColorRGBA{0, 0, 0, 1};  // SVG default paint
    }
    if (const Attr* fo = tag.find("fill-opacity")) {
        if (p.fill) p.fill->a = parse_number_attr(*fo, 0.0, 1.0);
    }
    if (const Attr* stroke = tag.find("stroke")) {
        if (stroke->value != "none") {
            StrokeStyle st;
            st.color = parse_color(*stroke);
            st.width = 1.0;
            if (const Attr* so = tag.find("stroke-opacity"))
                st.color.a = parse_number_attr(*so, 0.0, 1.0);
            if (const Attr* sw = tag.find("stroke-width"))
                st.width = parse_number_attr(*sw, 0.0, 1e9);
            p.stroke = st;
        }
    } else if (tag.find("stroke-width") || tag.find("stroke-opacity")) {
        // stroke attrs without a stroke paint are tolerated and ignored
    }
    return p;
}

int parse_int_attr(const Attr& a) {
    double v = parse_number_attr(a, 1.0, 1e9);
    if (v != std::floor(v))
        throw SvgParseError("bad-number", a.line, a.col, "expected an integer");
    return static_cast<int>(v);
}

}  // namespace

SvgDocument parse_svg(const std::string& text) {
    Cursor c{text.c_str(), text.c_str() + text.size()};
    Tag tag;
    if (!next_tag(c, tag) || tag.closing || tag.name != "svg")
        fail(c, "malformed-xml", "expected <svg> root element");
    check_attrs(tag, {"xmlns", "width", "height", "viewBox", "data-background",
                      "data-background-opacity"});

    SvgDocument doc;
    const Attr* w = tag.find("width");
    const Attr* h = tag.find("height");
    const Attr* vb = tag.find("viewBox");
    if (w && h) {
        doc.width = parse_int_attr(*w);
        doc.height = parse_int_attr(*h);
    }
    if (vb) {
        ValueCursor vc(*vb);
        double x0 = vc.number("bad-number");
        double y0 = vc.number("bad-number");
        double vw = vc.number("bad-number");
        double vh = vc.number("bad-number");
        if (x0 != 0.0 || y0 != 0.0)
            throw SvgParseError("missing-dims", vb->line, vb->col,
                                "viewBox must start at 0 0");
        if (!w || !h) {
            doc.width = static_cast<int>(vw);
            doc.height = static_cast<int>(vh);
        } else if (vw != doc.width || vh != doc.height) {
            throw SvgParseError("missing-dims", vb->line, vb->col,
                                "viewBox does not match width/height");
        }
    }
    if (doc.width < 1 || doc.height < 1)
        throw SvgParseError("missing-dims", tag.line, tag.col,
                            "svg needs width/height or a viewBox");
    if (const Attr* bg = tag.find("data-background")) doc.background = parse_color(*bg);
    if (const Attr* bga = tag.find("data-background-opacity"))
        doc.background.a = parse_number_attr(*bga, 0.0, 1.0);
    if (tag.self_closing) return doc;

    std::set<std::string> ids;
    int main_group = -1;  // lazily created for <path> directly under <svg>
    for (;;) {
        Tag child;
        if (!next_tag(c, child)) fail(c, "malformed-xml", "missing </svg>");
        if (child.closing) {
            if (child.name != "svg")
                throw SvgParseError("malformed-xml", child.line, child.col,
                                    "unexpected </" + child.name + ">");
            break;
        }
        if (child.name == "path") {
            if (!child.self_closing)
                throw SvgParseError("malformed-xml", child.line, child.col,
                                    "<path> must be self-closing");
            if (main_group < 0) {
                main_group = static_cast<int>(doc.groups.size());
                doc.groups.push_back({"main", {}});
                if (!ids.insert("main").second)
                    throw SvgParseError("duplicate-id", child.line, child.col,
                                        "implicit group 'main' collides with an existing id");
            }
            doc.groups[main_group].paths.push_back(parse_path_element(child));
            continue;
        }
        if (child.name != "g")
            throw SvgParseError("unsupported-element", child.line, child.col,
                                "unsupported element '" + child.name + "'");

        check_attrs(child, {"id"});
        SvgGroup group;
        const Attr* id = child.find("id");
        group.id = id ? id->value : "g" + std::to_string(doc.groups.size());
        if (!ids.insert(group.id).second)
            throw SvgParseError("duplicate-id", child.line, child.col,
                                "duplicate group id '" + group.id + "'");
        if (!child.self_closing) {
            for (;;) {
                Tag inner;
                if (!next_tag(c, inner)) fail(c, "malformed-xml", "missing </g>");
                if (inner.closing) {
                    if (inner.name != "g")
                        throw SvgParseError("malformed-xml", inner.line, inner.col,
                                            "unexpected </" + inner.name + ">");
                    break;
                }
                if (inner.name != "path")
                    throw SvgParseError("unsupported-element", inner.line, inner.col,
                                        "unsupported element '" + inner.name + "'");
                if (!inner.self_closing)
                    throw SvgParseError("malformed-xml", inner.line, inner.col,
                                        "<path> must be self-closing");
                group.paths.push_back(parse_path_element(inner));
            }
        }
        doc.groups.push_back(std::move(group));
    }
    c.skip_ws();
    if (!c.eof()) fail(c, "malformed-xml", "content after </svg>");
    return doc;
}

SvgDocument compose(const std::vector<std::pair<SvgDocument, std::vector<TransformOp>>>& docs,
                    int out_w, int out_h) {
    SvgDocument out;
    if (docs.empty()) {
        out.width = std::max(1, out_w);
        out.height = std::max(1, out_h);
        return out;
    }
    out.width = out_w > 0 ? out_w : docs[0].first.width;
    out.height = out_h > 0 ? out_h : docs[0].first.height;
    out.background = docs[0].first.background;

    std::set<std::string> used;
    for (const auto& [doc, ops] : docs) {
        for (const SvgGroup& g : doc.groups) {
            SvgGroup copy = g;
            for (const TransformOp& op : ops) {
                if (!op.target_group.empty() && op.target_group != g.id) continue;
                for (SvgPath& p : copy.paths) {
                    for (ControlPoint& pt : p.points) {
                        if (op.kind == TransformOp::Kind::Translate) {
                            pt.x += op.a;
                            pt.y += op.b;
                        } else {
                            pt.x *= op.a;
                            pt.y *= op.b;
                        }
                    }
                    if (op.kind == TransformOp::Kind::Scale && p.stroke)
                        p.stroke->width *= std::sqrt(std::abs(op.a * op.b));
                }
            }
            for (SvgPath& p : copy.paths) {
                for (ControlPoint& pt : p.points) pt = {q4(pt.x), q4(pt.y)};
                if (p.stroke) p.stroke->width = q4(p.stroke->width);
            }
            std::string id = copy.id;
            int suffix = 2;
            while (!used.insert(id).second) id = copy.id + "_" + std::to_string(suffix++);
            copy.id = id;
            out.groups.push_back(std::move(copy));
        }
    }
    return out;
}

}  // namespace vectordream
