#include "vectordream/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace vectordream {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path + "'");
    return f;
}

unsigned char to_byte(double v) {
    double x = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<unsigned char>(x * 255.0 + 0.5);
}

}  // namespace

void write_png(const RasterImage& img, const std::string& path) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png writer init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed for '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGBA,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 4);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 4; ++c) row[4 * x + c] = to_byte(img.at(x, y, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;

    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

RasterImage read_png(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.png || !r.info) throw IoError("png reader init failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed for '" + path + "'");

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);

    // Normalize everything to 8-bit RGBA.
    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
    png_byte color = png_get_color_type(r.png, r.info);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    png_set_filler(r.png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(r.png, r.info);

    int w = static_cast<int>(png_get_image_width(r.png, r.info));
    int h = static_cast<int>(png_get_image_height(r.png, r.info));
    RasterImage img(w, h);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 4);
    for (int y = 0; y < h; ++y) {
        png_read_row(r.png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 4; ++c) img.at(x, y, c) = row[4 * x + c] / 255.0;
    }
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_gray16(const Grid& map, const std::string& path) {
    if (map.channels != 1) throw ContractError("write_png_gray16: grid must have 1 channel");
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png writer init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failed for '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, map.width, map.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 2);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            double v = map.at(x, y, 0);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            auto q = static_cast<unsigned>(v * 65535.0 + 0.5);
            row[2 * x] = static_cast<unsigned char>(q >> 8);  // network byte order
            row[2 * x + 1] = static_cast<unsigned char>(q & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Grid read_png_gray(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = r.png ? png_create_info_struct(r.png) : nullptr;
    if (!r.png || !r.info) throw IoError("png reader init failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed for '" + path + "'");

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    png_byte color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw IoError("'" + path + "' is not a grayscale png");
    png_set_expand_gray_1_2_4_to_8(r.png);
    png_read_update_info(r.png, r.info);

    int w = static_cast<int>(png_get_image_width(r.png, r.info));
    int h = static_cast<int>(png_get_image_height(r.png, r.info));
    int depth = png_get_bit_depth(r.png, r.info);
    double scale = depth == 16 ? 65535.0 : 255.0;

    Grid map(w, h, 1);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * (depth == 16 ? 2 : 1));
    for (int y = 0; y < h; ++y) {
        png_read_row(r.png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            unsigned v = depth == 16 ? (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1]
                                     : row[x];
            map.at(x, y, 0) = v / scale;
        }
    }
    png_read_end(r.png, nullptr);
    return map;
}

void write_ppm(const RasterImage& img, const std::string& path) {
    FilePtr f = open_file(path, "wb");
    std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) row[3 * x + c] = to_byte(img.at(x, y, c));
        if (std::fwrite(row.data(), 1, row.size(), f.get()) != row.size())
            throw IoError("ppm write failed for '" + path + "'");
    }
}

RasterImage read_ppm(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    char magic[3] = {};
    int w = 0, h = 0, maxval = 0;
    if (std::fscanf(f.get(), "%2s %d %d %d", magic, &w, &h, &maxval) != 4 ||
        std::strcmp(magic, "P6") != 0 || w < 1 || h < 1 || maxval != 255)
        throw IoError("'" + path + "' is not an 8-bit P6 ppm");
    std::fgetc(f.get());  // single whitespace after maxval

    RasterImage img(w, h);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        if (std::fread(row.data(), 1, row.size(), f.get()) != row.size())
            throw IoError("'" + path + "': truncated ppm data");
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = row[3 * x + c] / 255.0;
            img.at(x, y, 3) = 1.0;
        }
    }
    return img;
}

namespace {

bool has_suffix(const std::string& s, const char* suffix) {
    std::string suf(suffix);
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

RasterImage read_image(const std::string& path) {
    if (has_suffix(path, ".ppm")) return read_ppm(path);
    if (has_suffix(path, ".png")) return read_png(path);
    throw IoError("unsupported image format: '" + path + "'");
}

void write_image(const RasterImage& img, const std::string& path) {
    if (has_suffix(path, ".ppm")) {
        write_ppm(img, path);
        return;
    }
    if (has_suffix(path, ".png")) {
        write_png(img, path);
        return;
    }
    throw IoError("unsupported image format: '" + path + "'");
}

}  // namespace vectordream
