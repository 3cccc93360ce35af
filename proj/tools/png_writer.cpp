#include "png_writer.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace eslcli {

void write_indexed_png(const std::filesystem::path& path, std::int32_t width,
                       std::int32_t height, const std::uint8_t* pixels,
                       const Palette& palette) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(f);
        throw std::runtime_error("libpng failure writing '" + path.string() + "'");
    }
    png_init_io(png, f);
    png_set_compression_level(png, 6);  // pinned so reruns are bit-identical
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_PALETTE,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_color> plte(256);
    for (int i = 0; i < 256; ++i) {
        plte[i].red = palette[i][0];
        plte[i].green = palette[i][1];
        plte[i].blue = palette[i][2];
    }
    png_set_PLTE(png, info, plte.data(), 256);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (std::int32_t h = 0; h < height; ++h) {
        rows[h] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(h) * width);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

namespace {

constexpr Rgb kClassColors[20] = {
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48},  {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60},  {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
    {170, 110, 40},  {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
    {128, 128, 0},   {255, 215, 180}, {0, 0, 128},    {128, 128, 128},
};

}  // namespace

Palette class_palette() {
    Palette p{};
    for (int i = 0; i < 255; ++i) p[i] = kClassColors[i % 20];
    p[255] = {0, 0, 0};
    return p;
}

Palette gray_palette() {
    Palette p{};
    for (int i = 0; i < 256; ++i) {
        p[i] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i),
                static_cast<std::uint8_t>(i)};
    }
    return p;
}

Palette diff_palette() {
    Palette p{};
    p[0] = {0, 0, 0};        // both null
    p[1] = {128, 128, 128};  // agree
    p[2] = {230, 25, 75};    // softmax-only
    p[3] = {0, 130, 200};    // entropy-only
    p[4] = {255, 225, 25};   // conflict
    return p;
}

void render_labels(const esl::LabelMap& map, const std::filesystem::path& path) {
    write_indexed_png(path, map.width, map.height, map.labels.data(),
                      class_palette());
}

void render_pseudolabels(const esl::PseudoLabelMap& map,
                         const std::filesystem::path& path) {
    write_indexed_png(path, map.width, map.height, map.labels.data(),
                      class_palette());
}

void render_entropy(const esl::EntropyMap& map, const std::filesystem::path& path) {
    std::vector<std::uint8_t> pixels(map.values.size());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = map.values[i];
        pixels[i] = static_cast<std::uint8_t>(
            std::lround(255.0f * (v < 0.0f ? 0.0f : v > 1.0f ? 1.0f : v)));
    }
    write_indexed_png(path, map.width, map.height, pixels.data(), gray_palette());
}

void render_diff(const esl::PseudoLabelDiff& diff,
                 const std::filesystem::path& path) {
    write_indexed_png(path, diff.width, diff.height, diff.categories.data(),
                      diff_palette());
}

}  // namespace eslcli
