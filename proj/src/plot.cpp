#include "ia/plot.hpp"

#include <algorithm>
#include <cmath>

namespace ia {

namespace {

// 5×7 glyphs, one byte per column, bit 0 = top row. Uppercase + digits +
// the punctuation captions actually use.
struct Glyph {
    char ch;
    std::uint8_t col[5];
};

const Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {':', {0x00, 0x36, 0x36, 0x00, 0x00}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {'(', {0x00, 0x1c, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1c, 0x00}},
    {'+', {0x08, 0x08, 0x3e, 0x08, 0x08}},
    {'0', {0x3e, 0x51, 0x49, 0x45, 0x3e}}, {'1', {0x00, 0x42, 0x7f, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4b, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7f, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3c, 0x4a, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1e}},
    {'A', {0x7c, 0x12, 0x11, 0x12, 0x7c}}, {'B', {0x7f, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3e, 0x41, 0x41, 0x41, 0x22}}, {'D', {0x7f, 0x41, 0x41, 0x22, 0x1c}},
    {'E', {0x7f, 0x49, 0x49, 0x49, 0x41}}, {'F', {0x7f, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3e, 0x41, 0x49, 0x49, 0x7a}}, {'H', {0x7f, 0x08, 0x08, 0x08, 0x7f}},
    {'I', {0x00, 0x41, 0x7f, 0x41, 0x00}}, {'J', {0x20, 0x40, 0x41, 0x3f, 0x01}},
    {'K', {0x7f, 0x08, 0x14, 0x22, 0x41}}, {'L', {0x7f, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7f, 0x02, 0x0c, 0x02, 0x7f}}, {'N', {0x7f, 0x04, 0x08, 0x10, 0x7f}},
    {'O', {0x3e, 0x41, 0x41, 0x41, 0x3e}}, {'P', {0x7f, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3e, 0x41, 0x51, 0x21, 0x5e}}, {'R', {0x7f, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}}, {'T', {0x01, 0x01, 0x7f, 0x01, 0x01}},
    {'U', {0x3f, 0x40, 0x40, 0x40, 0x3f}}, {'V', {0x1f, 0x20, 0x40, 0x20, 0x1f}},
    {'W', {0x3f, 0x40, 0x38, 0x40, 0x3f}}, {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}}, {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
};

const Glyph* find_glyph(char c) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    for (const auto& g : kFont)
        if (g.ch == c) return &g;
    return &kFont[0];
}

void draw_text(Image& img, int x0, int y0, const std::string& text, std::uint8_t gray) {
    int x = x0;
    for (char c : text) {
        const Glyph* g = find_glyph(c);
        for (int cx = 0; cx < 5; ++cx) {
            for (int cy = 0; cy < 7; ++cy) {
                if (!(g->col[cx] >> cy & 1)) continue;
                const int px = x + cx, py = y0 + cy;
                if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
                for (int ch = 0; ch < img.channels; ++ch) img.at(py, px, ch) = gray;
            }
        }
        x += 6;
    }
}

constexpr int kCaptionH = 11;
constexpr int kGutter = 2;

}  // namespace

void colormap_jet(double v, std::uint8_t rgb[3]) {
    v = std::clamp(v, 0.0, 1.0);
    static const double stops[5][3] = {{0.0, 0.0, 0.52}, {0.0, 0.24, 0.67}, {0.02, 1.0, 1.0},
                                       {1.0, 1.0, 0.0},  {0.98, 0.0, 0.0}};
    const double t = v * 4.0;
    const int k = std::min(3, static_cast<int>(t));
    const double f = t - k;
    for (int c = 0; c < 3; ++c) {
        const double x = stops[k][c] + f * (stops[k + 1][c] - stops[k][c]);
        rgb[c] = static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
    }
}

Image render_panels(const Image& base, const std::vector<AttentionMap>& maps,
                    const std::vector<std::string>& labels) {
    if (base.width <= 0 || base.height <= 0) throw ValidationError("plot: empty base image");
    if (!labels.empty() && labels.size() != maps.size())
        throw ValidationError("plot: label count does not match map count");

    Image rgb;
    rgb.width = base.width;
    rgb.height = base.height;
    rgb.channels = 3;
    rgb.pixels.resize(static_cast<std::size_t>(base.width) * base.height * 3);
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x)
            for (int c = 0; c < 3; ++c)
                rgb.at(y, x, c) = base.at(y, x, base.channels == 3 ? c : 0);

    const int panels = 1 + static_cast<int>(maps.size());
    Image fig;
    fig.width = panels * base.width + (panels - 1) * kGutter;
    fig.height = base.height + kCaptionH;
    fig.channels = 3;
    fig.pixels.assign(static_cast<std::size_t>(fig.width) * fig.height * 3, 30);

    auto blit = [&](int panel, const Image& im, const std::string& caption) {
        const int x0 = panel * (base.width + kGutter);
        for (int y = 0; y < base.height; ++y)
            for (int x = 0; x < base.width; ++x)
                for (int c = 0; c < 3; ++c) fig.at(kCaptionH + y, x0 + x, c) = im.at(y, x, c);
        draw_text(fig, x0 + 2, 2, caption, 230);
    };

    blit(0, rgb, "IMAGE");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        AttentionMap m = maps[i];
        if (m.size() == 0) throw ValidationError("plot: empty map");
        if (m.rows != base.height || m.cols != base.width)
            m = resize_map(m, base.height, base.width, ResizeMode::bilinear);
        Image overlay = rgb;
        for (int y = 0; y < base.height; ++y) {
            for (int x = 0; x < base.width; ++x) {
                const double v = std::clamp(m.at(y, x), 0.0, 1.0);
                const double t = 0.6 * v;
                if (t <= 0.0) continue;
                std::uint8_t cm[3];
                colormap_jet(v, cm);
                for (int c = 0; c < 3; ++c) {
                    const double mixed = (1.0 - t) * overlay.at(y, x, c) + t * cm[c];
                    overlay.at(y, x, c) = static_cast<std::uint8_t>(std::lround(mixed));
                }
            }
        }
        blit(static_cast<int>(i) + 1, overlay,
             labels.empty() ? "MAP " + std::to_string(i + 1) : labels[i]);
    }
    return fig;
}

void save_panels_png(const std::string& path, const Image& base,
                     const std::vector<AttentionMap>& maps,
                     const std::vector<std::string>& labels) {
    save_png(path, render_panels(base, maps, labels));
}

}  // namespace ia
