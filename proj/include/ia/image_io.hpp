#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ia {

// 8-bit image, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// Binary PPM (P6) / PGM (P5).
Image load_image(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

// Bilinear resample to a new size, per channel, rounded back to 8 bits.
Image resize_image(const Image& img, int width, int height);

// Minimal PNG writer (fixed zlib level, no filtering) so output bytes are
// reproducible run to run. gray: 1 channel, rgb: 3 channels.
void save_png(const std::string& path, const Image& img);

// Content hash used for cache keys and golden-file tests.
std::uint64_t image_content_hash(const Image& img);

std::uint64_t file_content_hash(const std::string& path);

}  // namespace ia
