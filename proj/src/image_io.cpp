#include "ia/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ia/common.hpp"
#include "ia/kernels.hpp"

namespace ia {

namespace {

int read_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comments.
    int c = in.get();
    for (;;) {
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = in.get();
        if (c == '#') {
            while (c != '\n' && c != EOF) c = in.get();
            continue;
        }
        break;
    }
    int v = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw ValidationError("malformed PNM header");
    return v;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> head;
    put_u32_be(head, static_cast<std::uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    out.write(type, 4);
    if (!data.empty()) out.write(reinterpret_cast<const char*>(data.data()), data.size());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<std::uint8_t> tail;
    put_u32_be(tail, static_cast<std::uint32_t>(crc));
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open image: " + path);
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw ValidationError("unsupported image format (want binary PGM/PPM): " + path);
    Image img;
    img.channels = magic[1] == '6' ? 3 : 1;
    img.width = read_pnm_int(in);
    img.height = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval != 255) throw ValidationError("only 8-bit PNM supported: " + path);
    if (img.width <= 0 || img.height <= 0) throw ValidationError("bad image dimensions: " + path);
    const std::size_t n =
        static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(n);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw ValidationError("truncated image file: " + path);
    return img;
}

void save_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write image: " + path);
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

Image resize_image(const Image& img, int width, int height) {
    if (width <= 0 || height <= 0) throw ValidationError("resize_image: bad target size");
    Image out;
    out.width = width;
    out.height = height;
    out.channels = img.channels;
    out.pixels.resize(static_cast<std::size_t>(width) * height * img.channels);
    std::vector<double> plane(static_cast<std::size_t>(img.width) * img.height);
    std::vector<double> resized(static_cast<std::size_t>(width) * height);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                plane[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
        kern::bilinear_resize(plane.data(), img.height, img.width, resized.data(), height, width);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double v = resized[static_cast<std::size_t>(y) * width + x];
                out.at(y, x, c) =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    }
    return out;
}

void save_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw RuntimeFailure("save_png: only gray or RGB supported");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write PNG: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(img.channels == 3 ? 2 : 0);           // color type
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter method
    ihdr.push_back(0);                                   // no interlace
    write_chunk(out, "IHDR", ihdr);

    // Filter byte 0 per scanline, then one deflate pass at a pinned level.
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK)
        throw RuntimeFailure("PNG deflate failed");
    compressed.resize(bound);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
}

std::uint64_t image_content_hash(const Image& img) {
    std::uint64_t h = fnv1a64(&img.width, sizeof img.width);
    h = fnv1a64(&img.height, sizeof img.height, h);
    h = fnv1a64(&img.channels, sizeof img.channels, h);
    return fnv1a64(img.pixels.data(), img.pixels.size(), h);
}

std::uint64_t file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

}  // namespace ia
