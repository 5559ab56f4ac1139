#include "ia/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ia/common.hpp"
#include "ia/image_io.hpp"

namespace ia {

using nlohmann::json;

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ValidationError("truncated binary file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

static_assert(sizeof(float) == 4 && sizeof(double) == 8);

}  // namespace

void save_heatmap_ighm(const std::string& path, const AttentionMap& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write heatmap: " + path);
    out.write("IGHM", 4);
    put_u32(out, static_cast<std::uint32_t>(m.rows));
    put_u32(out, static_cast<std::uint32_t>(m.cols));
    std::vector<float> buf(m.v.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) buf[i] = static_cast<float>(m.v[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

AttentionMap load_heatmap_ighm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open heatmap: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "IGHM", 4) != 0)
        throw ValidationError("bad heatmap magic in " + path);
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
        throw ValidationError("implausible heatmap dimensions in " + path);
    AttentionMap m(static_cast<int>(rows), static_cast<int>(cols));
    std::vector<float> buf(m.v.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw ValidationError("truncated heatmap file: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) m.v[i] = static_cast<double>(buf[i]);
    return m;
}

void save_heatmap_png(const std::string& path, const AttentionMap& m) {
    Image img;
    img.width = m.cols;
    img.height = m.rows;
    img.channels = 1;
    img.pixels.resize(m.v.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) {
        const double v = std::clamp(m.v[i], 0.0, 1.0) * 255.0;
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
    }
    save_png(path, img);
}

void save_split(const std::string& path, const SplitManifest& m) {
    json j;
    j["train_ids"] = m.train_ids;
    j["test_ids"] = m.test_ids;
    j["category_key"] = to_string(m.category_key);
    j["seed"] = m.seed;
    atomic_write_text(path, j.dump(2) + "\n");
}

SplitManifest load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open split manifest: " + path);
    json j;
    try {
        in >> j;
        SplitManifest m;
        m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
        m.category_key = category_key_from_string(j.at("category_key").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError("bad split manifest " + path + ": " + e.what());
    }
}

void write_tensor_record(std::ostream& out, const NamedTensor& nt) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    out.put(nt.f64 ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(nt.t.rows));
    put_u32(out, static_cast<std::uint32_t>(nt.t.cols));
    if (nt.f64) {
        out.write(reinterpret_cast<const char*>(nt.t.d.data()),
                  static_cast<std::streamsize>(nt.t.d.size() * sizeof(double)));
    } else {
        std::vector<float> buf(nt.t.d.size());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(nt.t.d[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

NamedTensor read_tensor_record(std::istream& in) {
    NamedTensor nt;
    const auto name_len = get_u32(in);
    if (name_len > 4096) throw ValidationError("implausible tensor name length");
    nt.name.resize(name_len);
    in.read(nt.name.data(), name_len);
    const int dtype = in.get();
    if (dtype != 0 && dtype != 1) throw ValidationError("bad tensor dtype");
    nt.f64 = dtype == 1;
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    nt.t = Tensor(static_cast<int>(rows), static_cast<int>(cols));
    if (nt.f64) {
        in.read(reinterpret_cast<char*>(nt.t.d.data()),
                static_cast<std::streamsize>(nt.t.d.size() * sizeof(double)));
    } else {
        std::vector<float> buf(nt.t.d.size());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        for (std::size_t i = 0; i < buf.size(); ++i) nt.t.d[i] = static_cast<double>(buf[i]);
    }
    if (!in) throw ValidationError("truncated tensor record");
    return nt;
}

void save_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write tensor file: " + path);
    out.write("IGTS", 4);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& nt : tensors) write_tensor_record(out, nt);
}

std::vector<NamedTensor> load_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open tensor file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "IGTS", 4) != 0)
        throw ValidationError("bad tensor file magic in " + path);
    const auto n = get_u32(in);
    std::vector<NamedTensor> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(read_tensor_record(in));
    return out;
}

void save_checkpoint_file(const std::string& path, const CheckpointFile& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write checkpoint: " + path);
    out.write("IACKPT01", 8);
    const std::string cfg = ck.config.dump();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& nt : ck.tensors) write_tensor_record(out, nt);
}

CheckpointFile load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "IACKPT01", 8) != 0)
        throw ValidationError("bad checkpoint magic in " + path);
    const auto cfg_len = get_u32(in);
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), cfg_len);
    if (!in) throw ValidationError("truncated checkpoint: " + path);
    CheckpointFile ck;
    try {
        ck.config = json::parse(cfg);
    } catch (const json::exception& e) {
        throw ValidationError("bad checkpoint config JSON: " + std::string(e.what()));
    }
    const auto n = get_u32(in);
    ck.tensors.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ck.tensors.push_back(read_tensor_record(in));
    return ck;
}

void atomic_write_text(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFailure("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw RuntimeFailure("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace ia
