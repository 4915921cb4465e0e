#include "mohr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace mohr {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'H', 'R'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<char>& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::vector<char>& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

struct Reader {
    const std::vector<char>& buf;
    size_t pos = 0;
    const std::filesystem::path& path;

    uint32_t u32() {
        if (pos + 4 > buf.size()) {
            throw DataError("truncated checkpoint: " + path.string());
        }
        uint32_t v = 0;
        for (int b = 3; b >= 0; --b) {
            v = (v << 8) | static_cast<uint8_t>(buf[pos + b]);
        }
        pos += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

void put_matrix(std::vector<char>& out, const Matrix& m) {
    for (uint32_t r = 0; r < m.rows(); ++r) {
        for (const float v : m.row_span(r)) {
            put_f32(out, v);
        }
    }
}

void read_matrix(Reader& r, Matrix& m) {
    for (uint32_t row = 0; row < m.rows(); ++row) {
        for (float& v : m.row_span(row)) {
            v = r.f32();
        }
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
    std::vector<char> buf;
    buf.reserve(24 + 4 * (parameter_count(p)));
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, p.num_users());
    put_u32(buf, p.num_items());
    put_u32(buf, p.num_explicit_relations());
    put_u32(buf, p.k);
    put_matrix(buf, p.user_vecs);
    put_matrix(buf, p.item_vecs);
    put_matrix(buf, p.rel_vecs);
    for (const float v : p.item_bias) {
        put_f32(buf, v);
    }
    for (const float v : p.rel_bias) {
        put_f32(buf, v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw DataError("cannot write checkpoint: " + path.string());
    }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path.string());
    }
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 24 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw DataError("bad checkpoint magic: " + path.string());
    }
    Reader r{buf, 4, path};
    const uint32_t version = r.u32();
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " +
                        path.string());
    }
    const uint32_t users = r.u32();
    const uint32_t items = r.u32();
    const uint32_t rels = r.u32();
    const uint32_t k = r.u32();
    if (k == 0 || items == 0) {
        throw DataError("degenerate checkpoint header: " + path.string());
    }

    ModelParams p;
    p.k = k;
    p.user_vecs = Matrix(users, k);
    p.item_vecs = Matrix(items, k);
    p.rel_vecs = Matrix(rels + 1, k);
    p.item_bias.assign(items, 0.0f);
    p.rel_bias.assign(rels + 1, 0.0f);
    read_matrix(r, p.user_vecs);
    read_matrix(r, p.item_vecs);
    read_matrix(r, p.rel_vecs);
    for (float& v : p.item_bias) {
        v = r.f32();
    }
    for (float& v : p.rel_bias) {
        v = r.f32();
    }
    if (r.pos != buf.size()) {
        throw DataError("checkpoint has trailing bytes: " + path.string());
    }
    return p;
}

}  // namespace mohr
