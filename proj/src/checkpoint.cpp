#include "drafter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace drafter {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'L', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file: " + path);
    return v;
}

void put_string(std::ofstream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& is, const std::string& path) {
    uint32_t n = get<uint32_t>(is, path);
    if (n > (1u << 20)) throw IoError("checkpoint: implausible string length in " + path);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw IoError("checkpoint: truncated file: " + path);
    return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, kVersion);
    put<uint8_t>(os, ckpt.model.kind == ModelKind::bigram ? 1 : 0);
    put<uint8_t>(os, 0);  // activation: silu
    const ToyLmConfig& c = ckpt.model.config;
    for (int32_t v : {c.vocab_size, c.context_len, c.layers, c.heads, c.hidden_dim, c.intermediate_dim}) {
        put<int32_t>(os, v);
    }
    put<int64_t>(os, ckpt.step);
    put<uint64_t>(os, ckpt.rng_seed);
    put<uint64_t>(os, ckpt.rng_cursor);
    put_string(os, ckpt.loss_kind);
    put<uint32_t>(os, static_cast<uint32_t>(ckpt.model.params.size()));
    for (const Tensor& t : ckpt.model.params) {
        put_string(os, t.name);
        put<uint32_t>(os, static_cast<uint32_t>(t.rows));
        put<uint32_t>(os, static_cast<uint32_t>(t.cols));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("checkpoint: bad magic in " + path);
    }
    uint32_t version = get<uint32_t>(is, path);
    if (version != kVersion) throw IoError("checkpoint: unsupported version in " + path);

    Checkpoint ckpt;
    uint8_t kind = get<uint8_t>(is, path);
    ckpt.model.kind = kind == 1 ? ModelKind::bigram : ModelKind::transformer;
    get<uint8_t>(is, path);  // activation
    ToyLmConfig& c = ckpt.model.config;
    c.vocab_size = get<int32_t>(is, path);
    c.context_len = get<int32_t>(is, path);
    c.layers = get<int32_t>(is, path);
    c.heads = get<int32_t>(is, path);
    c.hidden_dim = get<int32_t>(is, path);
    c.intermediate_dim = get<int32_t>(is, path);
    ckpt.step = get<int64_t>(is, path);
    ckpt.rng_seed = get<uint64_t>(is, path);
    ckpt.rng_cursor = get<uint64_t>(is, path);
    ckpt.loss_kind = get_string(is, path);
    uint32_t n_tensors = get<uint32_t>(is, path);
    ckpt.model.params.reserve(n_tensors);
    for (uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = get_string(is, path);
        uint32_t rows = get<uint32_t>(is, path);
        uint32_t cols = get<uint32_t>(is, path);
        Tensor t(name, static_cast<int>(rows), static_cast<int>(cols));
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw IoError("checkpoint: truncated tensor data in " + path);
        ckpt.model.params.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace drafter
