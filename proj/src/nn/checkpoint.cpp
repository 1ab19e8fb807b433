#include "elgen/nn/checkpoint.hpp"

#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

#include "elgen/core/error.hpp"

namespace elgen {

namespace {

constexpr char kMagic[8] = {'E', 'L', 'G', 'C', 'K', 'P', 'T', '1'};

template <class V>
void write_pod(std::ostream& os, const V& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot write " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, static_cast<uint32_t>(meta_json.size()));
    os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    const auto names = params.names();
    write_pod<uint32_t>(os, static_cast<uint32_t>(names.size()));
    for (const std::string& name : names) {
        const TensorF& t = params.at(name);
        write_pod<uint16_t>(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<uint8_t>(os, 0);  // dtype f32
        write_pod<uint8_t>(os, static_cast<uint8_t>(t.rank()));
        for (int d : t.shape) write_pod<int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.ptr()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot read " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, 8) != std::string(kMagic, 8))
        throw IoError("checkpoint: bad magic in " + path);
    Checkpoint ck;
    const uint32_t meta_len = read_pod<uint32_t>(is);
    ck.meta_json.resize(meta_len);
    is.read(ck.meta_json.data(), meta_len);
    const uint32_t count = read_pod<uint32_t>(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_pod<uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint8_t dtype = read_pod<uint8_t>(is);
        if (dtype != 0) throw IoError("checkpoint: unsupported dtype in " + path);
        const uint8_t rank = read_pod<uint8_t>(is);
        std::vector<int> shape(rank);
        for (int r = 0; r < rank; ++r) shape[static_cast<size_t>(r)] = read_pod<int32_t>(is);
        TensorF t(shape);
        is.read(reinterpret_cast<char*>(t.ptr()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!is) throw IoError("checkpoint: truncated tensor " + name);
        ck.params.add(name, std::move(t));
    }
    return ck;
}

nlohmann::json Checkpoint::meta() const {
    if (meta_json.empty()) return nlohmann::json::object();
    return nlohmann::json::parse(meta_json);
}

void Checkpoint::set_meta(const nlohmann::json& j) { meta_json = j.dump(); }

}  // namespace elgen
