#include "acfseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "acfseg/network.hpp"
#include "acfseg/optim.hpp"

namespace acfseg {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'F', 'S'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    // this toolchain is little-endian; byte order is the file's contract
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return value;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kMagic, 4);
    write_le<uint32_t>(out, kVersion);
    write_le<uint64_t>(out, ckpt.iteration);
    write_le<uint32_t>(out, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long: " + name);
        write_le<uint16_t>(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<uint8_t>(out, static_cast<uint8_t>(t.rank()));
        for (int d : t.shape) write_le<uint32_t>(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open checkpoint");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path + ": not an ACFS checkpoint");
    const uint32_t version = read_le<uint32_t>(in, path);
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    Checkpoint ckpt;
    ckpt.iteration = read_le<uint64_t>(in, path);
    const uint32_t count = read_le<uint32_t>(in, path);
    ckpt.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = read_le<uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint8_t rank = read_le<uint8_t>(in, path);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_le<uint32_t>(in, path));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) throw std::runtime_error(path + ": truncated tensor data for " + name);
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

namespace {

Tensor encode_network_config(const NetworkConfig& c) {
    std::vector<float> v = {
        float(c.num_classes),    float(c.base_channels), float(c.reduced_channels),
        c.use_aspp ? 1.0f : 0.0f, float(c.aspp_branch_channels),
        float(static_cast<int>(c.variant)), float(c.aspp_dilations.size())};
    for (int d : c.aspp_dilations) v.push_back(float(d));
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

}  // namespace

NetworkConfig network_config_from_checkpoint(const Checkpoint& ckpt) {
    const Tensor* t = ckpt.find("meta/config");
    if (!t) throw std::runtime_error("checkpoint has no meta/config tensor");
    if (t->size() < 7) throw std::runtime_error("meta/config tensor too short");
    NetworkConfig c;
    c.num_classes = static_cast<int>((*t)[0]);
    c.base_channels = static_cast<int>((*t)[1]);
    c.reduced_channels = static_cast<int>((*t)[2]);
    c.use_aspp = (*t)[3] != 0.0f;
    c.aspp_branch_channels = static_cast<int>((*t)[4]);
    c.variant = static_cast<AcfVariant>(static_cast<int>((*t)[5]));
    const int ndil = static_cast<int>((*t)[6]);
    c.aspp_dilations.clear();
    for (int i = 0; i < ndil; ++i) c.aspp_dilations.push_back(static_cast<int>((*t)[7 + i]));
    return c;
}

Checkpoint snapshot(const AcfNet& model, uint64_t iteration, SgdOptimizer* optim) {
    Checkpoint ckpt;
    ckpt.iteration = iteration;
    ckpt.tensors.emplace_back("meta/config", encode_network_config(model.config()));
    for (const auto& e : model.registry().params())
        ckpt.tensors.emplace_back(e.node->name, e.node->value);
    for (const auto& [name, buf] : model.registry().buffers()) ckpt.tensors.emplace_back(name, *buf);
    if (optim)
        for (const auto& [name, buf] : optim->named_buffers()) ckpt.tensors.emplace_back(name, *buf);
    return ckpt;
}

void restore(const Checkpoint& ckpt, AcfNet& model, SgdOptimizer* optim) {
    auto apply = [&](const std::string& name, Tensor& dst) {
        const Tensor* src = ckpt.find(name);
        if (!src) throw std::runtime_error("checkpoint is missing tensor " + name);
        if (src->shape != dst.shape)
            throw std::runtime_error("checkpoint tensor " + name + " has shape " +
                                     shape_str(src->shape) + ", model expects " +
                                     shape_str(dst.shape));
        dst = *src;
    };
    for (const auto& e : model.registry().params()) apply(e.node->name, e.node->value);
    for (const auto& [name, buf] : model.registry().buffers()) apply(name, *buf);
    if (optim)
        for (auto& [name, buf] : optim->named_buffers())
            if (ckpt.find(name)) apply(name, *buf);
}

}  // namespace acfseg
