#include "mosaic/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mosaic/errors.hpp"

namespace mosaic {

namespace {

constexpr const char* kMagic = "MOSAICCKPT";
constexpr int kVersion = 1;

struct ManifestEntry {
    std::string name;
    std::vector<int> shape;
    std::uint64_t offset = 0;
};

std::string shape_key(const std::vector<int>& shape) {
    std::ostringstream os;
    for (int e : shape) os << e << 'x';
    return os.str();
}

}  // namespace

void save_checkpoint(MosaicModel<float>& model, const std::filesystem::path& path, long step,
                     const AdamState* adam) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_checkpoint: cannot open " + path.string());

    auto params = model.parameters();
    struct Blob {
        std::string name;
        const std::vector<int>* shape;
        const float* data;
        std::size_t count;
    };
    std::vector<Blob> blobs;
    for (auto& [name, t] : params)
        blobs.push_back({name, &t->shape(), t->value().data(), t->numel()});
    if (adam) {
        if (adam->m.size() != params.size() || adam->v.size() != params.size())
            throw std::invalid_argument("save_checkpoint: optimizer state does not match model");
        for (std::size_t i = 0; i < params.size(); ++i) {
            blobs.push_back({"opt.m." + params[i].first, &params[i].second->shape(),
                             adam->m[i].data(), adam->m[i].size()});
            blobs.push_back({"opt.v." + params[i].first, &params[i].second->shape(),
                             adam->v[i].data(), adam->v[i].size()});
        }
    }

    const ModelConfig& cfg = model.config();
    out << kMagic << ' ' << kVersion << '\n';
    out << "config " << cfg.side << ' ' << cfg.dim << ' ' << cfg.heads << ' ' << cfg.enc_blocks
        << ' ' << cfg.dec_blocks << ' ' << cfg.mlp_ratio << '\n';
    out << "step " << step << '\n';
    out << "adam " << (adam ? adam->t : -1) << '\n';
    out << "tensors " << blobs.size() << '\n';
    std::uint64_t offset = 0;
    for (const Blob& b : blobs) {
        out << b.name << " f32 " << b.shape->size();
        for (int e : *b.shape) out << ' ' << e;
        out << ' ' << offset << '\n';
        offset += b.count * sizeof(float);
    }
    out << "data\n";
    for (const Blob& b : blobs)
        out.write(reinterpret_cast<const char*>(b.data),
                  static_cast<std::streamsize>(b.count * sizeof(float)));
    if (!out) throw io_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_checkpoint: cannot open " + path.string());

    std::string magic;
    int version = -1;
    if (!(in >> magic >> version) || magic != kMagic)
        throw io_error("load_checkpoint: not a checkpoint file: " + path.string());
    if (version != kVersion)
        throw io_error("load_checkpoint: unsupported version " + std::to_string(version));

    std::string word;
    ModelConfig cfg;
    if (!(in >> word >> cfg.side >> cfg.dim >> cfg.heads >> cfg.enc_blocks >> cfg.dec_blocks >>
          cfg.mlp_ratio) ||
        word != "config")
        throw io_error("load_checkpoint: malformed config line");
    long step = 0;
    if (!(in >> word >> step) || word != "step")
        throw io_error("load_checkpoint: malformed step line");
    long adam_t = -1;
    if (!(in >> word >> adam_t) || word != "adam")
        throw io_error("load_checkpoint: malformed adam line");
    std::size_t count = 0;
    if (!(in >> word >> count) || word != "tensors")
        throw io_error("load_checkpoint: malformed tensors line");

    std::vector<ManifestEntry> entries(count);
    for (auto& e : entries) {
        int rank = 0;
        if (!(in >> e.name >> word >> rank) || word != "f32" || rank < 1 || rank > 8)
            throw io_error("load_checkpoint: malformed manifest entry");
        e.shape.resize(rank);
        for (int& d : e.shape)
            if (!(in >> d) || d < 1) throw io_error("load_checkpoint: bad tensor extent");
        if (!(in >> e.offset)) throw io_error("load_checkpoint: missing tensor offset");
    }
    if (!(in >> word) || word != "data")
        throw io_error("load_checkpoint: missing data marker");
    in.get();  // the newline after "data"

    std::uint64_t data_start = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::end);
    std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());

    Checkpoint ckpt{MosaicModel<float>::init(cfg, 0), step, std::nullopt};
    auto params = ckpt.model.parameters();

    std::map<std::string, ManifestEntry*> by_name;
    for (auto& e : entries) by_name[e.name] = &e;

    auto read_into = [&](const std::string& name, const std::vector<int>& shape, float* dst,
                         std::size_t n) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw io_error("load_checkpoint: missing tensor " + name);
        if (shape_key(it->second->shape) != shape_key(shape))
            throw io_error("load_checkpoint: shape mismatch for " + name);
        std::uint64_t bytes = n * sizeof(float);
        if (data_start + it->second->offset + bytes > file_size)
            throw io_error("load_checkpoint: truncated data for " + name);
        in.seekg(static_cast<std::streamoff>(data_start + it->second->offset));
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (static_cast<std::uint64_t>(in.gcount()) != bytes)
            throw io_error("load_checkpoint: short read for " + name);
    };

    for (auto& [name, t] : params)
        read_into(name, t->shape(), t->value().data(), t->numel());

    if (adam_t >= 0) {
        AdamState adam;
        adam.t = adam_t;
        adam.m.resize(params.size());
        adam.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam.m[i].resize(params[i].second->numel());
            adam.v[i].resize(params[i].second->numel());
            read_into("opt.m." + params[i].first, params[i].second->shape(), adam.m[i].data(),
                      adam.m[i].size());
            read_into("opt.v." + params[i].first, params[i].second->shape(), adam.v[i].data(),
                      adam.v[i].size());
        }
        ckpt.adam = std::move(adam);
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expect) {
    Checkpoint ckpt = load_checkpoint(path);
    if (!(ckpt.model.config() == expect))
        throw io_error("load_checkpoint: stored model config does not match the expected config");
    return ckpt;
}

}  // namespace mosaic
