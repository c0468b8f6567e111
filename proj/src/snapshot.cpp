#include "mialab/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mia {

static_assert(std::endian::native == std::endian::little,
              "snapshot writer assumes a little-endian host");

Network ModelSnapshot::to_network() const {
    Network net = make_network(arch, 0);
    if (net.params.size() != params.size()) {
        throw DimensionError("snapshot parameter count does not match architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!net.params[i].same_shape(params[i])) {
            throw DimensionError("snapshot parameter " + std::to_string(i) +
                                 " shape does not match architecture");
        }
    }
    net.params = params;
    return net;
}

ModelSnapshot ModelSnapshot::of(const Network& net, std::int64_t epoch) {
    ModelSnapshot s;
    s.epoch = epoch;
    s.arch = net.layers;
    s.params = net.params;
    return s;
}

namespace {

constexpr char kMagic[4] = {'M', 'I', 'A', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated snapshot file " + path);
    return v;
}

} // namespace

void save_snapshot(const ModelSnapshot& snap, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);

    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::int64_t>(out, snap.epoch);

    put<std::uint32_t>(out, static_cast<std::uint32_t>(snap.arch.size()));
    for (const LayerSpec& l : snap.arch) {
        switch (l.kind) {
            case LayerKind::Dense:
                put<std::uint8_t>(out, 0);
                put<std::uint64_t>(out, l.in_dim);
                put<std::uint64_t>(out, l.out_dim);
                break;
            case LayerKind::Relu:
                put<std::uint8_t>(out, 1);
                break;
            case LayerKind::Dropout:
                put<std::uint8_t>(out, 2);
                put<double>(out, l.keep_prob);
                break;
            case LayerKind::Conv1dRows:
                put<std::uint8_t>(out, 3);
                put<std::uint64_t>(out, l.rows);
                put<std::uint64_t>(out, l.cols);
                put<std::uint64_t>(out, l.kernels);
                put<std::uint64_t>(out, l.kernel_width);
                put<std::uint64_t>(out, l.stride);
                break;
        }
    }

    put<std::uint32_t>(out, static_cast<std::uint32_t>(snap.params.size()));
    for (const Tensor& t : snap.params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for " + path);
}

ModelSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError(path + " is not a snapshot file");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw FormatError("unsupported snapshot version " + std::to_string(version));
    }

    ModelSnapshot snap;
    snap.epoch = get<std::int64_t>(in, path);

    const auto n_layers = get<std::uint32_t>(in, path);
    snap.arch.reserve(n_layers);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto kind = get<std::uint8_t>(in, path);
        switch (kind) {
            case 0: {
                const auto in_dim = get<std::uint64_t>(in, path);
                const auto out_dim = get<std::uint64_t>(in, path);
                snap.arch.push_back(LayerSpec::dense(in_dim, out_dim));
                break;
            }
            case 1:
                snap.arch.push_back(LayerSpec::relu());
                break;
            case 2:
                snap.arch.push_back(LayerSpec::dropout(get<double>(in, path)));
                break;
            case 3: {
                const auto rows = get<std::uint64_t>(in, path);
                const auto cols = get<std::uint64_t>(in, path);
                const auto kernels = get<std::uint64_t>(in, path);
                const auto width = get<std::uint64_t>(in, path);
                const auto stride = get<std::uint64_t>(in, path);
                snap.arch.push_back(LayerSpec::conv1d_rows(rows, cols, kernels, width, stride));
                break;
            }
            default:
                throw FormatError("unknown layer kind " + std::to_string(kind) + " in " + path);
        }
    }

    const auto n_tensors = get<std::uint32_t>(in, path);
    snap.params.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto ndim = get<std::uint32_t>(in, path);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = get<std::uint64_t>(in, path);
        Tensor t = Tensor::zeros(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw FormatError("truncated snapshot file " + path);
        snap.params.push_back(std::move(t));
    }
    return snap;
}

} // namespace mia
