#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mialab/nn.hpp"

namespace mia {

/// Frozen copy of a model at one training epoch.
struct ModelSnapshot {
    std::int64_t epoch = 0;
    std::vector<LayerSpec> arch;
    std::vector<Tensor> params;

    Network to_network() const;
    static ModelSnapshot of(const Network& net, std::int64_t epoch);
};

// Snapshot files ("MIAS" format, version 1) hold one model:
//   magic 'M','I','A','S' | u32 version | i64 epoch
//   u32 layer_count, then per layer:
//     u8 kind (0 dense, 1 relu, 2 dropout, 3 conv1d-rows)
//     dense:   u64 in_dim, u64 out_dim
//     dropout: f64 keep_prob
//     conv:    u64 rows, cols, kernels, kernel_width, stride
//   u32 tensor_count, then per tensor:
//     u32 ndim | u64 dims[ndim] | f64 data[prod(dims)]
// All integers and floats little-endian.

void save_snapshot(const ModelSnapshot& snap, const std::string& path);
ModelSnapshot load_snapshot(const std::string& path);

} // namespace mia
