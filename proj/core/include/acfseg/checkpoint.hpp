#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acfseg/tensor.hpp"

namespace acfseg {

// Little-endian binary container: magic "ACFS", u32 version=1, u64
// iteration, u32 tensor count, then per tensor: u16 name length, UTF-8
// name, u8 rank, u32 dims[rank], f32 data.
struct Checkpoint {
    uint64_t iteration = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

class AcfNet;
class SgdOptimizer;
struct NetworkConfig;

// Snapshot of model parameters, batch-norm buffers and (when given)
// momentum buffers under the "optim/" prefix.
Checkpoint snapshot(const AcfNet& model, uint64_t iteration, SgdOptimizer* optim = nullptr);

// Strict restore: every model tensor must be present with matching shape.
// "optim/" entries are applied when an optimizer is given, ignored otherwise.
void restore(const Checkpoint& ckpt, AcfNet& model, SgdOptimizer* optim = nullptr);

// Snapshots carry the architecture under "meta/config" so a checkpoint is
// self-describing; this rebuilds the NetworkConfig from it.
NetworkConfig network_config_from_checkpoint(const Checkpoint& ckpt);

}  // namespace acfseg
