#pragma once

#include "acfseg/augment.hpp"
#include "acfseg/config.hpp"
#include "acfseg/evaluation.hpp"
#include "acfseg/loss.hpp"
#include "acfseg/network.hpp"
#include "acfseg/optim.hpp"

namespace acfseg {

struct TrainConfig {
    NetworkConfig net;
    OptimConfig optim;
    LossWeights loss_weights;
    BootstrapConfig bootstrap;
    bool bootstrap_coarse = true;  // the fine loss is always bootstrapped when enabled
    AugmentConfig aug;
    int batch_size = 4;
    int checkpoint_every = 200;
    int eval_every = 200;
    uint64_t seed = 0;
};

// Reads the documented key set; unknown keys are errors. num_classes comes
// from the dataset, not the config.
TrainConfig parse_train_config(ConfigMap& config);

struct TrainResult {
    double final_miou_coarse = 0.0;
    double final_miou_fine = 0.0;  // NaN for baseline
    std::string final_checkpoint;
    std::string metrics_csv;
};

// Deterministic for a fixed seed. Writes metrics.csv
// (iter,lr,loss_total,loss_aux,loss_coarse,loss_fine,val_miou) and periodic
// + final checkpoints into run_dir. Aborts on a non-finite loss, naming the
// first non-finite tensor.
TrainResult train(TrainConfig config, const DatasetManifest& train_set,
                  const DatasetManifest& val_set, const std::string& run_dir);

}  // namespace acfseg
