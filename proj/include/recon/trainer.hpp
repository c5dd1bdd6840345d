#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "recon/dataset.hpp"
#include "recon/model.hpp"

namespace recon {

struct TrainConfig {
    int epochs = 70;            // Karman default; droplet runs use 100 (up to 500)
    int batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 42;
    int early_stop_patience = 10; // epochs without validation improvement; 0 disables
    int threads = 1;
};

struct EpochLoss {
    double train_mse = 0.0;
    double val_mse = 0.0;
};

using LossHistory = std::vector<EpochLoss>;

struct FitResult {
    AutoencoderModel<float> model; // checkpoint with the best validation MSE seen
    LossHistory history;           // one entry per completed epoch
    int best_epoch = 0;            // 1-based epoch of the returned checkpoint
    double best_val_mse = 0.0;
};

/// Minibatch Adam on reconstruction MSE with per-epoch validation monitoring
/// and patience-based early stopping. Bit-reproducible given cfg.seed: batch
/// shuffling uses per-epoch derived seeds and gradient accumulation order is
/// fixed regardless of cfg.threads.
FitResult fit(AutoencoderModel<float> model, const DatasetManifest& data,
              const TrainConfig& cfg);

/// Per-sample reconstruction MSE over one split, in manifest order.
std::vector<double> evaluate_split(const AutoencoderModel<float>& model,
                                   const DatasetManifest& data, Split split, int threads = 1);

void write_loss_csv(const std::filesystem::path& path, const LossHistory& history);

} // namespace recon
