#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace milgrade {

// Shared optimization settings. MIL defaults: lr 1e-4, batch 1, patience 20.
// Probe defaults: lr 1e-5, batch 8, patience 15 (see probe_train_config()).
struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 1;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    double val_fraction = 0.25;

    void validate() const;
};

TrainConfig mil_train_config();
TrainConfig probe_train_config();

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::size_t best_epoch = 0;
};

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

// Validation loss must improve by more than this to reset patience.
inline constexpr double kValImprovementMin = 1e-6;

} // namespace milgrade
