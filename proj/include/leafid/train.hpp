#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leafid/model.hpp"
#include "leafid/views.hpp"

namespace leafid {

struct TrainConfig {
    int num_epochs = 10;
    int batch_size = 32;
    double learning_rate = 0.001;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::string backbone_id = "small4";
    int lr_halve_every = 512;  // iterations (batch updates) between halvings
    int workers = 0;           // 0 = auto; results are deterministic per (seed, workers)

    void validate() const;
};

struct TrainResult {
    std::vector<double> epoch_mean_loss;
};

// Mini-batch SGD with momentum over labeled pairs; both twins share the
// parameter storage, so one update serves both. Throws a numeric error
// naming epoch and batch if the loss turns non-finite.
TrainResult train(SiameseModel& model, const std::vector<PairRef>& pairs, const ViewCache& views,
                  const TrainConfig& cfg);

void save_loss_trace(const TrainResult& result, const std::string& path);

}  // namespace leafid
