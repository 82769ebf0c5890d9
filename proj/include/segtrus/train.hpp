#ifndef SEGTRUS_TRAIN_HPP_
#define SEGTRUS_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "segtrus/checkpoint.hpp"
#include "segtrus/dataset.hpp"
#include "segtrus/metrics.hpp"
#include "segtrus/model.hpp"

namespace segtrus {

struct TrainConfig {
  double learning_rate = 0.0005;
  double momentum = 0.9;
  std::size_t batch_size = 4;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  NetworkConfig network;

  void validate() const;  // throws UsageError
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double train_dsc = 0.0;
};

using ProgressSink = std::function<void(const EpochLog&)>;

// Classical momentum: v <- mu v - lr g; theta <- theta + v. Gradients are
// zeroed afterwards.
void sgd_step(ParamStore& params, double lr, double mu);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::size_t total_steps = 0;
};

// SGD training over the dataset's train split; per-epoch reshuffle, per-batch
// class weights. Bit-reproducible from (dataset, config).
TrainResult run_training(const Dataset& ds, const TrainConfig& cfg,
                         const ProgressSink& sink = {});

// Inference-mode forward over the given split, per-image Dice.
DscReport evaluate(const Checkpoint& ck, const Dataset& ds, Split split);

struct AblationResult {
  std::vector<DscReport> nrc_on;   // one report per run
  std::vector<DscReport> nrc_off;
};

// Tables I/II protocol: per run, resplit with seed+k and train the NRC-on and
// NRC-off variants on the identical split. Writes nrc_on.csv / nrc_off.csv
// and one manifest per run under out_dir.
AblationResult run_ablation(Dataset ds, const TrainConfig& base,
                            std::size_t runs,
                            const std::filesystem::path& out_dir,
                            const ProgressSink& sink = {});

// Avg/max/min x runs table in the Tables I/II layout.
std::string ablation_table_csv(const std::vector<DscReport>& reports);

}  // namespace segtrus

#endif  // SEGTRUS_TRAIN_HPP_
