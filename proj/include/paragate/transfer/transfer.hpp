// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paragate/models/models.hpp"

namespace paragate::transfer {

enum class TransferErrorKind { EmptyCorpus, EmptyPlan, BadArgument };
using TransferError = KindedError<TransferErrorKind>;

/// One normalized, labeled subgraph ready for the network.
struct Sample {
  std::uint32_t id = 0;
  std::string design;
  nn::Matrix x;
  nn::MessageGraph mg;
  std::vector<std::uint32_t> rows;
  std::vector<double> y;
};

/// Decomposes normalized graphs into subgraphs and keeps those with labels.
/// Ids count up from `first_id` in graph order.
std::vector<Sample> make_samples(const std::vector<graph::PinGraph>& graphs, std::size_t subgraph_size,
                                 bool bidirectional, std::uint32_t first_id = 0);

/// Mean over samples of the per-sample MSE, summed in sample order.
double evaluate(const nn::ParamSet& p, const std::vector<Sample>& samples);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
};

struct TrainLog {
  std::vector<EpochRecord> epochs;  // epoch 0 is the untrained evaluation
  std::size_t best_epoch = 0;
  std::uint64_t steps = 0;
  [[nodiscard]] std::string csv() const;
};

struct TrainOptions {
  nn::FreezeMask freeze;
  /// Writes epoch_NNN.pgck after every epoch when set.
  std::string checkpoint_dir;
  /// Stop after `patience` epochs without validation improvement and keep the
  /// best epoch. Needs a validation set.
  bool early_stop = true;
};

/// Minibatch Adam over `train` with hyperparameters from `cfg`.
TrainLog fit(models::TaskModel& m, const std::vector<Sample>& train, const std::vector<Sample>& val,
             const nn::TrainConfig& cfg, const TrainOptions& opt = {});

/// Splits off round(fraction * n) validation samples, chosen by a seeded shuffle.
void hold_out(std::vector<Sample>& samples, std::vector<Sample>& val, double fraction, std::uint64_t seed);

/// Sets the readout output bias to the mean label so training starts centered.
void center_output(nn::ParamSet& p, const std::vector<Sample>& samples);

struct TrainResult {
  models::TaskModel model;
  TrainLog log;
};

/// Cap model from small/medium designs. Graphs are raw and carry cap labels.
TrainResult pretrain(const std::vector<graph::PinGraph>& corpus, const nn::TrainConfig& cfg,
                     const std::string& checkpoint_dir = "");

enum class ScoreMode { Embedding, Parameter };

struct FinetunePlan {
  std::vector<double> scores;           // per sample, by position
  std::vector<std::uint32_t> selected;  // sample positions, ascending
  double rho = 0.2;
  nn::FreezeMask freeze = nn::FreezeMask::aggregator_and_embed();
};

/// Indices of the ceil(rho * n) largest scores; ties go to the lower index.
std::vector<std::uint32_t> top_fraction(const std::vector<double>& scores, double rho);

/// Embedding mode: mean over labeled nodes of |d loss_i / d h_i|, the final
/// node embedding, with loss_i = (pred_i - y_i)^2. Parameter mode: norm of the
/// full parameter gradient of the sample's MSE.
FinetunePlan score_subgraphs(const models::TaskModel& m, const std::vector<Sample>& samples, double rho = 0.2,
                             ScoreMode mode = ScoreMode::Embedding);
/// Uniform random selection of the same size.
FinetunePlan random_plan(std::size_t num_samples, double rho, std::uint64_t seed);

/// Trains on the plan's selected samples under its freeze mask.
TrainResult finetune(const models::TaskModel& m, const FinetunePlan& plan, const std::vector<Sample>& samples,
                     const std::vector<Sample>& val, const nn::TrainConfig& cfg);

/// Ratio regression on raw dual-feature graphs carrying calibration labels.
TrainResult train_calibration(models::Task task, const std::vector<graph::PinGraph>& corpus,
                              const nn::TrainConfig& cfg);

}  // namespace paragate::transfer
