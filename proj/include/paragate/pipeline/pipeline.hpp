// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paragate/metrics/metrics.hpp"
#include "paragate/models/models.hpp"
#include "paragate/pipeline/surrogate.hpp"
#include "paragate/synth/synth.hpp"
#include "paragate/transfer/transfer.hpp"

namespace paragate::pipeline {

enum class PipelineErrorKind { Step1, Step2, Step3, BadConfig, MissingFile };
using PipelineError = KindedError<PipelineErrorKind>;

enum class Mode { Full, NoPretrain, NoEda, NoCalib };
const char* mode_name(Mode m);
Mode mode_from_name(const std::string& s);

struct FlowConfig {
  std::string library;  // empty: built-in desk library
  std::string cap_model;
  std::string at_model;
  std::string power_model;
  std::string surrogate;  // JSON weights, used by no-eda
  sta::ClockSpec clock;
  sta::Activity activity;
  Mode mode = Mode::Full;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// Throws MissingFile for any model the mode needs that is not on disk.
  void validate() const;
};
nlohmann::ordered_json to_json(const FlowConfig& c);

struct FlowModels {
  models::TaskModel cap;
  std::optional<models::TaskModel> at;
  std::optional<models::TaskModel> power;
  std::optional<Surrogate> surrogate;
};
FlowModels load_models(const FlowConfig& c);

struct InferResult {
  std::string design;
  sta::TimingPowerReport pre;  // zero wire cap
  std::unordered_map<std::string, double> caps;
  std::string pspef;
  sta::TimingPowerReport raw;    // after back-annotation (or the surrogate)
  sta::TimingPowerReport final;  // after calibration
  bool has_power = true;         // false when the surrogate replaced the engine
  metrics::Runtime runtime;
};

/// Step 1 predicts caps, step 2 writes the PSPEF and reruns timing/power,
/// step 3 applies the calibration models. With `run_dir`, inputs, PSPEF and
/// reports are written as each step finishes. Failures name their step.
InferResult infer(const netlist::Netlist& n, const FlowModels& m, const FlowConfig& cfg,
                  const std::string& run_dir = "");

/// DFF data-pin arrival times of `pred` against `truth`.
metrics::DesignEval evaluate_at(const netlist::Netlist& n, const sta::TimingPowerReport& pred,
                                const sta::TimingPowerReport& truth, std::vector<double>* p = nullptr,
                                std::vector<double>* t = nullptr);
/// Cell-wise total power plus the design total.
metrics::DesignEval evaluate_power(const netlist::Netlist& n, const sta::TimingPowerReport& pred,
                                   const sta::TimingPowerReport& truth, std::vector<double>* p = nullptr,
                                   std::vector<double>* t = nullptr);
/// Every D_NET of the golden file against the predicted caps.
metrics::DesignEval evaluate_caps(const std::string& design, const std::unordered_map<std::string, double>& caps,
                                  const spef::SpefDocument& golden, std::vector<double>* p = nullptr,
                                  std::vector<double>* t = nullptr);

/// Writes eval/{at,power}.json and .csv for one inferred design.
void write_eval(const std::string& run_dir, const netlist::Netlist& n, const InferResult& r,
                const sta::TimingPowerReport& truth);

struct DesignData {
  synth::SuiteEntry entry;
  netlist::Netlist netlist;
  spef::SpefDocument golden;
  sta::TimingPowerReport pre;
  sta::TimingPowerReport truth;
  graph::PinGraph graph;  // raw features, cap labels from the golden file
};

struct SuiteData {
  synth::Suite suite;
  std::shared_ptr<const netlist::CellLibrary> library;
  std::vector<DesignData> pretrain, train, test;
};
SuiteData load_suite_data(const std::string& dir, const sta::ClockSpec& clock, const sta::Activity& activity);

/// Raw (unnormalized) cap-labeled graphs of a split.
std::vector<graph::PinGraph> split_graphs(const std::vector<DesignData>& designs);

/// Fine-tuning subgraphs of the train split under `schema`: a seeded share of
/// the designs, then a seeded 10% validation hold-out.
struct FinetuneData {
  std::vector<std::size_t> designs;  // indices into SuiteData::train
  std::vector<transfer::Sample> samples;
  std::vector<transfer::Sample> val;
};
FinetuneData make_finetune_data(const SuiteData& data, const graph::FeatureSchema& schema, const nn::TrainConfig& cfg,
                                std::uint64_t seed, double design_fraction);

/// Dual-feature graphs with AT and power ratio labels, plus surrogate examples,
/// for designs annotated with caps from `cap`.
struct CalibCorpus {
  std::vector<std::unordered_map<std::string, double>> caps;
  std::vector<graph::PinGraph> at;
  std::vector<graph::PinGraph> power;
};
CalibCorpus make_calib_corpus(const std::vector<DesignData>& designs, const models::TaskModel& cap,
                              const sta::ClockSpec& clock, const sta::Activity& activity);
/// Surrogate examples over DFF data pins; `caps` must outlive the result.
std::vector<SurrogateExample> surrogate_examples(const std::vector<DesignData>& designs,
                                                 const std::vector<std::unordered_map<std::string, double>>& caps);

struct ExperimentConfig {
  nn::TrainConfig train = nn::TrainConfig::desk();
  std::size_t finetune_epochs = 30;
  std::size_t calib_epochs = 20;
  std::size_t surrogate_epochs = 60;
  std::size_t seeds = 5;
  std::uint64_t seed = 1;
  double rho = 0.2;
  double design_fraction = 1.0;  // share of train-split designs used for fine-tuning
  transfer::ScoreMode score_mode = transfer::ScoreMode::Embedding;
  bool sampling = true;  // Grad-Update and Rand-Freeze runs
  bool variants = true;  // calibration, no-pretrain and no-eda runs
  std::string work_dir;  // checkpoints and curves when set
  sta::ClockSpec clock;
  sta::Activity activity;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, metrics::EvalResult> cap;    // strategy / variant -> cap metrics
  std::map<std::string, transfer::TrainLog> curves;  // fine-tune loss curves
  std::map<std::string, metrics::EvalResult> at;     // full, woP, woE, woC
  std::map<std::string, metrics::EvalResult> power;  // full, woP, woC
  std::vector<std::uint32_t> grad_selected;
};

struct ExperimentReport {
  transfer::TrainLog pretrain;
  std::vector<SeedResult> seeds;
  double seconds = 0.0;
};

/// Pretrains once (or uses `pretrained`), then per seed fine-tunes, calibrates
/// and evaluates every requested strategy and variant on the test split.
ExperimentReport run_experiment(const SuiteData& data, const ExperimentConfig& cfg,
                                const models::TaskModel* pretrained = nullptr);

struct TableRow {
  std::string name;
  std::vector<double> values;  // per seed
  [[nodiscard]] double mean() const;
};

/// Four rows (full, woP, woE, woC) of mean DFF-AT R^2 and the other columns.
nlohmann::ordered_json ablation_table(const ExperimentReport& r);
std::string ablation_csv(const ExperimentReport& r);
/// Grad-Freeze, Grad-Update, Rand-Freeze test cap MAPE per seed and mean.
nlohmann::ordered_json sampling_table(const ExperimentReport& r);
std::string sampling_csv(const ExperimentReport& r);
/// Per-epoch validation curves of every strategy and seed, long format.
std::string curves_csv(const ExperimentReport& r);

std::vector<TableRow> cap_mape_rows(const ExperimentReport& r);
std::vector<TableRow> at_r2_rows(const ExperimentReport& r);

struct BenchRow {
  std::string design;
  std::size_t cells = 0;
  std::size_t pins = 0;
  metrics::Runtime runtime;
};
/// Timed inference over the test split.
std::vector<BenchRow> bench(const SuiteData& data, const FlowModels& m, const FlowConfig& cfg);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace paragate::pipeline
