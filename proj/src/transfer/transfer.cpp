// SPDX-License-Identifier: Apache-2.0
#include "paragate/transfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "paragate/common/text.hpp"

namespace paragate::transfer {

std::vector<Sample> make_samples(const std::vector<graph::PinGraph>& graphs, std::size_t subgraph_size,
                                 bool bidirectional, std::uint32_t first_id) {
  std::vector<Sample> out;
  std::uint32_t id = first_id;
  for (const auto& g : graphs) {
    for (auto& sub : graph::decompose(g, subgraph_size)) {
      const auto rows = models::labeled_rows(sub.graph);
      if (rows.empty()) continue;
      Sample s;
      s.id = id++;
      s.design = g.design;
      s.x = models::node_matrix(sub.graph);
      s.mg = models::message_graph(sub.graph, bidirectional);
      s.rows = rows;
      for (auto r : rows) s.y.push_back(sub.graph.y[r]);
      out.push_back(std::move(s));
    }
  }
  return out;
}

double evaluate(const nn::ParamSet& p, const std::vector<Sample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& s : samples) total += nn::mse(nn::forward(p, s.x, s.mg, s.rows, nullptr), s.y, nullptr);
  return total / static_cast<double>(samples.size());
}

std::string TrainLog::csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << text::format_exact(e.train_loss) << ','
       << (std::isnan(e.val_loss) ? std::string("nan") : text::format_exact(e.val_loss)) << '\n';
  }
  return os.str();
}

TrainLog fit(models::TaskModel& m, const std::vector<Sample>& train, const std::vector<Sample>& val,
             const nn::TrainConfig& cfg, const TrainOptions& opt) {
  if (train.empty()) throw TransferError(TransferErrorKind::EmptyCorpus, "no labeled training samples");
  if (cfg.batch == 0) throw TransferError(TransferErrorKind::BadArgument, "batch must be at least 1");
  nn::ParamSet& p = m.params;
  nn::TrainConfig step_cfg = p.config();
  step_cfg.lr = cfg.lr;
  step_cfg.beta1 = cfg.beta1;
  step_cfg.beta2 = cfg.beta2;
  step_cfg.eps = cfg.eps;
  nn::Adam adam(step_cfg);
  std::mt19937_64 rng(cfg.seed);

  TrainLog log;
  const bool use_val = !val.empty();
  double best = use_val ? evaluate(p, val) : std::numeric_limits<double>::infinity();
  log.epochs.push_back({0, evaluate(p, train), use_val ? best : std::numeric_limits<double>::quiet_NaN()});
  nn::ParamSet best_params = p;
  std::size_t since_best = 0;
  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> loss(train.size());
  nn::Tape tape;
  std::vector<double> dy;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t end = std::min(order.size(), b + cfg.batch);
      const double scale = 1.0 / static_cast<double>(end - b);
      p.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const Sample& s = train[order[k]];
        const auto pred = nn::forward(p, s.x, s.mg, s.rows, &tape);
        loss[order[k]] = nn::mse(pred, s.y, &dy);
        for (double& v : dy) v *= scale;
        nn::backward(p, s.mg, tape, dy, opt.freeze);
      }
      adam.step(p, opt.freeze);
      ++log.steps;
    }
    double train_loss = 0.0;
    for (double v : loss) train_loss += v;
    train_loss /= static_cast<double>(loss.size());
    const double val_loss = use_val ? evaluate(p, val) : std::numeric_limits<double>::quiet_NaN();
    log.epochs.push_back({epoch, train_loss, val_loss});
    if (!opt.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.pgck", epoch);
      models::save_model((std::filesystem::path(opt.checkpoint_dir) / name).string(), m);
    }
    if (use_val) {
      if (val_loss < best) {
        best = val_loss;
        best_params = p;
        log.best_epoch = epoch;
        since_best = 0;
      } else if (opt.early_stop && ++since_best >= cfg.patience) {
        break;
      }
    } else {
      log.best_epoch = epoch;
    }
  }
  if (use_val) {
    for (std::size_t k = 0; k < p.tensors().size(); ++k) p.at(k).value = best_params.at(k).value;
  }
  p.zero_grad();
  return log;
}

void hold_out(std::vector<Sample>& samples, std::vector<Sample>& val, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw TransferError(TransferErrorKind::BadArgument, "hold-out fraction outside [0,1)");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
  if (count == 0) return;
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<char> is_val(samples.size(), 0);
  for (std::size_t k = 0; k < count; ++k) is_val[idx[k]] = 1;
  std::vector<Sample> keep;
  for (std::size_t k = 0; k < samples.size(); ++k) (is_val[k] ? val : keep).push_back(std::move(samples[k]));
  samples = std::move(keep);
}

void center_output(nn::ParamSet& p, const std::vector<Sample>& samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    for (double v : s.y) sum += v;
    n += s.y.size();
  }
  if (n) p.at(p.b3).value.data[0] = sum / static_cast<double>(n);
}

namespace {

constexpr double kValFraction = 0.1;

std::vector<graph::PinGraph> normalized_corpus(const std::vector<graph::PinGraph>& corpus,
                                               graph::FeatureSchema& schema) {
  std::vector<const graph::PinGraph*> ptrs;
  for (const auto& g : corpus) ptrs.push_back(&g);
  schema = graph::fit_schema(ptrs);
  std::vector<graph::PinGraph> out = corpus;
  for (auto& g : out) graph::apply_schema(g, schema);
  return out;
}

TrainResult train_fresh(models::Task task, const std::vector<graph::PinGraph>& corpus, const nn::TrainConfig& cfg,
                        const std::string& checkpoint_dir) {
  std::size_t labeled = 0;
  for (const auto& g : corpus) labeled += g.num_labeled();
  if (corpus.empty() || labeled == 0) {
    throw TransferError(TransferErrorKind::EmptyCorpus, std::string("no labeled graphs to train the ") +
                                                            models::task_name(task) + " model on");
  }
  graph::FeatureSchema schema;
  const auto graphs = normalized_corpus(corpus, schema);
  TrainResult r;
  r.model = models::make_model(task, schema, cfg);
  auto samples = make_samples(graphs, cfg.subgraph_size, cfg.bidirectional);
  std::vector<Sample> val;
  if (samples.size() >= 10) hold_out(samples, val, kValFraction, cfg.seed ^ 0x5eedULL);
  center_output(r.model.params, samples);
  TrainOptions opt;
  opt.checkpoint_dir = checkpoint_dir;
  r.log = fit(r.model, samples, val, cfg, opt);
  return r;
}

}  // namespace

TrainResult pretrain(const std::vector<graph::PinGraph>& corpus, const nn::TrainConfig& cfg,
                     const std::string& checkpoint_dir) {
  return train_fresh(models::Task::Cap, corpus, cfg, checkpoint_dir);
}

std::vector<std::uint32_t> top_fraction(const std::vector<double>& scores, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw TransferError(TransferErrorKind::BadArgument, "selection fraction outside (0,1]");
  const auto count = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(scores.size()) - 1e-9));
  std::vector<std::uint32_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

FinetunePlan score_subgraphs(const models::TaskModel& m, const std::vector<Sample>& samples, double rho,
                             ScoreMode mode) {
  FinetunePlan plan;
  plan.rho = rho;
  plan.scores.resize(samples.size(), 0.0);
  const nn::ParamSet& p = m.params;
  nn::ParamSet scratch;
  if (mode == ScoreMode::Parameter) scratch = p;
  nn::Tape tape;
  std::vector<double> dy;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    if (mode == ScoreMode::Embedding) {
      const nn::Matrix h = nn::embed_and_propagate(p, s.x, s.mg);
      nn::Matrix sel(s.rows.size(), h.cols);
      for (std::size_t r = 0; r < s.rows.size(); ++r) std::copy_n(h.row(s.rows[r]), h.cols, sel.row(r));
      nn::ReadoutCache cache;
      const auto pred = nn::readout(sel, p, &cache);
      dy.resize(pred.size());
      for (std::size_t r = 0; r < pred.size(); ++r) dy[r] = 2.0 * (pred[r] - s.y[r]);
      const nn::Matrix dh = nn::readout_input_grad(p, cache, dy);
      double sum = 0.0;
      for (std::size_t r = 0; r < dh.rows; ++r) {
        double sq = 0.0;
        for (std::size_t c = 0; c < dh.cols; ++c) sq += dh(r, c) * dh(r, c);
        sum += std::sqrt(sq);
      }
      plan.scores[k] = s.rows.empty() ? 0.0 : sum / static_cast<double>(s.rows.size());
    } else {
      scratch.zero_grad();
      const auto pred = nn::forward(scratch, s.x, s.mg, s.rows, &tape);
      nn::mse(pred, s.y, &dy);
      nn::backward(scratch, s.mg, tape, dy);
      double sq = 0.0;
      for (const auto& t : scratch.tensors()) {
        for (double v : t.grad.data) sq += v * v;
      }
      plan.scores[k] = std::sqrt(sq);
    }
  }
  plan.selected = top_fraction(plan.scores, rho);
  return plan;
}

FinetunePlan random_plan(std::size_t num_samples, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw TransferError(TransferErrorKind::BadArgument, "selection fraction outside (0,1]");
  FinetunePlan plan;
  plan.rho = rho;
  plan.scores.assign(num_samples, 0.0);
  std::vector<std::uint32_t> idx(num_samples);
  std::iota(idx.begin(), idx.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(std::ceil(rho * static_cast<double>(num_samples) - 1e-9)));
  std::sort(idx.begin(), idx.end());
  plan.selected = idx;
  return plan;
}

TrainResult finetune(const models::TaskModel& m, const FinetunePlan& plan, const std::vector<Sample>& samples,
                     const std::vector<Sample>& val, const nn::TrainConfig& cfg) {
  if (plan.selected.empty()) throw TransferError(TransferErrorKind::EmptyPlan, "fine-tune plan selects no subgraphs");
  std::vector<Sample> chosen;
  chosen.reserve(plan.selected.size());
  for (auto k : plan.selected) {
    if (k >= samples.size()) throw TransferError(TransferErrorKind::BadArgument, "plan refers to a missing subgraph");
    chosen.push_back(samples[k]);
  }
  TrainResult r;
  r.model = m;
  TrainOptions opt;
  opt.freeze = plan.freeze;
  r.log = fit(r.model, chosen, val, cfg, opt);
  return r;
}

TrainResult train_calibration(models::Task task, const std::vector<graph::PinGraph>& corpus,
                              const nn::TrainConfig& cfg) {
  if (task == models::Task::Cap) {
    throw TransferError(TransferErrorKind::BadArgument, "calibration trains at or power models");
  }
  return train_fresh(task, corpus, cfg, "");
}

}  // namespace paragate::transfer
