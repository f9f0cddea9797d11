// SPDX-License-Identifier: Apache-2.0

#include "beamcast/train.hpp"

#include <algorithm>
#include <cmath>

#include "beamcast/errors.hpp"
#include "beamcast/ops.hpp"
#include "beamcast/tape.hpp"

namespace beamcast {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (few_shot_ratio <= 0.0 || few_shot_ratio > 1.0) {
    throw ConfigError("train: few-shot ratio must lie in (0, 1]");
  }
  if (eval_batch_size < 1) throw ConfigError("train: eval batch size must be >= 1");
}

NamedAdam::NamedAdam(double learning_rate) { hyper_.learning_rate = learning_rate; }

void NamedAdam::step(ParamSet& params) {
  steps_ += 1;
  for (NamedParam& p : params.entries()) {
    if (!p.tensor.requires_grad()) continue;
    auto& [m, v] = moments_[p.name];
    if (m.empty()) {
      m.assign(static_cast<std::size_t>(p.tensor.numel()), 0.0);
      v.assign(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    }
    adam_update_param(p.tensor, m, v, hyper_, steps_);
  }
}

namespace {

Tensor one_hot_batch(std::span<const Sample* const> batch, int n_beams) {
  Tensor t(Shape{static_cast<std::int64_t>(batch.size()), n_beams});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int label = batch[i]->label;
    if (label < 0 || label >= n_beams) throw ContractError("train: sample label out of range");
    t.data()[static_cast<std::int64_t>(i) * n_beams + label] = 1.0;
  }
  return t;
}

std::vector<const Sample*> gather(const Dataset& ds, const std::vector<std::size_t>& idx,
                                  std::size_t from, std::size_t to) {
  std::vector<const Sample*> out;
  out.reserve(to - from);
  for (std::size_t i = from; i < to; ++i) out.push_back(&ds.samples[idx[i]]);
  return out;
}

}  // namespace

ParamSnapshot snapshot_params(const ParamSet& ps) {
  ParamSnapshot out;
  out.reserve(ps.entries().size());
  for (const NamedParam& p : ps.entries()) {
    out.emplace_back(p.name,
                     std::vector<double>(p.tensor.data(), p.tensor.data() + p.tensor.numel()));
  }
  return out;
}

void restore_params(ParamSet& ps, const ParamSnapshot& snap) {
  for (const auto& [name, values] : snap) {
    Tensor& t = ps.at(name);
    if (values.size() != static_cast<std::size_t>(t.numel())) {
      throw ContractError("train: snapshot size mismatch for " + name);
    }
    std::copy(values.begin(), values.end(), t.data());
  }
}

SplitEval evaluate(BeamPredictor& model, const Dataset& ds, Split split, int eval_batch_size) {
  const std::vector<std::size_t> idx = ds.indices(split);
  if (idx.empty()) throw ContractError("evaluate: empty split");
  const int m = model.n_beams();
  SplitEval ev;
  ev.n = idx.size();
  ev.class_counts.assign(static_cast<std::size_t>(m), 0);
  ev.class_correct.assign(static_cast<std::size_t>(m), 0);
  std::vector<std::vector<double>> truths, preds;
  truths.reserve(idx.size());
  preds.reserve(idx.size());
  for (std::size_t from = 0; from < idx.size(); from += static_cast<std::size_t>(eval_batch_size)) {
    const std::size_t to = std::min(idx.size(), from + static_cast<std::size_t>(eval_batch_size));
    const auto batch = gather(ds, idx, from, to);
    Tensor p = model.forward(batch, /*training=*/false, nullptr);
    p.check_finite("evaluation forward");
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::vector<double> row(p.data() + static_cast<std::int64_t>(b) * m,
                              p.data() + static_cast<std::int64_t>(b + 1) * m);
      std::vector<double> truth(static_cast<std::size_t>(m), 0.0);
      truth[static_cast<std::size_t>(batch[b]->label)] = 1.0;
      const int top1 = topk_indices(row, 1)[0];
      ev.class_counts[static_cast<std::size_t>(batch[b]->label)] += 1;
      if (top1 == batch[b]->label) ev.class_correct[static_cast<std::size_t>(batch[b]->label)] += 1;
      preds.push_back(std::move(row));
      truths.push_back(std::move(truth));
    }
  }
  ev.top1 = topk_accuracy(truths, preds, 1);
  ev.top3 = topk_accuracy(truths, preds, std::min(3, m));
  return ev;
}

std::vector<std::size_t> few_shot_subset(const std::vector<std::size_t>& train_indices,
                                         double ratio, std::uint64_t seed) {
  if (ratio <= 0.0 || ratio > 1.0) throw ConfigError("few-shot: ratio must lie in (0, 1]");
  std::vector<std::size_t> perm = train_indices;
  Rng rng(splitmix64(seed ^ 0x66657773686f74ULL));
  shuffle(perm, rng);
  const auto k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(train_indices.size())));
  perm.resize(std::max<std::size_t>(k, 1));
  std::sort(perm.begin(), perm.end());
  return perm;
}

EvalReport train(BeamPredictor& model, const Dataset& ds, const TrainConfig& cfg,
                 TrainState* state) {
  cfg.validate();
  const int m = model.n_beams();
  if (ds.n_beams != m) {
    throw ConfigError("train: model expects " + std::to_string(m) + " beams, dataset has " +
                      std::to_string(ds.n_beams));
  }
  std::vector<std::size_t> train_idx = ds.indices(Split::kTrain);
  if (cfg.epochs > 0) {
    if (train_idx.empty()) throw ContractError("train: empty training split");
    if (ds.indices(Split::kVal).empty()) throw ContractError("train: empty validation split");
  }
  if (cfg.few_shot_ratio < 1.0) {
    train_idx = few_shot_subset(train_idx, cfg.few_shot_ratio, cfg.seed);
    if (train_idx.size() < static_cast<std::size_t>(cfg.batch_size)) {
      throw ConfigError("train: few-shot subset smaller than one batch");
    }
  }

  NamedAdam optimizer(cfg.learning_rate);
  TrainState local_state;
  TrainState& st = state ? *state : local_state;
  optimizer.moments() = st.moments;
  optimizer.set_steps(st.optimizer_steps);

  EvalReport report;
  const int start_epoch = st.completed_epochs;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    model.begin_epoch(epoch);
    std::vector<std::size_t> order = train_idx;
    Rng shuffle_rng(splitmix64(cfg.seed ^ splitmix64(0x65706f63ULL + static_cast<std::uint64_t>(epoch))));
    shuffle(order, shuffle_rng);
    Rng dropout_rng(splitmix64(cfg.seed ^ splitmix64(0x64726f70ULL + static_cast<std::uint64_t>(epoch))));

    double loss_sum = 0.0;
    for (std::size_t from = 0; from < order.size(); from += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t to = std::min(order.size(), from + static_cast<std::size_t>(cfg.batch_size));
      const auto batch = gather(ds, order, from, to);
      Tensor truth = one_hot_batch(batch, m);
      double batch_loss = 0.0;
      {
        Tape tape;
        Tensor pred = model.forward(batch, /*training=*/true, &dropout_rng);
        Tensor loss = cross_entropy(truth, pred);
        batch_loss = loss.value();
        if (!std::isfinite(batch_loss)) throw NumericalError("train: non-finite loss");
        tape.backward(loss);
      }
      optimizer.step(model.params());
      loss_sum += batch_loss * static_cast<double>(batch.size());
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));

    const SplitEval val = evaluate(model, ds, Split::kVal, cfg.eval_batch_size);
    report.val_top1.push_back(val.top1);
    report.val_top3.push_back(val.top3);
    if (val.top1 > st.best_val_top1) {
      st.best_val_top1 = val.top1;
      st.best_epoch = epoch;
      st.best_params = snapshot_params(model.params());
    }
    st.completed_epochs = epoch + 1;
    report.epochs_run = st.completed_epochs;
    if (cfg.early_stop_val_top1 > 0.0 && val.top1 >= cfg.early_stop_val_top1) break;
  }
  st.moments = optimizer.moments();
  st.optimizer_steps = optimizer.steps();

  // Final metrics at the best-validation parameters; the model is left at its
  // last state so training can resume from it.
  SplitEval test;
  if (st.best_params.empty()) {
    test = evaluate(model, ds, Split::kTest, cfg.eval_batch_size);
  } else {
    const ParamSnapshot last = snapshot_params(model.params());
    restore_params(model.params(), st.best_params);
    test = evaluate(model, ds, Split::kTest, cfg.eval_batch_size);
    restore_params(model.params(), last);
  }
  report.top1 = test.top1;
  report.top3 = test.top3;
  report.n_samples = test.n;
  report.class_counts = test.class_counts;
  report.class_correct = test.class_correct;
  report.best_epoch = st.best_epoch;
  report.best_val_top1 = st.best_val_top1;
  return report;
}

std::vector<FewShotCell> few_shot_protocol(const PredictorFactory& factory, const Dataset& ds,
                                           const std::vector<double>& ratios,
                                           const std::vector<std::uint64_t>& seeds,
                                           const TrainConfig& base_cfg) {
  if (ratios.empty() || seeds.empty()) throw ConfigError("few-shot: need ratios and seeds");
  std::vector<FewShotCell> cells;
  for (double ratio : ratios) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base_cfg;
      cfg.seed = seed;
      cfg.few_shot_ratio = ratio;
      std::unique_ptr<BeamPredictor> model = factory(seed);
      FewShotCell cell;
      cell.ratio = ratio;
      cell.seed = seed;
      cell.report = train(*model, ds, cfg);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<FewShotSummary> summarize_few_shot(const std::vector<FewShotCell>& cells) {
  std::vector<double> ratios;
  for (const FewShotCell& c : cells) {
    if (std::find(ratios.begin(), ratios.end(), c.ratio) == ratios.end()) ratios.push_back(c.ratio);
  }
  std::vector<FewShotSummary> out;
  for (double r : ratios) {
    FewShotSummary s;
    s.ratio = r;
    s.min_top1 = s.min_top3 = 1.0;
    int n = 0;
    for (const FewShotCell& c : cells) {
      if (c.ratio != r) continue;
      ++n;
      s.mean_top1 += c.report.top1;
      s.mean_top3 += c.report.top3;
      s.min_top1 = std::min(s.min_top1, c.report.top1);
      s.max_top1 = std::max(s.max_top1, c.report.top1);
      s.min_top3 = std::min(s.min_top3, c.report.top3);
      s.max_top3 = std::max(s.max_top3, c.report.top3);
    }
    s.mean_top1 /= n;
    s.mean_top3 /= n;
    out.push_back(s);
  }
  return out;
}

}  // namespace beamcast
