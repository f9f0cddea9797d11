// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_TRAIN_HPP
#define BEAMCAST_TRAIN_HPP

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "beamcast/adam.hpp"
#include "beamcast/dataset.hpp"
#include "beamcast/metrics.hpp"
#include "beamcast/predictor.hpp"

namespace beamcast {

struct TrainConfig {
  int batch_size = 10;
  double learning_rate = 1e-4;
  int epochs = 30;  // desk-scale default; the reference setup runs 200
  std::uint64_t seed = 0;
  // Fraction of the training split to use (nested subsets across ratios for
  // a fixed seed); 1.0 = the whole split.
  double few_shot_ratio = 1.0;
  // Stop once validation Top-1 reaches this value (0 disables).
  double early_stop_val_top1 = 0.0;
  int eval_batch_size = 64;

  void validate() const;
};

struct EvalReport {
  double top1 = 0.0;
  double top3 = 0.0;
  std::size_t n_samples = 0;  // D
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_top1;
  std::vector<double> val_top3;
  std::vector<int> class_counts;   // per true beam index, on the test split
  std::vector<int> class_correct;  // Top-1 hits per true beam index
  int best_epoch = -1;
  double best_val_top1 = -1.0;
  int epochs_run = 0;
};

// Adam with moment buffers keyed by parameter name, so the active set may
// shrink when a warm start ends without disturbing the remaining moments.
class NamedAdam {
 public:
  explicit NamedAdam(double learning_rate);
  void step(ParamSet& params);
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& moments() {
    return moments_;
  }

 private:
  AdamState hyper_;
  std::int64_t steps_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

using ParamSnapshot = std::vector<std::pair<std::string, std::vector<double>>>;

ParamSnapshot snapshot_params(const ParamSet& ps);
void restore_params(ParamSet& ps, const ParamSnapshot& snap);

// Resumable training state; round-trips through checkpoints.
struct TrainState {
  int completed_epochs = 0;
  std::int64_t optimizer_steps = 0;
  double best_val_top1 = -1.0;
  int best_epoch = -1;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
  // Best-so-far parameter snapshot; empty until the first validation pass.
  ParamSnapshot best_params;
};

struct SplitEval {
  double top1 = 0.0;
  double top3 = 0.0;
  std::size_t n = 0;
  std::vector<int> class_counts;
  std::vector<int> class_correct;
};

SplitEval evaluate(BeamPredictor& model, const Dataset& ds, Split split, int eval_batch_size);

// Seeded-shuffled mini-batches, Adam on the currently trainable set, per-epoch
// validation, best-validation snapshot restored into the model at the end,
// final metrics on the test split. `state`, when given, resumes a previous
// run and is updated in place.
EvalReport train(BeamPredictor& model, const Dataset& ds, const TrainConfig& cfg,
                 TrainState* state = nullptr);

// First floor(ratio * n) entries of a seeded permutation, re-sorted into
// dataset order; nested across ratios for a fixed seed.
std::vector<std::size_t> few_shot_subset(const std::vector<std::size_t>& train_indices,
                                         double ratio, std::uint64_t seed);

using PredictorFactory = std::function<std::unique_ptr<BeamPredictor>(std::uint64_t seed)>;

struct FewShotCell {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct FewShotSummary {
  double ratio = 0.0;
  double mean_top1 = 0.0, min_top1 = 0.0, max_top1 = 0.0;
  double mean_top3 = 0.0, min_top3 = 0.0, max_top3 = 0.0;
};

// For every ratio x seed: subsample the training split, train a fresh model,
// evaluate on the untouched test split.
std::vector<FewShotCell> few_shot_protocol(const PredictorFactory& factory, const Dataset& ds,
                                           const std::vector<double>& ratios,
                                           const std::vector<std::uint64_t>& seeds,
                                           const TrainConfig& base_cfg);
std::vector<FewShotSummary> summarize_few_shot(const std::vector<FewShotCell>& cells);

}  // namespace beamcast

#endif  // BEAMCAST_TRAIN_HPP
