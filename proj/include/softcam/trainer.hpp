#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "softcam/model.hpp"
#include "softcam/synthdata.hpp"
#include "softcam/tape.hpp"

namespace softcam {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double lr_init = 1e-3;
  double lr_min = 1e-4;
  double momentum = 0.9;  // Nesterov
  double weight_decay = 5e-4;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);

  /// "dense" (no penalty), "sparse" (lasso), "ridge", or "elasticnet".
  std::string variant_label() const;
};

struct LossBreakdown {
  double ce = 0.0;
  double l1_penalty = 0.0;
  double l2_penalty = 0.0;
  double total = 0.0;
};

/// Tape node for the regularized loss plus its scalar breakdown. With both
/// lambdas zero, total is the CE node itself (penalties never enter the
/// graph).
struct LossNodes {
  NodeId total = -1;
  LossBreakdown values;
};

LossNodes elasticnet_loss(Tape& tape, NodeId evidence, NodeId probs, int label,
                          double lambda1, double lambda2);

/// Value-only evaluation: l1 = sum |a|, l2 = sqrt(sum a^2).
LossBreakdown elasticnet_loss_values(const Tensor& evidence, const Tensor& probs, int label,
                                     double lambda1, double lambda2);

/// Clipped cosine annealing: max(lr_min, lr_min + (lr_init-lr_min)/2 *
/// (1+cos(pi*step/total))).
double lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config);

/// One Nesterov update: g' = g + wd*w; v = m*v + g'; w -= lr*(g' + m*v).
void sgd_nesterov_step(Tensor& weights, const Tensor& grads, Tensor& velocity, double lr,
                       double momentum, double weight_decay);

struct EpochLog {
  int epoch = 0;
  double lr = 0, ce = 0, l1 = 0, l2 = 0, total = 0;
  double val_acc = 0, val_auc = 0, sparsity = 0;
};

struct TrainResult {
  ModelBundle model;  // best validation-accuracy checkpoint
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  double best_val_auc = 0.0;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainResult train(const ModelBundle& init, const DataSplits& data, const TrainConfig& config);

struct EvalResult {
  double accuracy = 0.0;
  double auc = 0.0;
  double sparsity = 0.0;  // fraction of |evidence| < 1e-6 cells; 0 for black-box
};

EvalResult evaluate_split(const ModelBundle& model, const std::vector<Sample>& samples);

/// Binary AUC by exhaustive pair counting (Mann-Whitney); ties count 0.5.
double auc_pair_count(const std::vector<double>& scores, const std::vector<int>& labels);

struct SweepRow {
  double lambda1 = 0, lambda2 = 0;
  double val_acc = 0, val_auc = 0, sparsity = 0;
  bool selected = false;
  bool diverged = false;
};

/// One full training per grid point; selection = largest total lambda whose
/// accuracy is within one point of the (0,0) run.
std::vector<SweepRow> sweep_lambda(const ModelBundle& init, const DataSplits& data,
                                   const TrainConfig& base,
                                   const std::vector<std::pair<double, double>>& grid);

std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace softcam
