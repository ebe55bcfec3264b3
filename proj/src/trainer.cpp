#include "softcam/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "softcam/ops.hpp"
#include "softcam/rng.hpp"

namespace softcam {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (lr_init <= 0 || lr_min <= 0) throw std::invalid_argument("TrainConfig: rates must be positive");
  if (lr_min > lr_init) throw std::invalid_argument("TrainConfig: lr_min must not exceed lr_init");
  if (lambda1 < 0 || lambda2 < 0)
    throw std::invalid_argument("TrainConfig: negative regularization weight");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("TrainConfig: momentum out of range");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr_init"] = lr_init;
  j["lr_min"] = lr_min;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["augment"] = augment;
  j["seed"] = seed;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("epochs", c.epochs);
  opt("batch_size", c.batch_size);
  opt("lr_init", c.lr_init);
  opt("lr_min", c.lr_min);
  opt("momentum", c.momentum);
  opt("weight_decay", c.weight_decay);
  opt("lambda1", c.lambda1);
  opt("lambda2", c.lambda2);
  opt("augment", c.augment);
  opt("seed", c.seed);
  return c;
}

std::string TrainConfig::variant_label() const {
  if (lambda1 == 0.0 && lambda2 == 0.0) return "dense";
  if (lambda2 == 0.0) return "sparse";
  if (lambda1 == 0.0) return "ridge";
  return "elasticnet";
}

LossNodes elasticnet_loss(Tape& tape, NodeId evidence, NodeId probs, int label,
                          double lambda1, double lambda2) {
  if (lambda1 < 0 || lambda2 < 0)
    throw std::invalid_argument("elasticnet_loss: negative regularization weight");
  LossNodes out;
  NodeId ce = cross_entropy(tape, probs, label);
  out.values.ce = tape.value(ce)[0];
  std::vector<NodeId> terms{ce};
  std::vector<float> coeffs{1.0f};
  if (lambda1 > 0) {
    NodeId l1 = sum_abs(tape, evidence);
    out.values.l1_penalty = tape.value(l1)[0];
    terms.push_back(l1);
    coeffs.push_back(static_cast<float>(lambda1));
  }
  if (lambda2 > 0) {
    NodeId l2 = l2_norm(tape, evidence);
    out.values.l2_penalty = tape.value(l2)[0];
    terms.push_back(l2);
    coeffs.push_back(static_cast<float>(lambda2));
  }
  // with no penalties the CE node IS the loss, bit-for-bit
  out.total = terms.size() == 1 ? ce : combine_scalars(tape, terms, coeffs);
  out.values.total =
      out.values.ce + lambda1 * out.values.l1_penalty + lambda2 * out.values.l2_penalty;
  return out;
}

LossBreakdown elasticnet_loss_values(const Tensor& evidence, const Tensor& probs, int label,
                                     double lambda1, double lambda2) {
  if (lambda1 < 0 || lambda2 < 0)
    throw std::invalid_argument("elasticnet_loss: negative regularization weight");
  if (label < 0 || label >= probs.extent(0))
    throw std::invalid_argument("elasticnet_loss: label out of range");
  LossBreakdown b;
  b.ce = -std::log(std::max(probs[label], 1e-12f));
  double l1 = 0.0, l2 = 0.0;
  for (float v : evidence.vec()) {
    l1 += std::fabs(v);
    l2 += static_cast<double>(v) * v;
  }
  b.l1_penalty = l1;
  b.l2_penalty = std::sqrt(l2);
  b.total = b.ce + lambda1 * b.l1_penalty + lambda2 * b.l2_penalty;
  return b;
}

double lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& config) {
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("lr_schedule: step out of range");
  const double cosine =
      config.lr_min +
      0.5 * (config.lr_init - config.lr_min) *
          (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
  return std::max(config.lr_min, cosine);
}

void sgd_nesterov_step(Tensor& weights, const Tensor& grads, Tensor& velocity, double lr,
                       double momentum, double weight_decay) {
  if (!weights.same_shape(grads) || !weights.same_shape(velocity))
    throw std::invalid_argument("sgd_nesterov_step: shape mismatch (weights " +
                                weights.shape_str() + ", grads " + grads.shape_str() + ")");
  const float m = static_cast<float>(momentum);
  const float wd = static_cast<float>(weight_decay);
  const float step = static_cast<float>(lr);
  for (std::int64_t i = 0; i < weights.size(); ++i) {
    const float g = grads[i] + wd * weights[i];
    velocity[i] = m * velocity[i] + g;
    weights[i] -= step * (g + m * velocity[i]);
  }
}

double auc_pair_count(const std::vector<double>& scores, const std::vector<int>& labels) {
  double won = 0.0;
  std::int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        won += 1.0;
      else if (scores[i] == scores[j])
        won += 0.5;
    }
  }
  return pairs == 0 ? 0.5 : won / static_cast<double>(pairs);
}

EvalResult evaluate_split(const ModelBundle& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate_split: empty split");
  EvalResult res;
  int correct = 0;
  std::vector<std::vector<double>> class_scores(model.num_classes,
                                                std::vector<double>(samples.size()));
  std::vector<int> labels(samples.size());
  std::int64_t zero_cells = 0, total_cells = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    Tape tape;
    Tensor probs;
    if (model.head_kind == HeadKind::softcam) {
      auto out = softcam_forward(tape, model, samples[i].image);
      probs = tape.value(out.probs);
      const Tensor& ev = tape.value(out.evidence);
      for (float v : ev.vec())
        if (std::fabs(v) < 1e-6f) ++zero_cells;
      total_cells += ev.size();
    } else {
      auto out = blackbox_forward(tape, model, samples[i].image);
      probs = tape.value(out.probs);
    }
    int pred = 0;
    for (int c = 1; c < model.num_classes; ++c)
      if (probs[c] > probs[pred]) pred = c;
    if (pred == samples[i].label) ++correct;
    for (int c = 0; c < model.num_classes; ++c) class_scores[c][i] = probs[c];
    labels[i] = samples[i].label;
  }
  res.accuracy = static_cast<double>(correct) / samples.size();
  if (model.num_classes == 2) {
    std::vector<int> bin(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) bin[i] = labels[i] == 1 ? 1 : 0;
    res.auc = auc_pair_count(class_scores[1], bin);
  } else {
    // macro one-vs-rest
    double acc = 0.0;
    for (int c = 0; c < model.num_classes; ++c) {
      std::vector<int> bin(labels.size());
      for (size_t i = 0; i < labels.size(); ++i) bin[i] = labels[i] == c ? 1 : 0;
      acc += auc_pair_count(class_scores[c], bin);
    }
    res.auc = acc / model.num_classes;
  }
  res.sparsity = total_cells == 0 ? 0.0
                                  : static_cast<double>(zero_cells) / static_cast<double>(total_cells);
  return res;
}

TrainResult train(const ModelBundle& init, const DataSplits& data, const TrainConfig& config) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  for (const Sample& s : data.train)
    if (s.label < 0 || s.label >= init.num_classes)
      throw std::invalid_argument("train: label " + std::to_string(s.label) +
                                  " out of range for " + std::to_string(init.num_classes) +
                                  " classes");
  const bool softcam_head = init.head_kind == HeadKind::softcam;
  if (!softcam_head && (config.lambda1 > 0 || config.lambda2 > 0))
    throw std::invalid_argument("train: evidence-map penalties require a SoftCAM head");

  TrainResult result;
  ModelBundle model = init;
  auto params = parameters(model);
  std::vector<Tensor> velocity;
  for (const Tensor* p : params) velocity.emplace_back(p->shape());
  std::vector<Tensor> grad_acc;
  for (const Tensor* p : params) grad_acc.emplace_back(p->shape());

  const int n = static_cast<int>(data.train.size());
  const std::int64_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::int64_t total_steps = batches_per_epoch * config.epochs;

  Rng shuffle_rng(derive_seed(config.seed, 0x51));
  Rng aug_rng(derive_seed(config.seed, 0xA7));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  std::int64_t step = 0;
  double best_acc = -1.0, best_auc = -1.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double ep_ce = 0, ep_l1 = 0, ep_l2 = 0, ep_total = 0;
    double ep_lr = 0;
    std::int64_t loss_count = 0;

    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      for (auto& g : grad_acc) std::fill(g.vec().begin(), g.vec().end(), 0.0f);

      for (int b = 0; b < count; ++b) {
        const Sample& raw = data.train[order[start + b]];
        const Sample sample = config.augment ? augment(raw, aug_rng) : raw;
        Tape tape;
        std::vector<NodeId> param_nodes;
        NodeId loss_node;
        LossBreakdown breakdown;
        if (softcam_head) {
          auto out = softcam_forward(tape, model, sample.image);
          param_nodes = out.params;
          auto loss = elasticnet_loss(tape, out.evidence, out.probs, sample.label,
                                      config.lambda1, config.lambda2);
          loss_node = loss.total;
          breakdown = loss.values;
        } else {
          auto out = blackbox_forward(tape, model, sample.image);
          param_nodes = out.params;
          NodeId ce = cross_entropy(tape, out.probs, sample.label);
          loss_node = ce;
          breakdown.ce = tape.value(ce)[0];
          breakdown.total = breakdown.ce;
        }
        if (!std::isfinite(breakdown.total))
          throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch));
        ep_ce += breakdown.ce;
        ep_l1 += breakdown.l1_penalty;
        ep_l2 += breakdown.l2_penalty;
        ep_total += breakdown.total;
        ++loss_count;

        GradTable table = tape.backward(loss_node);
        ++model.passes.backward;
        const float inv = 1.0f / static_cast<float>(count);
        for (size_t pi = 0; pi < params.size(); ++pi) {
          const Tensor& g = table.grad(param_nodes[pi]);
          float* acc = grad_acc[pi].data();
          for (std::int64_t j = 0; j < g.size(); ++j) acc[j] += g[j] * inv;
        }
      }

      const double lr = lr_schedule(step, total_steps, config);
      ep_lr = lr;
      for (size_t pi = 0; pi < params.size(); ++pi)
        sgd_nesterov_step(*params[pi], grad_acc[pi], velocity[pi], lr, config.momentum,
                          config.weight_decay);
      ++step;
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = ep_lr;
    log.ce = ep_ce / loss_count;
    log.l1 = ep_l1 / loss_count;
    log.l2 = ep_l2 / loss_count;
    log.total = ep_total / loss_count;
    if (!data.val.empty()) {
      EvalResult val = evaluate_split(model, data.val);
      log.val_acc = val.accuracy;
      log.val_auc = val.auc;
      log.sparsity = val.sparsity;
      if (val.accuracy > best_acc || (val.accuracy == best_acc && val.auc > best_auc)) {
        best_acc = val.accuracy;
        best_auc = val.auc;
        result.model = model;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(log);
  }
  if (data.val.empty()) {
    result.model = model;
    result.best_epoch = config.epochs - 1;
  }
  result.best_val_acc = best_acc;
  result.best_val_auc = best_auc;
  return result;
}

std::vector<SweepRow> sweep_lambda(const ModelBundle& init, const DataSplits& data,
                                   const TrainConfig& base,
                                   const std::vector<std::pair<double, double>>& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep_lambda: empty grid");
  std::vector<std::pair<double, double>> points = grid;
  const bool has_zero = std::any_of(points.begin(), points.end(),
                                    [](const auto& p) { return p.first == 0 && p.second == 0; });
  if (!has_zero) points.insert(points.begin(), {0.0, 0.0});

  std::vector<SweepRow> rows;
  double baseline_acc = -1.0;
  for (size_t i = 0; i < points.size(); ++i) {
    SweepRow row;
    row.lambda1 = points[i].first;
    row.lambda2 = points[i].second;
    TrainConfig cfg = base;
    cfg.lambda1 = row.lambda1;
    cfg.lambda2 = row.lambda2;
    cfg.seed = base.seed ^ static_cast<std::uint64_t>(i);
    try {
      TrainResult res = train(init, data, cfg);
      row.val_acc = res.best_val_acc;
      row.val_auc = res.best_val_auc;
      row.sparsity = res.log.empty() ? 0.0 : res.log[res.best_epoch].sparsity;
    } catch (const TrainingDiverged&) {
      row.diverged = true;
    }
    if (!row.diverged && row.lambda1 == 0 && row.lambda2 == 0) baseline_acc = row.val_acc;
    rows.push_back(row);
  }

  // selection: largest total lambda still within one accuracy point of lambda=0
  int selected = -1;
  for (size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    if (r.diverged || baseline_acc < 0) continue;
    if (r.val_acc + 1e-12 < baseline_acc - 0.01) continue;
    if (selected < 0) {
      selected = static_cast<int>(i);
      continue;
    }
    const SweepRow& s = rows[selected];
    const double rt = r.lambda1 + r.lambda2, st = s.lambda1 + s.lambda2;
    if (rt > st || (rt == st && (r.lambda1 > s.lambda1 ||
                                 (r.lambda1 == s.lambda1 && r.val_acc > s.val_acc))))
      selected = static_cast<int>(i);
  }
  if (selected >= 0) rows[selected].selected = true;
  return rows;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,lr,ce,l1,l2,total,val_acc,val_auc,sparsity\n";
  os.precision(10);
  for (const EpochLog& e : log) {
    os << e.epoch << "," << e.lr << "," << e.ce << "," << e.l1 << "," << e.l2 << "," << e.total
       << "," << e.val_acc << "," << e.val_auc << "," << e.sparsity << "\n";
  }
  return os.str();
}

}  // namespace softcam
