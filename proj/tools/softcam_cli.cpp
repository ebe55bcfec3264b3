// softcam: command-line laboratory for evidence-map classifiers.
//
// Subcommands: gen-data, train, explain, evaluate, sweep.
// Exit codes: 0 success, 2 config error, 3 training divergence, 4 empty
// evaluation. stdout carries exactly one JSON summary line per command;
// warnings go to stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "softcam/io.hpp"
#include "softcam/metrics.hpp"
#include "softcam/model.hpp"
#include "softcam/ops.hpp"
#include "softcam/saliency.hpp"
#include "softcam/synthdata.hpp"
#include "softcam/tape.hpp"
#include "softcam/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace softcam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitEmptyEval = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void emit_summary(const json& j) { std::cout << j.dump() << std::endl; }

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SOFTCAM_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("SOFTCAM_SEED is not an unsigned integer: " + std::string(s));
  }
}

/// Applies --set key=value pairs onto a JSON-serializable config. Values are
/// parsed as JSON when possible so numbers and booleans keep their type.
json apply_overrides(json base, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // keep unparseable values as strings
    base[key] = value;
  }
  return base;
}

std::string read_config_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return read_text_file(path);
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory " + out + ": " + ec.message());
}

ModelBundle load_model_or_fail(const std::string& path, TrainProvenance* prov = nullptr) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  Checkpoint ckpt = load_checkpoint(path);
  if (prov) *prov = ckpt.provenance;
  return std::move(ckpt.model);
}

SynthDataset load_dataset_or_fail(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "manifest.csv"))
    throw ConfigError("dataset manifest not found under: " + dir);
  return load_dataset(dir);
}

const std::vector<Sample>& pick_split(const SynthDataset& data, const std::string& split) {
  if (split == "train") return data.splits.train;
  if (split == "val") return data.splits.val;
  if (split == "test") return data.splits.test;
  throw ConfigError("unknown split: " + split + " (expected train|val|test)");
}

bool method_applicable(MethodId id, const ModelBundle& model, std::string* why) {
  if (id == MethodId::cam &&
      (model.head_kind != HeadKind::blackbox || model.blackbox.fc.size() != 1)) {
    *why = "cam requires a black-box model with a single FC layer";
    return false;
  }
  if (id == MethodId::softcam_evidence && model.head_kind != HeadKind::softcam) {
    *why = "softcam-evidence requires a SoftCAM head";
    return false;
  }
  return true;
}

std::vector<MethodId> parse_methods(const std::vector<std::string>& names) {
  std::vector<MethodId> out;
  if (names.empty()) {
    for (MethodId id : {MethodId::cam, MethodId::gradcam, MethodId::scorecam, MethodId::layercam,
                        MethodId::guided_bp, MethodId::integrated_gradients,
                        MethodId::softcam_evidence})
      out.push_back(id);
    return out;
  }
  for (const std::string& group : names) {
    std::stringstream ss(group);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) out.push_back(method_from_name(name));
    }
  }
  return out;
}

SaliencyMap run_method(MethodId id, const ModelBundle& model, const Tensor& image,
                       int class_index, int ig_steps, int scorecam_channels) {
  switch (id) {
    case MethodId::cam: return cam(model, image, class_index);
    case MethodId::gradcam: return gradcam(model, image, class_index);
    case MethodId::scorecam: return scorecam(model, image, class_index, scorecam_channels);
    case MethodId::layercam: return layercam(model, image, class_index);
    case MethodId::guided_bp: return guided_backprop(model, image, class_index);
    case MethodId::integrated_gradients:
      return integrated_gradients(model, image, class_index, ig_steps);
    case MethodId::softcam_evidence: return softcam_evidence(model, image, class_index);
  }
  throw std::logic_error("run_method: unknown method");
}

/// Saliency at input resolution for metric evaluation.
Tensor map_at_input_res(const SaliencyMap& map, int H, int W) {
  if (map.resolution == Resolution::input) return map.values;
  Tensor wrapped({1, map.values.extent(0), map.values.extent(1)});
  std::copy(map.values.data(), map.values.data() + map.values.size(), wrapped.data());
  Tensor up = upsample_bilinear(wrapped, H, W);
  Tensor out({H, W});
  std::copy(up.data(), up.data() + up.size(), out.data());
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  json base = config_path.empty() ? json::parse(SynthConfig{}.to_json())
                                  : json::parse(read_config_file(config_path));
  base = apply_overrides(base, sets);
  if (seed) base["seed"] = *seed;
  SynthConfig config = SynthConfig::from_json(base.dump());
  config.validate();

  ensure_out_dir(out);
  SynthDataset dataset = generate_dataset(config);
  save_dataset(out, dataset);

  json summary = {
      {"command", "gen-data"},
      {"out", out},
      {"samples", config.num_samples},
      {"train", dataset.splits.train.size()},
      {"val", dataset.splits.val.size()},
      {"test", dataset.splits.test.size()},
      {"manifest_digest", file_digest((fs::path(out) / "manifest.csv").string())},
  };
  emit_summary(summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

ModelBundle init_for_dataset(const SynthDataset& data, HeadKind head, HeadPreset preset,
                             std::uint64_t seed) {
  BackboneConfig backbone = BackboneConfig::desk_default();
  backbone.in_channels = 1;
  backbone.height = data.config.height;
  backbone.width = data.config.width;
  backbone.seed = seed;
  return init_model(backbone, head, preset, data.config.num_classes, seed);
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& head, const std::string& preset, const std::string& out,
              const std::vector<std::string>& sets, std::optional<std::uint64_t> seed,
              std::optional<double> lambda1, std::optional<double> lambda2,
              std::optional<int> epochs) {
  json base = config_path.empty() ? json::parse(TrainConfig{}.to_json())
                                  : json::parse(read_config_file(config_path));
  base = apply_overrides(base, sets);
  if (seed) base["seed"] = *seed;
  if (lambda1) base["lambda1"] = *lambda1;
  if (lambda2) base["lambda2"] = *lambda2;
  if (epochs) base["epochs"] = *epochs;
  TrainConfig config = TrainConfig::from_json(base.dump());
  config.validate();

  HeadKind kind;
  if (head == "blackbox") kind = HeadKind::blackbox;
  else if (head == "softcam") kind = HeadKind::softcam;
  else throw ConfigError("unknown head: " + head + " (expected blackbox|softcam)");
  if (kind == HeadKind::blackbox && (config.lambda1 != 0 || config.lambda2 != 0))
    throw ConfigError("evidence penalties require a SoftCAM head");

  HeadPreset hp;
  if (preset == "resnet") hp = HeadPreset::resnet_style;
  else if (preset == "vgg") hp = HeadPreset::vgg_style;
  else throw ConfigError("unknown preset: " + preset + " (expected resnet|vgg)");

  SynthDataset data = load_dataset_or_fail(data_dir);
  ModelBundle init = init_for_dataset(data, kind, hp, config.seed);

  ensure_out_dir(out);
  TrainResult result = train(init, data.splits, config);

  TrainProvenance prov{config.seed, config.lambda1, config.lambda2, result.best_epoch};
  const std::string ckpt_path = (fs::path(out) / "checkpoint.scm").string();
  save_checkpoint(ckpt_path, result.model, prov);
  write_text_file((fs::path(out) / "epochs.csv").string(), epoch_log_csv(result.log));
  write_text_file((fs::path(out) / "train_config.json").string(), config.to_json() + "\n");

  EvalResult test = evaluate_split(result.model, data.splits.test);
  json summary = {
      {"command", "train"},
      {"variant", config.variant_label()},
      {"head", head},
      {"best_epoch", result.best_epoch},
      {"val_acc", result.best_val_acc},
      {"val_auc", result.best_val_auc},
      {"test_acc", test.accuracy},
      {"test_auc", test.auc},
      {"sparsity", test.sparsity},
      {"checkpoint", ckpt_path},
      {"checkpoint_digest", file_digest(ckpt_path)},
  };
  emit_summary(summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// explain

int cmd_explain(const std::string& ckpt_path, const std::string& data_dir,
                const std::string& split, const std::vector<std::string>& method_names,
                std::optional<int> class_index, int max_samples, int ig_steps,
                int scorecam_channels, const std::string& out) {
  ModelBundle model = load_model_or_fail(ckpt_path);
  const std::uint64_t digest = model_digest(model);
  SynthDataset data = load_dataset_or_fail(data_dir);
  const std::vector<Sample>& samples = pick_split(data, split);
  std::vector<MethodId> methods = parse_methods(method_names);
  if (class_index && (*class_index < 0 || *class_index >= model.num_classes))
    throw ConfigError("class index out of range for " + std::to_string(model.num_classes) +
                      " classes");

  std::vector<MethodId> runnable;
  std::vector<std::string> skipped;
  for (MethodId id : methods) {
    std::string why;
    if (method_applicable(id, model, &why)) {
      runnable.push_back(id);
    } else {
      warn("skipping " + method_name(id) + ": " + why);
      skipped.push_back(method_name(id));
    }
  }
  if (runnable.empty()) throw ConfigError("no requested method applies to this checkpoint");

  ensure_out_dir(out);
  const int limit = max_samples > 0
                        ? std::min<int>(max_samples, static_cast<int>(samples.size()))
                        : static_cast<int>(samples.size());
  long outputs = 0;
  for (int s = 0; s < limit; ++s) {
    const Sample& sample = samples[s];
    std::vector<int> classes;
    if (class_index) classes.push_back(*class_index);
    else for (int c = 0; c < model.num_classes; ++c) classes.push_back(c);

    for (MethodId id : runnable) {
      // one forward pass serves every class of the evidence head
      std::optional<Tape> ev_tape;
      std::optional<SoftcamOut> ev_out;
      if (id == MethodId::softcam_evidence) {
        ev_tape.emplace();
        ev_out = softcam_forward(*ev_tape, model, sample.image);
      }
      for (int c : classes) {
        SaliencyMap map = (id == MethodId::softcam_evidence)
                              ? softcam_evidence(*ev_tape, *ev_out, c)
                              : run_method(id, model, sample.image, c, ig_steps,
                                           scorecam_channels);
        std::ostringstream stem;
        stem << "sample" << sample.id << "_" << method_name(id) << "_c" << c;
        const fs::path base = fs::path(out) / stem.str();
        save_tensor(base.string() + ".sct", map.values);
        write_saliency_pgm(base.string() + ".pgm", map.values);
        json sidecar = {
            {"sample_id", sample.id},
            {"label", sample.label},
            {"method", method_name(id)},
            {"class", c},
            {"resolution", map.resolution == Resolution::input ? "input" : "feature"},
            {"model_digest", digest},
        };
        write_text_file(base.string() + ".json", sidecar.dump(2) + "\n");
        ++outputs;
      }
    }
  }

  json summary = {
      {"command", "explain"},
      {"out", out},
      {"samples", limit},
      {"outputs", outputs},
      {"methods",
       [&] {
         json arr = json::array();
         for (MethodId id : runnable) arr.push_back(method_name(id));
         return arr;
       }()},
      {"skipped", skipped},
      {"model_digest", digest},
  };
  emit_summary(summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct MetricAccum {
  double sum = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  json report() const {
    if (n == 0) return nullptr;
    return json{{"mean", sum / n}, {"count", n}};
  }
};

void write_curve_files(const std::string& out, const std::string& name,
                       const std::vector<double>& mean_conf,
                       const std::vector<double>& mean_norm) {
  std::ostringstream csv;
  csv << "t,confidence,normalized\n";
  for (size_t t = 0; t < mean_conf.size(); ++t)
    csv << (t + 1) << "," << fmt(mean_conf[t]) << "," << fmt(mean_norm[t]) << "\n";
  write_text_file((fs::path(out) / ("deletion_" + name + ".csv")).string(), csv.str());

  // minimal SVG: unit-square plot of the normalized curve
  const int W = 480, H = 320, pad = 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << "deletion curve: " << name << "</text>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
      << H - pad << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n<polyline fill=\"none\" stroke=\"crimson\" points=\"";
  const size_t k = mean_norm.size();
  for (size_t t = 0; t < k; ++t) {
    const double x = pad + (W - 2.0 * pad) * (k == 1 ? 1.0 : static_cast<double>(t) / (k - 1));
    const double y = H - pad - (H - 2.0 * pad) * std::clamp(mean_norm[t], 0.0, 1.0);
    svg << fmt(x) << "," << fmt(y) << " ";
  }
  svg << "\"/>\n</svg>\n";
  write_text_file((fs::path(out) / ("deletion_" + name + ".svg")).string(), svg.str());
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_dir,
                 const std::string& split, const std::vector<std::string>& method_names,
                 int k, int patch, float fill, int max_samples, int ig_steps,
                 int scorecam_channels, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  ModelBundle model = load_model_or_fail(ckpt_path);
  SynthDataset data = load_dataset_or_fail(data_dir);
  const std::vector<Sample>& samples = pick_split(data, split);
  std::vector<MethodId> methods = parse_methods(method_names);
  const std::uint64_t base_seed = seed.value_or(0);

  std::vector<MethodId> runnable;
  for (MethodId id : methods) {
    std::string why;
    if (method_applicable(id, model, &why)) runnable.push_back(id);
    else warn("skipping " + method_name(id) + ": " + why);
  }
  if (runnable.empty()) throw ConfigError("no requested method applies to this checkpoint");

  ensure_out_dir(out);
  const int limit = max_samples > 0
                        ? std::min<int>(max_samples, static_cast<int>(samples.size()))
                        : static_cast<int>(samples.size());
  const int H = data.config.height, W = data.config.width;

  std::ostringstream csv;
  csv << "sample_id,method,class,topk_prec,topk_prec_alt,ap,as,audc\n";
  std::map<std::string, MetricAccum> acc_topk, acc_topk_alt, acc_ap, acc_as, acc_audc;
  std::map<std::string, std::vector<double>> curve_conf, curve_norm;
  std::map<std::string, long> curve_n;
  long rows = 0, deletion_skipped = 0;

  auto add_curve = [&](const std::string& name, const DeletionCurve& curve) {
    auto& conf = curve_conf[name];
    auto& norm = curve_norm[name];
    if (conf.empty()) {
      conf.assign(curve.confidence.size(), 0.0);
      norm.assign(curve.confidence.size(), 0.0);
    }
    const std::vector<double> n = curve.normalized();
    for (size_t t = 0; t < curve.confidence.size(); ++t) {
      conf[t] += curve.confidence[t];
      norm[t] += n[t];
    }
    ++curve_n[name];
  };

  for (int s = 0; s < limit; ++s) {
    const Sample& sample = samples[s];
    const bool has_mask = sample.mask.sum() > 0.0;
    for (MethodId id : runnable) {
      const std::string name = method_name(id);
      SaliencyMap map = run_method(id, model, sample.image, sample.label, ig_steps,
                                   scorecam_channels);
      Tensor input_map = map_at_input_res(map, H, W);

      std::string topk_s, topk_alt_s, ap_s, as_s, audc_s;
      if (has_mask) {
        const double tp = topk_localization_precision(input_map, sample.mask, k, patch);
        const double tpa = topk_localization_precision_alt(input_map, sample.mask, k, patch);
        const ApResult ap = activation_precision(input_map, sample.mask);
        const double as = activation_sensitivity(input_map, sample.mask);
        topk_s = fmt(tp);
        topk_alt_s = fmt(tpa);
        as_s = fmt(as);
        acc_topk[name].add(tp);
        acc_topk_alt[name].add(tpa);
        acc_as[name].add(as);
        if (!ap.degenerate) {
          ap_s = fmt(ap.value);
          acc_ap[name].add(ap.value);
        }
      }
      std::string skip;
      if (auto curve = deletion_curve(model, sample.image, input_map, k, patch, fill,
                                      sample.label, &skip)) {
        const double a = audc(*curve);
        audc_s = fmt(a);
        acc_audc[name].add(a);
        add_curve(name, *curve);
      } else {
        ++deletion_skipped;
      }
      csv << sample.id << "," << name << "," << sample.label << "," << topk_s << ","
          << topk_alt_s << "," << ap_s << "," << as_s << "," << audc_s << "\n";
      if (!topk_s.empty() || !audc_s.empty()) ++rows;
    }
    // random-patch control rows carry only the deletion metric
    std::string skip;
    if (auto curve = random_patch_baseline(model, sample.image, k, patch, fill, sample.label,
                                           derive_seed(base_seed, sample.id), &skip)) {
      const double a = audc(*curve);
      acc_audc["random-patch"].add(a);
      add_curve("random-patch", *curve);
      csv << sample.id << ",random-patch," << sample.label << ",,,,," << fmt(a) << "\n";
      ++rows;
    }
  }

  if (rows == 0) {
    std::cerr << "error: no sample qualified for any metric\n";
    return kExitEmptyEval;
  }

  write_text_file((fs::path(out) / "per_sample.csv").string(), csv.str());
  for (auto& [name, conf] : curve_conf) {
    std::vector<double> mean_conf = conf, mean_norm = curve_norm[name];
    for (double& v : mean_conf) v /= curve_n[name];
    for (double& v : mean_norm) v /= curve_n[name];
    write_curve_files(out, name, mean_conf, mean_norm);
  }

  json aggregate;
  auto fill_section = [&](const char* key, std::map<std::string, MetricAccum>& accs) {
    for (auto& [name, a] : accs)
      if (a.n > 0) aggregate[name][key] = a.report();
  };
  fill_section("topk_prec", acc_topk);
  fill_section("topk_prec_alt", acc_topk_alt);
  fill_section("ap", acc_ap);
  fill_section("as", acc_as);
  fill_section("audc", acc_audc);
  aggregate["params"] = {{"k", k}, {"patch", patch}, {"fill", fill}, {"split", split}};
  write_text_file((fs::path(out) / "aggregate.json").string(), aggregate.dump(2) + "\n");

  json summary = {
      {"command", "evaluate"},
      {"out", out},
      {"samples", limit},
      {"rows", rows},
      {"deletion_skipped", deletion_skipped},
      {"aggregate", aggregate},
  };
  emit_summary(summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

std::vector<std::pair<double, double>> parse_grid(const std::vector<std::string>& specs) {
  std::vector<std::pair<double, double>> grid;
  for (const std::string& group : specs) {
    std::stringstream ss(group);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto colon = item.find(':');
      try {
        if (colon == std::string::npos) {
          grid.emplace_back(std::stod(item), 0.0);  // bare value = lasso-only point
        } else {
          grid.emplace_back(std::stod(item.substr(0, colon)),
                            std::stod(item.substr(colon + 1)));
        }
      } catch (const std::exception&) {
        throw ConfigError("bad grid point (expected l1 or l1:l2): " + item);
      }
    }
  }
  if (grid.empty()) throw ConfigError("empty lambda grid");
  return grid;
}

int cmd_sweep(const std::string& config_path, const std::string& data_dir,
              const std::vector<std::string>& grid_spec, const std::string& out,
              const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  json base = config_path.empty() ? json::parse(TrainConfig{}.to_json())
                                  : json::parse(read_config_file(config_path));
  base = apply_overrides(base, sets);
  if (seed) base["seed"] = *seed;
  TrainConfig config = TrainConfig::from_json(base.dump());
  config.validate();
  std::vector<std::pair<double, double>> grid = parse_grid(grid_spec);

  SynthDataset data = load_dataset_or_fail(data_dir);
  ModelBundle init = init_for_dataset(data, HeadKind::softcam, HeadPreset::resnet_style,
                                      config.seed);
  ensure_out_dir(out);
  std::vector<SweepRow> rows = sweep_lambda(init, data.splits, config, grid);

  std::ostringstream csv;
  csv << "lambda1,lambda2,val_acc,val_auc,sparsity,selected,diverged\n";
  json selected = nullptr;
  bool any_diverged = false;
  for (const SweepRow& r : rows) {
    csv << fmt(r.lambda1) << "," << fmt(r.lambda2) << "," << fmt(r.val_acc) << ","
        << fmt(r.val_auc) << "," << fmt(r.sparsity) << "," << (r.selected ? 1 : 0) << ","
        << (r.diverged ? 1 : 0) << "\n";
    any_diverged |= r.diverged;
    if (r.selected)
      selected = {{"lambda1", r.lambda1},
                  {"lambda2", r.lambda2},
                  {"val_acc", r.val_acc},
                  {"sparsity", r.sparsity}};
  }
  write_text_file((fs::path(out) / "sweep.csv").string(), csv.str());

  json summary = {
      {"command", "sweep"},
      {"out", out},
      {"points", rows.size()},
      {"selected", selected},
      {"diverged", any_diverged},
  };
  emit_summary(summary);
  if (any_diverged) {
    std::cerr << "error: at least one grid point diverged\n";
    return kExitDiverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softcam: evidence-map classifier laboratory"};
  app.require_subcommand(1);

  int threads = 0;  // 0 = machine parallelism; commands are currently single-threaded
  app.add_option("--threads", threads, "cap worker count (0 = machine parallelism)");

  std::string config_path, data_dir, out_dir, ckpt_path;
  std::string head = "softcam", preset = "resnet", split = "test";
  std::vector<std::string> sets, method_names, grid_spec;
  std::optional<std::uint64_t> seed_opt;
  std::optional<double> lambda1_opt, lambda2_opt;
  std::optional<int> epochs_opt, class_opt;
  int k = 30, patch = 8, max_samples = 0, ig_steps = 32, scorecam_channels = 16;
  float fill = 0.0f;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_opt, "master seed (falls back to SOFTCAM_SEED)");
    cmd->add_option("--set", sets, "config override key=value (repeatable)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "dataset config JSON");
  gen->add_option("--out", out_dir, "output directory")->required();
  add_common(gen);

  CLI::App* train_cmd = app.add_subcommand("train", "train a classifier");
  train_cmd->add_option("--config", config_path, "training config JSON");
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--head", head, "blackbox|softcam");
  train_cmd->add_option("--preset", preset, "head preset: resnet|vgg");
  train_cmd->add_option("--lambda1", lambda1_opt, "lasso penalty weight");
  train_cmd->add_option("--lambda2", lambda2_opt, "ridge penalty weight");
  train_cmd->add_option("--epochs", epochs_opt, "epoch count override");
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  add_common(train_cmd);

  CLI::App* explain_cmd = app.add_subcommand("explain", "render saliency maps");
  explain_cmd->add_option("--checkpoint", ckpt_path, "SCM1 checkpoint")->required();
  explain_cmd->add_option("--data", data_dir, "dataset directory")->required();
  explain_cmd->add_option("--split", split, "train|val|test");
  explain_cmd->add_option("--methods", method_names, "comma-separated method names");
  explain_cmd->add_option("--class", class_opt, "class index (default: all classes)");
  explain_cmd->add_option("--samples", max_samples, "sample count limit (0 = all)");
  explain_cmd->add_option("--ig-steps", ig_steps, "integrated-gradients steps");
  explain_cmd->add_option("--scorecam-channels", scorecam_channels, "ScoreCAM channel subset");
  explain_cmd->add_option("--out", out_dir, "output directory")->required();
  add_common(explain_cmd);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "compute explanation metrics");
  eval_cmd->add_option("--checkpoint", ckpt_path, "SCM1 checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--split", split, "train|val|test");
  eval_cmd->add_option("--methods", method_names, "comma-separated method names");
  eval_cmd->add_option("-k,--topk", k, "patch budget for top-k and deletion");
  eval_cmd->add_option("-p,--patch", patch, "patch side length");
  eval_cmd->add_option("--fill", fill, "occlusion fill value");
  eval_cmd->add_option("--samples", max_samples, "sample count limit (0 = all)");
  eval_cmd->add_option("--ig-steps", ig_steps, "integrated-gradients steps");
  eval_cmd->add_option("--scorecam-channels", scorecam_channels, "ScoreCAM channel subset");
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  add_common(eval_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "lambda grid sweep with selection");
  sweep_cmd->add_option("--config", config_path, "training config JSON");
  sweep_cmd->add_option("--data", data_dir, "dataset directory")->required();
  sweep_cmd->add_option("--grid", grid_spec, "comma-separated l1 or l1:l2 points")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();
  add_common(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!seed_opt) seed_opt = env_seed();
    if (gen->parsed()) return cmd_gen_data(config_path, out_dir, sets, seed_opt);
    if (train_cmd->parsed())
      return cmd_train(config_path, data_dir, head, preset, out_dir, sets, seed_opt,
                       lambda1_opt, lambda2_opt, epochs_opt);
    if (explain_cmd->parsed())
      return cmd_explain(ckpt_path, data_dir, split, method_names, class_opt, max_samples,
                         ig_steps, scorecam_channels, out_dir);
    if (eval_cmd->parsed())
      return cmd_evaluate(ckpt_path, data_dir, split, method_names, k, patch, fill,
                          max_samples, ig_steps, scorecam_channels, seed_opt, out_dir);
    if (sweep_cmd->parsed())
      return cmd_sweep(config_path, data_dir, grid_spec, out_dir, sets, seed_opt);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
