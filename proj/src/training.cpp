// SPDX-License-Identifier: Apache-2.0
#include "faigcn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"
#include "faigcn/nn/rng.hpp"

namespace faigcn::training {

namespace {

// Stream keys forked from the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

std::size_t class_index(Label label) { return label == Label::Abnormal ? 1 : 0; }

void check_train_set(std::span<const spectral::SpectralFeatures> set) {
  if (set.size() < 2) throw ProtocolError("training needs at least two samples");
  bool seen[2] = {false, false};
  for (const auto& f : set) {
    if (!f.label) throw ProtocolError("sample '" + f.subject_id + "' has no label");
    if (f.num_bins != set[0].num_bins) throw DimensionError("training samples with different bin counts");
    seen[class_index(*f.label)] = true;
  }
  if (!seen[0] || !seen[1]) throw ProtocolError("training set holds a single class");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ParameterError("batch size must be at least 1");
  if (max_epochs < 1) throw ParameterError("max_epochs must be at least 1");
  if (!(base_lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(decay_factor > 0.0) || decay_period < 1) throw ParameterError("invalid learning-rate decay");
}

TrainConfig preset_config(std::string_view name) {
  TrainConfig c;
  c.preset = std::string(name);
  if (name == "mini_rgbd_like") {
    c.batch_size = 1;
    c.base_lr = 1e-4;
  } else if (name == "rvi38_like") {
    c.batch_size = 4;
    c.base_lr = 1e-3;
  } else {
    throw ParameterError("unknown preset '" + std::string(name) + "' (mini_rgbd_like, rvi38_like)");
  }
  return c;
}

TrainResult train(std::span<const spectral::SpectralFeatures> train_set, const model::FaigcnConfig& model_config,
                  const TrainConfig& config) {
  check_train_set(train_set);
  return train(train_set, model::build_topology(model_config, train_set[0].num_bins), model_config, config);
}

TrainResult train(std::span<const spectral::SpectralFeatures> train_set, const model::Topology& topo,
                  const model::FaigcnConfig& model_config, const TrainConfig& config) {
  config.validate();
  model_config.validate();
  check_train_set(train_set);
  if (train_set[0].num_bins != topo.num_bins) {
    throw DimensionError("training features have " + std::to_string(train_set[0].num_bins) +
                         " bins, topology expects " + std::to_string(topo.num_bins));
  }
  const nn::RngStream root(config.seed);
  auto init_rng = root.fork(kInitStream);
  auto shuffle_rng = root.fork(kShuffleStream);
  auto dropout_rng = root.fork(kDropoutStream);

  TrainResult result;
  result.params = model::init_params(model_config, topo.num_bins, init_rng);
  nn::Adam adam(result.params.trainable(), config.adam);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<const spectral::SpectralFeatures*> batch;
  std::vector<std::size_t> labels;
  result.loss_curve.reserve(static_cast<std::size_t>(config.max_epochs));
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = nn::lr_at(epoch, config.base_lr, config.decay_factor, config.decay_period);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const auto stop = std::min(n, start + config.batch_size);
      batch.clear();
      labels.clear();
      for (auto k = start; k < stop; ++k) {
        batch.push_back(&train_set[order[k]]);
        labels.push_back(class_index(*train_set[order[k]].label));
      }
      auto out = model::forward(model::make_input(batch), topo, result.params, model_config, dropout_rng, true);
      auto loss = nn::cross_entropy(out.logits, labels);
      loss_sum += loss.item() * static_cast<double>(batch.size());
      nn::backward(loss);
      adam.step(lr);
      adam.zero_grad();
    }
    result.loss_curve.push_back(loss_sum / static_cast<double>(n));
  }
  return result;
}

Prediction predict_from_logits(std::span<const double> logits) {
  if (logits.size() != 2) throw DimensionError("prediction expects two logits");
  Prediction p;
  p.p_abnormal = 1.0 / (1.0 + std::exp(logits[0] - logits[1]));
  p.label = logits[1] > logits[0] ? Label::Abnormal : Label::Normal;
  return p;
}

Prediction predict(model::FaigcnParams& params, const model::Topology& topo, const model::FaigcnConfig& model_config,
                   const spectral::SpectralFeatures& features) {
  auto out = model::evaluate(features, topo, params, model_config);
  return predict_from_logits(out.logits.values());
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) noexcept { return nn::derive_seed(seed, fold); }

void check_loocv_dataset(std::span<const spectral::SpectralFeatures> dataset) {
  if (dataset.size() < 3) throw ProtocolError("leave-one-out needs at least three samples");
  std::set<std::string> ids;
  bool seen[2] = {false, false};
  for (const auto& f : dataset) {
    if (!f.label) throw ProtocolError("subject '" + f.subject_id + "' has no label");
    if (!ids.insert(f.subject_id).second) throw ProtocolError("duplicate subject id '" + f.subject_id + "'");
    seen[class_index(*f.label)] = true;
  }
  if (!seen[0] || !seen[1]) throw ProtocolError("dataset holds a single class");
}

namespace {

// Runs body(k) for k in [0, count) on up to `workers` threads; rethrows the
// first failure after all threads have stopped.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto k = next++; k < count && !failed; k = next++) {
          try {
            body(k);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

LoocvReport loocv(std::span<const spectral::SpectralFeatures> dataset, const model::FaigcnConfig& model_config,
                  const TrainConfig& config, const LoocvOptions& options) {
  config.validate();
  check_loocv_dataset(dataset);
  const auto topo = model::build_topology(model_config, dataset[0].num_bins);
  LoocvReport report;
  report.seed = config.seed;
  report.folds.resize(dataset.size());
  std::mutex callback_mutex;
  parallel_for(dataset.size(), options.workers, [&](std::size_t k) {
    const auto& held_out = dataset[k];
    std::vector<spectral::SpectralFeatures> rest;
    rest.reserve(dataset.size() - 1);
    for (std::size_t j = 0; j < dataset.size(); ++j) {
      if (j != k) rest.push_back(dataset[j]);
    }
    for (const auto& f : rest) {
      if (f.subject_id == held_out.subject_id) {
        throw ContractError("held-out subject '" + held_out.subject_id + "' leaked into its training set");
      }
    }
    auto fold_config = config;
    fold_config.seed = fold_seed(config.seed, k);
    auto trained = train(rest, topo, model_config, fold_config);
    const auto pred = predict(trained.params, topo, model_config, held_out);
    FoldResult& fr = report.folds[k];
    fr.held_out_id = held_out.subject_id;
    fr.truth = *held_out.label;
    fr.predicted = pred.label;
    fr.probability = pred.p_abnormal;
    fr.final_loss = trained.loss_curve.back();
    if (options.on_fold) {
      std::lock_guard lock(callback_mutex);
      options.on_fold(fr);
    }
  });
  for (const auto& fr : report.folds) report.confusion.add(fr.truth, fr.predicted);
  report.metrics = eval::metrics(report.confusion);
  return report;
}

std::string format_loocv_report(const LoocvReport& report) {
  std::string s = "faigcn-loocv 1\nseed " + std::to_string(report.seed) + "\nfolds " +
                  std::to_string(report.folds.size()) + "\nfold,held_out,truth,predicted,p_abnormal,final_loss\n";
  for (std::size_t k = 0; k < report.folds.size(); ++k) {
    const auto& f = report.folds[k];
    s += std::to_string(k) + ',' + f.held_out_id + ',' + std::string(label_name(f.truth)) + ',' +
         std::string(label_name(f.predicted)) + ',' + fmt::shortest(f.probability) + ',' +
         fmt::shortest(f.final_loss) + '\n';
  }
  const auto& c = report.confusion;
  s += "summary\ntp " + std::to_string(c.tp) + "\nfn " + std::to_string(c.fn) + "\ntn " + std::to_string(c.tn) +
       "\nfp " + std::to_string(c.fp) + '\n' + eval::format_metrics(report.metrics) + '\n';
  return s;
}

SeedSweep loocv_seeds(std::span<const spectral::SpectralFeatures> dataset, const model::FaigcnConfig& model_config,
                      const TrainConfig& config, std::span<const std::uint64_t> seeds, const LoocvOptions& options) {
  if (seeds.empty()) throw ParameterError("seed sweep needs at least one seed");
  SeedSweep sweep;
  for (auto seed : seeds) {
    auto c = config;
    c.seed = seed;
    sweep.runs.push_back(loocv(dataset, model_config, c, options));
  }
  double sum = 0.0;
  sweep.min_accuracy = sweep.runs[0].accuracy();
  sweep.max_accuracy = sweep.runs[0].accuracy();
  for (const auto& r : sweep.runs) {
    sum += r.accuracy();
    sweep.min_accuracy = std::min(sweep.min_accuracy, r.accuracy());
    sweep.max_accuracy = std::max(sweep.max_accuracy, r.accuracy());
  }
  sweep.mean_accuracy = sum / static_cast<double>(sweep.runs.size());
  return sweep;
}

}  // namespace faigcn::training
