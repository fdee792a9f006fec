// SPDX-License-Identifier: Apache-2.0
#pragma once

// Classical classifiers over flattened spectral features and the binning
// ablation table that compares them with the graph network.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faigcn/dataset.hpp"
#include "faigcn/metrics.hpp"
#include "faigcn/model.hpp"
#include "faigcn/pose.hpp"
#include "faigcn/spectral.hpp"
#include "faigcn/training.hpp"

namespace faigcn::baselines {

struct FeatureVector {
  std::vector<double> values;
  std::optional<Label> label;
  bool binned = true;
};

/// Row-major (bin, joint, channel) flatten. Features built on a width-1
/// schedule are the unbinned raw magnitudes; `binned` records which.
FeatureVector flatten(const spectral::SpectralFeatures& features);

/// Per-dimension z-scores fitted on training data (population std).
/// Zero-variance dimensions are centred only.
class Standardizer {
 public:
  void fit(std::span<const FeatureVector> train);
  std::vector<double> apply(std::span<const double> x) const;
  std::size_t dims() const noexcept { return mean_.size(); }

 private:
  std::vector<double> mean_;
  std::vector<double> inv_std_;
};

enum class Kind : std::uint8_t { LogisticRegression, Lda, DecisionTree, LinearSvm };

std::string_view kind_name(Kind k);
Kind kind_from_name(std::string_view name);

struct Hyper {
  double lr_lambda = 1e-2;
  double lr_gradient_tol = 1e-6;
  int lr_max_iterations = 200;
  double lda_shrinkage = 0.1;
  int tree_max_depth = 3;
  std::size_t tree_min_leaf = 1;
  double svm_lambda = 1e-2;
  int svm_iterations = 10000;  ///< coordinate sweeps
  double svm_tol = 1e-9;       ///< projected-gradient stopping threshold
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;  ///< go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  Label leaf_label = Label::Normal;
};

/// A fitted linear rule (label abnormal when w.x + b > 0) or a tree.
struct BaselineModel {
  Kind kind = Kind::LogisticRegression;
  bool fitted = false;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<TreeNode> tree;  ///< node 0 is the root
  int iterations = 0;          ///< solver iterations used (diagnostic)
  double gradient_norm = 0.0;  ///< final gradient norm (logistic regression)
};

/// Rows of X are samples. Labels are required and both classes must occur
/// (ProtocolError otherwise). Every fit is deterministic.
BaselineModel fit(Kind kind, std::span<const std::vector<double>> x, std::span<const Label> y, const Hyper& hyper = {});

/// Throws ContractError on an unfitted model, DimensionError on a size mismatch.
Label predict(const BaselineModel& model, std::span<const double> x);

/// Leave-one-out over flattened features: standardize on the training part,
/// fit, predict the held-out sample.
eval::ConfusionMatrix loocv_baseline(Kind kind, std::span<const spectral::SpectralFeatures> dataset,
                                     const Hyper& hyper = {});

struct AblationRow {
  std::string method;  ///< "SVM", "Tree", "LR", "LDA", "FAIGCN"
  bool binned = true;
  eval::ConfusionMatrix confusion;
  eval::MetricsReport metrics;
};

struct AblationConfig {
  Hyper hyper;
  model::FaigcnConfig model;
  training::TrainConfig train;
  training::LoocvOptions loocv;
  data::PreprocessOptions preprocess;
  double fps = spectral::kReferenceFps;
  int n_fft = spectral::kDefaultFftLength;
  double cutoff_hz = spectral::kDefaultCutoffHz;
  double c = spectral::kDefaultC;
};

/// Ten rows: the four baselines and the network, each on binned features and
/// on width-1 bins over the same coefficients.
std::vector<AblationRow> ablation_table(std::span<const PoseSequence> sequences, const AblationConfig& config);

/// "method,binning,AC,SE,SP,F1,MCC" rows.
std::string format_ablation_table(std::span<const AblationRow> rows);

}  // namespace faigcn::baselines
