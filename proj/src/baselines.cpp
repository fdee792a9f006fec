// SPDX-License-Identifier: Apache-2.0
#include "faigcn/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faigcn/error.hpp"
#include "faigcn/format.hpp"

namespace faigcn::baselines {

using Eigen::MatrixXd;
using Eigen::VectorXd;

FeatureVector flatten(const spectral::SpectralFeatures& features) {
  FeatureVector v;
  v.values = features.values;
  v.label = features.label;
  v.binned = !(features.schedule && features.schedule->unit_width());
  return v;
}

void Standardizer::fit(std::span<const FeatureVector> train) {
  if (train.empty()) throw ParameterError("standardizer needs at least one sample");
  const auto p = train[0].values.size();
  mean_.assign(p, 0.0);
  inv_std_.assign(p, 1.0);
  for (const auto& v : train) {
    if (v.values.size() != p) throw DimensionError("feature vectors of different lengths");
    for (std::size_t j = 0; j < p; ++j) mean_[j] += v.values[j];
  }
  const double n = static_cast<double>(train.size());
  for (auto& m : mean_) m /= n;
  std::vector<double> var(p, 0.0);
  for (const auto& v : train) {
    for (std::size_t j = 0; j < p; ++j) var[j] += (v.values[j] - mean_[j]) * (v.values[j] - mean_[j]);
  }
  for (std::size_t j = 0; j < p; ++j) {
    const double sd = std::sqrt(var[j] / n);
    inv_std_[j] = sd > 1e-12 * (1.0 + std::abs(mean_[j])) ? 1.0 / sd : 1.0;
  }
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw DimensionError("standardizer fitted for a different length");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) * inv_std_[j];
  return out;
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::LogisticRegression: return "LR";
    case Kind::Lda: return "LDA";
    case Kind::DecisionTree: return "Tree";
    case Kind::LinearSvm: return "SVM";
  }
  return "unknown";
}

Kind kind_from_name(std::string_view name) {
  for (auto k : {Kind::LogisticRegression, Kind::Lda, Kind::DecisionTree, Kind::LinearSvm}) {
    if (name == kind_name(k)) return k;
  }
  throw ParameterError("unknown baseline '" + std::string(name) + "' (LR, LDA, Tree, SVM)");
}

namespace {

MatrixXd to_matrix(std::span<const std::vector<double>> x) {
  if (x.empty()) throw ParameterError("fit needs at least one sample");
  const auto p = x[0].size();
  MatrixXd m(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != p) throw DimensionError("samples of different lengths");
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const VectorXd>(x[i].data(), static_cast<Eigen::Index>(p));
  }
  return m;
}

// +1 for abnormal, -1 for normal.
VectorXd signs(std::span<const Label> y) {
  VectorXd s(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) s[static_cast<Eigen::Index>(i)] = y[i] == Label::Abnormal ? 1.0 : -1.0;
  return s;
}

// Orthonormal basis Q (p x r) of the row space of X, so that an L2-penalized
// linear model whose optimum lies in that space can be solved on Z = X Q.
// Identity when p <= n.
struct RowSpace {
  MatrixXd q;
  bool identity = true;

  MatrixXd reduce(const MatrixXd& x) const { return identity ? x : MatrixXd(x * q); }
  VectorXd lift(const VectorXd& z) const { return identity ? z : VectorXd(q * z); }
};

RowSpace row_space(const MatrixXd& x) {
  RowSpace rs;
  if (x.cols() <= x.rows()) return rs;
  rs.identity = false;
  const MatrixXd gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const VectorXd& s = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, s.maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] > tol) keep.push_back(k);
  }
  rs.q.resize(x.cols(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto k = keep[c];
    rs.q.col(static_cast<Eigen::Index>(c)) = x.transpose() * eig.eigenvectors().col(k) / std::sqrt(s[k]);
  }
  return rs;
}

double log1p_exp(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
double sigmoid(double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

// Damped Newton on (1/n) sum log(1 + exp(-y (x.w + b))) + lambda/2 |(w, b)|^2,
// with the bias as an extra constant feature as in the SVM. The gradient norm
// in the reduced space equals that in the original space because Q has
// orthonormal columns.
BaselineModel fit_logistic(const MatrixXd& x, const VectorXd& y, const Hyper& h) {
  MatrixXd xa(x.rows(), x.cols() + 1);
  xa << x, VectorXd::Ones(x.rows());
  const auto rs = row_space(xa);
  const MatrixXd z = rs.reduce(xa);
  const auto n = z.rows(), r = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  VectorXd theta = VectorXd::Zero(r);
  auto objective = [&](const VectorXd& t) {
    const VectorXd m = z * t;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += log1p_exp(-y[i] * m[i]);
    return f * inv_n + 0.5 * h.lr_lambda * t.squaredNorm();
  };
  BaselineModel model;
  model.kind = Kind::LogisticRegression;
  for (int it = 0;; ++it) {
    const VectorXd m = z * theta;
    VectorXd resid(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(-y[i] * m[i]);
      resid[i] = -y[i] * p * inv_n;
      curv[i] = p * (1.0 - p) * inv_n;
    }
    const VectorXd grad = z.transpose() * resid + h.lr_lambda * theta;
    model.iterations = it;
    model.gradient_norm = grad.norm();
    if (model.gradient_norm < h.lr_gradient_tol || it >= h.lr_max_iterations) break;
    MatrixXd hess = z.transpose() * curv.asDiagonal() * z;
    hess.diagonal().array() += h.lr_lambda;
    const VectorXd step = hess.ldlt().solve(grad);
    const double f0 = objective(theta);
    double t = 1.0;
    while (t > 1e-12 && objective(theta - t * step) > f0 - 1e-4 * t * grad.dot(step)) t *= 0.5;
    theta -= t * step;
  }
  const VectorXd wa = rs.lift(theta);
  model.weights.assign(wa.data(), wa.data() + x.cols());
  model.bias = wa[x.cols()];
  model.fitted = true;
  return model;
}

// Shrunk pooled covariance (1 - g) S + g diag(S); dimensions without
// within-class variance get unit target variance so the estimate stays
// positive definite. Solved by Woodbury through an n x n system.
BaselineModel fit_lda(const MatrixXd& x, std::span<const Label> labels, const Hyper& h) {
  const auto n = x.rows(), p = x.cols();
  VectorXd mu[2] = {VectorXd::Zero(p), VectorXd::Zero(p)};
  double count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)] == Label::Abnormal ? 1 : 0;
    mu[c] += x.row(i).transpose();
    count[c] += 1.0;
  }
  mu[0] /= count[0];
  mu[1] /= count[1];
  MatrixXd xc(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)] == Label::Abnormal ? 1 : 0;
    xc.row(i) = x.row(i) - mu[c].transpose();
  }
  const double dof = std::max(1.0, static_cast<double>(n) - 2.0);
  const double g = h.lda_shrinkage;
  VectorXd lambda = xc.colwise().squaredNorm().transpose() / dof;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(lambda[j] > 1e-12)) lambda[j] = 1.0;
  }
  lambda *= g;  // diagonal part: g * diag(S)
  const double c = (1.0 - g) / dof;
  const VectorXd d = mu[1] - mu[0];
  VectorXd w = d.cwiseQuotient(lambda);
  if (c > 0.0) {
    const MatrixXd xl = xc * lambda.cwiseInverse().asDiagonal();  // Xc L^-1
    MatrixXd inner = xl * xc.transpose();
    inner.diagonal().array() += 1.0 / c;
    w -= xl.transpose() * inner.ldlt().solve(xl * d);
  }
  BaselineModel model;
  model.kind = Kind::Lda;
  model.weights.assign(w.data(), w.data() + w.size());
  model.bias = -w.dot(0.5 * (mu[0] + mu[1])) + std::log(count[1] / count[0]);
  model.fitted = true;
  return model;
}

// Dual coordinate descent for lambda/2 |(w, b)|^2 + mean hinge loss, with the
// bias as an extra constant feature. In the dual, 0 <= a_i <= C = 1/(lambda n)
// and w = sum_i a_i y_i x_i; coordinates are swept in index order until the
// largest projected gradient falls below the tolerance.
BaselineModel fit_svm(const MatrixXd& x, const VectorXd& y, const Hyper& h) {
  const auto n = x.rows();
  const double upper = 1.0 / (h.svm_lambda * static_cast<double>(n));
  MatrixXd k = x * x.transpose();
  k.array() += 1.0;
  VectorXd alpha = VectorXd::Zero(n);
  VectorXd ka = VectorXd::Zero(n);  // K (alpha .* y)
  int sweep = 0;
  for (; sweep < h.svm_iterations; ++sweep) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = y[i] * ka[i] - 1.0;
      const double pg = alpha[i] <= 0.0 ? std::min(g, 0.0) : alpha[i] >= upper ? std::max(g, 0.0) : g;
      worst = std::max(worst, std::abs(pg));
      if (pg == 0.0) continue;
      const double next = std::clamp(alpha[i] - g / k(i, i), 0.0, upper);
      const double delta = (next - alpha[i]) * y[i];
      alpha[i] = next;
      ka += delta * k.col(i);
    }
    if (worst < h.svm_tol) break;
  }
  const VectorXd ay = alpha.cwiseProduct(y);
  const VectorXd w = x.transpose() * ay;
  BaselineModel model;
  model.kind = Kind::LinearSvm;
  model.weights.assign(w.data(), w.data() + w.size());
  model.bias = ay.sum();
  model.iterations = sweep;
  model.fitted = true;
  return model;
}

double gini(std::size_t abnormal, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(abnormal) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

Label majority(std::span<const std::size_t> idx, std::span<const Label> y) {
  std::size_t abnormal = 0;
  for (auto i : idx) abnormal += y[i] == Label::Abnormal ? 1 : 0;
  return 2 * abnormal > idx.size() ? Label::Abnormal : Label::Normal;
}

// CART with Gini impurity. Candidate thresholds are midpoints between
// consecutive distinct values; ties go to the lowest feature index, then the
// lowest threshold. A node splits only when impurity strictly drops.
int grow(std::vector<TreeNode>& tree, const MatrixXd& x, std::span<const Label> y, std::vector<std::size_t> idx,
         int depth, const Hyper& h) {
  const int id = static_cast<int>(tree.size());
  tree.push_back({});
  tree[id].leaf_label = majority(idx, y);
  std::size_t abnormal = 0;
  for (auto i : idx) abnormal += y[i] == Label::Abnormal ? 1 : 0;
  const double parent = gini(abnormal, idx.size());
  if (depth >= h.tree_max_depth || parent == 0.0 || idx.size() < 2 * h.tree_min_leaf) return id;

  double best = parent;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<std::size_t> order = idx;
  const double total = static_cast<double>(idx.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(static_cast<Eigen::Index>(a), j), vb = x(static_cast<Eigen::Index>(b), j);
      return va < vb || (va == vb && a < b);
    });
    std::size_t left_abnormal = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      left_abnormal += y[order[k]] == Label::Abnormal ? 1 : 0;
      const double lo = x(static_cast<Eigen::Index>(order[k]), j);
      const double hi = x(static_cast<Eigen::Index>(order[k + 1]), j);
      if (!(lo < hi)) continue;
      const std::size_t nl = k + 1, nr = order.size() - nl;
      if (nl < h.tree_min_leaf || nr < h.tree_min_leaf) continue;
      const double imp = (static_cast<double>(nl) * gini(left_abnormal, nl) +
                          static_cast<double>(nr) * gini(abnormal - left_abnormal, nr)) /
                         total;
      if (imp < best - 1e-15) {
        best = imp;
        best_feature = static_cast<int>(j);
        best_threshold = 0.5 * (lo + hi);
      }
    }
  }
  if (best_feature < 0) return id;
  std::vector<std::size_t> left, right;
  for (auto i : idx) (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold ? left : right).push_back(i);
  tree[id].feature = best_feature;
  tree[id].threshold = best_threshold;
  const int l = grow(tree, x, y, std::move(left), depth + 1, h);
  const int r = grow(tree, x, y, std::move(right), depth + 1, h);
  tree[id].left = l;
  tree[id].right = r;
  return id;
}

}  // namespace

BaselineModel fit(Kind kind, std::span<const std::vector<double>> x, std::span<const Label> y, const Hyper& hyper) {
  if (x.size() != y.size()) throw DimensionError("fit: sample and label counts differ");
  bool seen[2] = {false, false};
  for (auto l : y) seen[l == Label::Abnormal ? 1 : 0] = true;
  if (!seen[0] || !seen[1]) throw ProtocolError("baseline training set holds a single class");
  const MatrixXd m = to_matrix(x);
  switch (kind) {
    case Kind::LogisticRegression: return fit_logistic(m, signs(y), hyper);
    case Kind::Lda: return fit_lda(m, y, hyper);
    case Kind::LinearSvm: return fit_svm(m, signs(y), hyper);
    case Kind::DecisionTree: {
      BaselineModel model;
      model.kind = kind;
      std::vector<std::size_t> idx(x.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      grow(model.tree, m, y, std::move(idx), 0, hyper);
      model.weights.assign(x[0].size(), 0.0);  // records the input length
      model.fitted = true;
      return model;
    }
  }
  throw ParameterError("unknown baseline kind");
}

Label predict(const BaselineModel& model, std::span<const double> x) {
  if (!model.fitted) throw ContractError("predict on an unfitted baseline");
  if (x.size() != model.weights.size()) throw DimensionError("predict: input length differs from the fitted model");
  if (model.kind == Kind::DecisionTree) {
    int node = 0;
    while (model.tree[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& t = model.tree[static_cast<std::size_t>(node)];
      node = x[static_cast<std::size_t>(t.feature)] <= t.threshold ? t.left : t.right;
    }
    return model.tree[static_cast<std::size_t>(node)].leaf_label;
  }
  double s = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) s += model.weights[j] * x[j];
  return s > 0.0 ? Label::Abnormal : Label::Normal;
}

eval::ConfusionMatrix loocv_baseline(Kind kind, std::span<const spectral::SpectralFeatures> dataset,
                                     const Hyper& hyper) {
  training::check_loocv_dataset(dataset);
  std::vector<FeatureVector> all;
  all.reserve(dataset.size());
  for (const auto& f : dataset) all.push_back(flatten(f));
  eval::ConfusionMatrix cm;
  for (std::size_t k = 0; k < all.size(); ++k) {
    std::vector<FeatureVector> train;
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (j != k) train.push_back(all[j]);
    }
    Standardizer st;
    st.fit(train);
    std::vector<std::vector<double>> x;
    std::vector<Label> y;
    for (const auto& v : train) {
      x.push_back(st.apply(v.values));
      y.push_back(*v.label);
    }
    const auto model = fit(kind, x, y, hyper);
    cm.add(*all[k].label, predict(model, st.apply(all[k].values)));
  }
  return cm;
}

std::vector<AblationRow> ablation_table(std::span<const PoseSequence> sequences, const AblationConfig& config) {
  data::require_labels(sequences);
  auto binned = std::make_shared<const spectral::BinSchedule>(
      spectral::build_schedule(config.fps, config.n_fft, config.cutoff_hz, config.c));
  auto unbinned = std::make_shared<const spectral::BinSchedule>(
      spectral::build_unit_schedule(config.fps, config.n_fft, config.cutoff_hz));
  const std::vector<spectral::SpectralFeatures> features[2] = {
      data::prepare_all(sequences, binned, config.preprocess),
      data::prepare_all(sequences, unbinned, config.preprocess),
  };
  std::vector<AblationRow> rows;
  for (auto kind : {Kind::LinearSvm, Kind::DecisionTree, Kind::LogisticRegression, Kind::Lda}) {
    for (int b = 0; b < 2; ++b) {
      AblationRow row;
      row.method = std::string(kind_name(kind));
      row.binned = b == 0;
      row.confusion = loocv_baseline(kind, features[b], config.hyper);
      row.metrics = eval::metrics(row.confusion);
      rows.push_back(std::move(row));
    }
  }
  for (int b = 0; b < 2; ++b) {
    const auto report = training::loocv(features[b], config.model, config.train, config.loocv);
    rows.push_back({"FAIGCN", b == 0, report.confusion, report.metrics});
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::string s = "method,binning,AC,SE,SP,F1,MCC\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    s += r.method + ',' + (r.binned ? "binned" : "unbinned") + ',' + fmt::fixed(m.ac, 2) + ',' + fmt::fixed(m.se, 2) +
         ',' + fmt::fixed(m.sp, 2) + ',' + fmt::fixed(m.f1, 2) + ',' + fmt::fixed(m.mcc, 2) + '\n';
  }
  return s;
}

}  // namespace faigcn::baselines
