// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "faigcn/baselines.hpp"
#include "faigcn/error.hpp"
#include "model_checks.hpp"

using namespace faigcn;
using namespace faigcn::baselines;

namespace {

struct Data {
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
};

Data gaussian_classes(std::size_t n, std::size_t p, double shift, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ab = i % 2 == 1;
    std::vector<double> row(p);
    for (auto& v : row) v = nd(gen);
    if (ab) row[0] += shift;
    d.x.push_back(std::move(row));
    d.y.push_back(ab ? Label::Abnormal : Label::Normal);
  }
  return d;
}

Eigen::MatrixXd as_matrix(const Data& d) {
  Eigen::MatrixXd m(Eigen::Index(d.x.size()), Eigen::Index(d.x[0].size()));
  for (std::size_t i = 0; i < d.x.size(); ++i)
    for (std::size_t j = 0; j < d.x[0].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = d.x[i][j];
  return m;
}

std::size_t correct(const BaselineModel& m, const Data& d) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) c += predict(m, d.x[i]) == d.y[i];
  return c;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("names") {
    for (auto k : {Kind::LogisticRegression, Kind::Lda, Kind::DecisionTree, Kind::LinearSvm})
      CHECK(kind_from_name(kind_name(k)) == k);
    CHECK(kind_name(Kind::LogisticRegression) == "LR");
    CHECK_THROWS_AS(kind_from_name("knn"), ParameterError);
  }

  TEST_CASE("logistic regression reaches a stationary point, also with more features than samples") {
    for (std::size_t p : {3u, 40u}) {
      const auto d = gaussian_classes(16, p, 4.0, p);
      Hyper h;
      const auto m = fit(Kind::LogisticRegression, d.x, d.y, h);
      CHECK(m.gradient_norm < h.lr_gradient_tol);
      // Gradient of the penalized mean log-loss, evaluated independently. The
      // bias is penalized like any weight.
      const auto x = as_matrix(d);
      Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(m.weights.data(), Eigen::Index(p));
      Eigen::VectorXd gw = h.lr_lambda * w;
      double gb = h.lr_lambda * m.bias;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double y = d.y[std::size_t(i)] == Label::Abnormal ? 1.0 : -1.0;
        const double s = -y / (1.0 + std::exp(y * (x.row(i).dot(w) + m.bias))) / double(x.rows());
        gw += s * x.row(i).transpose();
        gb += s;
      }
      CHECK(std::sqrt(gw.squaredNorm() + gb * gb) < 1e-5);
      CHECK(correct(m, d) >= 15);
    }
  }

  TEST_CASE("shrinkage LDA equals the dense closed form") {
    for (std::size_t p : {4u, 30u}) {
      auto d = gaussian_classes(12, p, 3.0, 10 + p);
      for (auto& row : d.x) row[p - 1] = 2.0;  // a dimension without variance
      Hyper h;
      const auto m = fit(Kind::Lda, d.x, d.y, h);
      const auto x = as_matrix(d);
      Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(Eigen::Index(p)), Eigen::VectorXd::Zero(Eigen::Index(p))};
      double n[2] = {0, 0};
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = d.y[std::size_t(i)] == Label::Abnormal;
        mu[c] += x.row(i).transpose();
        n[c] += 1;
      }
      mu[0] /= n[0];
      mu[1] /= n[1];
      Eigen::MatrixXd xc = x;
      for (Eigen::Index i = 0; i < x.rows(); ++i) xc.row(i) -= mu[d.y[std::size_t(i)] == Label::Abnormal].transpose();
      const Eigen::MatrixXd s = xc.transpose() * xc / (double(x.rows()) - 2.0);
      Eigen::VectorXd diag = s.diagonal();
      for (Eigen::Index j = 0; j < diag.size(); ++j)
        if (diag[j] <= 1e-12) diag[j] = 1.0;
      const Eigen::MatrixXd sigma = (1.0 - h.lda_shrinkage) * s + h.lda_shrinkage * Eigen::MatrixXd(diag.asDiagonal());
      const Eigen::VectorXd w = sigma.ldlt().solve(mu[1] - mu[0]);
      const double b = -w.dot(0.5 * (mu[0] + mu[1])) + std::log(n[1] / n[0]);
      for (std::size_t j = 0; j < p; ++j) CHECK(m.weights[j] == doctest::Approx(w[Eigen::Index(j)]).epsilon(1e-9));
      CHECK(m.bias == doctest::Approx(b).epsilon(1e-9));
    }
  }

  TEST_CASE("linear SVM separates a separable set") {
    const auto d = gaussian_classes(20, 5, 8.0, 3);
    const auto m = fit(Kind::LinearSvm, d.x, d.y);
    CHECK(correct(m, d) == 20);
  }

  TEST_CASE("linear SVM solution satisfies the optimality conditions") {
    // With the bias as a constant feature, the optimum of
    // lambda/2 |(w, b)|^2 + mean hinge is w = sum a_i y_i x_i, b = sum a_i y_i
    // with 0 <= a_i <= 1/(lambda n). Recover a from the margins and check
    // complementary slackness and stationarity.
    for (std::size_t p : {3u, 50u}) {
      const auto d = gaussian_classes(14, p, 1.0, 20 + p);
      Hyper h;
      const auto m = fit(Kind::LinearSvm, d.x, d.y, h);
      const auto x = as_matrix(d);
      const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(m.weights.data(), Eigen::Index(p));
      Eigen::MatrixXd xa(x.rows(), x.cols() + 1);
      xa << x, Eigen::VectorXd::Ones(x.rows());
      Eigen::VectorXd wa(x.cols() + 1);
      wa << w, m.bias;
      Eigen::VectorXd yv(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) yv[i] = d.y[std::size_t(i)] == Label::Abnormal ? 1.0 : -1.0;
      const Eigen::VectorXd margin = yv.cwiseProduct(xa * wa);
      const double upper = 1.0 / (h.svm_lambda * double(x.rows()));
      // Least-squares recovery of a on the support set.
      std::vector<Eigen::Index> support;
      Eigen::VectorXd a = Eigen::VectorXd::Zero(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (margin[i] < 1.0 - 1e-6) a[i] = upper;
        else if (margin[i] <= 1.0 + 1e-6) support.push_back(i);
      }
      Eigen::VectorXd rhs = wa;
      for (Eigen::Index i = 0; i < x.rows(); ++i) rhs -= a[i] * yv[i] * xa.row(i).transpose();
      if (!support.empty()) {
        Eigen::MatrixXd s(xa.cols(), Eigen::Index(support.size()));
        for (std::size_t c = 0; c < support.size(); ++c)
          s.col(Eigen::Index(c)) = yv[support[c]] * xa.row(support[c]).transpose();
        const Eigen::VectorXd as = s.colPivHouseholderQr().solve(rhs);
        for (std::size_t c = 0; c < support.size(); ++c) {
          CHECK(as[Eigen::Index(c)] >= -1e-6);
          CHECK(as[Eigen::Index(c)] <= upper + 1e-6);
        }
        rhs -= s * as;
      }
      CHECK(rhs.norm() < 1e-6 * std::max(1.0, wa.norm()));
    }
  }

  TEST_CASE("tree splits at midpoints with documented tie breaks") {
    Data d;
    d.x = {{0.0, 5.0}, {1.0, 5.0}, {2.0, 7.0}, {3.0, 7.0}};
    d.y = {Label::Normal, Label::Normal, Label::Abnormal, Label::Abnormal};
    const auto m = fit(Kind::DecisionTree, d.x, d.y);
    REQUIRE(!m.tree.empty());
    CHECK(m.tree[0].feature == 0);
    CHECK(m.tree[0].threshold == 1.5);
    CHECK(correct(m, d) == 4);
    Data pure;
    pure.x = {{1.0}, {1.0}, {2.0}};
    pure.y = {Label::Normal, Label::Abnormal, Label::Normal};
    const auto leaf = fit(Kind::DecisionTree, pure.x, pure.y);
    CHECK(leaf.tree[0].feature == 0);
    CHECK(leaf.tree[0].threshold == 1.5);
    Hyper shallow;
    shallow.tree_max_depth = 0;
    CHECK(fit(Kind::DecisionTree, d.x, d.y, shallow).tree.size() == 1);
  }

  TEST_CASE("fit and predict contracts") {
    const auto d = gaussian_classes(6, 3, 1.0, 4);
    std::vector<Label> one_class(6, Label::Normal);
    CHECK_THROWS_AS(fit(Kind::Lda, d.x, one_class), ProtocolError);
    BaselineModel unfitted;
    CHECK_THROWS_AS(predict(unfitted, d.x[0]), ContractError);
    const auto m = fit(Kind::LogisticRegression, d.x, d.y);
    CHECK_THROWS_AS(predict(m, std::vector<double>{1.0}), DimensionError);
  }

  TEST_CASE("standardizer") {
    std::vector<FeatureVector> train{{{1.0, 5.0}, Label::Normal, true}, {{3.0, 5.0}, Label::Abnormal, true}};
    Standardizer s;
    s.fit(train);
    CHECK(s.dims() == 2);
    const auto z = s.apply(std::vector<double>{3.0, 6.0});
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(1.0));
  }

  TEST_CASE("flattening and leave-one-out") {
    std::mt19937_64 gen(5);
    std::vector<spectral::SpectralFeatures> set;
    for (int k = 0; k < 8; ++k) {
      auto f = testing::random_features(gen, 3, "s" + std::to_string(k), k < 4 ? Label::Normal : Label::Abnormal);
      // Abnormal samples carry extra energy in every channel of the lowest bin.
      if (k >= 4)
        for (std::size_t i = 0; i < kNumJoints * spectral::kNumChannels; ++i) f.values[i] += 10.0;
      set.push_back(std::move(f));
    }
    const auto flat = flatten(set[0]);
    CHECK(flat.values == set[0].values);
    CHECK(flat.label == Label::Normal);
    for (auto k : {Kind::LogisticRegression, Kind::Lda, Kind::DecisionTree, Kind::LinearSvm}) {
      const auto cm = loocv_baseline(k, set);
      CHECK(cm.total() == 8);
      INFO(kind_name(k));
      CHECK(cm.tp + cm.tn == 8);
    }
  }

  TEST_CASE("ablation table layout") {
    std::vector<AblationRow> rows(1);
    rows[0].method = "LR";
    rows[0].binned = false;
    rows[0].confusion = {4, 0, 7, 1};
    rows[0].metrics = eval::metrics(rows[0].confusion);
    CHECK(format_ablation_table(rows) == "method,binning,AC,SE,SP,F1,MCC\nLR,unbinned,91.67,100.00,87.50,88.89,83.67\n");
  }
}
