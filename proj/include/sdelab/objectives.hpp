#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "sdelab/rng.hpp"

namespace sdelab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ObjectiveKind { kQuadratic, kQuartic1d, kQuarticSum, kMlpRegression };

// Known (L0, L1) smoothness constants, where analytically available.
struct SmoothnessConstants {
  double l0 = 0.0;
  double l1 = 0.0;
};

// Single-hidden-layer ReLU regression problem: 20 -> 64 -> 1, mean squared
// error over a fixed synthetic dataset of 4096 examples generated once from
// the stored seed (inputs N(0,I), labels from a linear teacher plus N(0,0.1^2)
// label noise).
class MlpProblem {
 public:
  static constexpr int kInputDim = 20;
  static constexpr int kHiddenDim = 64;
  static constexpr int kSamples = 4096;
  static constexpr double kLabelNoiseStd = 0.1;

  explicit MlpProblem(std::uint64_t seed) : seed_(seed) {
    rng::Stream s(seed, 0, 0, rng::Purpose::kInit);
    inputs_.resize(kSamples, kInputDim);
    labels_.resize(kSamples);
    teacher_.resize(kInputDim);
    for (int j = 0; j < kInputDim; ++j) teacher_(j) = s.normal();
    for (int i = 0; i < kSamples; ++i)
      for (int j = 0; j < kInputDim; ++j) inputs_(i, j) = s.normal();
    for (int i = 0; i < kSamples; ++i)
      labels_(i) = inputs_.row(i).dot(teacher_) + kLabelNoiseStd * s.normal();
  }

  static constexpr int dimension() {
    return kHiddenDim * kInputDim + kHiddenDim + kHiddenDim + 1;
  }

  std::uint64_t seed() const { return seed_; }
  const Mat& inputs() const { return inputs_; }
  const Vec& labels() const { return labels_; }

  // Parameter layout: [W1 row-major (64x20), b1 (64), W2 (64), b2 (1)].
  double loss(const Vec& theta) const {
    Vec residual;
    Mat hidden;
    forward(theta, hidden, residual);
    return residual.squaredNorm() / kSamples;
  }

  Vec gradient(const Vec& theta) const {
    Vec residual;
    Mat hidden;  // post-ReLU activations, kSamples x kHiddenDim
    forward(theta, hidden, residual);

    const auto w2 = theta.segment(kHiddenDim * kInputDim + kHiddenDim, kHiddenDim);
    // d loss / d prediction
    Vec dpred = (2.0 / kSamples) * residual;
    Vec grad(dimension());

    // Backprop through the output layer.
    Eigen::Map<Eigen::VectorXd>(grad.data() + kHiddenDim * kInputDim + kHiddenDim,
                                kHiddenDim) = hidden.transpose() * dpred;
    grad(dimension() - 1) = dpred.sum();

    // Backprop through the hidden layer; ReLU subgradient at 0 is 0.
    Mat dhidden = dpred * w2.transpose();          // kSamples x kHiddenDim
    dhidden = (hidden.array() > 0.0).select(dhidden, 0.0);
    Mat dw1 = dhidden.transpose() * inputs_;       // kHiddenDim x kInputDim
    Eigen::Map<Mat>(grad.data(), kHiddenDim, kInputDim) = dw1;
    grad.segment(kHiddenDim * kInputDim, kHiddenDim) = dhidden.colwise().sum();
    return grad;
  }

  // Random initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  Vec initial_point(rng::Stream& s) const {
    Vec theta(dimension());
    const double b1 = 1.0 / std::sqrt(static_cast<double>(kInputDim));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(kHiddenDim));
    int k = 0;
    for (; k < kHiddenDim * kInputDim + kHiddenDim; ++k)
      theta(k) = b1 * (2.0 * s.uniform01() - 1.0);
    for (; k < dimension(); ++k) theta(k) = b2 * (2.0 * s.uniform01() - 1.0);
    return theta;
  }

 private:
  void forward(const Vec& theta, Mat& hidden, Vec& residual) const {
    if (theta.size() != dimension())
      throw std::invalid_argument("MlpProblem: parameter size mismatch");
    const Eigen::Map<const Mat> w1(theta.data(), kHiddenDim, kInputDim);
    const auto b1 = theta.segment(kHiddenDim * kInputDim, kHiddenDim);
    const auto w2 = theta.segment(kHiddenDim * kInputDim + kHiddenDim, kHiddenDim);
    const double b2 = theta(dimension() - 1);
    hidden = inputs_ * w1.transpose();
    hidden.rowwise() += b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    residual = hidden * w2;
    residual.array() += b2;
    residual -= labels_;
  }

  std::uint64_t seed_;
  Mat inputs_;
  Vec labels_;
  Vec teacher_;
};

// Differentiable test problem with exact gradient and Hessian-vector product.
class Objective {
 public:
  // Defaults to the unit quadratic in one dimension.
  Objective() : Objective(ObjectiveKind::kQuadratic, 1) { lambda_ = 1.0; }

  static Objective quadratic(double lambda, int dim = 1) {
    if (lambda <= 0.0) throw std::invalid_argument("quadratic: lambda must be > 0");
    Objective o(ObjectiveKind::kQuadratic, dim);
    o.lambda_ = lambda;
    return o;
  }

  static Objective quartic1d() { return Objective(ObjectiveKind::kQuartic1d, 1); }

  static Objective quartic_sum(int dim) {
    if (dim < 1) throw std::invalid_argument("quartic_sum: dim must be >= 1");
    return Objective(ObjectiveKind::kQuarticSum, dim);
  }

  static Objective mlp_regression(std::uint64_t seed) {
    Objective o(ObjectiveKind::kMlpRegression, MlpProblem::dimension());
    o.mlp_ = std::make_shared<MlpProblem>(seed);
    return o;
  }

  ObjectiveKind kind() const { return kind_; }
  int dimension() const { return dim_; }
  double lambda() const { return lambda_; }
  const MlpProblem& mlp() const { return *mlp_; }

  std::optional<SmoothnessConstants> smoothness() const {
    if (kind_ == ObjectiveKind::kQuadratic)
      return SmoothnessConstants{lambda_, 0.0};
    return std::nullopt;  // pure quartics and the MLP have no known constants
  }

  double loss(const Vec& x) const {
    check_dim(x, "loss");
    switch (kind_) {
      case ObjectiveKind::kQuadratic:
        return 0.5 * lambda_ * x.squaredNorm();
      case ObjectiveKind::kQuartic1d:
      case ObjectiveKind::kQuarticSum:
        return 0.25 * x.array().square().square().sum();
      case ObjectiveKind::kMlpRegression:
        return mlp_->loss(x);
    }
    return 0.0;
  }

  Vec gradient(const Vec& x) const {
    check_dim(x, "gradient");
    switch (kind_) {
      case ObjectiveKind::kQuadratic:
        return lambda_ * x;
      case ObjectiveKind::kQuartic1d:
      case ObjectiveKind::kQuarticSum:
        return x.array().cube().matrix();
      case ObjectiveKind::kMlpRegression:
        return mlp_->gradient(x);
    }
    return Vec();
  }

  Vec hessian_vec(const Vec& x, const Vec& v) const {
    check_dim(x, "hessian_vec");
    check_dim(v, "hessian_vec");
    switch (kind_) {
      case ObjectiveKind::kQuadratic:
        return lambda_ * v;
      case ObjectiveKind::kQuartic1d:
      case ObjectiveKind::kQuarticSum:
        return (3.0 * x.array().square() * v.array()).matrix();
      case ObjectiveKind::kMlpRegression: {
        // Central finite difference of the exact gradient; the MLP is never
        // run under the corrected SDE drift, so this path is diagnostic only.
        const double h = 1e-5 * std::max(1.0, x.norm());
        return (mlp_->gradient(x + h * v) - mlp_->gradient(x - h * v)) /
               (2.0 * h);
      }
    }
    return Vec();
  }

  // Default starting point: all-ones for analytic kinds, random layer-scaled
  // initialization for the MLP.
  Vec initial_point(rng::Stream& s) const {
    if (kind_ == ObjectiveKind::kMlpRegression) return mlp_->initial_point(s);
    return Vec::Ones(dim_);
  }

 private:
  Objective(ObjectiveKind kind, int dim) : kind_(kind), dim_(dim) {}

  void check_dim(const Vec& x, const char* op) const {
    if (x.size() != dim_)
      throw std::invalid_argument(std::string(op) + ": expected dimension " +
                                  std::to_string(dim_) + ", got " +
                                  std::to_string(x.size()));
  }

  ObjectiveKind kind_;
  int dim_;
  double lambda_ = 0.0;
  std::shared_ptr<const MlpProblem> mlp_;
};

}  // namespace sdelab
