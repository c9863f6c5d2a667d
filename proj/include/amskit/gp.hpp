// Copyright 2026 The amskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Zero-mean Gaussian process regression with a squared-exponential ARD
// kernel, plus the closed-form expected improvement used to pick the next
// sample.
//
//   k(x, x') = s2 * exp(-0.5 * sum_i (x_i - x'_i)^2 / l_i^2)
//
// Inputs are expected in the unit cube. Targets are optionally standardized
// so the zero prior mean is the sample mean.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "amskit/common.hpp"

namespace amskit::gp {

class GPError : public Error {
 public:
  using Error::Error;
};

struct Hyper {
  double signal_var = 1.0;
  std::vector<double> lengthscales;
  /// Diagonal term added to K before factorization; raised on failure.
  double noise = 1e-12;

  static Hyper isotropic(std::size_t d, double lengthscale, double signal_var = 1.0, double noise = 1e-12) {
    Hyper h;
    h.signal_var = signal_var;
    h.lengthscales.assign(d, lengthscale);
    h.noise = noise;
    return h;
  }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

inline double kernel(const Hyper& h, const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double t = (a[i] - b[i]) / h.lengthscales[static_cast<std::size_t>(i)];
    s += t * t;
  }
  return h.signal_var * std::exp(-0.5 * s);
}

/// Cross-covariance between the rows of A and the rows of B.
inline Eigen::MatrixXd cross_cov(const Hyper& h, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index d = A.cols();
  Eigen::ArrayXd inv(d);
  for (Eigen::Index i = 0; i < d; ++i) inv[i] = 1.0 / h.lengthscales[static_cast<std::size_t>(i)];
  Eigen::MatrixXd As = A * inv.matrix().asDiagonal();
  Eigen::MatrixXd Bs = B * inv.matrix().asDiagonal();
  Eigen::VectorXd an = As.rowwise().squaredNorm();
  Eigen::VectorXd bn = Bs.rowwise().squaredNorm();
  Eigen::MatrixXd D = (-2.0 * As * Bs.transpose()).colwise() + an;
  D.rowwise() += bn.transpose();
  return h.signal_var * (-0.5 * D.array().max(0.0)).exp().matrix();
}

class Model {
 public:
  /// Rows of X are the inputs. Duplicate rows are rejected; the noise term is
  /// escalated tenfold up to max_jitter until K factors.
  static Model fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Hyper h, bool standardize = true,
                   double max_jitter = 1e-2) {
    if (X.rows() < 1 || X.cols() < 1) throw GPError("gp fit needs at least one point and one dimension");
    if (y.size() != X.rows()) throw GPError("gp fit: X has " + std::to_string(X.rows()) + " rows but y has " +
                                            std::to_string(y.size()) + " values");
    if (h.lengthscales.size() != static_cast<std::size_t>(X.cols()))
      throw GPError("gp fit: lengthscale count does not match dimension");
    for (double l : h.lengthscales)
      if (!(l > 0.0)) throw GPError("gp fit: lengthscales must be positive");
    if (!(h.signal_var > 0.0) || !(h.noise >= 0.0)) throw GPError("gp fit: bad signal variance or noise");
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j)
        if (X.row(i) == X.row(j))
          throw GPError("gp fit: rows " + std::to_string(j) + " and " + std::to_string(i) + " are identical");
    if (!y.allFinite()) throw GPError("gp fit: non-finite target");

    Model m;
    m.X_ = X;
    m.y_raw_ = y;
    m.h_ = std::move(h);
    m.standardize_ = standardize;
    m.max_jitter_ = max_jitter;
    m.factor_full();
    m.update_targets();
    return m;
  }

  /// Copy of the model with one more observation. Uses a rank-one extension
  /// of the factor when possible.
  Model with_point(const Eigen::VectorXd& x, double y) const {
    for (Eigen::Index j = 0; j < X_.rows(); ++j)
      if (X_.row(j).transpose() == x) throw GPError("gp update: point already observed");
    Model m;
    m.h_ = h_;
    m.standardize_ = standardize_;
    m.max_jitter_ = max_jitter_;
    const Eigen::Index n = X_.rows();
    m.X_.resize(n + 1, X_.cols());
    m.X_.topRows(n) = X_;
    m.X_.row(n) = x.transpose();
    m.y_raw_.resize(n + 1);
    m.y_raw_.head(n) = y_raw_;
    m.y_raw_[n] = y;
    Eigen::VectorXd k = cross_cov(h_, X_, x.transpose());
    Eigen::VectorXd l = L_.triangularView<Eigen::Lower>().solve(k);
    double diag = h_.signal_var + h_.noise - l.squaredNorm();
    if (diag > 1e-12 * h_.signal_var) {
      m.L_ = Eigen::MatrixXd::Zero(n + 1, n + 1);
      m.L_.topLeftCorner(n, n) = L_;
      m.L_.block(n, 0, 1, n) = l.transpose();
      m.L_(n, n) = std::sqrt(diag);
    } else {
      m.factor_full();
    }
    m.update_targets();
    return m;
  }

  Prediction predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd mean, var;
    predict_batch(x.transpose(), mean, var);
    return {mean[0], var[0]};
  }

  /// Posterior mean and variance at each row of Xs.
  void predict_batch(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::VectorXd& var) const {
    Eigen::MatrixXd Ks = cross_cov(h_, X_, Xs);
    mean = Ks.transpose() * alpha_;
    Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Ks);
    var = (h_.signal_var - V.colwise().squaredNorm().array()).matrix();
    for (Eigen::Index i = 0; i < var.size(); ++i) {
      if (var[i] < 0.0) {
        if (var[i] < -1e-10) spdlog::warn("gp: negative posterior variance {} clamped", var[i]);
        var[i] = 0.0;
      }
    }
    mean = (mean.array() * y_scale_ + y_mean_).matrix();
    var *= y_scale_ * y_scale_;
  }

  /// Log marginal likelihood of the (standardized) targets.
  double log_marginal_likelihood() const {
    const double n = static_cast<double>(X_.rows());
    return -0.5 * ys_.dot(alpha_) - L_.diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_raw_; }
  const Hyper& hyper() const { return h_; }
  /// Diagonal term actually used in the factorization.
  double jitter() const { return h_.noise; }
  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index dim() const { return X_.cols(); }
  double y_mean() const { return y_mean_; }
  double y_scale() const { return y_scale_; }
  bool standardized() const { return standardize_; }

 private:
  void factor_full() {
    Eigen::MatrixXd K = cross_cov(h_, X_, X_);
    double jitter = h_.noise;
    for (;;) {
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(Kj);
      if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
        L_ = llt.matrixL();
        if (jitter != h_.noise) spdlog::debug("gp: jitter raised to {}", jitter);
        h_.noise = jitter;
        return;
      }
      double next = jitter > 0.0 ? jitter * 10.0 : 1e-12 * h_.signal_var;
      if (next > max_jitter_ * h_.signal_var)
        throw GPError("covariance not positive definite after jitter " + str::shortest(jitter));
      jitter = next;
    }
  }

  void update_targets() {
    const Eigen::Index n = y_raw_.size();
    y_mean_ = 0.0;
    y_scale_ = 1.0;
    if (standardize_) {
      y_mean_ = y_raw_.mean();
      if (n > 1) {
        double sd = std::sqrt((y_raw_.array() - y_mean_).square().sum() / static_cast<double>(n));
        if (sd > 1e-12 * std::max(1.0, std::abs(y_mean_))) y_scale_ = sd;
      }
    }
    ys_ = ((y_raw_.array() - y_mean_) / y_scale_).matrix();
    alpha_ = L_.triangularView<Eigen::Lower>().solve(ys_);
    L_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
  }

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_raw_;
  Eigen::VectorXd ys_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd L_;
  Hyper h_;
  bool standardize_ = true;
  double max_jitter_ = 1e-2;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Hyperparameters

struct HyperBounds {
  double min_lengthscale = 1e-2;
  double max_lengthscale = 1e1;
  double min_signal_var = 5e-2;
  double max_signal_var = 2e1;
};

/// Gradient ascent on the log marginal likelihood over log lengthscales and
/// log signal variance. Noise stays fixed. Returns the better of the start
/// point and the ascent result.
inline Hyper optimize_hyper(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Hyper& start,
                            const HyperBounds& bounds = {}, int iterations = 40, bool standardize = true) {
  const Eigen::Index d = X.cols();
  const Eigen::Index n = X.rows();
  auto pack = [&](const Hyper& h) {
    Eigen::VectorXd t(d + 1);
    for (Eigen::Index i = 0; i < d; ++i) t[i] = std::log(h.lengthscales[static_cast<std::size_t>(i)]);
    t[d] = std::log(h.signal_var);
    return t;
  };
  auto clamp = [&](Eigen::VectorXd t) {
    for (Eigen::Index i = 0; i < d; ++i)
      t[i] = std::clamp(t[i], std::log(bounds.min_lengthscale), std::log(bounds.max_lengthscale));
    t[d] = std::clamp(t[d], std::log(bounds.min_signal_var), std::log(bounds.max_signal_var));
    return t;
  };
  auto unpack = [&](const Eigen::VectorXd& t) {
    Hyper h = start;
    for (Eigen::Index i = 0; i < d; ++i) h.lengthscales[static_cast<std::size_t>(i)] = std::exp(t[i]);
    h.signal_var = std::exp(t[d]);
    return h;
  };
  // Value and gradient; -inf when the factorization fails.
  auto evaluate = [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) {
    Hyper h = unpack(t);
    Model m;
    try {
      m = Model::fit(X, y, h, standardize);
    } catch (const GPError&) {
      return -std::numeric_limits<double>::infinity();
    }
    double value = m.log_marginal_likelihood();
    if (grad) {
      const Hyper& hf = m.hyper();
      Eigen::MatrixXd Ks = cross_cov(hf, X, X);
      Eigen::MatrixXd Kn = Ks;
      Kn.diagonal().array() += hf.noise;
      Eigen::LLT<Eigen::MatrixXd> llt(Kn);
      Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      Eigen::VectorXd ys = ((y.array() - m.y_mean()) / m.y_scale()).matrix();
      Eigen::VectorXd a = Kinv * ys;
      Eigen::MatrixXd W = a * a.transpose() - Kinv;
      grad->resize(d + 1);
      for (Eigen::Index k = 0; k < d; ++k) {
        double l2 = hf.lengthscales[static_cast<std::size_t>(k)] * hf.lengthscales[static_cast<std::size_t>(k)];
        double g = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j) {
            double diff = X(i, k) - X(j, k);
            g += W(i, j) * Ks(i, j) * diff * diff / l2;
          }
        (*grad)[k] = 0.5 * g;
      }
      (*grad)[d] = 0.5 * (W.array() * Ks.array()).sum();
    }
    return value;
  };

  Eigen::VectorXd t = clamp(pack(start));
  Eigen::VectorXd g;
  double f = evaluate(t, &g);
  double step = 0.5;
  for (int it = 0; it < iterations && std::isfinite(f); ++it) {
    double gn = g.norm();
    if (gn < 1e-8) break;
    bool improved = false;
    while (step > 1e-6) {
      Eigen::VectorXd cand = clamp(t + step * g / gn);
      Eigen::VectorXd gc;
      double fc = evaluate(cand, &gc);
      if (fc > f) {
        t = cand;
        f = fc;
        g = gc;
        step *= 1.5;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return std::isfinite(f) ? unpack(t) : start;
}

// ---------------------------------------------------------------------------
// Acquisition

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Expected improvement over `best` for maximization.
inline double expected_improvement(double mean, double sigma, double best) {
  if (!(sigma > 0.0)) return std::max(0.0, mean - best);
  double z = (mean - best) / sigma;
  return std::max(0.0, sigma * (z * normal_cdf(z) + normal_pdf(z)));
}

inline double expected_improvement(const Model& m, const Eigen::VectorXd& x, double best) {
  auto p = m.predict(x);
  return expected_improvement(p.mean, std::sqrt(p.variance), best);
}

inline Eigen::VectorXd expected_improvement_batch(const Model& m, const Eigen::MatrixXd& Xs, double best) {
  Eigen::VectorXd mean, var;
  m.predict_batch(Xs, mean, var);
  Eigen::VectorXd out(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) out[i] = expected_improvement(mean[i], std::sqrt(var[i]), best);
  return out;
}

}  // namespace amskit::gp
