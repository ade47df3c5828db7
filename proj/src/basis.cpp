#include "ttde/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ttde {

void gauss_legendre(int points, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: points < 1");
  nodes.assign(static_cast<std::size_t>(points), 0.0);
  weights.assign(static_cast<std::size_t>(points), 0.0);
  const int half = (points + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 0; j < points; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = points * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -z;
    nodes[static_cast<std::size_t>(points - 1 - i)] = z;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(points - 1 - i)] = w;
  }
}

BSplineBasis::BSplineBasis(double lower, double upper, int size, int degree)
    : lower_(lower), upper_(upper), size_(size), degree_(degree) {
  if (degree < 0 || degree > 30) {
    throw std::invalid_argument("BSplineBasis: degree must be in [0, 30]");
  }
  if (size < degree + 1) {
    throw std::invalid_argument("BSplineBasis: size " + std::to_string(size) +
                                " < degree + 1");
  }
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw std::invalid_argument("BSplineBasis: empty or non-finite domain");
  }
  const int intervals = num_intervals();
  width_ = (upper - lower) / intervals;

  knots_.reserve(static_cast<std::size_t>(size + degree + 1));
  for (int i = 0; i < degree; ++i) knots_.push_back(lower);
  for (int k = 0; k <= intervals; ++k) {
    knots_.push_back(k == intervals ? upper : lower + k * width_);
  }
  for (int i = 0; i < degree; ++i) knots_.push_back(upper);

  gauss_legendre(degree + 1, gauss_nodes_, gauss_weights_);

  const int w = degree + 1;
  integrals_ = Vector::Zero(size);
  gram_ = Matrix::Zero(size, size);
  interval_integrals_.reserve(static_cast<std::size_t>(intervals));
  interval_grams_.reserve(static_cast<std::size_t>(intervals));
  for (int j = 0; j < intervals; ++j) {
    const double right = (j == intervals - 1) ? upper : interval_left(j + 1);
    interval_integrals_.push_back(interval_partial_integrals(j, right));
    interval_grams_.push_back(interval_partial_gram(j, right));
    integrals_.segment(j, w) += interval_integrals_.back();
    gram_.block(j, j, w, w) += interval_grams_.back();
  }
}

int BSplineBasis::interval_of(double x) const {
  if (!(x >= lower_ && x <= upper_)) return -1;
  const int j = static_cast<int>(std::floor((x - lower_) / width_));
  return std::clamp(j, 0, num_intervals() - 1);
}

void BSplineBasis::eval_piece(int interval, double x,
                              std::span<double> out) const {
  // Triangular Cox-de Boor recursion on the knot span of `interval`.
  const int p = degree_;
  const std::size_t span = static_cast<std::size_t>(interval + p);
  double left[32];
  double right[32];
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots_[span + 1 - static_cast<std::size_t>(j)];
    right[j] = knots_[span + static_cast<std::size_t>(j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[static_cast<std::size_t>(r)] /
                          (right[r + 1] + left[j - r]);
      out[static_cast<std::size_t>(r)] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[static_cast<std::size_t>(j)] = saved;
  }
}

int BSplineBasis::eval_active(double x, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + degree_ + 1, 0.0);
  const int j = interval_of(x);
  if (j < 0) return -1;
  eval_piece(j, x, out);
  return j;
}

Vector BSplineBasis::eval(double x) const {
  Vector result = Vector::Zero(size_);
  double buf[32];
  const int first = eval_active(x, std::span<double>(buf, 32));
  if (first >= 0) {
    for (int t = 0; t <= degree_; ++t) result[first + t] = buf[t];
  }
  return result;
}

void BSplineBasis::interval_partial_integrals(int interval, double upper_limit,
                                              std::span<double> out) const {
  const int w = degree_ + 1;
  std::fill(out.begin(), out.begin() + w, 0.0);
  const double a = interval_left(interval);
  const double half = 0.5 * (upper_limit - a);
  if (half <= 0.0) return;
  double buf[32];
  for (std::size_t q = 0; q < gauss_nodes_.size(); ++q) {
    const double x = a + half * (gauss_nodes_[q] + 1.0);
    eval_piece(interval, x, std::span<double>(buf, 32));
    const double c = half * gauss_weights_[q];
    for (int t = 0; t < w; ++t) out[static_cast<std::size_t>(t)] += c * buf[t];
  }
}

void BSplineBasis::interval_partial_gram(int interval, double upper_limit,
                                         std::span<double> out) const {
  const int w = degree_ + 1;
  std::fill(out.begin(), out.begin() + w * w, 0.0);
  const double a = interval_left(interval);
  const double half = 0.5 * (upper_limit - a);
  if (half <= 0.0) return;
  double buf[32];
  for (std::size_t q = 0; q < gauss_nodes_.size(); ++q) {
    const double x = a + half * (gauss_nodes_[q] + 1.0);
    eval_piece(interval, x, std::span<double>(buf, 32));
    const double c = half * gauss_weights_[q];
    for (int s = 0; s < w; ++s) {
      for (int t = 0; t < w; ++t) {
        out[static_cast<std::size_t>(s * w + t)] += c * buf[s] * buf[t];
      }
    }
  }
}

Vector BSplineBasis::interval_partial_integrals(int interval,
                                                double upper_limit) const {
  Vector out(degree_ + 1);
  interval_partial_integrals(interval, upper_limit,
                             std::span<double>(out.data(), out.size()));
  return out;
}

Matrix BSplineBasis::interval_partial_gram(int interval,
                                           double upper_limit) const {
  RowMatrix out(degree_ + 1, degree_ + 1);
  interval_partial_gram(interval, upper_limit,
                        std::span<double>(out.data(), out.size()));
  return out;
}

Vector BSplineBasis::partial_integrals(double upper_limit) const {
  if (upper_limit <= lower_) return Vector::Zero(size_);
  if (upper_limit >= upper_) return integrals_;
  const int w = degree_ + 1;
  const int j = interval_of(upper_limit);
  Vector out = Vector::Zero(size_);
  for (int i = 0; i < j; ++i) out.segment(i, w) += interval_integrals(i);
  out.segment(j, w) += interval_partial_integrals(j, upper_limit);
  return out;
}

Matrix BSplineBasis::partial_gram(double upper_limit) const {
  if (upper_limit <= lower_) return Matrix::Zero(size_, size_);
  if (upper_limit >= upper_) return gram_;
  const int w = degree_ + 1;
  const int j = interval_of(upper_limit);
  Matrix out = Matrix::Zero(size_, size_);
  for (int i = 0; i < j; ++i) out.block(i, i, w, w) += interval_gram(i);
  out.block(j, j, w, w) += interval_partial_gram(j, upper_limit);
  return out;
}

std::vector<BSplineBasis> make_bases(std::span<const double> lower,
                                     std::span<const double> upper, int size,
                                     int degree) {
  if (lower.size() != upper.size()) {
    throw std::invalid_argument("make_bases: bound lists differ in length");
  }
  std::vector<BSplineBasis> bases;
  bases.reserve(lower.size());
  for (std::size_t k = 0; k < lower.size(); ++k) {
    bases.emplace_back(lower[k], upper[k], size, degree);
  }
  return bases;
}

}  // namespace ttde
