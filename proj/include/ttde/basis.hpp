#pragma once

#include "ttde/types.hpp"

#include <span>
#include <vector>

namespace ttde {

/// One-dimensional B-spline basis on a clamped uniform knot vector over
/// [lower, upper].
///
/// The basis has `size()` functions of polynomial degree `degree()`. The
/// domain is split into `size() - degree()` equal knot intervals and the end
/// knots are repeated `degree() + 1` times, so the functions form a partition
/// of unity on the closed interval and vanish outside it. Interval `j` has
/// the `degree() + 1` functions `j, ..., j + degree()` as its only nonzero
/// members.
///
/// All integrals (full, cumulative, Gram and cumulative Gram) are computed
/// with composite Gauss-Legendre rules of `degree() + 1` nodes per interval,
/// which integrate products of two basis functions exactly.
///
/// Instances are immutable; every method is safe to call concurrently.
class BSplineBasis {
 public:
  BSplineBasis(double lower, double upper, int size, int degree = 2);

  int size() const { return size_; }
  int degree() const { return degree_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int num_intervals() const { return size_ - degree_; }
  double interval_width() const { return width_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Knot interval containing x, or -1 when x lies outside [lower, upper].
  /// The upper bound belongs to the last interval.
  int interval_of(double x) const;

  /// Writes the degree()+1 possibly-nonzero values at x into `out` and
  /// returns the index of the first of them. Returns -1 (and leaves `out`
  /// zeroed) when x is outside the domain.
  int eval_active(double x, std::span<double> out) const;

  /// Full vector (f_1(x), ..., f_m(x)).
  Vector eval(double x) const;

  /// Integrals of each function over the domain.
  const Vector& integrals() const { return integrals_; }

  /// Integrals of each function over (-inf, upper_limit].
  Vector partial_integrals(double upper_limit) const;

  /// D_ij = integral of f_i f_j. Banded with half bandwidth degree().
  const Matrix& gram() const { return gram_; }

  /// Integral of f_i f_j over (-inf, upper_limit].
  Matrix partial_gram(double upper_limit) const;

  // Per-interval pieces, indexed relative to the first active function of
  // the interval. Used to build cumulative quantities incrementally.

  /// Integrals of the active functions of `interval` over the whole interval.
  const Vector& interval_integrals(int interval) const {
    return interval_integrals_[static_cast<std::size_t>(interval)];
  }
  /// Gram block of the active functions of `interval` over the interval.
  const Matrix& interval_gram(int interval) const {
    return interval_grams_[static_cast<std::size_t>(interval)];
  }
  /// Integrals of the active functions of `interval` from its left knot to
  /// `upper_limit`, which must lie inside the interval.
  Vector interval_partial_integrals(int interval, double upper_limit) const;
  /// Gram block of the active functions of `interval` from its left knot to
  /// `upper_limit`, which must lie inside the interval.
  Matrix interval_partial_gram(int interval, double upper_limit) const;

  /// Allocation-free forms of the two functions above. `out` holds
  /// degree()+1 (integrals) or (degree()+1)^2 row-major (Gram) entries.
  void interval_partial_integrals(int interval, double upper_limit,
                                  std::span<double> out) const;
  void interval_partial_gram(int interval, double upper_limit,
                             std::span<double> out) const;

  double interval_left(int interval) const {
    return lower_ + width_ * interval;
  }

 private:
  // Values of the active functions of `interval` at x (x may lie on the
  // interval's closure; the polynomial piece is extended).
  void eval_piece(int interval, double x, std::span<double> out) const;

  double lower_;
  double upper_;
  int size_;
  int degree_;
  double width_;
  std::vector<double> knots_;
  std::vector<double> gauss_nodes_;    // on [-1, 1]
  std::vector<double> gauss_weights_;  // sum to 2

  Vector integrals_;
  Matrix gram_;
  std::vector<Vector> interval_integrals_;
  std::vector<Matrix> interval_grams_;
};

/// Builds one basis of the given size and degree for each [lower, upper]
/// pair.
std::vector<BSplineBasis> make_bases(std::span<const double> lower,
                                     std::span<const double> upper, int size,
                                     int degree = 2);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int points, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace ttde
