#pragma once

#include "ttde/basis.hpp"
#include "ttde/tt_tensor.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace ttde {

/// Plain: q(x) = <alpha, Phi(x)> / Z, may be locally negative.
/// Squared: q(x) = <alpha, Phi(x)>^2 / Z, nonnegative by construction.
enum class Variant { Plain, Squared };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// How one coordinate enters a joint query: fixed at a value, integrated over
/// the whole domain, or integrated up to a limit.
struct DimQuery {
  enum class Kind { Point, Full, Below };
  Kind kind = Kind::Full;
  double value = 0.0;

  static DimQuery point(double x) { return {Kind::Point, x}; }
  static DimQuery full() { return {Kind::Full, 0.0}; }
  static DimQuery below(double limit) { return {Kind::Below, limit}; }
};

struct LogLikelihood {
  double mean = 0.0;
  /// Points where the density is not positive; each contributes -inf.
  Index nonpositive = 0;
};

/// Tensor-train density over a tensor-product B-spline basis.
///
/// `normalization()` is the cached partition function Z; it is 1 until
/// normalize() is called. All queries divide by it.
class DensityModel {
 public:
  DensityModel(TTTensor alpha, std::vector<BSplineBasis> bases,
               Variant variant, double normalization = 1.0);

  const TTTensor& alpha() const { return alpha_; }
  const std::vector<BSplineBasis>& bases() const { return bases_; }
  Variant variant() const { return variant_; }
  double normalization() const { return normalization_; }
  int dims() const { return alpha_.dims(); }
  const std::vector<Matrix>& grams() const { return grams_; }

  /// <alpha, Phi(x)>; zero outside the domain box.
  double raw(std::span<const double> x) const;

  /// q(x). Zero when any coordinate is outside its domain.
  double evaluate(std::span<const double> x) const;

  /// max(q(x), 0); only the Plain variant can be negative.
  double evaluate_clamped(std::span<const double> x) const;

  Vector evaluate_batch(const Samples& x) const;

  /// Unnormalized integral of the model over the domain box.
  double partition_function() const;

  /// Joint quantity with each coordinate fixed, fully integrated or
  /// integrated from below, divided by Z.
  double query(std::span<const DimQuery> dims) const;

  /// Marginal density of the first prefix.size() coordinates.
  double marginal(std::span<const double> prefix) const;

  /// q(x_1..x_{k-1}, x_k < upper) with k = prefix.size() + 1, remaining
  /// coordinates integrated out. Not conditioned on the prefix.
  double cdf_slice(std::span<const double> prefix, double upper) const;

  LogLikelihood log_likelihood(const Samples& x) const;

  /// Copy with Z set to the partition function; throws NumericError when the
  /// partition function is not positive.
  DensityModel normalized() const;

 private:
  double plain_query(std::span<const DimQuery> dims) const;
  double squared_query(std::span<const DimQuery> dims) const;

  TTTensor alpha_;
  std::vector<BSplineBasis> bases_;
  std::vector<Matrix> grams_;
  Variant variant_;
  double normalization_;
};

DensityModel normalize(const DensityModel& model);

/// Gram matrices of a list of bases.
std::vector<Matrix> gram_matrices(std::span<const BSplineBasis> bases);

/// <alpha, D alpha> with D the separable Gram operator.
double squared_norm_integral(const TTTensor& alpha,
                             std::span<const Matrix> grams);

}  // namespace ttde
