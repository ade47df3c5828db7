#pragma once

#include "ttde/density.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ttde {

struct SamplerOptions {
  int bisection_iterations = 30;
  /// Fresh uniforms are drawn at most this many times for a row whose
  /// conditional normalizer is not positive; after that the row is NaN.
  int max_retries = 100;
  /// Worker threads. Results do not depend on this value.
  int threads = 1;
};

struct SampleStats {
  Index rows = 0;
  Index retried_rows = 0;
  Index retries = 0;
  Index failed_rows = 0;
  /// Multiply-adds spent on environment and conditional construction.
  std::uint64_t core_operations = 0;
  /// Conditional CDF evaluations spent in the root search.
  std::uint64_t cdf_evaluations = 0;

  SampleStats& operator+=(const SampleStats& o);
};

struct SampleResult {
  Samples samples;
  SampleStats stats;
};

/// Bisection for the leftmost-ish crossing of a nondecreasing `cdf` with u on
/// [lower, upper]. u is clamped to [0, 1]; u <= 0 returns lower and u >= 1
/// returns upper. The result is within (upper - lower) / 2^(iterations + 1)
/// of a crossing.
template <class Cdf>
double invert_cdf(Cdf&& cdf, double u, double lower, double upper,
                  int iterations = 30) {
  if (!(u > 0.0)) return lower;
  if (u >= 1.0) return upper;
  double lo = lower;
  double hi = upper;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

class Sampler;

/// CDF of coordinate k conditioned on a fixed prefix, represented by the
/// prefix's left environment. Buffers are reused across build() calls.
///
/// For the Squared variant the left environment is the vector v with
/// Q^left = v v^T, which is exact because every prefix coordinate is a
/// point evaluation.
class ConditionalCdf {
 public:
  void build(const Sampler& sampler, int k, const Vector& left);

  int dim() const { return k_; }
  /// Joint mass of the prefix with coordinate k fully integrated.
  double denominator() const { return total_; }
  /// Joint mass with coordinate k integrated below `upper`.
  double unnormalized(double upper) const;
  /// unnormalized(upper) / denominator(), clamped to [0, 1].
  double operator()(double upper) const;
  /// Left environment after fixing coordinate k at x (cheap: reuses the
  /// contracted core from build()).
  void advance(double x, Vector& out) const;

 private:
  const BSplineBasis* basis_ = nullptr;
  Variant variant_ = Variant::Plain;
  int k_ = 0;
  RowMatrix contracted_;  // row n: G_k[:, n, :]^T left
  Vector weights_;        // Plain: per-function mass of the suffix
  RowMatrix band_;        // Squared: Q^inner(n, n + s - degree)
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

/// Exact autoregressive inverse-CDF sampler. Right environments are
/// precomputed once; a sampler is read-only afterwards and can be shared by
/// threads.
class Sampler {
 public:
  explicit Sampler(DensityModel model, SamplerOptions options = {});

  const DensityModel& model() const { return model_; }
  const SamplerOptions& options() const { return options_; }
  int dims() const { return model_.dims(); }

  /// Plain: right[k] is the length-r_k vector contracting cores k+1..d-1
  /// with basis integrals. Empty for the Squared variant.
  const std::vector<Vector>& right_vectors() const { return right_vectors_; }
  /// Squared: right[k] is the r_k x r_k matrix contracting cores k+1..d-1
  /// of alpha (x) alpha with Gram matrices. Empty for Plain.
  const std::vector<Matrix>& right_matrices() const { return right_matrices_; }

  /// One left-environment update: out = sum_n f_n(x) G_k[:, n, :]^T left.
  Vector advance_left(int k, double x, const Vector& left) const;
  /// Left environment of a prefix computed by repeated updates.
  Vector left_environment(std::span<const double> prefix) const;

  /// P(x_k < upper | x_1..x_{k-1} = prefix), k = prefix.size() + 1, clamped
  /// to [0, 1]. Throws NumericError when the conditional normalizer is not
  /// positive.
  double conditional_cdf(std::span<const double> prefix, double upper) const;

  /// Maps one vector of uniforms through the conditional inverse CDFs.
  /// Returns false (leaving x partially written) when a conditional
  /// normalizer is not positive.
  bool transform(std::span<const double> u, std::span<double> x,
                 ConditionalCdf& scratch, SampleStats* stats = nullptr) const;

  /// n rows; row i depends only on (seed, i).
  SampleResult sample(Index n, std::uint64_t seed) const;

 private:
  friend class ConditionalCdf;
  void sample_rows(Index begin, Index end, std::uint64_t seed, Samples& out,
                   SampleStats& stats) const;

  DensityModel model_;
  SamplerOptions options_;
  std::vector<Vector> right_vectors_;
  std::vector<Matrix> right_matrices_;
};

SampleResult sample(const DensityModel& model, Index n, std::uint64_t seed,
                    SamplerOptions options = {});

}  // namespace ttde
