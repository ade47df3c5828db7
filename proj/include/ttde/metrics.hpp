#pragma once

#include "ttde/density.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace ttde {

struct SlicedTvOptions {
  int projections = 64;
  std::uint64_t seed = 0;
  /// Grid points for the 1D KDE integral.
  int grid = 2048;
  int threads = 1;
};

/// `count` directions drawn uniformly on the unit sphere in R^d (normalized
/// Gaussian vectors), one per row. Row j depends only on (seed, j).
Matrix projection_directions(int d, int count, std::uint64_t seed);

/// Silverman's rule 0.9 * min(sd, IQR / 1.34) * n^(-1/5), with fallbacks when
/// the spread is zero.
double silverman_bandwidth(std::span<const double> values);

/// Integral of |p1 - p2| for Gaussian KDEs of the two samples, trapezoid rule
/// on `grid` points spanning the pooled range plus 3 bandwidths on each side.
/// In [0, 2].
double kde_l1_distance(std::span<const double> a, std::span<const double> b,
                       int grid = 2048);

/// Mean over random unit directions of kde_l1_distance of the projections.
/// In [0, 2]; half of it is the total-variation distance.
double sliced_tv(const Samples& a, const Samples& b,
                 const SlicedTvOptions& options = {});

struct CrossEntropy {
  double value = 0.0;
  /// Points where q <= 0; each contributes -log_floor().
  Index nonpositive = 0;
  Index n = 0;
};

/// log of the smallest positive double, used in place of log(0).
constexpr double log_floor() { return -745.0; }

/// -(1/n) sum log q(x_i) for a normalized model.
CrossEntropy cross_entropy(const DensityModel& model, const Samples& x);

/// Kolmogorov-Smirnov statistic sup |F_n - F| of a sample against a CDF.
double ks_statistic(std::span<const double> values,
                    const std::function<double(double)>& cdf);

/// Asymptotic p-value of a KS statistic for sample size n.
double ks_pvalue(double statistic, Index n);

}  // namespace ttde
