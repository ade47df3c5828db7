#include "ttde/metrics.hpp"

#include "ttde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ttde {

Matrix projection_directions(int d, int count, std::uint64_t seed) {
  if (d < 1 || count < 0) {
    throw std::invalid_argument("projection_directions: bad shape");
  }
  Matrix out(count, d);
  for (int j = 0; j < count; ++j) {
    Engine engine = make_engine(seed, static_cast<std::uint64_t>(j));
    std::normal_distribution<double> normal;
    double norm = 0.0;
    while (norm == 0.0) {
      for (int k = 0; k < d; ++k) out(j, k) = normal(engine);
      norm = out.row(j).norm();
    }
    out.row(j) /= norm;
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + frac * (s[i + 1] - s[i]);
}

// Linear binning of `values` onto the grid lo + i*dx, then convolution with
// a sampled Gaussian kernel normalized to unit discrete mass. Returns a
// density (divided by dx).
std::vector<double> binned_kde(std::span<const double> values, double h,
                               double lo, double dx, int grid) {
  std::vector<double> bins(static_cast<std::size_t>(grid), 0.0);
  const double wt = 1.0 / static_cast<double>(values.size());
  for (double v : values) {
    const double pos = (v - lo) / dx;
    auto i = static_cast<long>(std::floor(pos));
    i = std::clamp<long>(i, 0, grid - 2);
    const double frac = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    bins[static_cast<std::size_t>(i)] += wt * (1.0 - frac);
    bins[static_cast<std::size_t>(i) + 1] += wt * frac;
  }
  const long half = std::min<long>(grid - 1,
                                   static_cast<long>(std::ceil(5.0 * h / dx)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double ksum = 0.0;
  for (long t = -half; t <= half; ++t) {
    const double z = static_cast<double>(t) * dx / h;
    const double v = std::exp(-0.5 * z * z);
    kernel[static_cast<std::size_t>(t + half)] = v;
    ksum += v;
  }
  for (auto& v : kernel) v /= ksum * dx;
  std::vector<double> out(static_cast<std::size_t>(grid), 0.0);
  for (long i = 0; i < grid; ++i) {
    const double b = bins[static_cast<std::size_t>(i)];
    if (b == 0.0) continue;
    const long from = std::max<long>(0, i - half);
    const long to = std::min<long>(grid - 1, i + half);
    for (long j = from; j <= to; ++j) {
      out[static_cast<std::size_t>(j)] +=
          b * kernel[static_cast<std::size_t>(j - i + half)];
    }
  }
  return out;
}

}  // namespace

double silverman_bandwidth(std::span<const double> values) {
  const auto n = values.size();
  if (n == 0) throw std::invalid_argument("silverman_bandwidth: no values");
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) {
    const double range = sorted.back() - sorted.front();
    spread = range > 0.0 ? range : std::max(1e-3, 1e-3 * std::abs(mean));
  }
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double kde_l1_distance(std::span<const double> a, std::span<const double> b,
                       int grid) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("kde_l1_distance: empty sample");
  }
  if (grid < 2) throw std::invalid_argument("kde_l1_distance: grid < 2");
  const double ha = silverman_bandwidth(a);
  const double hb = silverman_bandwidth(b);
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double h = std::max(ha, hb);
  const double lo = std::min(*amin, *bmin) - 3.0 * h;
  const double hi = std::max(*amax, *bmax) + 3.0 * h;
  const double dx = (hi - lo) / (grid - 1);
  const auto pa = binned_kde(a, ha, lo, dx, grid);
  const auto pb = binned_kde(b, hb, lo, dx, grid);
  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double diff = std::abs(pa[static_cast<std::size_t>(i)] -
                                 pb[static_cast<std::size_t>(i)]);
    total += (i == 0 || i == grid - 1) ? 0.5 * diff : diff;
  }
  return std::clamp(total * dx, 0.0, 2.0);
}

double sliced_tv(const Samples& a, const Samples& b,
                 const SlicedTvOptions& options) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw std::invalid_argument("sliced_tv: empty sample set");
  }
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("sliced_tv: dimension mismatch");
  }
  if (options.projections < 1) {
    throw std::invalid_argument("sliced_tv: need at least one projection");
  }
  const int d = static_cast<int>(a.cols());
  const Matrix dirs = projection_directions(d, options.projections, options.seed);
  std::vector<double> values(static_cast<std::size_t>(options.projections));
  auto run = [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      const Vector dir = dirs.row(j).transpose();
      const Vector pa = a * dir;
      const Vector pb = b * dir;
      values[static_cast<std::size_t>(j)] = kde_l1_distance(
          std::span<const double>(pa.data(), static_cast<std::size_t>(pa.size())),
          std::span<const double>(pb.data(), static_cast<std::size_t>(pb.size())),
          options.grid);
    }
  };
  const int workers = std::clamp(options.threads, 1, options.projections);
  if (workers == 1) {
    run(0, options.projections);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back(run, options.projections * t / workers,
                        options.projections * (t + 1) / workers);
    }
    for (auto& th : pool) th.join();
  }
  // Fixed summation order regardless of worker count.
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / options.projections;
}

CrossEntropy cross_entropy(const DensityModel& model, const Samples& x) {
  if (x.cols() != model.dims()) {
    throw std::invalid_argument("cross_entropy: dimension mismatch");
  }
  CrossEntropy out;
  out.n = x.rows();
  if (x.rows() == 0) return out;
  const Vector q = model.evaluate_batch(x);
  double sum = 0.0;
  for (Index i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) {
      sum += std::max(std::log(q[i]), log_floor());
    } else {
      sum += log_floor();
      ++out.nonpositive;
    }
  }
  out.value = -sum / static_cast<double>(x.rows());
  return out;
}

double ks_statistic(std::span<const double> values,
                    const std::function<double(double)>& cdf) {
  if (values.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    stat = std::max({stat, static_cast<double>(i + 1) / n - f,
                     f - static_cast<double>(i) / n});
  }
  return stat;
}

double ks_pvalue(double statistic, Index n) {
  if (n <= 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace ttde
