#include "ttde/init.hpp"

#include "ttde/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttde {

namespace {

Vector solve_gram(const Matrix& gram, const Vector& rhs, bool* ridged) {
  Eigen::LDLT<Matrix> ldlt(gram);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            ldlt.vectorD().minCoeff() > 1e-14 * ldlt.vectorD().maxCoeff();
  if (ok) {
    Vector x = ldlt.solve(rhs);
    if (x.allFinite()) {
      if (ridged) *ridged = false;
      return x;
    }
  }
  if (ridged) *ridged = true;
  const double scale = gram.diagonal().mean();
  Matrix reg = gram;
  reg.diagonal().array() += 1e-10 * std::max(scale, 1e-300);
  return reg.ldlt().solve(rhs);
}

Vector column(const Samples& s, Index k) { return s.col(k); }

}  // namespace

Vector fit_1d_l2(const BSplineBasis& basis, std::span<const double> values,
                 bool* ridged) {
  if (values.empty()) throw std::invalid_argument("fit_1d_l2: no data");
  Vector mean = Vector::Zero(basis.size());
  double buf[32];
  for (double x : values) {
    const int first = basis.eval_active(x, std::span<double>(buf, 32));
    if (first < 0) continue;
    for (int t = 0; t <= basis.degree(); ++t) mean[first + t] += buf[t];
  }
  mean /= static_cast<double>(values.size());
  return solve_gram(basis.gram(), mean, ridged);
}

TTTensor rank1_init(const Samples& samples, std::span<const BSplineBasis> bases,
                    InitReport* report) {
  if (samples.rows() == 0) throw std::invalid_argument("rank1_init: no data");
  if (static_cast<std::size_t>(samples.cols()) != bases.size()) {
    throw std::invalid_argument("rank1_init: dimension mismatch");
  }
  std::vector<Vector> factors;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    const Vector col = column(samples, static_cast<Index>(k));
    bool ridged = false;
    factors.push_back(fit_1d_l2(
        bases[k], std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
        &ridged));
    if (ridged && report) report->ridged_dims.push_back(static_cast<int>(k));
  }
  return rank1_from_vectors(factors);
}

TTTensor rank1_init_squared(const Samples& samples,
                            std::span<const BSplineBasis> bases,
                            InitReport* report) {
  if (samples.rows() == 0) throw std::invalid_argument("rank1_init: no data");
  if (static_cast<std::size_t>(samples.cols()) != bases.size()) {
    throw std::invalid_argument("rank1_init: dimension mismatch");
  }
  // Eight Gauss points per knot interval for the non-polynomial sqrt.
  std::vector<double> nodes;
  std::vector<double> weights;
  gauss_legendre(8, nodes, weights);
  std::vector<Vector> factors;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    const BSplineBasis& basis = bases[k];
    const Vector col = column(samples, static_cast<Index>(k));
    bool ridged = false;
    const Vector fit = fit_1d_l2(
        basis, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
        &ridged);
    Vector rhs = Vector::Zero(basis.size());
    double buf[32];
    const double half = 0.5 * basis.interval_width();
    for (int j = 0; j < basis.num_intervals(); ++j) {
      const double a = basis.interval_left(j);
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        // Nodes sit strictly inside the interval, so eval_active lands on j.
        const double x = a + half * (nodes[q] + 1.0);
        const int first = basis.eval_active(x, std::span<double>(buf, 32));
        double p = 0.0;
        for (int t = 0; t <= basis.degree(); ++t) p += fit[first + t] * buf[t];
        const double root = std::sqrt(std::max(p, 0.0));
        for (int t = 0; t <= basis.degree(); ++t) {
          rhs[first + t] += half * weights[q] * root * buf[t];
        }
      }
    }
    bool ridged2 = false;
    Vector alpha = solve_gram(basis.gram(), rhs, &ridged2);
    if ((ridged || ridged2) && report) report->ridged_dims.push_back(static_cast<int>(k));
    if (alpha.isZero(0.0)) alpha.setOnes();
    factors.push_back(std::move(alpha));
  }
  return rank1_from_vectors(factors);
}

TTTensor rank1_init(const Samples& samples, std::span<const BSplineBasis> bases,
                    Variant variant, InitReport* report) {
  return variant == Variant::Plain ? rank1_init(samples, bases, report)
                                   : rank1_init_squared(samples, bases, report);
}

TTTensor random_init(std::span<const Index> modes, Index rank,
                     std::uint64_t seed) {
  if (modes.empty() || rank < 1) {
    throw std::invalid_argument("random_init: need d >= 1 and rank >= 1");
  }
  std::vector<Index> internal(modes.size() - 1, rank);
  TTTensor t = TTTensor::zeros(modes, internal);
  Engine engine = make_engine(seed, 0x1A17);
  std::normal_distribution<double> normal;
  for (int k = 0; k < t.dims(); ++k) {
    TTCore& core = t.core(k);
    const double sigma =
        1.0 / std::sqrt(static_cast<double>(core.left_rank() * core.mode_size()));
    for (double& v : core.data()) v = sigma * normal(engine);
  }
  return t;
}

TTTensor random_init(int d, Index m, Index rank, std::uint64_t seed) {
  const std::vector<Index> modes(static_cast<std::size_t>(std::max(d, 0)), m);
  return random_init(modes, rank, seed);
}

TTTensor pad_rank(const TTTensor& t, Index rank, double noise,
                  std::uint64_t seed) {
  const int d = t.dims();
  const std::vector<Index> modes = t.mode_sizes();
  // Feasible ranks: bond k cannot exceed the product of modes on either side.
  std::vector<Index> internal;
  for (int k = 1; k < d; ++k) {
    double left = 1.0;
    double right = 1.0;
    for (int j = 0; j < k; ++j) left *= static_cast<double>(modes[static_cast<std::size_t>(j)]);
    for (int j = k; j < d; ++j) right *= static_cast<double>(modes[static_cast<std::size_t>(j)]);
    const double cap = std::min({left, right, static_cast<double>(rank)});
    internal.push_back(std::max(t.ranks()[static_cast<std::size_t>(k)],
                                static_cast<Index>(cap)));
  }
  TTTensor out = TTTensor::zeros(modes, internal);
  Engine engine = make_engine(seed, 0xBAD5);
  std::normal_distribution<double> normal;
  for (int k = 0; k < d; ++k) {
    const TTCore& src = t.core(k);
    TTCore& dst = out.core(k);
    double ms = 0.0;
    for (double v : src.data()) ms += v * v;
    ms /= static_cast<double>(src.size());
    const double sigma = noise * std::sqrt(ms);
    for (Index a = 0; a < dst.left_rank(); ++a) {
      for (Index i = 0; i < dst.mode_size(); ++i) {
        for (Index b = 0; b < dst.right_rank(); ++b) {
          const double base = (a < src.left_rank() && b < src.right_rank()) ? src(a, i, b) : 0.0;
          dst(a, i, b) = base + sigma * normal(engine);
        }
      }
    }
  }
  return out;
}

}  // namespace ttde
