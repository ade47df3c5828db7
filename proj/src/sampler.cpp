#include "ttde/sampler.hpp"

#include "ttde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace ttde {

SampleStats& SampleStats::operator+=(const SampleStats& o) {
  rows += o.rows;
  retried_rows += o.retried_rows;
  retries += o.retries;
  failed_rows += o.failed_rows;
  core_operations += o.core_operations;
  cdf_evaluations += o.cdf_evaluations;
  return *this;
}

namespace {

// Rows of the result are G[:, n, :]^T left, i.e. the core contracted with the
// left environment along its first axis.
void contract_left(const TTCore& core, const Vector& left, RowMatrix& out) {
  const Index m = core.mode_size();
  const Index r = core.right_rank();
  out.setZero(m, r);
  const double* g = core.data().data();
  for (Index a = 0; a < core.left_rank(); ++a) {
    const double w = left[a];
    if (w == 0.0) continue;
    out += w * Eigen::Map<const RowMatrix>(g + a * m * r, m, r);
  }
}

}  // namespace

void ConditionalCdf::build(const Sampler& sampler, int k, const Vector& left) {
  const DensityModel& model = sampler.model();
  const auto uk = static_cast<std::size_t>(k);
  const TTCore& core = model.alpha().core(k);
  basis_ = &model.bases()[uk];
  variant_ = model.variant();
  k_ = k;
  const int deg = basis_->degree();
  const int w = deg + 1;
  const Index m = core.mode_size();
  contract_left(core, left, contracted_);

  const int intervals = basis_->num_intervals();
  cumulative_.assign(static_cast<std::size_t>(intervals) + 1, 0.0);
  if (variant_ == Variant::Plain) {
    weights_.noalias() = contracted_ * sampler.right_vectors_[uk];
    for (int j = 0; j < intervals; ++j) {
      cumulative_[static_cast<std::size_t>(j) + 1] =
          cumulative_[static_cast<std::size_t>(j)] +
          weights_.segment(j, w).dot(basis_->interval_integrals(j));
    }
  } else {
    const RowMatrix mixed = contracted_ * sampler.right_matrices_[uk];
    band_.setZero(m, 2 * deg + 1);
    for (Index n = 0; n < m; ++n) {
      const Index lo = std::max<Index>(0, n - deg);
      const Index hi = std::min<Index>(m - 1, n + deg);
      for (Index j = lo; j <= hi; ++j) {
        band_(n, j - n + deg) = mixed.row(n).dot(contracted_.row(j));
      }
    }
    for (int j = 0; j < intervals; ++j) {
      const Matrix& g = basis_->interval_gram(j);
      double piece = 0.0;
      for (int s = 0; s < w; ++s) {
        for (int t = 0; t < w; ++t) piece += band_(j + s, t - s + deg) * g(s, t);
      }
      cumulative_[static_cast<std::size_t>(j) + 1] =
          cumulative_[static_cast<std::size_t>(j)] + piece;
    }
  }
  total_ = cumulative_.back();
}

double ConditionalCdf::unnormalized(double upper) const {
  if (upper <= basis_->lower()) return 0.0;
  if (upper >= basis_->upper()) return total_;
  const int j = basis_->interval_of(upper);
  const int deg = basis_->degree();
  const int w = deg + 1;
  double buf[32 * 32];
  double acc = cumulative_[static_cast<std::size_t>(j)];
  if (variant_ == Variant::Plain) {
    basis_->interval_partial_integrals(j, upper, std::span<double>(buf, 32));
    for (int t = 0; t < w; ++t) acc += weights_[j + t] * buf[t];
  } else {
    basis_->interval_partial_gram(j, upper, std::span<double>(buf, 32 * 32));
    for (int s = 0; s < w; ++s) {
      for (int t = 0; t < w; ++t) {
        acc += band_(j + s, t - s + deg) * buf[s * w + t];
      }
    }
  }
  return acc;
}

double ConditionalCdf::operator()(double upper) const {
  return std::clamp(unnormalized(upper) / total_, 0.0, 1.0);
}

void ConditionalCdf::advance(double x, Vector& out) const {
  double buf[32];
  const int first = basis_->eval_active(x, std::span<double>(buf, 32));
  out.setZero(contracted_.cols());
  if (first < 0) return;
  for (int t = 0; t <= basis_->degree(); ++t) {
    out += buf[t] * contracted_.row(first + t).transpose();
  }
}

Sampler::Sampler(DensityModel model, SamplerOptions options)
    : model_(std::move(model)), options_(options) {
  if (options_.bisection_iterations < 1 || options_.max_retries < 0) {
    throw std::invalid_argument("Sampler: invalid options");
  }
  const int d = model_.dims();
  const auto& alpha = model_.alpha();
  if (model_.variant() == Variant::Plain) {
    right_vectors_.resize(static_cast<std::size_t>(d));
    right_vectors_.back() = Vector::Ones(1);
    for (int k = d - 1; k > 0; --k) {
      const TTCore& core = alpha.core(k);
      const Vector& ints = model_.bases()[static_cast<std::size_t>(k)].integrals();
      Vector next = Vector::Zero(core.left_rank());
      const Vector& right = right_vectors_[static_cast<std::size_t>(k)];
      for (Index n = 0; n < core.mode_size(); ++n) {
        next.noalias() += ints[n] * (core.slice(n) * right);
      }
      right_vectors_[static_cast<std::size_t>(k) - 1] = std::move(next);
    }
  } else {
    right_matrices_.resize(static_cast<std::size_t>(d));
    right_matrices_.back() = Matrix::Ones(1, 1);
    for (int k = d - 1; k > 0; --k) {
      const TTCore& core = alpha.core(k);
      const Matrix& gram = model_.grams()[static_cast<std::size_t>(k)];
      const int deg = model_.bases()[static_cast<std::size_t>(k)].degree();
      const Matrix& right = right_matrices_[static_cast<std::size_t>(k)];
      const Index m = core.mode_size();
      Matrix next = Matrix::Zero(core.left_rank(), core.left_rank());
      Matrix mixed(core.left_rank(), core.right_rank());
      for (Index n = 0; n < m; ++n) {
        mixed.setZero();
        const Index lo = std::max<Index>(0, n - deg);
        const Index hi = std::min<Index>(m - 1, n + deg);
        for (Index j = lo; j <= hi; ++j) mixed += gram(n, j) * core.slice(j);
        next.noalias() += core.slice(n) * right * mixed.transpose();
      }
      right_matrices_[static_cast<std::size_t>(k) - 1] = std::move(next);
    }
  }
}

Vector Sampler::advance_left(int k, double x, const Vector& left) const {
  const TTCore& core = model_.alpha().core(k);
  if (left.size() != core.left_rank()) {
    throw std::invalid_argument("advance_left: environment size mismatch");
  }
  double buf[32];
  const auto& basis = model_.bases()[static_cast<std::size_t>(k)];
  const int first = basis.eval_active(x, std::span<double>(buf, 32));
  Vector out = Vector::Zero(core.right_rank());
  if (first < 0) return out;
  for (int t = 0; t <= basis.degree(); ++t) {
    out.noalias() += buf[t] * (core.slice(first + t).transpose() * left);
  }
  return out;
}

Vector Sampler::left_environment(std::span<const double> prefix) const {
  if (static_cast<int>(prefix.size()) >= dims()) {
    throw std::invalid_argument("left_environment: prefix too long");
  }
  Vector env = Vector::Ones(1);
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    env = advance_left(static_cast<int>(k), prefix[k], env);
  }
  return env;
}

double Sampler::conditional_cdf(std::span<const double> prefix,
                                double upper) const {
  ConditionalCdf cdf;
  cdf.build(*this, static_cast<int>(prefix.size()), left_environment(prefix));
  if (!(cdf.denominator() > 0.0)) {
    throw NumericError("conditional_cdf: normalizer is not positive");
  }
  return cdf(upper);
}

bool Sampler::transform(std::span<const double> u, std::span<double> x,
                        ConditionalCdf& scratch, SampleStats* stats) const {
  const int d = dims();
  if (static_cast<int>(u.size()) != d || static_cast<int>(x.size()) != d) {
    throw std::invalid_argument("transform: dimension mismatch");
  }
  Vector left = Vector::Ones(1);
  Vector next;
  std::uint64_t ops = 0;
  std::uint64_t evals = 0;
  bool ok = true;
  for (int k = 0; k < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const TTCore& core = model_.alpha().core(k);
    const auto& basis = model_.bases()[uk];
    scratch.build(*this, k, left);
    const auto l = static_cast<std::uint64_t>(core.left_rank());
    const auto m = static_cast<std::uint64_t>(core.mode_size());
    const auto r = static_cast<std::uint64_t>(core.right_rank());
    const auto w = static_cast<std::uint64_t>(basis.degree() + 1);
    ops += l * m * r;
    ops += model_.variant() == Variant::Plain ? m * r : m * r * r + m * (2 * w - 1) * r;
    const double den = scratch.denominator();
    if (!(den > 0.0) || !std::isfinite(den)) {
      ok = false;
      break;
    }
    auto counted = [&](double a) {
      ++evals;
      return scratch(a);
    };
    x[uk] = invert_cdf(counted, u[uk], basis.lower(), basis.upper(),
                       options_.bisection_iterations);
    if (k + 1 < d) {
      scratch.advance(x[uk], next);
      ops += w * r;
      // The conditional is invariant to the scale of the prefix environment;
      // renormalizing keeps long chains away from overflow and underflow.
      const double s = next.cwiseAbs().maxCoeff();
      if (s > 0.0 && std::isfinite(s)) next /= s;
      std::swap(left, next);
    }
  }
  if (stats) {
    stats->core_operations += ops;
    stats->cdf_evaluations += evals;
  }
  return ok;
}

void Sampler::sample_rows(Index begin, Index end, std::uint64_t seed,
                          Samples& out, SampleStats& stats) const {
  const int d = dims();
  ConditionalCdf scratch;
  std::vector<double> u(static_cast<std::size_t>(d));
  std::vector<double> x(static_cast<std::size_t>(d));
  for (Index i = begin; i < end; ++i) {
    Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      for (auto& v : u) v = uniform01(engine);
      if (transform(u, x, scratch, &stats)) {
        done = true;
        break;
      }
      if (attempt == 0) ++stats.retried_rows;
      if (attempt < options_.max_retries) ++stats.retries;
    }
    ++stats.rows;
    if (done) {
      for (int k = 0; k < d; ++k) out(i, k) = x[static_cast<std::size_t>(k)];
    } else {
      ++stats.failed_rows;
      out.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
}

SampleResult Sampler::sample(Index n, std::uint64_t seed) const {
  if (n < 0) throw std::invalid_argument("sample: negative count");
  SampleResult result;
  result.samples.resize(n, dims());
  const int workers = static_cast<int>(
      std::clamp<Index>(options_.threads, 1, std::max<Index>(1, n / 64)));
  if (workers == 1) {
    sample_rows(0, n, seed, result.samples, result.stats);
    return result;
  }
  std::vector<SampleStats> partial(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) {
    const Index begin = n * t / workers;
    const Index end = n * (t + 1) / workers;
    pool.emplace_back([this, begin, end, seed, &result, &partial, t] {
      sample_rows(begin, end, seed, result.samples,
                  partial[static_cast<std::size_t>(t)]);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& s : partial) result.stats += s;
  return result;
}

SampleResult sample(const DensityModel& model, Index n, std::uint64_t seed,
                    SamplerOptions options) {
  return Sampler(model, options).sample(n, seed);
}

}  // namespace ttde
