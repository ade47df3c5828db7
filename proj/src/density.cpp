#include "ttde/density.hpp"

#include "ttde/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ttde {

std::string_view to_string(Variant v) {
  return v == Variant::Plain ? "plain" : "squared";
}

Variant parse_variant(std::string_view name) {
  if (name == "plain") return Variant::Plain;
  if (name == "squared") return Variant::Squared;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

std::vector<Matrix> gram_matrices(std::span<const BSplineBasis> bases) {
  std::vector<Matrix> out;
  out.reserve(bases.size());
  for (const auto& b : bases) out.push_back(b.gram());
  return out;
}

double squared_norm_integral(const TTTensor& alpha,
                             std::span<const Matrix> grams) {
  return inner_product(alpha, apply_gram_operator(alpha, grams));
}

namespace {

// E' = sum_{n,n'} M(n,n') G_n^T E G_n' for a symmetric banded M.
Matrix advance_banded(const Matrix& env, const TTCore& core, const Matrix& m,
                      int half_band) {
  const Index modes = core.mode_size();
  Matrix out = Matrix::Zero(core.right_rank(), core.right_rank());
  Matrix mixed(core.left_rank(), core.right_rank());
  for (Index n = 0; n < modes; ++n) {
    mixed.setZero();
    const Index lo = std::max<Index>(0, n - half_band);
    const Index hi = std::min<Index>(modes - 1, n + half_band);
    bool any = false;
    for (Index j = lo; j <= hi; ++j) {
      if (m(n, j) != 0.0) {
        mixed += m(n, j) * core.slice(j);
        any = true;
      }
    }
    if (any) out.noalias() += mixed.transpose() * (env * core.slice(n));
  }
  return out;
}

}  // namespace

DensityModel::DensityModel(TTTensor alpha, std::vector<BSplineBasis> bases,
                           Variant variant, double normalization)
    : alpha_(std::move(alpha)),
      bases_(std::move(bases)),
      variant_(variant),
      normalization_(normalization) {
  if (static_cast<int>(bases_.size()) != alpha_.dims()) {
    throw std::invalid_argument("DensityModel: one basis per dimension needed");
  }
  for (int k = 0; k < alpha_.dims(); ++k) {
    if (alpha_.mode_size(k) != bases_[static_cast<std::size_t>(k)].size()) {
      throw std::invalid_argument("DensityModel: mode size " +
                                  std::to_string(k) +
                                  " does not match basis size");
    }
  }
  if (!(normalization > 0.0) || !std::isfinite(normalization)) {
    throw std::invalid_argument("DensityModel: normalization must be positive");
  }
  grams_ = gram_matrices(bases_);
}

double DensityModel::raw(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dims()) {
    throw std::invalid_argument("DensityModel: point dimension mismatch");
  }
  double buf[32];
  RowVector env = RowVector::Ones(1);
  for (int k = 0; k < dims(); ++k) {
    const auto& basis = bases_[static_cast<std::size_t>(k)];
    const int first = basis.eval_active(x[static_cast<std::size_t>(k)],
                                        std::span<double>(buf, 32));
    if (first < 0) return 0.0;
    env = env * weighted_slice_sum(alpha_.core(k), first, buf,
                                   basis.degree() + 1);
  }
  return env(0);
}

double DensityModel::evaluate(std::span<const double> x) const {
  const double v = raw(x);
  return (variant_ == Variant::Plain ? v : v * v) / normalization_;
}

double DensityModel::evaluate_clamped(std::span<const double> x) const {
  return std::max(0.0, evaluate(x));
}

Vector DensityModel::evaluate_batch(const Samples& x) const {
  const FeatureBatch features(bases_, x);
  Vector v = contract_features(alpha_, features);
  if (variant_ == Variant::Squared) v = v.array().square();
  return v / normalization_;
}

double DensityModel::partition_function() const {
  if (variant_ == Variant::Plain) {
    std::vector<Vector> integrals;
    for (const auto& b : bases_) integrals.push_back(b.integrals());
    return contract_rank1(alpha_, integrals);
  }
  return squared_norm_integral(alpha_, grams_);
}

double DensityModel::plain_query(std::span<const DimQuery> dims) const {
  std::vector<Vector> vectors;
  vectors.reserve(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const auto& basis = bases_[k];
    switch (dims[k].kind) {
      case DimQuery::Kind::Point:
        vectors.push_back(basis.eval(dims[k].value));
        break;
      case DimQuery::Kind::Full:
        vectors.push_back(basis.integrals());
        break;
      case DimQuery::Kind::Below:
        vectors.push_back(basis.partial_integrals(dims[k].value));
        break;
    }
  }
  return contract_rank1(alpha_, vectors);
}

double DensityModel::squared_query(std::span<const DimQuery> dims) const {
  Matrix env = Matrix::Ones(1, 1);
  double buf[32];
  for (int k = 0; k < this->dims(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto& basis = bases_[uk];
    const TTCore& core = alpha_.core(k);
    switch (dims[uk].kind) {
      case DimQuery::Kind::Point: {
        const int first =
            basis.eval_active(dims[uk].value, std::span<double>(buf, 32));
        if (first < 0) return 0.0;
        const Matrix w =
            weighted_slice_sum(core, first, buf, basis.degree() + 1);
        env = w.transpose() * env * w;
        break;
      }
      case DimQuery::Kind::Full:
        env = advance_banded(env, core, grams_[uk], basis.degree());
        break;
      case DimQuery::Kind::Below:
        env = advance_banded(env, core, basis.partial_gram(dims[uk].value),
                             basis.degree());
        break;
    }
  }
  return env(0, 0);
}

double DensityModel::query(std::span<const DimQuery> dims) const {
  if (static_cast<int>(dims.size()) != this->dims()) {
    throw std::invalid_argument("DensityModel::query: dimension mismatch");
  }
  const double v =
      variant_ == Variant::Plain ? plain_query(dims) : squared_query(dims);
  return v / normalization_;
}

double DensityModel::marginal(std::span<const double> prefix) const {
  if (static_cast<int>(prefix.size()) > dims()) {
    throw std::invalid_argument("marginal: prefix longer than dimension");
  }
  std::vector<DimQuery> q(static_cast<std::size_t>(dims()), DimQuery::full());
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    q[k] = DimQuery::point(prefix[k]);
  }
  return query(q);
}

double DensityModel::cdf_slice(std::span<const double> prefix,
                               double upper) const {
  if (static_cast<int>(prefix.size()) >= dims()) {
    throw std::invalid_argument("cdf_slice: prefix must be shorter than d");
  }
  std::vector<DimQuery> q(static_cast<std::size_t>(dims()), DimQuery::full());
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    q[k] = DimQuery::point(prefix[k]);
  }
  q[prefix.size()] = DimQuery::below(upper);
  return query(q);
}

LogLikelihood DensityModel::log_likelihood(const Samples& x) const {
  if (x.rows() == 0) throw std::invalid_argument("log_likelihood: no data");
  const FeatureBatch features(bases_, x);
  const Vector v = contract_features(alpha_, features);
  LogLikelihood out;
  const double log_z = std::log(normalization_);
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double q = variant_ == Variant::Plain ? v[i] : v[i] * v[i];
    if (!(q > 0.0)) {
      ++out.nonpositive;
      continue;
    }
    sum += variant_ == Variant::Plain ? std::log(v[i]) - log_z
                                      : 2.0 * std::log(std::abs(v[i])) - log_z;
  }
  out.mean = out.nonpositive > 0 ? -std::numeric_limits<double>::infinity()
                                 : sum / static_cast<double>(v.size());
  return out;
}

DensityModel DensityModel::normalized() const {
  const double z = partition_function();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw NumericError("normalize: partition function is not positive (" +
                       std::to_string(z) + ")");
  }
  return DensityModel(alpha_, bases_, variant_, z);
}

DensityModel normalize(const DensityModel& model) { return model.normalized(); }

}  // namespace ttde
