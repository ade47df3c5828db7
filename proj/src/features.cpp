#include "ttde/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace ttde {

FeatureBatch::FeatureBatch(std::span<const BSplineBasis> bases,
                           const Samples& points)
    : n_(points.rows()), d_(static_cast<int>(bases.size())) {
  if (points.cols() != d_) {
    throw std::invalid_argument("FeatureBatch: sample dimension mismatch");
  }
  stride_ = 1;
  for (const auto& b : bases) {
    widths_.push_back(b.degree() + 1);
    stride_ = std::max(stride_, b.degree() + 1);
  }
  firsts_.assign(static_cast<std::size_t>(n_ * d_), -1);
  values_.assign(static_cast<std::size_t>(n_ * d_ * stride_), 0.0);
  inside_.assign(static_cast<std::size_t>(n_), 1);
  for (Index i = 0; i < n_; ++i) {
    for (int k = 0; k < d_; ++k) {
      const auto slot = static_cast<std::size_t>(i * d_ + k);
      std::span<double> out(values_.data() + slot * static_cast<std::size_t>(stride_),
                            static_cast<std::size_t>(stride_));
      const int first =
          bases[static_cast<std::size_t>(k)].eval_active(points(i, k), out);
      firsts_[slot] = first;
      if (first < 0) inside_[static_cast<std::size_t>(i)] = 0;
    }
  }
}

Matrix weighted_slice_sum(const TTCore& core, int first, const double* values,
                          int width) {
  Matrix m = Matrix::Zero(core.left_rank(), core.right_rank());
  for (int t = 0; t < width; ++t) m += values[t] * core.slice(first + t);
  return m;
}

namespace {

// env (length core.left_rank) <- env * sum_t v_t G[:, first+t, :]
void advance_left(const TTCore& core, int first, const double* v, int width,
                  const double* env, double* next) {
  const Index rl = core.left_rank();
  const Index m = core.mode_size();
  const Index rr = core.right_rank();
  const double* data = core.data().data();
  std::fill(next, next + rr, 0.0);
  for (Index a = 0; a < rl; ++a) {
    for (int t = 0; t < width; ++t) {
      const double e = env[a] * v[t];
      if (e == 0.0) continue;
      const double* row = data + (a * m + first + t) * rr;
      for (Index b = 0; b < rr; ++b) next[b] += e * row[b];
    }
  }
}

}  // namespace

Vector contract_features(const TTTensor& t, const FeatureBatch& f) {
  if (t.dims() != f.dims()) {
    throw std::invalid_argument("contract_features: dimension mismatch");
  }
  const Index r = t.max_rank();
  std::vector<double> env(static_cast<std::size_t>(r));
  std::vector<double> next(static_cast<std::size_t>(r));
  Vector out(f.size());
  for (Index i = 0; i < f.size(); ++i) {
    if (!f.inside(i)) {
      out[i] = 0.0;
      continue;
    }
    env[0] = 1.0;
    for (int k = 0; k < t.dims(); ++k) {
      advance_left(t.core(k), f.first(i, k), f.values(i, k), f.width(k),
                   env.data(), next.data());
      std::swap(env, next);
    }
    out[i] = env[0];
  }
  return out;
}

void left_feature_environments(const TTTensor& t, const FeatureBatch& f,
                               Index i, std::vector<Vector>& out) {
  const int d = t.dims();
  out.resize(static_cast<std::size_t>(d));
  out[0] = Vector::Ones(1);
  for (int k = 0; k + 1 < d; ++k) {
    const TTCore& c = t.core(k);
    Vector next(c.right_rank());
    advance_left(c, f.first(i, k), f.values(i, k), f.width(k),
                 out[static_cast<std::size_t>(k)].data(), next.data());
    out[static_cast<std::size_t>(k + 1)] = std::move(next);
  }
}

void right_feature_environments(const TTTensor& t, const FeatureBatch& f,
                                Index i, std::vector<Vector>& out) {
  const int d = t.dims();
  out.resize(static_cast<std::size_t>(d));
  out[static_cast<std::size_t>(d - 1)] = Vector::Ones(1);
  for (int k = d - 1; k > 0; --k) {
    const TTCore& c = t.core(k);
    const Vector& env = out[static_cast<std::size_t>(k)];
    Vector next = Vector::Zero(c.left_rank());
    const int first = f.first(i, k);
    const double* v = f.values(i, k);
    for (int s = 0; s < f.width(k); ++s) {
      if (v[s] != 0.0) next.noalias() += v[s] * (c.slice(first + s) * env);
    }
    out[static_cast<std::size_t>(k - 1)] = std::move(next);
  }
}

}  // namespace ttde
