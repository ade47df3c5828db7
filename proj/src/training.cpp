#include "ttde/training.hpp"

#include "ttde/model_io.hpp"
#include "ttde/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace ttde {

namespace {

// env[k] contracts cores 0..k-1 of a and b: env[k+1] = sum_n A_n^T env[k] B_n.
std::vector<Matrix> left_pair_environments(std::span<const TTCore> a,
                                           std::span<const TTCore> b) {
  const std::size_t d = a.size();
  std::vector<Matrix> env(d);
  env[0] = Matrix::Ones(1, 1);
  for (std::size_t k = 0; k + 1 < d; ++k) {
    Matrix next = Matrix::Zero(a[k].right_rank(), b[k].right_rank());
    for (Index n = 0; n < a[k].mode_size(); ++n) {
      next.noalias() += a[k].slice(n).transpose() * (env[k] * b[k].slice(n));
    }
    env[k + 1] = std::move(next);
  }
  return env;
}

// env[k] contracts cores k+1..d-1: env[k-1] = sum_n A_n env[k] B_n^T.
std::vector<Matrix> right_pair_environments(std::span<const TTCore> a,
                                            std::span<const TTCore> b) {
  const std::size_t d = a.size();
  std::vector<Matrix> env(d);
  env[d - 1] = Matrix::Ones(1, 1);
  for (std::size_t k = d - 1; k > 0; --k) {
    Matrix next = Matrix::Zero(a[k].left_rank(), b[k].left_rank());
    for (Index n = 0; n < a[k].mode_size(); ++n) {
      next.noalias() += a[k].slice(n) * (env[k] * b[k].slice(n).transpose());
    }
    env[k - 1] = std::move(next);
  }
  return env;
}

// out[:, n, :] += scale * left * core[:, n, :] * right^T
void add_sandwich(const Matrix& left, const TTCore& core, const Matrix& right,
                  double scale, TTCore& out) {
  for (Index n = 0; n < core.mode_size(); ++n) {
    out.slice(n).noalias() += scale * (left * core.slice(n) * right.transpose());
  }
}

// Adds sum_i w_i l_i (x) f(x_ik) (x) r_i to every core, with the
// environments l_i, r_i taken from `lt` (cores 0..k-1) and `rt`
// (cores k+1..d-1).
void add_point_terms(const TTTensor& lt, const TTTensor& rt,
                     const FeatureBatch& batch, const Vector& weights,
                     std::vector<TTCore>& out) {
  const int d = lt.dims();
  std::vector<Vector> lefts;
  std::vector<Vector> rights;
  for (Index i = 0; i < batch.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0 || !batch.inside(i)) continue;
    left_feature_environments(lt, batch, i, lefts);
    right_feature_environments(rt, batch, i, rights);
    for (int k = 0; k < d; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const Vector wl = w * lefts[uk];
      const Vector& r = rights[uk];
      const int first = batch.first(i, k);
      const double* v = batch.values(i, k);
      for (int s = 0; s < batch.width(k); ++s) {
        if (v[s] != 0.0) out[uk].slice(first + s).noalias() += (v[s] * wl) * r.transpose();
      }
    }
  }
}

std::vector<TTCore> zero_like(std::span<const TTCore> cores) {
  std::vector<TTCore> out;
  out.reserve(cores.size());
  for (const auto& c : cores) out.emplace_back(c.left_rank(), c.mode_size(), c.right_rank());
  return out;
}

void check_batch(const TTTensor& alpha, std::span<const Matrix> grams,
                 const FeatureBatch& batch) {
  if (alpha.dims() != batch.dims() ||
      static_cast<int>(grams.size()) != alpha.dims()) {
    throw std::invalid_argument("training: dimension mismatch");
  }
  if (batch.size() == 0) throw std::invalid_argument("training: empty batch");
}

}  // namespace

double l2_loss(const TTTensor& alpha, std::span<const Matrix> grams,
               const FeatureBatch& batch) {
  check_batch(alpha, grams, batch);
  const double quad = squared_norm_integral(alpha, grams);
  const Vector v = contract_features(alpha, batch);
  return quad - 2.0 * v.sum() / static_cast<double>(batch.size());
}

double l2_loss(const DensityModel& model, const Samples& batch) {
  const FeatureBatch f(model.bases(), batch);
  return l2_loss(model.alpha(), model.grams(), f);
}

StructuredGradient l2_gradient(const FeatureBatch& batch) {
  StructuredGradient g;
  g.gram_weight = 2.0;
  g.point_weights =
      Vector::Constant(batch.size(), -2.0 / static_cast<double>(batch.size()));
  return g;
}

NllValue nll_loss(const TTTensor& alpha, std::span<const Matrix> grams,
                  const FeatureBatch& batch) {
  check_batch(alpha, grams, batch);
  const double z = squared_norm_integral(alpha, grams);
  if (!(z > 0.0)) throw NumericError("nll_loss: <alpha, D alpha> is not positive");
  const Vector v = contract_features(alpha, batch);
  NllValue out;
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > 0.0) {
      sum += std::max(2.0 * std::log(a), -745.0);
    } else {
      sum += -745.0;
      ++out.floored;
    }
  }
  out.value = -sum / static_cast<double>(batch.size()) + std::log(z);
  return out;
}

NllValue nll_loss(const DensityModel& model, const Samples& batch) {
  const FeatureBatch f(model.bases(), batch);
  return nll_loss(model.alpha(), model.grams(), f);
}

StructuredGradient nll_gradient(const TTTensor& alpha,
                                std::span<const Matrix> grams,
                                const FeatureBatch& batch) {
  check_batch(alpha, grams, batch);
  const double z = squared_norm_integral(alpha, grams);
  if (!(z > 0.0)) throw NumericError("nll_gradient: <alpha, D alpha> is not positive");
  const Vector v = contract_features(alpha, batch);
  StructuredGradient g;
  g.gram_weight = 2.0 / z;
  g.point_weights.resize(batch.size());
  const double scale = -2.0 / static_cast<double>(batch.size());
  for (Index i = 0; i < v.size(); ++i) {
    g.point_weights[i] = v[i] != 0.0 ? scale / v[i] : 0.0;
  }
  return g;
}

double directional_derivative(const TTTensor& alpha,
                              std::span<const Matrix> grams,
                              const FeatureBatch& batch,
                              const StructuredGradient& grad,
                              const TTTensor& h) {
  check_batch(alpha, grams, batch);
  double out = 0.0;
  if (grad.gram_weight != 0.0) {
    out += grad.gram_weight * inner_product(h, apply_gram_operator(alpha, grams));
  }
  out += grad.point_weights.dot(contract_features(h, batch));
  return out;
}

std::vector<TTCore> core_gradients(const TTTensor& alpha,
                                   std::span<const Matrix> grams,
                                   const FeatureBatch& batch,
                                   const StructuredGradient& grad) {
  check_batch(alpha, grams, batch);
  std::vector<TTCore> out = zero_like(alpha.cores());
  if (grad.gram_weight != 0.0) {
    const TTTensor mixed = apply_gram_operator(alpha, grams);
    const auto left = left_pair_environments(alpha.cores(), mixed.cores());
    const auto right = right_pair_environments(alpha.cores(), mixed.cores());
    for (int k = 0; k < alpha.dims(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      add_sandwich(left[uk], mixed.core(k), right[uk], grad.gram_weight, out[uk]);
    }
  }
  add_point_terms(alpha, alpha, batch, grad.point_weights, out);
  return out;
}

TTTensor TangentVector::to_tt() const {
  const int d = frames.dims();
  if (d == 1) return TTTensor({deltas[0]});
  std::vector<TTCore> cores;
  for (int k = 0; k < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const TTCore& delta = deltas[uk];
    const Index m = delta.mode_size();
    const Index l = delta.left_rank();
    const Index r = delta.right_rank();
    if (k == 0) {
      const TTCore& u = frames.left[uk];
      TTCore c(1, m, 2 * r);
      for (Index n = 0; n < m; ++n) {
        for (Index b = 0; b < r; ++b) {
          c(0, n, b) = delta(0, n, b);
          c(0, n, r + b) = u(0, n, b);
        }
      }
      cores.push_back(std::move(c));
    } else if (k == d - 1) {
      const TTCore& v = frames.right[uk];
      TTCore c(2 * l, m, 1);
      for (Index a = 0; a < l; ++a) {
        for (Index n = 0; n < m; ++n) {
          c(a, n, 0) = v(a, n, 0);
          c(l + a, n, 0) = delta(a, n, 0);
        }
      }
      cores.push_back(std::move(c));
    } else {
      const TTCore& u = frames.left[uk];
      const TTCore& v = frames.right[uk];
      TTCore c(2 * l, m, 2 * r);
      for (Index a = 0; a < l; ++a) {
        for (Index n = 0; n < m; ++n) {
          for (Index b = 0; b < r; ++b) {
            c(a, n, b) = v(a, n, b);
            c(l + a, n, b) = delta(a, n, b);
            c(l + a, n, r + b) = u(a, n, b);
          }
        }
      }
      cores.push_back(std::move(c));
    }
  }
  return TTTensor(std::move(cores));
}

TTTensor TangentVector::step(double scale) const {
  TangentVector moved{frames, deltas};
  const int d = frames.dims();
  for (int k = 0; k < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    for (double& v : moved.deltas[uk].data()) v *= scale;
  }
  // X = U_1..U_{d-1} S_d, so X + sT only changes the last block.
  TTCore& last = moved.deltas.back();
  const auto center = frames.center.back().data();
  auto dst = last.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += center[i];
  return moved.to_tt();
}

double TangentVector::squared_norm() const {
  double s = 0.0;
  for (const auto& c : deltas) {
    for (double v : c.data()) s += v * v;
  }
  return s;
}

namespace {

void apply_gauge(const Orthogonalization& x, std::vector<TTCore>& deltas) {
  const int d = x.dims();
  for (int k = 0; k + 1 < d; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const auto u = x.left[uk].left_unfolding();
    auto s = deltas[uk].left_unfolding();
    const Matrix coeff = u.transpose() * s;
    s.noalias() -= u * coeff;
  }
}

TTTensor left_frame_tensor(const Orthogonalization& x) {
  return x.with_center(x.dims() - 1);
}

TTTensor right_frame_tensor(const Orthogonalization& x) { return x.with_center(0); }

}  // namespace

TangentVector project_to_tangent(const Orthogonalization& x, const TTTensor& g) {
  if (g.dims() != x.dims()) {
    throw std::invalid_argument("project_to_tangent: dimension mismatch");
  }
  const auto left = left_pair_environments(x.left, g.cores());
  const auto right = right_pair_environments(x.right, g.cores());
  TangentVector t{x, zero_like(x.center)};
  for (int k = 0; k < x.dims(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    add_sandwich(left[uk], g.core(k), right[uk], 1.0, t.deltas[uk]);
  }
  apply_gauge(x, t.deltas);
  return t;
}

TangentVector project_to_tangent(const Orthogonalization& x,
                                 const TTTensor& alpha,
                                 std::span<const Matrix> grams,
                                 const FeatureBatch& batch,
                                 const StructuredGradient& grad) {
  check_batch(alpha, grams, batch);
  TangentVector t{x, zero_like(x.center)};
  if (grad.gram_weight != 0.0) {
    const TTTensor mixed = apply_gram_operator(alpha, grams);
    const auto left = left_pair_environments(x.left, mixed.cores());
    const auto right = right_pair_environments(x.right, mixed.cores());
    for (int k = 0; k < x.dims(); ++k) {
      const auto uk = static_cast<std::size_t>(k);
      add_sandwich(left[uk], mixed.core(k), right[uk], grad.gram_weight, t.deltas[uk]);
    }
  }
  add_point_terms(left_frame_tensor(x), right_frame_tensor(x), batch,
                  grad.point_weights, t.deltas);
  apply_gauge(x, t.deltas);
  return t;
}

double optimal_step(const TTTensor& alpha, std::span<const Matrix> grams,
                    const FeatureBatch& batch, const TTTensor& direction) {
  check_batch(alpha, grams, batch);
  const double curvature = squared_norm_integral(direction, grams);
  if (!(curvature > 1e-14)) return 0.0;
  const double linear =
      inner_product(direction, apply_gram_operator(alpha, grams)) -
      contract_features(direction, batch).sum() / static_cast<double>(batch.size());
  return -linear / curvature;
}

RiemannianStep riemannian_step(const TTTensor& alpha,
                               std::span<const Matrix> grams,
                               const FeatureBatch& batch, Index rank) {
  if (rank < 1) throw std::invalid_argument("riemannian_step: rank < 1");
  RiemannianStep out{alpha, 0.0, 0.0};
  const Orthogonalization x = left_right_orthogonalize(alpha);
  const TangentVector t =
      project_to_tangent(x, alpha, grams, batch, l2_gradient(batch));
  out.tangent_norm = std::sqrt(t.squared_norm());
  if (out.tangent_norm == 0.0) return out;
  const double step = optimal_step(alpha, grams, batch, t.to_tt());
  if (step == 0.0 || !std::isfinite(step)) return out;
  out.step = step;
  out.next = tt_round(t.step(step), rank);
  return out;
}

TTTensor adam_update(const TTTensor& x, const std::vector<TTCore>& grads,
                     double learning_rate, AdamState& state) {
  if (static_cast<int>(grads.size()) != x.dims()) {
    throw std::invalid_argument("adam_update: gradient count mismatch");
  }
  const auto d = static_cast<std::size_t>(x.dims());
  if (state.first.size() != d) {
    state.first.assign(d, {});
    state.second.assign(d, {});
    for (std::size_t k = 0; k < d; ++k) {
      state.first[k].assign(x.cores()[k].data().size(), 0.0);
      state.second[k].assign(x.cores()[k].data().size(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  TTTensor out = x;
  for (std::size_t k = 0; k < d; ++k) {
    auto p = out.core(static_cast<int>(k)).data();
    const auto g = grads[k].data();
    if (g.size() != p.size() || state.first[k].size() != p.size()) {
      throw std::invalid_argument("adam_update: shape changed");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double& m = state.first[k][i];
      double& v = state.second[k][i];
      m = state.beta1 * m + (1.0 - state.beta1) * g[i];
      v = state.beta2 * v + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
    }
  }
  return out;
}

TTTensor core_adam_step(const TTTensor& x, std::span<const Matrix> grams,
                        const FeatureBatch& batch, Variant variant,
                        double learning_rate, AdamState& state) {
  const StructuredGradient g = variant == Variant::Plain
                                   ? l2_gradient(batch)
                                   : nll_gradient(x, grams, batch);
  return adam_update(x, core_gradients(x, grams, batch, g), learning_rate, state);
}

std::string_view to_string(Optimizer o) {
  return o == Optimizer::Riemannian ? "riemannian" : "adam";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "riemannian") return Optimizer::Riemannian;
  if (name == "adam") return Optimizer::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(InitKind k) {
  return k == InitKind::Rank1 ? "rank1" : "random";
}

InitKind parse_init(std::string_view name) {
  if (name == "rank1") return InitKind::Rank1;
  if (name == "random") return InitKind::Random;
  throw std::invalid_argument("unknown init '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("rank must be >= 1");
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  if (basis_size < degree + 1) {
    throw std::invalid_argument("basis size must be >= degree + 1");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (eval_every < 0 || checkpoint_every < 0) {
    throw std::invalid_argument("intervals must be >= 0");
  }
  if (variant == Variant::Squared && optimizer == Optimizer::Riemannian) {
    throw std::invalid_argument(
        "the squared variant trains with adam; the parabola step needs the L2 loss");
  }
  if (checkpoint_every > 0 && checkpoint_path.empty()) {
    throw std::invalid_argument("checkpoint interval set without a path");
  }
}

namespace {

double batch_loss(Variant variant, const TTTensor& alpha,
                  std::span<const Matrix> grams, const FeatureBatch& f) {
  return variant == Variant::Plain ? l2_loss(alpha, grams, f)
                                   : nll_loss(alpha, grams, f).value;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data,
                  const std::function<void(const TrainLogEntry&)>& on_log) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  const auto clock_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start)
        .count();
  };

  const std::vector<BSplineBasis> bases = make_bases(
      data.bounds().lower, data.bounds().upper, config.basis_size, config.degree);
  const std::vector<Matrix> grams = gram_matrices(bases);
  const Samples train_rows = data.train();
  if (train_rows.rows() == 0) throw std::invalid_argument("train: no training rows");
  const Samples val_rows =
      data.validation_indices().empty() ? train_rows : data.validation();
  const FeatureBatch val_features(bases, val_rows);

  TrainResult result{DensityModel(TTTensor({TTCore(1, 1, 1)}),
                                  {BSplineBasis(0.0, 1.0, 1, 0)}, config.variant),
                     {}, 0, 0.0, {}};

  TTTensor alpha;
  if (config.init == InitKind::Rank1) {
    alpha = rank1_init(train_rows, bases, config.variant, &result.init_report);
    if (config.optimizer == Optimizer::Adam && config.rank > 1) {
      alpha = pad_rank(alpha, config.rank, config.init_noise, config.seed);
    }
  } else {
    const std::vector<Index> modes(bases.size(), config.basis_size);
    alpha = random_init(modes, config.rank, config.seed);
  }

  const Index n_train = train_rows.rows();
  const Index b = std::min(config.batch_size, n_train);
  const bool full_batch = b == n_train;
  const int eval_every = config.eval_every > 0
                             ? config.eval_every
                             : static_cast<int>((n_train + b - 1) / b);

  std::optional<FeatureBatch> full;
  if (full_batch) full.emplace(bases, train_rows);
  std::vector<Index> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), Index{0});
  Index cursor = n_train;
  std::uint64_t epoch = 0;
  auto next_batch = [&]() -> FeatureBatch {
    std::vector<Index> rows;
    rows.reserve(static_cast<std::size_t>(b));
    while (static_cast<Index>(rows.size()) < b) {
      if (cursor == n_train) {
        Engine engine = make_engine(config.seed, 0xE90C00 + epoch++);
        for (Index i = n_train - 1; i > 0; --i) {
          const auto j = static_cast<Index>(uniform01(engine) * static_cast<double>(i + 1));
          std::swap(order[static_cast<std::size_t>(i)],
                    order[static_cast<std::size_t>(std::min(j, i))]);
        }
        cursor = 0;
      }
      rows.push_back(order[static_cast<std::size_t>(cursor++)]);
    }
    return FeatureBatch(bases, select_rows(train_rows, rows));
  };

  auto validation_loss = [&](const TTTensor& a) {
    const double v = batch_loss(config.variant, a, grams, val_features);
    if (!std::isfinite(v)) throw NumericError("train: validation loss is not finite");
    return v;
  };

  TTTensor best = alpha;
  result.best_validation_loss = validation_loss(alpha);
  result.best_iteration = 0;
  {
    TrainLogEntry e{0, std::numeric_limits<double>::quiet_NaN(),
                    result.best_validation_loss, elapsed()};
    result.log.push_back(e);
    if (on_log) on_log(e);
  }

  AdamState adam;
  double loss_sum = 0.0;
  int loss_count = 0;
  for (int it = 1; it <= config.iterations; ++it) {
    std::optional<FeatureBatch> mini;
    if (!full_batch) mini.emplace(next_batch());
    const FeatureBatch& batch = full_batch ? *full : *mini;
    const double loss = batch_loss(config.variant, alpha, grams, batch);
    if (!std::isfinite(loss)) {
      throw NumericError("train: loss is not finite at iteration " + std::to_string(it));
    }
    loss_sum += loss;
    ++loss_count;

    if (config.optimizer == Optimizer::Riemannian) {
      alpha = riemannian_step(alpha, grams, batch, config.rank).next;
    } else {
      alpha = core_adam_step(alpha, grams, batch, config.variant,
                             config.learning_rate, adam);
    }

    if (it % eval_every == 0 || it == config.iterations) {
      const double v = validation_loss(alpha);
      TrainLogEntry e{it, loss_sum / loss_count, v, elapsed()};
      loss_sum = 0.0;
      loss_count = 0;
      result.log.push_back(e);
      if (on_log) on_log(e);
      if (v < result.best_validation_loss) {
        result.best_validation_loss = v;
        result.best_iteration = it;
        best = alpha;
      }
    }
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
      save_model(config.checkpoint_path, DensityModel(alpha, bases, config.variant).normalized());
    }
  }

  result.model = DensityModel(std::move(best), bases, config.variant).normalized();
  return result;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogEntry>& log) {
  out << "iter,train_loss,val_loss,seconds\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.6f\n", e.iteration,
                  e.train_loss, e.validation_loss, e.seconds);
    out << buf;
  }
}

}  // namespace ttde
