#pragma once

#include "ttde/data.hpp"
#include "ttde/density.hpp"
#include "ttde/features.hpp"
#include "ttde/init.hpp"
#include "ttde/tt_tensor.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ttde {

/// Euclidean gradient of a loss of the form h(<alpha, D alpha>) +
/// sum_i g_i(<alpha, Phi(x_i)>), kept as
/// gram_weight * D alpha + sum_i point_weights[i] * Phi(x_i).
struct StructuredGradient {
  double gram_weight = 0.0;
  Vector point_weights;
};

/// <alpha, D alpha> - (2/b) sum_i <alpha, Phi(x_i)>.
double l2_loss(const TTTensor& alpha, std::span<const Matrix> grams,
               const FeatureBatch& batch);
/// Same, for a Plain model's coefficients (Z is ignored).
double l2_loss(const DensityModel& model, const Samples& batch);

/// 2 D alpha - (2/b) sum_i Phi(x_i).
StructuredGradient l2_gradient(const FeatureBatch& batch);

struct NllValue {
  double value = 0.0;
  /// Points with <alpha, Phi(x_i)> == 0, whose log was floored at -745.
  Index floored = 0;
};

/// -(1/b) sum_i log <alpha, Phi(x_i)>^2 + log <alpha, D alpha>.
NllValue nll_loss(const TTTensor& alpha, std::span<const Matrix> grams,
                  const FeatureBatch& batch);
NllValue nll_loss(const DensityModel& model, const Samples& batch);

/// (2/Z) D alpha - (2/b) sum_i Phi(x_i) / <alpha, Phi(x_i)>, floored points
/// contributing nothing.
StructuredGradient nll_gradient(const TTTensor& alpha,
                                std::span<const Matrix> grams,
                                const FeatureBatch& batch);

/// <grad, h>.
double directional_derivative(const TTTensor& alpha,
                              std::span<const Matrix> grams,
                              const FeatureBatch& batch,
                              const StructuredGradient& grad,
                              const TTTensor& h);

/// d loss / d G_k for every core, by the chain rule through the left and
/// right environments: gram_weight * L_k (D G_k) R_k plus the rank-1 point
/// terms w_i l_i (x) f(x_ik) (x) r_i.
std::vector<TTCore> core_gradients(const TTTensor& alpha,
                                   std::span<const Matrix> grams,
                                   const FeatureBatch& batch,
                                   const StructuredGradient& grad);

/// Element of the tangent space at X = U_1..U_{d-1} S_d:
/// T = sum_k U_{<k} delta_k V_{>k}, with U_k^T delta_k = 0 for k < d.
struct TangentVector {
  Orthogonalization frames;
  std::vector<TTCore> deltas;

  /// Embedded tensor, TT ranks at most twice those of X.
  TTTensor to_tt() const;
  /// X + scale * T, also at ranks at most twice those of X.
  TTTensor step(double scale) const;
  /// Squared Frobenius norm of the embedded tensor (the gauge makes the
  /// terms orthogonal).
  double squared_norm() const;
};

/// Orthogonal projection of an arbitrary TT tensor onto T_X M.
TangentVector project_to_tangent(const Orthogonalization& x, const TTTensor& g);

/// Orthogonal projection of a structured gradient taken at alpha == X.
TangentVector project_to_tangent(const Orthogonalization& x,
                                 const TTTensor& alpha,
                                 std::span<const Matrix> grams,
                                 const FeatureBatch& batch,
                                 const StructuredGradient& grad);

/// Exact minimizer of t -> l2_loss(alpha + t G); 0 when <G, D G> <= 1e-14.
double optimal_step(const TTTensor& alpha, std::span<const Matrix> grams,
                    const FeatureBatch& batch, const TTTensor& direction);

struct RiemannianStep {
  TTTensor next;
  double step = 0.0;
  double tangent_norm = 0.0;
};

/// Orthogonalize, project the L2 gradient, take the parabola step and round
/// back to `rank`. Returns alpha unchanged when the projected gradient or
/// its curvature vanishes.
RiemannianStep riemannian_step(const TTTensor& alpha,
                               std::span<const Matrix> grams,
                               const FeatureBatch& batch, Index rank);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

/// One Adam update of every core entry.
TTTensor adam_update(const TTTensor& x, const std::vector<TTCore>& grads,
                     double learning_rate, AdamState& state);

/// Gradient (L2 for Plain, NLL for Squared) followed by adam_update.
TTTensor core_adam_step(const TTTensor& x, std::span<const Matrix> grams,
                        const FeatureBatch& batch, Variant variant,
                        double learning_rate, AdamState& state);

enum class Optimizer { Riemannian, Adam };
enum class InitKind { Rank1, Random };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);
std::string_view to_string(InitKind k);
InitKind parse_init(std::string_view name);

struct TrainConfig {
  Variant variant = Variant::Plain;
  Index rank = 8;
  int basis_size = 32;
  int degree = 2;
  Index batch_size = 1024;
  int iterations = 1000;
  Optimizer optimizer = Optimizer::Riemannian;
  InitKind init = InitKind::Rank1;
  double learning_rate = 1e-2;
  /// Relative scale of the noise that lifts a rank-1 start to full rank for
  /// Adam.
  double init_noise = 1e-2;
  std::uint64_t seed = 0;
  /// Validation interval in iterations; 0 means once per epoch.
  int eval_every = 0;
  int checkpoint_every = 0;
  std::string checkpoint_path;

  void validate() const;
};

struct TrainLogEntry {
  int iteration = 0;
  /// Mean minibatch loss since the previous entry.
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  DensityModel model;
  std::vector<TrainLogEntry> log;
  int best_iteration = 0;
  double best_validation_loss = 0.0;
  InitReport init_report;
};

/// Trains on data.train(), selects the iterate with the lowest validation
/// loss and returns it normalized. Throws NumericError on a non-finite loss.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  const std::function<void(const TrainLogEntry&)>& on_log = {});

/// CSV with header iter,train_loss,val_loss,seconds.
void write_train_log(std::ostream& out, const std::vector<TrainLogEntry>& log);

}  // namespace ttde
