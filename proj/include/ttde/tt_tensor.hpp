#pragma once

#include "ttde/types.hpp"

#include <span>
#include <vector>

namespace ttde {

/// Order-3 tensor-train core of shape [left_rank x mode_size x right_rank],
/// stored row-major (the right rank index varies fastest).
class TTCore {
 public:
  using SliceMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
  using ConstSliceMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
  using UnfoldingMap = Eigen::Map<RowMatrix>;
  using ConstUnfoldingMap = Eigen::Map<const RowMatrix>;

  TTCore() = default;
  TTCore(Index left_rank, Index mode_size, Index right_rank);

  Index left_rank() const { return left_; }
  Index mode_size() const { return mode_; }
  Index right_rank() const { return right_; }
  Index size() const { return left_ * mode_ * right_; }

  double& operator()(Index a, Index i, Index b) {
    return data_[static_cast<std::size_t>((a * mode_ + i) * right_ + b)];
  }
  double operator()(Index a, Index i, Index b) const {
    return data_[static_cast<std::size_t>((a * mode_ + i) * right_ + b)];
  }

  /// Matrix G[:, i, :] of shape left_rank x right_rank.
  SliceMap slice(Index i);
  ConstSliceMap slice(Index i) const;

  /// (left_rank * mode_size) x right_rank view.
  UnfoldingMap left_unfolding();
  ConstUnfoldingMap left_unfolding() const;

  /// left_rank x (mode_size * right_rank) view.
  UnfoldingMap right_unfolding();
  ConstUnfoldingMap right_unfolding() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  static TTCore from_left_unfolding(const Eigen::Ref<const Matrix>& m,
                                    Index mode_size);
  static TTCore from_right_unfolding(const Eigen::Ref<const Matrix>& m,
                                     Index mode_size);

 private:
  Index left_ = 0;
  Index mode_ = 0;
  Index right_ = 0;
  std::vector<double> data_;
};

/// Contracts `left` (p x r_left) into the left rank index of `core`.
TTCore multiply_left(const Eigen::Ref<const Matrix>& left, const TTCore& core);
/// Contracts `right` (r_right x q) into the right rank index of `core`.
TTCore multiply_right(const TTCore& core, const Eigen::Ref<const Matrix>& right);

/// d-dimensional tensor in tensor-train format.
///
/// Entry (i_1, ..., i_d) equals G_1[:, i_1, :] * ... * G_d[:, i_d, :], with
/// boundary ranks r_0 = r_d = 1.
class TTTensor {
 public:
  TTTensor() = default;
  explicit TTTensor(std::vector<TTCore> cores);

  /// All-zero tensor with the given mode sizes and internal ranks
  /// (ranks.size() == mode_sizes.size() - 1).
  static TTTensor zeros(std::span<const Index> mode_sizes,
                        std::span<const Index> internal_ranks);

  int dims() const { return static_cast<int>(cores_.size()); }
  Index mode_size(int k) const { return core(k).mode_size(); }
  std::vector<Index> mode_sizes() const;
  /// (r_0, ..., r_d).
  std::vector<Index> ranks() const;
  Index max_rank() const;
  Index num_parameters() const;

  const TTCore& core(int k) const {
    return cores_[static_cast<std::size_t>(k)];
  }
  /// Mutable access; the core's shape is fixed.
  TTCore& core(int k) { return cores_[static_cast<std::size_t>(k)]; }
  const std::vector<TTCore>& cores() const { return cores_; }

  double entry(std::span<const Index> index) const;

  TTTensor scaled(double factor) const;

  /// Dense row-major materialization (last index fastest). Refuses tensors
  /// with more than 1e7 entries.
  Vector to_dense() const;

 private:
  std::vector<TTCore> cores_;
};

/// Sum in TT format; ranks add.
TTTensor operator+(const TTTensor& a, const TTTensor& b);

/// <a, b> by left-to-right accumulation of the r_a x r_b environment.
double inner_product(const TTTensor& a, const TTTensor& b);

double frobenius_norm(const TTTensor& t);

/// <t, v_1 (x) ... (x) v_d>.
double contract_rank1(const TTTensor& t, std::span<const Vector> vectors);

/// Rank-1 tensor v_1 (x) ... (x) v_d.
TTTensor rank1_from_vectors(std::span<const Vector> vectors);

/// Replaces every core by its mode product with the matching matrix:
/// G'_k[:, i, :] = sum_j grams[k](i, j) G_k[:, j, :].
TTTensor apply_gram_operator(const TTTensor& t, std::span<const Matrix> grams);

/// Left-, right-orthogonal and center cores of a tensor.
///
/// For every k, U_1..U_{k-1} S_k V_{k+1}..V_d reproduces the tensor. U_k has
/// orthonormal columns in its left unfolding, V_k orthonormal rows in its
/// right unfolding. Ranks may be smaller than those of the input when the
/// input ranks exceed what the mode sizes can support.
struct Orthogonalization {
  std::vector<TTCore> left;
  std::vector<TTCore> right;
  std::vector<TTCore> center;

  int dims() const { return static_cast<int>(center.size()); }
  std::vector<Index> ranks() const;
  /// U_{<k} S_k V_{>k} as a TT tensor.
  TTTensor with_center(int k) const;
};

Orthogonalization left_right_orthogonalize(const TTTensor& t);

/// Truncates TT ranks to at most `max_rank` by a right-to-left QR sweep
/// followed by a left-to-right truncated SVD sweep.
TTTensor tt_round(const TTTensor& t, Index max_rank);

/// Exact re-representation whose ranks satisfy r_k <= r_{k-1} m_k and
/// r_{k-1} <= m_k r_k, so every orthogonal frame can have full rank.
TTTensor reduce_to_feasible_ranks(const TTTensor& t);

}  // namespace ttde
