#pragma once

#include "ttde/basis.hpp"
#include "ttde/tt_tensor.hpp"

#include <span>
#include <vector>

namespace ttde {

/// Sparse rank-1 feature maps Phi(x_i) = f(x_i1) (x) ... (x) f(x_id) for a
/// batch of points. Only the degree+1 active basis values per coordinate are
/// stored.
class FeatureBatch {
 public:
  FeatureBatch(std::span<const BSplineBasis> bases, const Samples& points);

  Index size() const { return n_; }
  int dims() const { return d_; }
  int width(int k) const { return widths_[static_cast<std::size_t>(k)]; }

  /// Index of the first active basis function of point i in dim k, or -1
  /// when the coordinate lies outside the basis domain.
  int first(Index i, int k) const {
    return firsts_[static_cast<std::size_t>(i * d_ + k)];
  }
  /// Active basis values of point i in dim k (width(k) entries).
  const double* values(Index i, int k) const {
    return values_.data() +
           static_cast<std::size_t>((i * d_ + k) * stride_);
  }
  /// True when every coordinate of point i lies inside its basis domain.
  bool inside(Index i) const { return inside_[static_cast<std::size_t>(i)]; }

 private:
  Index n_;
  int d_;
  int stride_;
  std::vector<int> widths_;
  std::vector<int> firsts_;
  std::vector<double> values_;
  std::vector<char> inside_;
};

/// <t, Phi(x_i)> for every point of the batch.
Vector contract_features(const TTTensor& t, const FeatureBatch& features);

/// Left environments l_k (length r_{k-1}) of <t, Phi(x_i)> for one point:
/// out[k] = contraction of cores 0..k-1 with the point's features.
void left_feature_environments(const TTTensor& t, const FeatureBatch& f,
                               Index i, std::vector<Vector>& out);
/// Right environments (length r_k): out[k] = contraction of cores k+1..d-1.
void right_feature_environments(const TTTensor& t, const FeatureBatch& f,
                                Index i, std::vector<Vector>& out);

/// Sum of basis-weighted core slices: sum_t values[t] * G[:, first + t, :].
Matrix weighted_slice_sum(const TTCore& core, int first, const double* values,
                          int width);

}  // namespace ttde
