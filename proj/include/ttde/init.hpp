#pragma once

#include "ttde/basis.hpp"
#include "ttde/density.hpp"
#include "ttde/tt_tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ttde {

struct InitReport {
  /// Dimensions whose Gram solve needed the 1e-10 ridge.
  std::vector<int> ridged_dims;
};

/// Coefficients of the 1D L2 fit: argmin integral <a, f>^2 - 2 mean <a, f(x_i)>,
/// i.e. D^{-1} times the empirical mean of f.
Vector fit_1d_l2(const BSplineBasis& basis, std::span<const double> values,
                 bool* ridged = nullptr);

/// Rank-1 tensor from independent per-dimension 1D L2 fits.
TTTensor rank1_init(const Samples& samples, std::span<const BSplineBasis> bases,
                    InitReport* report = nullptr);

/// Rank-1 start for the Squared variant: each 1D L2 fit is clipped at zero,
/// square-rooted and projected back onto the basis in L2, so that
/// <alpha, Phi>^2 approximates the product of the 1D fits.
TTTensor rank1_init_squared(const Samples& samples,
                            std::span<const BSplineBasis> bases,
                            InitReport* report = nullptr);

/// rank1_init or rank1_init_squared depending on the variant.
TTTensor rank1_init(const Samples& samples, std::span<const BSplineBasis> bases,
                    Variant variant, InitReport* report = nullptr);

/// Independent N(0, 1/(r_{k-1} m_k)) entries, so E||T||^2 = 1.
TTTensor random_init(std::span<const Index> modes, Index rank,
                     std::uint64_t seed);
TTTensor random_init(int d, Index m, Index rank, std::uint64_t seed);

/// Embeds t in a tensor with internal ranks min(rank, feasible) by placing
/// each core in the top-left block, then adds N(0, noise^2 * mean square of
/// the core) entries everywhere so the extra directions carry gradient.
TTTensor pad_rank(const TTTensor& t, Index rank, double noise,
                  std::uint64_t seed);

}  // namespace ttde
