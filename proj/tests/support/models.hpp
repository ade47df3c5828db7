#pragma once
// Small model builders shared by the test suites.

#include "support/oracles.hpp"

#include "ttde/density.hpp"

#include <random>
#include <vector>

namespace testmodels {

using namespace ttde;

inline std::vector<BSplineBasis> unit_bases(int d, int m, double lo = 0.0,
                                            double hi = 1.0, int degree = 2) {
  std::vector<BSplineBasis> out;
  for (int k = 0; k < d; ++k) out.emplace_back(lo, hi, m, degree);
  return out;
}

inline TTTensor ones_rank1(int d, int m) {
  return rank1_from_vectors(
      std::vector<Vector>(static_cast<std::size_t>(d), Vector::Ones(m)));
}

inline std::vector<oracle::Basis1D> ref_bases(const std::vector<BSplineBasis>& b) {
  std::vector<oracle::Basis1D> out;
  for (const auto& x : b) {
    out.push_back({x.lower(), x.upper(), x.size(), x.degree()});
  }
  return out;
}

// Random model on the unit cube. For the Plain variant a positive offset
// keeps most of the mass positive so it normalizes.
inline DensityModel random_model(std::mt19937_64& rng, int d, int m, Index r,
                                 Variant variant, bool normalize = true) {
  TTTensor alpha = oracle::random_tt(
      rng, std::vector<Index>(static_cast<std::size_t>(d), m), r);
  if (variant == Variant::Plain) alpha = alpha.scaled(0.2) + ones_rank1(d, m);
  DensityModel model(std::move(alpha), unit_bases(d, m), variant);
  return normalize ? model.normalized() : model;
}

}  // namespace testmodels
