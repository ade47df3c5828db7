#include "doctest.h"
#include "support/models.hpp"
#include "support/oracles.hpp"

#include "ttde/density.hpp"

#include <cmath>
#include <random>

using namespace ttde;
using namespace testmodels;

namespace {

// Dense-expansion reference for any mixture of point/full/below queries.
double dense_query(const DensityModel& model, const std::vector<DimQuery>& q) {
  const Vector alpha = oracle::dense(model.alpha());
  const auto refs = ref_bases(model.bases());
  if (model.variant() == Variant::Plain) {
    std::vector<Vector> vs;
    for (std::size_t k = 0; k < q.size(); ++k) {
      const auto& r = refs[k];
      switch (q[k].kind) {
        case DimQuery::Kind::Point: vs.push_back(r.values(q[k].value)); break;
        case DimQuery::Kind::Full: vs.push_back(r.integrals(r.b)); break;
        case DimQuery::Kind::Below: vs.push_back(r.integrals(q[k].value)); break;
      }
    }
    return alpha.dot(oracle::kron(vs)) / model.normalization();
  }
  std::vector<Matrix> ms;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const auto& r = refs[k];
    switch (q[k].kind) {
      case DimQuery::Kind::Point: {
        const Vector f = r.values(q[k].value);
        ms.push_back(f * f.transpose());
        break;
      }
      case DimQuery::Kind::Full: ms.push_back(r.gram(r.b)); break;
      case DimQuery::Kind::Below:
        ms.push_back(r.gram(std::max(r.a, q[k].value)));
        break;
    }
  }
  return alpha.dot(oracle::kron(ms) * alpha) / model.normalization();
}

}  // namespace

TEST_SUITE("density") {

TEST_CASE("uniform model") {
  const DensityModel model(ones_rank1(3, 6), unit_bases(3, 6), Variant::Plain);
  const std::vector<double> x{0.2, 0.5, 0.9};
  CHECK(model.evaluate(x) == doctest::Approx(1.0).epsilon(1e-13));
  const std::vector<double> outside{0.2, 1.5, 0.9};
  CHECK(model.evaluate(outside) == 0.0);
  CHECK(model.partition_function() == doctest::Approx(1.0).epsilon(1e-13));
  const std::vector<double> prefix{0.3};
  CHECK(model.marginal(prefix) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(model.cdf_slice({}, 0.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(model.cdf_slice({}, 0.0) == 0.0);
  CHECK(model.marginal({}) == doctest::Approx(1.0).epsilon(1e-13));

  const DensityModel sq(ones_rank1(2, 5), unit_bases(2, 5), Variant::Squared);
  const std::vector<double> y{0.1, 0.7};
  CHECK(sq.evaluate(y) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sq.partition_function() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("squared partition function with indicator basis") {
  const double h = 0.25;
  const Vector v{{0.5, -1.0, 2.0, 1.5}};
  for (int d : {1, 2, 3}) {
    std::vector<BSplineBasis> bases;
    for (int k = 0; k < d; ++k) bases.emplace_back(0.0, 1.0, 4, 0);
    const DensityModel m(
        rank1_from_vectors(std::vector<Vector>(static_cast<std::size_t>(d), v)),
        bases, Variant::Squared);
    CHECK(m.partition_function() ==
          doctest::Approx(std::pow(h * v.squaredNorm(), d)).epsilon(1e-13));
  }
}

TEST_CASE("evaluation matches dense basis expansion") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(-0.5, 1.5);
  for (Variant variant : {Variant::Plain, Variant::Squared}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto bases = unit_bases(3, 4, -0.5, 1.5);
      const DensityModel model(oracle::random_tt(rng, {4, 4, 4}, 2), bases,
                               variant);
      const Vector alpha = oracle::dense(model.alpha());
      for (int q = 0; q < 10; ++q) {
        const std::vector<double> x{unif(rng), unif(rng), unif(rng)};
        std::vector<Vector> f;
        for (double xk : x) f.push_back(oracle::basis_values(-0.5, 1.5, 4, 2, xk));
        const double lin = alpha.dot(oracle::kron(f));
        const double want = variant == Variant::Plain ? lin : lin * lin;
        CHECK(oracle::relative_error(model.evaluate(x), want) < 1e-12);
      }
    }
  }
}

TEST_CASE("batch evaluation agrees with pointwise evaluation") {
  std::mt19937_64 rng(22);
  const DensityModel model(oracle::random_tt(rng, {5, 5}, 3), unit_bases(2, 5),
                           Variant::Squared, 2.5);
  Samples x(4, 2);
  x << 0.1, 0.2, 0.5, 0.99, 1.0, 0.0, 1.2, 0.5;
  const Vector batch = model.evaluate_batch(x);
  for (Index i = 0; i < 4; ++i) {
    const std::vector<double> p{x(i, 0), x(i, 1)};
    CHECK(batch[i] == doctest::Approx(model.evaluate(p)).epsilon(1e-14));
  }
  CHECK(batch[3] == 0.0);
}

TEST_CASE("queries match dense quadrature") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Variant variant : {Variant::Plain, Variant::Squared}) {
    for (int trial = 0; trial < 5; ++trial) {
      const DensityModel model(oracle::random_tt(rng, {4, 5, 4}, 2),
                               std::vector<BSplineBasis>{
                                   BSplineBasis(0.0, 1.0, 4),
                                   BSplineBasis(-1.0, 2.0, 5),
                                   BSplineBasis(0.0, 1.0, 4)},
                               variant, 1.3);
      const std::vector<DimQuery> all(3, DimQuery::full());
      CHECK(oracle::relative_error(model.partition_function() / 1.3,
                                   dense_query(model, all)) < 1e-8);

      const std::vector<double> prefix{unif(rng)};
      std::vector<DimQuery> q{DimQuery::point(prefix[0]), DimQuery::full(),
                              DimQuery::full()};
      CHECK(oracle::relative_error(model.marginal(prefix),
                                   dense_query(model, q)) < 1e-8);

      const double a = -1.0 + 3.0 * unif(rng);
      q[1] = DimQuery::below(a);
      CHECK(oracle::relative_error(model.cdf_slice(prefix, a),
                                   dense_query(model, q)) < 1e-8);
      // At the upper bound the CDF slice equals the marginal.
      CHECK(oracle::relative_error(model.cdf_slice(prefix, 2.0),
                                   model.marginal(prefix)) < 1e-12);
    }
  }
}

TEST_CASE("squared CDF slice is monotone and matches quadrature in 2D") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const DensityModel model(oracle::random_tt(rng, {5, 5}, 3),
                             unit_bases(2, 5), Variant::Squared);
    const std::vector<double> prefix{0.37};
    double prev = 0.0;
    for (int q = 0; q <= 100; ++q) {
      const double cur = model.cdf_slice(prefix, q / 100.0);
      CHECK(cur >= prev - 1e-14);
      prev = cur;
    }
    const std::vector<DimQuery> dq{DimQuery::below(0.61), DimQuery::full()};
    CHECK(oracle::relative_error(model.cdf_slice({}, 0.61),
                                 dense_query(model, dq)) < 1e-8);
  }
}

TEST_CASE("normalization") {
  std::mt19937_64 rng(25);
  const auto bases = unit_bases(3, 4);
  TTTensor alpha = oracle::random_tt(rng, {4, 4, 4}, 2);
  const DensityModel sq = normalize(DensityModel(alpha, bases, Variant::Squared));
  CHECK(sq.partition_function() / sq.normalization() ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalize(sq).normalization() ==
        doctest::Approx(sq.normalization()).epsilon(1e-12));
  const std::vector<DimQuery> all(3, DimQuery::full());
  CHECK(std::abs(dense_query(sq, all) - 1.0) < 1e-8);

  const DensityModel scaled =
      normalize(DensityModel(alpha.scaled(3.0), bases, Variant::Squared));
  const std::vector<double> x{0.3, 0.6, 0.8};
  CHECK(scaled.evaluate(x) == doctest::Approx(sq.evaluate(x)).epsilon(1e-12));

  // Marginal consistency: integrating the first-coordinate marginal gives 1.
  const oracle::Basis1D ref{0.0, 1.0, 4, 2};
  const double mass = oracle::integrate(
      [&](double t) {
        const std::vector<double> p{t};
        return sq.marginal(p);
      },
      0.0, 1.0, 2, 0.0, 1.0, 200);
  CHECK(std::abs(mass - 1.0) < 1e-8);

  // A plain model with only negative mass cannot be normalized.
  const DensityModel negative(ones_rank1(2, 4).scaled(-1.0), unit_bases(2, 4),
                              Variant::Plain);
  CHECK_THROWS_AS(negative.normalized(), NumericError);

  // Plain model scale invariance.
  const DensityModel p1 = normalize(DensityModel(ones_rank1(3, 4) + alpha.scaled(0.01), bases, Variant::Plain));
  const DensityModel p3 = normalize(DensityModel((ones_rank1(3, 4) + alpha.scaled(0.01)).scaled(3.0), bases, Variant::Plain));
  CHECK(p1.evaluate(x) == doctest::Approx(p3.evaluate(x)).epsilon(1e-12));
}

TEST_CASE("plain evaluation is linear in alpha") {
  std::mt19937_64 rng(26);
  const auto bases = unit_bases(3, 4);
  const TTTensor a = oracle::random_tt(rng, {4, 4, 4}, 2);
  const TTTensor b = oracle::random_tt(rng, {4, 4, 4}, 3);
  const DensityModel ma(a, bases, Variant::Plain);
  const DensityModel mb(b, bases, Variant::Plain);
  const DensityModel mab(a + b, bases, Variant::Plain);
  const std::vector<double> x{0.12, 0.55, 0.97};
  CHECK(std::abs(mab.evaluate(x) - ma.evaluate(x) - mb.evaluate(x)) < 1e-12);
}

TEST_CASE("log likelihood") {
  Samples x(3, 2);
  x << 0.1, 0.2, 0.5, 0.5, 0.9, 0.3;
  const DensityModel unit =
      normalize(DensityModel(ones_rank1(2, 5), unit_bases(2, 5), Variant::Plain));
  CHECK(unit.log_likelihood(x).mean == doctest::Approx(0.0).epsilon(1e-12));

  const DensityModel wide = normalize(
      DensityModel(ones_rank1(2, 5), unit_bases(2, 5, 0.0, 2.0), Variant::Squared));
  CHECK(wide.log_likelihood(x).mean ==
        doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-12));

  const DensityModel neg(ones_rank1(2, 5).scaled(-1.0), unit_bases(2, 5),
                         Variant::Plain);
  const LogLikelihood ll = neg.log_likelihood(x);
  CHECK(ll.nonpositive == 3);
  CHECK(std::isinf(ll.mean));
  CHECK(neg.evaluate_clamped(std::vector<double>{0.5, 0.5}) == 0.0);
}

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(DensityModel(ones_rank1(2, 5), unit_bases(3, 5), Variant::Plain),
                  std::invalid_argument);
  CHECK_THROWS_AS(DensityModel(ones_rank1(2, 4), unit_bases(2, 5), Variant::Plain),
                  std::invalid_argument);
  const DensityModel m(ones_rank1(2, 5), unit_bases(2, 5), Variant::Plain);
  CHECK_THROWS_AS(m.evaluate(std::vector<double>{0.5}), std::invalid_argument);
  CHECK(parse_variant("squared") == Variant::Squared);
  CHECK_THROWS_AS(parse_variant("cubed"), std::invalid_argument);
}

}
