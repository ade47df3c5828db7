#include "doctest.h"
#include "support/models.hpp"
#include "support/oracles.hpp"

#include "ttde/metrics.hpp"
#include "ttde/sampler.hpp"

#include <cmath>
#include <random>

using namespace ttde;
using namespace testmodels;

TEST_SUITE("sampler") {

TEST_CASE("bisection on analytic CDFs") {
  auto identity = [](double x) { return x; };
  CHECK(std::abs(invert_cdf(identity, 0.625, 0.0, 1.0, 30) - 0.625) <=
        std::ldexp(1.0, -30));
  CHECK(invert_cdf(identity, 0.0, 0.0, 1.0) == 0.0);
  CHECK(invert_cdf(identity, 1.0, 0.0, 1.0) == 1.0);

  // Piecewise linear: slope 0.4 on [0, 1), then 0.6/3 on [1, 4].
  auto pl = [](double x) { return x < 1.0 ? 0.4 * x : 0.4 + 0.2 * (x - 1.0); };
  auto inverse = [](double u) { return u < 0.4 ? u / 0.4 : 1.0 + (u - 0.4) / 0.2; };
  for (double u : {0.01, 0.2, 0.4, 0.55, 0.93}) {
    CHECK(std::abs(invert_cdf(pl, u, 0.0, 4.0, 30) - inverse(u)) < 1e-8);
  }
}

TEST_CASE("uniform model maps uniforms to themselves") {
  for (Variant v : {Variant::Plain, Variant::Squared}) {
    const DensityModel model(ones_rank1(2, 8), unit_bases(2, 8), v);
    const Sampler sampler(model.normalized());
    ConditionalCdf scratch;
    const std::vector<double> u{0.3, 0.7};
    std::vector<double> x(2);
    REQUIRE(sampler.transform(u, x, scratch));
    CHECK(std::abs(x[0] - 0.3) < 1e-6);
    CHECK(std::abs(x[1] - 0.7) < 1e-6);
  }
}

TEST_CASE("indicator basis knot") {
  std::vector<BSplineBasis> bases{BSplineBasis(0.0, 1.0, 2, 0)};
  Vector masses(2);
  masses << 0.5, 1.5;
  const DensityModel model(rank1_from_vectors(std::vector<Vector>{masses}),
                           bases, Variant::Plain);
  const Sampler sampler(model.normalized());
  ConditionalCdf scratch;
  std::vector<double> x(1);
  const std::vector<double> u{0.25};
  REQUIRE(sampler.transform(u, x, scratch));
  CHECK(std::abs(x[0] - 0.5) < 1e-6);
}

TEST_CASE("conditional CDF bounds and recomputation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.02, 0.98);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityModel model = random_model(rng, 3, 5, 2, Variant::Squared);
    const Sampler sampler(model);
    std::vector<double> prefix;
    for (int k = 0; k < 3; ++k) {
      CHECK(sampler.conditional_cdf(prefix, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(sampler.conditional_cdf(prefix, 0.0) == 0.0);
      for (int q = 0; q < 5; ++q) {
        const double a = unif(rng);
        const double want = model.cdf_slice(prefix, a) / model.marginal(prefix);
        CHECK(std::abs(sampler.conditional_cdf(prefix, a) - want) < 1e-10);
      }
      prefix.push_back(unif(rng));
    }
  }
}

TEST_CASE("conditional CDF of a Plain model") {
  std::mt19937_64 rng(12);
  const DensityModel model = random_model(rng, 3, 5, 2, Variant::Plain);
  const Sampler sampler(model);
  const std::vector<double> prefix{0.3, 0.8};
  for (double a : {0.1, 0.45, 0.9}) {
    const double want = std::clamp(
        model.cdf_slice(prefix, a) / model.marginal(prefix), 0.0, 1.0);
    CHECK(std::abs(sampler.conditional_cdf(prefix, a) - want) < 1e-10);
  }
}

TEST_CASE("left environment recurrence") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const DensityModel model = random_model(rng, 4, 5, 3, Variant::Squared);
    const Sampler sampler(model);
    const auto refs = ref_bases(model.bases());
    std::vector<double> prefix;
    Vector env = Vector::Ones(1);
    for (int k = 0; k < 3; ++k) {
      const double x = unif(rng);
      prefix.push_back(x);
      env = sampler.advance_left(k, x, env);
      // From scratch: product of basis-weighted slices.
      Matrix acc = Matrix::Ones(1, 1);
      for (int j = 0; j <= k; ++j) {
        const auto& core = model.alpha().core(j);
        const Vector f = refs[static_cast<std::size_t>(j)].values(prefix[static_cast<std::size_t>(j)]);
        Matrix s = Matrix::Zero(core.left_rank(), core.right_rank());
        for (Index n = 0; n < core.mode_size(); ++n) s += f[n] * core.slice(n);
        acc = acc * s;
      }
      const Vector scratch = acc.transpose();
      CHECK((env - scratch).cwiseAbs().maxCoeff() <
            1e-12 * std::max(1.0, scratch.cwiseAbs().maxCoeff()));
      CHECK((sampler.left_environment(prefix) - env).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("right environments end in the scalar one") {
  std::mt19937_64 rng(14);
  const Sampler plain(random_model(rng, 3, 4, 2, Variant::Plain));
  CHECK(plain.right_vectors().back().size() == 1);
  CHECK(plain.right_vectors().back()[0] == 1.0);
  CHECK(plain.right_vectors()[0].size() == plain.model().alpha().core(0).right_rank());
  const Sampler sq(random_model(rng, 3, 4, 2, Variant::Squared));
  CHECK(sq.right_matrices().back()(0, 0) == 1.0);
  CHECK(sq.right_matrices()[1].rows() == 2);
}

TEST_CASE("determinism across seeds and thread counts") {
  std::mt19937_64 rng(15);
  const DensityModel model = random_model(rng, 3, 6, 2, Variant::Squared);
  const SampleResult a = Sampler(model).sample(500, 42);
  const SampleResult b = Sampler(model).sample(500, 42);
  SamplerOptions threaded;
  threaded.threads = 3;
  const SampleResult c = Sampler(model, threaded).sample(500, 42);
  const SampleResult other = Sampler(model).sample(500, 43);
  CHECK(a.samples == b.samples);
  CHECK(a.samples == c.samples);
  CHECK(a.samples != other.samples);
  CHECK(c.stats.core_operations == a.stats.core_operations);
  // Row i does not depend on how many rows were requested.
  const SampleResult prefix = Sampler(model).sample(100, 42);
  CHECK(prefix.samples == a.samples.topRows(100));
}

TEST_CASE("samples stay inside the domain") {
  std::mt19937_64 rng(16);
  std::vector<BSplineBasis> bases{BSplineBasis(-2.0, 3.0, 7), BSplineBasis(10.0, 10.5, 7)};
  DensityModel model(oracle::random_tt(rng, {7, 7}, 2), bases, Variant::Squared);
  const SampleResult s = Sampler(model.normalized()).sample(2000, 1);
  CHECK(s.samples.col(0).minCoeff() >= -2.0);
  CHECK(s.samples.col(0).maxCoeff() <= 3.0);
  CHECK(s.samples.col(1).minCoeff() >= 10.0);
  CHECK(s.samples.col(1).maxCoeff() <= 10.5);
  CHECK(s.stats.failed_rows == 0);
}

TEST_CASE("KS test against the model's own marginal CDFs") {
  std::mt19937_64 rng(17);
  const DensityModel model = random_model(rng, 2, 10, 3, Variant::Squared);
  const Index n = 20000;
  const SampleResult s = Sampler(model).sample(n, 7);
  for (int k = 0; k < 2; ++k) {
    auto cdf = [&](double a) {
      std::vector<DimQuery> q(2, DimQuery::full());
      q[static_cast<std::size_t>(k)] = DimQuery::below(a);
      return model.query(q);
    };
    const Vector col = s.samples.col(k);
    const double stat = ks_statistic(
        std::span<const double>(col.data(), static_cast<std::size_t>(n)), cdf);
    CHECK(ks_pvalue(stat, n) > 1e-3);
  }
}

TEST_CASE("retry policy on a model without positive mass") {
  const DensityModel model(ones_rank1(2, 4).scaled(-1.0), unit_bases(2, 4),
                           Variant::Plain);
  SamplerOptions opts;
  opts.max_retries = 5;
  const SampleResult s = Sampler(model, opts).sample(10, 3);
  CHECK(s.stats.failed_rows == 10);
  CHECK(s.stats.retried_rows == 10);
  CHECK(s.stats.retries == 50);
  CHECK(std::isnan(s.samples(0, 0)));
}

TEST_CASE("zero conditional normalizer is reported") {
  // First coordinate carries zero suffix mass on the left half.
  std::vector<BSplineBasis> bases{BSplineBasis(0.0, 1.0, 2, 0),
                                  BSplineBasis(0.0, 1.0, 2, 0)};
  TTCore c0(1, 2, 2);
  c0(0, 0, 0) = 1.0;
  c0(0, 1, 1) = 1.0;
  TTCore c1(2, 2, 1);
  c1(0, 0, 0) = 1.0;
  c1(0, 1, 0) = -1.0;
  c1(1, 0, 0) = 1.0;
  c1(1, 1, 0) = 1.0;
  const DensityModel model(TTTensor({c0, c1}), bases, Variant::Plain);
  const Sampler sampler(model.normalized());
  ConditionalCdf scratch;
  std::vector<double> x(2);
  const std::vector<double> u{0.0, 0.5};
  CHECK_FALSE(sampler.transform(u, x, scratch));
  CHECK_THROWS_AS(sampler.conditional_cdf(std::vector<double>{0.25}, 0.5),
                  NumericError);
}

TEST_CASE("operation count grows linearly in d") {
  std::mt19937_64 rng(18);
  std::vector<double> per_row;
  for (int d : {2, 4, 8, 16}) {
    const DensityModel model = random_model(rng, d, 6, 3, Variant::Squared);
    const SampleResult s = Sampler(model).sample(50, 1);
    per_row.push_back(static_cast<double>(s.stats.core_operations) / 50.0);
  }
  // Interior cores dominate and all cost the same, so doubling the number of
  // interior cores doubles their share.
  const double step1 = per_row[1] - per_row[0];
  const double step2 = per_row[2] - per_row[1];
  const double step3 = per_row[3] - per_row[2];
  CHECK(step2 == doctest::Approx(2.0 * step1).epsilon(1e-12));
  CHECK(step3 == doctest::Approx(2.0 * step2).epsilon(1e-12));
}

}
