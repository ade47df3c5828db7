#include "doctest.h"
#include "support/oracles.hpp"

#include "ttde/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

using namespace ttde;

TEST_SUITE("data") {

TEST_CASE("two moons without noise lie on the two arcs") {
  const Samples x = two_moons(1001, 0.0, 5);
  CHECK(x.rows() == 1001);
  for (Index i = 0; i < 1001; ++i) {
    if (i < 501) {
      CHECK(std::hypot(x(i, 0), x(i, 1)) == doctest::Approx(1.0));
      CHECK(x(i, 1) >= -1e-12);
    } else {
      CHECK(std::hypot(x(i, 0) - 1.0, x(i, 1) - 0.5) == doctest::Approx(1.0));
      CHECK(x(i, 1) <= 0.5 + 1e-12);
    }
  }
}

TEST_CASE("two moons mean and determinism") {
  const Samples x = two_moons(200000, 0.1, 7);
  CHECK(x.col(0).mean() == doctest::Approx(0.5).epsilon(0.01));
  CHECK(x.col(1).mean() == doctest::Approx(0.25).epsilon(0.02));
  const Samples y = two_moons(1000, 0.1, 7);
  CHECK(two_moons(1000, 0.1, 7) == y);
  CHECK(two_moons(1000, 0.1, 8) != y);
}

TEST_CASE("checkerboard occupies dark cells uniformly") {
  const Samples x = checkerboard(80000, 3);
  std::vector<int> counts(16, 0);
  for (Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(x(i, 0)) <= 4.0);
    CHECK(std::abs(x(i, 1)) <= 4.0);
    const int cx = std::min(3, static_cast<int>(std::floor((x(i, 0) + 4.0) / 2.0)));
    const int cy = std::min(3, static_cast<int>(std::floor((x(i, 1) + 4.0) / 2.0)));
    ++counts[static_cast<std::size_t>(cy * 4 + cx)];
  }
  int occupied = 0;
  for (int c : counts) {
    if (c > 0) {
      ++occupied;
      CHECK(c == doctest::Approx(10000).epsilon(0.05));
    }
  }
  CHECK(occupied == 8);
  // Neighbouring cells differ in colour.
  for (int cy = 0; cy < 4; ++cy) {
    for (int cx = 0; cx + 1 < 4; ++cx) {
      CHECK((counts[static_cast<std::size_t>(cy * 4 + cx)] > 0) !=
            (counts[static_cast<std::size_t>(cy * 4 + cx + 1)] > 0));
    }
  }
}

TEST_CASE("corner mixture layout, sampling and density") {
  const CornerMixture m = CornerMixture::seven_corners(0.5, 2);
  CHECK(m.dims() == 5);
  CHECK(m.components() == 7);
  std::set<std::vector<double>> corners;
  for (int c = 0; c < 7; ++c) {
    std::vector<double> row;
    for (int j = 0; j < 3; ++j) {
      const double v = m.centers()(c, j);
      const bool on_corner = v == 0.0 || v == 3.0;
      CHECK(on_corner);
      row.push_back(v);
    }
    corners.insert(row);
  }
  CHECK(corners.size() == 7);
  CHECK(corners.count({0.0, 0.0, 0.0}) == 0);

  std::vector<int> labels;
  const Samples x = m.sample(70000, 9, &labels);
  std::vector<int> counts(7, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  for (Index i = 0; i < 1000; ++i) {
    const auto c = static_cast<Index>(labels[static_cast<std::size_t>(i)]);
    CHECK((x.row(i).head(3) - m.centers().row(c)).norm() < 0.5 * 8.0);
  }
  CHECK(x.col(4).mean() == doctest::Approx(0.0).epsilon(0.02));

  // Density matches a direct mixture formula.
  const double s = 0.5;
  auto direct = [&](const std::vector<double>& p) {
    double mix = 0.0;
    for (int c = 0; c < 7; ++c) {
      double sq = 0.0;
      for (int j = 0; j < 3; ++j) sq += std::pow(p[static_cast<std::size_t>(j)] - m.centers()(c, j), 2);
      mix += std::exp(-sq / (2 * s * s)) / std::pow(2 * std::numbers::pi * s * s, 1.5);
    }
    double noise = 1.0;
    for (int j = 3; j < 5; ++j) {
      noise *= std::exp(-0.5 * p[static_cast<std::size_t>(j)] * p[static_cast<std::size_t>(j)]) /
               std::sqrt(2 * std::numbers::pi);
    }
    return std::log(mix / 7.0 * noise);
  };
  for (const std::vector<double>& p :
       {std::vector<double>{0.1, 2.9, 3.0, 0.2, -1.0},
        std::vector<double>{1.5, 1.5, 1.5, 0.0, 0.0}}) {
    CHECK(m.log_density(p) == doctest::Approx(direct(p)).epsilon(1e-12));
  }

  // A 1D mixture integrates to one.
  const CornerMixture one(Matrix::Constant(1, 1, 1.0), 0.3, 0);
  const double total = oracle::integrate(
      [&](double t) { return std::exp(one.log_density(std::vector<double>{t})); },
      -3.0, 5.0, 8, -3.0, 5.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-8));

  const CornerMixture r = corner_mixture(4, 5, 1, 0.1, 3);
  CHECK(r.components() == 5);
  CHECK(r.dims() == 5);
  std::set<std::vector<double>> rc;
  for (int c = 0; c < 5; ++c) {
    rc.insert({r.centers()(c, 0), r.centers()(c, 1), r.centers()(c, 2), r.centers()(c, 3)});
  }
  CHECK(rc.size() == 5);
  CHECK_THROWS(corner_mixture(2, 5, 0, 0.1, 1));
}

TEST_CASE("dataset bounds and split") {
  Samples x(10, 2);
  for (Index i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 5.0;
  }
  const Dataset ds(x, 3, 0.3);
  CHECK(ds.bounds().lower[0] < 0.0);
  CHECK(ds.bounds().upper[0] > 9.0);
  CHECK(ds.bounds().upper[0] - 9.0 < 1e-4);
  CHECK(ds.bounds().lower[1] == doctest::Approx(4.5));
  CHECK(ds.bounds().upper[1] == doctest::Approx(5.5));
  CHECK(ds.validation_indices().size() == 3);
  CHECK(ds.train_indices().size() == 7);
  std::set<Index> all(ds.train_indices().begin(), ds.train_indices().end());
  all.insert(ds.validation_indices().begin(), ds.validation_indices().end());
  CHECK(all.size() == 10);
  CHECK(Dataset(x, 3, 0.3).validation_indices() == ds.validation_indices());
  CHECK(ds.train().rows() == 7);
  const std::string manifest = manifest_json(ds);
  CHECK(manifest.find("\"n\"") != std::string::npos);
}

TEST_CASE("CSV round trip is lossless") {
  Samples x(3, 2);
  x << 0.1, -1e-300, 1.0 / 3.0, 12345.678901234567, std::numbers::pi, -0.0;
  std::stringstream s;
  write_csv(s, x, {"a", "b"});
  const CsvTable t = read_csv(s, true);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.samples == x);
  CHECK(t.rejected_rows == 0);

  const auto path = std::filesystem::temp_directory_path() / "ttde_csv_test.csv";
  write_csv(path.string(), x, default_header(2));
  const Dataset ds = load_csv(path.string(), true);
  CHECK(ds.samples() == x);
  std::filesystem::remove(path);
}

TEST_CASE("CSV errors") {
  std::stringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_csv(ragged, false), std::runtime_error);
  std::stringstream bad("1,abc\n");
  CHECK_THROWS_AS(read_csv(bad, false), std::runtime_error);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_csv(empty, false), std::runtime_error);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv", false), std::runtime_error);
  std::stringstream nan("1,2\nnan,3\n4,inf\n5,6\n");
  const CsvTable t = read_csv(nan, false);
  CHECK(t.samples.rows() == 2);
  CHECK(t.rejected_rows == 2);
}

}
