#include "doctest.h"
#include "support/models.hpp"

#include "ttde/model_io.hpp"

#include <filesystem>
#include <random>

using namespace testmodels;

TEST_SUITE("model_io") {

TEST_CASE("JSON round trip is bit-exact") {
  std::mt19937_64 rng(21);
  for (Variant v : {Variant::Plain, Variant::Squared}) {
    const DensityModel m = random_model(rng, 3, 5, 2, v);
    const DensityModel back = model_from_json(model_to_json(m));
    CHECK(back.variant() == v);
    CHECK(back.normalization() == m.normalization());
    CHECK(back.alpha().ranks() == m.alpha().ranks());
    for (int k = 0; k < 3; ++k) {
      const auto a = m.alpha().core(k).data();
      const auto b = back.alpha().core(k).data();
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
      CHECK(back.bases()[static_cast<std::size_t>(k)].lower() ==
            m.bases()[static_cast<std::size_t>(k)].lower());
    }
    const std::vector<double> p{0.3, 0.7, 0.1};
    CHECK(back.evaluate(p) == m.evaluate(p));
  }
}

TEST_CASE("files and malformed documents") {
  std::mt19937_64 rng(22);
  const DensityModel m = random_model(rng, 2, 4, 2, Variant::Squared);
  const auto path = std::filesystem::temp_directory_path() / "ttde_model_test.json";
  save_model(path.string(), m);
  CHECK(load_model(path.string()).evaluate(std::vector<double>{0.5, 0.5}) ==
        m.evaluate(std::vector<double>{0.5, 0.5}));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path.string()), std::runtime_error);
  CHECK_THROWS_AS(model_from_json("{"), std::runtime_error);
  CHECK_THROWS_AS(model_from_json(R"({"format": "other"})"), std::runtime_error);
  std::string text = model_to_json(m);
  text.replace(text.find("\"squared\""), 9, "\"cubed\"");
  CHECK_THROWS_AS(model_from_json(text), std::runtime_error);
}

}
