#include "doctest.h"
#include "support/models.hpp"

#include "ttde/data.hpp"
#include "ttde/metrics.hpp"
#include "ttde/model_io.hpp"
#include "ttde/sampler.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace testmodels;
namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() /
           ("ttde_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const Workdir& w) {
  const std::string out = w / "stdout.txt";
  const std::string cmd = std::string(TTDE_CLI) + " " + args + " > " + out + " 2> " +
                          (w / "stderr.txt");
  const int status = std::system(cmd.c_str());
  std::ifstream f(out);
  std::stringstream s;
  s << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("train on two moons writes a loadable model and log") {
  Workdir w;
  const Run r = run("train --data toy:two_moons --n 4000 --rank 4 --basis-size 16 --iters 20 "
                    "--quiet --out " + (w / "m.json"),
                    w);
  REQUIRE(r.code == 0);
  const DensityModel m = load_model(w / "m.json");
  CHECK(m.dims() == 2);
  CHECK(m.alpha().max_rank() <= 4);
  CHECK(m.normalization() == doctest::Approx(m.partition_function()));
  const std::string log = slurp(w / "m.log.csv");
  CHECK(log.rfind("iter,train_loss,val_loss,seconds\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') >= 3);
}

TEST_CASE("usage and runtime errors map to exit codes") {
  Workdir w;
  CHECK(run("train --data " + (w / "missing.csv") + " --out " + (w / "x.json"), w).code == 2);
  CHECK(run("train --data toy:two_moons --rank 0", w).code == 1);
  CHECK(run("train --data toy:two_moons --variant squared --optimizer riemannian --out " +
                (w / "x.json"),
            w).code == 1);
  CHECK(run("frobnicate", w).code == 1);
  CHECK(run("sample --model " + (w / "missing.json"), w).code == 2);
}

TEST_CASE("config file overrides flags") {
  Workdir w;
  std::ofstream(w / "c.cfg") << "# comment\nrank = 2\nbasis_size=8\niters = 2\n";
  REQUIRE(run("train --config " + (w / "c.cfg") + " --data toy:two_moons --n 1000 --rank 6 "
              "--quiet --out " + (w / "m.json"),
              w).code == 0);
  const DensityModel m = load_model(w / "m.json");
  CHECK(m.alpha().max_rank() <= 2);
  CHECK(m.bases()[0].size() == 8);
  std::ofstream(w / "bad.cfg") << "colour = blue\n";
  CHECK(run("train --config " + (w / "bad.cfg") + " --data toy:two_moons", w).code == 1);
}

TEST_CASE("sample is reproducible and matches the library") {
  Workdir w;
  std::mt19937_64 rng(4);
  const DensityModel m = random_model(rng, 3, 6, 2, Variant::Squared);
  save_model(w / "m.json", m);
  REQUIRE(run("sample --model " + (w / "m.json") + " --n 300 --seed 9 --out " + (w / "a.csv"),
              w).code == 0);
  REQUIRE(run("sample --model " + (w / "m.json") + " --n 300 --seed 9 --threads 3 --out " +
                  (w / "b.csv"),
              w).code == 0);
  CHECK(slurp(w / "a.csv") == slurp(w / "b.csv"));
  const Samples lib = sample(m, 300, 9).samples;
  CHECK(read_csv(w / "a.csv", true).samples == lib);

  const Run empty = run("sample --model " + (w / "m.json") + " --n 0", w);
  CHECK(empty.code == 0);
  CHECK(empty.out == "x1,x2,x3\n");
}

TEST_CASE("uniform model samples pass a KS test") {
  Workdir w;
  const DensityModel m = DensityModel(ones_rank1(2, 5), unit_bases(2, 5), Variant::Squared).normalized();
  save_model(w / "u.json", m);
  REQUIRE(run("sample --model " + (w / "u.json") + " --n 5000 --seed 2 --out " + (w / "u.csv"),
              w).code == 0);
  const Samples x = read_csv(w / "u.csv", true).samples;
  for (int k = 0; k < 2; ++k) {
    std::vector<double> v;
    for (Index i = 0; i < x.rows(); ++i) v.push_back(x(i, k));
    const double stat = ks_statistic(v, [](double t) { return std::clamp(t, 0.0, 1.0); });
    CHECK(ks_pvalue(stat, x.rows()) > 1e-3);
  }
}

TEST_CASE("eval prints JSON matching the library") {
  Workdir w;
  const Samples a = two_moons(3000, 0.1, 1);
  const Samples b = two_moons(3000, 0.1, 2);
  write_csv(w / "a.csv", a, default_header(2));
  write_csv(w / "b.csv", b, default_header(2));

  const Run same = run("eval --samples " + (w / "a.csv") + " " + (w / "a.csv"), w);
  REQUIRE(same.code == 0);
  CHECK(nlohmann::json::parse(same.out)["sliced_tv"].get<double>() < 0.02);

  const Run r = run("eval --samples " + (w / "a.csv") + " " + (w / "b.csv") +
                        " --projections 16 --seed 5",
                    w);
  REQUIRE(r.code == 0);
  SlicedTvOptions o;
  o.projections = 16;
  o.seed = 5;
  CHECK(nlohmann::json::parse(r.out)["sliced_tv"].get<double>() == sliced_tv(a, b, o));

  CHECK(run("eval --samples " + (w / "a.csv") + " " + (w / "b.csv") + " --metrics nope", w)
            .code == 1);

  std::mt19937_64 rng(6);
  DensityModel m(ones_rank1(2, 4), unit_bases(2, 4, -3.0, 3.0), Variant::Squared);
  m = m.normalized();
  save_model(w / "m.json", m);
  const Run scored = run("eval --model " + (w / "m.json") + " --samples " + (w / "a.csv") +
                             " --metrics cross_entropy,negative_density_fraction",
                         w);
  REQUIRE(scored.code == 0);
  const auto j = nlohmann::json::parse(scored.out);
  CHECK(j["cross_entropy"].get<double>() == cross_entropy(m, a).value);
  CHECK(j["negative_density_fraction"].get<double>() == 0.0);
  CHECK_FALSE(j.contains("sliced_tv"));
}

TEST_CASE("grid emits the 2D marginal") {
  Workdir w;
  const DensityModel u =
      DensityModel(ones_rank1(2, 4), unit_bases(2, 4), Variant::Plain).normalized();
  save_model(w / "u.json", u);
  const Run r = run("grid --model " + (w / "u.json") + " --resolution 5", w);
  REQUIRE(r.code == 0);
  std::stringstream s(r.out);
  std::string line;
  std::getline(s, line);
  CHECK(line == "x,y,density");
  int rows = 0;
  while (std::getline(s, line)) {
    ++rows;
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(rows == 25);

  const Run one = run("grid --model " + (w / "u.json") + " --resolution 1", w);
  CHECK(std::count(one.out.begin(), one.out.end(), '\n') == 2);

  // Midpoint sum of the (0, 2) face of a 3D model integrates to one.
  std::mt19937_64 rng(8);
  const DensityModel m = random_model(rng, 3, 5, 2, Variant::Squared);
  save_model(w / "m.json", m);
  REQUIRE(run("grid --model " + (w / "m.json") + " --dims 0,2 --resolution 200 --out " +
                  (w / "g.csv"),
              w).code == 0);
  const CsvTable g = read_csv(w / "g.csv", true);
  CHECK(g.samples.rows() == 40000);
  CHECK(g.samples.col(2).sum() / 40000.0 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(run("grid --model " + (w / "m.json") + " --dims 1,1", w).code == 1);
}

}
