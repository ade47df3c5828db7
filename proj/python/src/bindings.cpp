#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ttde/data.hpp"
#include "ttde/metrics.hpp"
#include "ttde/model_io.hpp"
#include "ttde/sampler.hpp"
#include "ttde/training.hpp"

namespace py = pybind11;
using namespace ttde;

namespace {

std::vector<double> as_point(const Eigen::Ref<const Vector>& x) {
  return {x.data(), x.data() + x.size()};
}

// Cores as (left, mode, right) float arrays.
py::list cores_to_numpy(const TTTensor& t) {
  py::list out;
  for (const auto& c : t.cores()) {
    py::array_t<double> a({c.left_rank(), c.mode_size(), c.right_rank()});
    std::copy(c.data().begin(), c.data().end(), a.mutable_data());
    out.append(a);
  }
  return out;
}

TTTensor cores_from_numpy(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& arrays) {
  std::vector<TTCore> cores;
  for (const auto& a : arrays) {
    if (a.ndim() != 3) throw std::invalid_argument("cores must be 3-dimensional arrays");
    TTCore c(a.shape(0), a.shape(1), a.shape(2));
    std::copy(a.data(), a.data() + a.size(), c.data().begin());
    cores.push_back(std::move(c));
  }
  return TTTensor(std::move(cores));
}

}  // namespace

PYBIND11_MODULE(_ttde, m) {
  m.doc() = "Tensor-train density estimation";
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::enum_<Variant>(m, "Variant")
      .value("plain", Variant::Plain)
      .value("squared", Variant::Squared);

  py::class_<BSplineBasis>(m, "BSplineBasis")
      .def(py::init<double, double, int, int>(), py::arg("lower"), py::arg("upper"),
           py::arg("size"), py::arg("degree") = 2)
      .def_property_readonly("size", &BSplineBasis::size)
      .def_property_readonly("degree", &BSplineBasis::degree)
      .def_property_readonly("lower", &BSplineBasis::lower)
      .def_property_readonly("upper", &BSplineBasis::upper)
      .def("eval", &BSplineBasis::eval, py::arg("x"))
      .def_property_readonly("integrals", &BSplineBasis::integrals)
      .def_property_readonly("gram", &BSplineBasis::gram);

  py::class_<DensityModel>(m, "DensityModel")
      .def(py::init([](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& cores,
                       std::vector<BSplineBasis> bases, Variant variant) {
             return DensityModel(cores_from_numpy(cores), std::move(bases), variant);
           }),
           py::arg("cores"), py::arg("bases"), py::arg("variant"))
      .def_property_readonly("dims", &DensityModel::dims)
      .def_property_readonly("variant", &DensityModel::variant)
      .def_property_readonly("bases", &DensityModel::bases)
      .def_property_readonly("normalization", &DensityModel::normalization)
      .def_property_readonly("ranks", [](const DensityModel& d) { return d.alpha().ranks(); })
      .def_property_readonly("cores", [](const DensityModel& d) { return cores_to_numpy(d.alpha()); })
      .def("evaluate", [](const DensityModel& d, const Samples& x) { return d.evaluate_batch(x); },
           py::arg("x"), "Density at each row of an (n, d) array.")
      .def("partition_function", &DensityModel::partition_function)
      .def("normalized", &DensityModel::normalized)
      .def("marginal",
           [](const DensityModel& d, const Eigen::Ref<const Vector>& prefix) {
             return d.marginal(as_point(prefix));
           },
           py::arg("prefix"))
      .def("cdf_slice",
           [](const DensityModel& d, const Eigen::Ref<const Vector>& prefix, double upper) {
             return d.cdf_slice(as_point(prefix), upper);
           },
           py::arg("prefix"), py::arg("upper"))
      .def("log_likelihood",
           [](const DensityModel& d, const Samples& x) {
             const LogLikelihood ll = d.log_likelihood(x);
             return py::make_tuple(ll.mean, ll.nonpositive);
           },
           py::arg("x"), "(mean log density, count of nonpositive points)")
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json, py::arg("text"))
      .def("save", [](const DensityModel& d, const std::string& path) { save_model(path, d); },
           py::arg("path"))
      .def_static("load", &load_model, py::arg("path"));

  m.def("sample",
        [](const DensityModel& model, Index n, std::uint64_t seed, int threads) {
          SamplerOptions o;
          o.threads = threads;
          SampleResult r;
          {
            py::gil_scoped_release release;
            r = sample(model, n, seed, o);
          }
          return r.samples;
        },
        py::arg("model"), py::arg("n"), py::arg("seed") = 0, py::arg("threads") = 1);

  m.def("conditional_cdf",
        [](const DensityModel& model, const Eigen::Ref<const Vector>& prefix, double upper) {
          return Sampler(model).conditional_cdf(as_point(prefix), upper);
        },
        py::arg("model"), py::arg("prefix"), py::arg("upper"));

  m.def("sliced_tv",
        [](const Samples& a, const Samples& b, int projections, std::uint64_t seed, int grid,
           int threads) {
          SlicedTvOptions o{projections, seed, grid, threads};
          py::gil_scoped_release release;
          return sliced_tv(a, b, o);
        },
        py::arg("a"), py::arg("b"), py::arg("projections") = 64, py::arg("seed") = 0,
        py::arg("grid") = 2048, py::arg("threads") = 1);

  m.def("cross_entropy",
        [](const DensityModel& model, const Samples& x) {
          const CrossEntropy ce = cross_entropy(model, x);
          return py::make_tuple(ce.value, ce.nonpositive);
        },
        py::arg("model"), py::arg("x"));

  m.def("two_moons", &two_moons, py::arg("n"), py::arg("noise") = 0.1, py::arg("seed") = 0);
  m.def("checkerboard", &checkerboard, py::arg("n"), py::arg("seed") = 0);
  m.def("corner_mixture",
        [](int cube_dims, int components, int noise_dims, double sigma, std::uint64_t seed,
           Index n) {
          return corner_mixture(cube_dims, components, noise_dims, sigma, seed).sample(n, seed);
        },
        py::arg("cube_dims") = 3, py::arg("components") = 7, py::arg("noise_dims") = 0,
        py::arg("sigma") = 0.5, py::arg("seed") = 0, py::arg("n") = 10000);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("variant", &TrainConfig::variant)
      .def_readwrite("rank", &TrainConfig::rank)
      .def_readwrite("basis_size", &TrainConfig::basis_size)
      .def_readwrite("degree", &TrainConfig::degree)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_property("optimizer",
                    [](const TrainConfig& c) { return std::string(to_string(c.optimizer)); },
                    [](TrainConfig& c, const std::string& s) { c.optimizer = parse_optimizer(s); })
      .def_property("init", [](const TrainConfig& c) { return std::string(to_string(c.init)); },
                    [](TrainConfig& c, const std::string& s) { c.init = parse_init(s); })
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("init_noise", &TrainConfig::init_noise)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def("validate", &TrainConfig::validate);

  m.def("train",
        [](const TrainConfig& config, const Samples& x, double validation_fraction,
           std::uint64_t split_seed) {
          const Dataset data(x, split_seed, validation_fraction);
          py::gil_scoped_release release;
          TrainResult r = train(config, data, {});
          py::gil_scoped_acquire acquire;
          py::list log;
          for (const auto& e : r.log) {
            py::dict row;
            row["iter"] = e.iteration;
            row["train_loss"] = e.train_loss;
            row["val_loss"] = e.validation_loss;
            row["seconds"] = e.seconds;
            log.append(row);
          }
          return py::make_tuple(std::move(r.model), log);
        },
        py::arg("config"), py::arg("x"), py::arg("validation_fraction") = 0.1,
        py::arg("split_seed") = 0, "Returns (normalized model, log rows).");
}
