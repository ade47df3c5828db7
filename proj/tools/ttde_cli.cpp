// ttde: train, sample, evaluate and tabulate tensor-train densities.

#include "ttde/data.hpp"
#include "ttde/metrics.hpp"
#include "ttde/model_io.hpp"
#include "ttde/sampler.hpp"
#include "ttde/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace ttde;

namespace {

// Bad flags or config values; exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

// key = value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(number) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

// Sets `--key` on `app` as if it had been given on the command line.
void override_option(CLI::App& app, const std::string& key, const std::string& value) {
  std::string name = key;
  for (char& c : name) {
    if (c == '_') c = '-';
  }
  CLI::Option* opt = nullptr;
  try {
    opt = app.get_option("--" + name);
  } catch (const CLI::OptionNotFound&) {
    throw UsageError("unknown setting '" + key + "'");
  }
  if (name == "config" || name == "sweep") {
    throw UsageError("setting '" + key + "' is not allowed here");
  }
  opt->clear();
  opt->add_result(value);
  try {
    opt->run_callback();
  } catch (const CLI::Error& e) {
    throw UsageError("setting '" + key + "': " + e.what());
  }
}

struct DataArgs {
  std::string source;
  bool header = true;
  Index n = 10000;
  double noise = 0.1;
  int cube_dims = 3;
  int components = 7;
  int noise_dims = 0;
  double sigma = 0.5;
  std::uint64_t data_seed = 0;
  double val_frac = 0.1;
  std::uint64_t split_seed = 0;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.source,
                  "CSV path, or toy:two_moons | toy:checkerboard | toy:corners");
  cmd->add_option("--header", a.header, "CSV has a header row")->default_val(true);
  cmd->add_option("--n", a.n, "toy sample count")->check(CLI::PositiveNumber);
  cmd->add_option("--noise", a.noise, "two-moons noise standard deviation");
  cmd->add_option("--cube-dims", a.cube_dims, "corner mixture cube dimension");
  cmd->add_option("--components", a.components, "corner mixture components");
  cmd->add_option("--noise-dims", a.noise_dims, "corner mixture noise dimensions");
  cmd->add_option("--sigma", a.sigma, "corner mixture component scale");
  cmd->add_option("--data-seed", a.data_seed, "toy generator seed");
  cmd->add_option("--val-frac", a.val_frac, "validation fraction")
      ->check(CLI::Range(0.0, 0.99));
  cmd->add_option("--split-seed", a.split_seed, "train/validation split seed");
}

Samples toy_samples(const DataArgs& a) {
  const std::string name = a.source.substr(4);
  if (name == "two_moons" || name == "moons") return two_moons(a.n, a.noise, a.data_seed);
  if (name == "checkerboard") return checkerboard(a.n, a.data_seed);
  if (name == "corners") {
    return corner_mixture(a.cube_dims, a.components, a.noise_dims, a.sigma, a.data_seed)
        .sample(a.n, a.data_seed);
  }
  throw UsageError("unknown toy dataset '" + name + "'");
}

Dataset load_data(const DataArgs& a) {
  if (a.source.empty()) throw UsageError("--data is required");
  if (a.source.rfind("toy:", 0) == 0) {
    return Dataset(toy_samples(a), a.split_seed, a.val_frac);
  }
  CsvTable table = read_csv(a.source, a.header);
  if (table.rejected_rows > 0) {
    std::cerr << "ttde: dropped " << table.rejected_rows << " non-finite rows from "
              << a.source << "\n";
  }
  return Dataset(std::move(table.samples), a.split_seed, a.val_frac);
}

Samples load_samples(const std::string& path, bool header) {
  CsvTable t = read_csv(path, header);
  if (t.rejected_rows > 0) {
    std::cerr << "ttde: dropped " << t.rejected_rows << " non-finite rows from " << path
              << "\n";
  }
  return std::move(t.samples);
}

struct TrainArgs {
  DataArgs data;
  std::string variant = "plain";
  std::string optimizer;
  std::string init = "rank1";
  TrainConfig config;
  std::string out = "model.ttde";
  std::string log;
  std::string sweep;
  bool quiet = false;
  int threads = 1;
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + suffix;
  }
  return path.substr(0, dot) + suffix + path.substr(dot);
}

// model.json -> model.log.csv
std::string log_path_for(const std::string& out) {
  const auto dot = out.find_last_of('.');
  const auto slash = out.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + ".log.csv";
}

void run_train_once(const TrainArgs& a, const Dataset& data, const std::string& out,
                    const std::string& log_path) {
  TrainConfig c = a.config;
  c.variant = parse_variant(a.variant);
  c.optimizer = a.optimizer.empty()
                    ? (c.variant == Variant::Squared ? Optimizer::Adam : Optimizer::Riemannian)
                    : parse_optimizer(a.optimizer);
  c.init = parse_init(a.init);
  if (c.checkpoint_every > 0 && c.checkpoint_path.empty()) {
    c.checkpoint_path = with_suffix(out, ".ckpt");
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const TrainResult r = train(c, data, [&](const TrainLogEntry& e) {
    if (!a.quiet) {
      std::fprintf(stderr, "iter %d train %.6g val %.6g\n", e.iteration, e.train_loss,
                   e.validation_loss);
    }
  });
  save_model(out, r.model);
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write log '" + log_path + "'");
  write_train_log(log, r.log);
  if (!a.quiet) {
    std::fprintf(stderr, "best iteration %d, validation loss %.6g, saved %s\n",
                 r.best_iteration, r.best_validation_loss, out.c_str());
  }
}

void run_train(CLI::App& cmd, TrainArgs& a, const std::string& config_path) {
  if (!config_path.empty()) {
    for (const auto& [k, v] : read_config(config_path)) override_option(cmd, k, v);
  }
  const Dataset data = load_data(a.data);
  if (a.sweep.empty()) {
    run_train_once(a, data, a.out, a.log.empty() ? log_path_for(a.out) : a.log);
    return;
  }
  const auto eq = a.sweep.find('=');
  if (eq == std::string::npos) throw UsageError("--sweep expects key=v1,v2,...");
  const std::string key = trim(a.sweep.substr(0, eq));
  for (const std::string& value : split(a.sweep.substr(eq + 1), ',')) {
    override_option(cmd, key, value);
    const std::string out = with_suffix(a.out, "." + key + value);
    run_train_once(a, data, out, log_path_for(out));
  }
}

void write_samples(const std::string& path, const Samples& x) {
  const auto header = default_header(static_cast<int>(x.cols()));
  if (path.empty() || path == "-") {
    write_csv(std::cout, x, header);
  } else {
    write_csv(path, x, header);
  }
}

const std::vector<std::string> kMetrics{"sliced_tv", "cross_entropy",
                                        "negative_density_fraction"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-train density estimation"};
  app.require_subcommand(1);

  // train
  TrainArgs ta;
  std::string train_config;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a model to samples");
  add_data_options(train_cmd, ta.data);
  train_cmd->add_option("--config", train_config, "flat key = value file; overrides flags");
  train_cmd->add_option("--variant", ta.variant, "plain | squared")
      ->check(CLI::IsMember({"plain", "squared"}));
  train_cmd->add_option("--rank", ta.config.rank)->check(CLI::PositiveNumber);
  train_cmd->add_option("--basis-size", ta.config.basis_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--degree", ta.config.degree)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--optimizer", ta.optimizer,
                        "riemannian | adam (default: riemannian for plain, adam for squared)")
      ->check(CLI::IsMember({"riemannian", "adam"}));
  train_cmd->add_option("--init", ta.init, "rank1 | random")
      ->check(CLI::IsMember({"rank1", "random"}));
  train_cmd->add_option("--batch-size", ta.config.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--iters", ta.config.iterations)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", ta.config.learning_rate, "adam learning rate");
  train_cmd->add_option("--init-noise", ta.config.init_noise);
  train_cmd->add_option("--seed", ta.config.seed);
  train_cmd->add_option("--eval-every", ta.config.eval_every, "0: once per epoch");
  train_cmd->add_option("--checkpoint-every", ta.config.checkpoint_every);
  train_cmd->add_option("--checkpoint", ta.config.checkpoint_path);
  train_cmd->add_option("--out", ta.out, "model file");
  train_cmd->add_option("--log", ta.log, "training log CSV");
  train_cmd->add_option("--sweep", ta.sweep, "repeat training for key=v1,v2,...");
  train_cmd->add_option("--threads", ta.threads)->check(CLI::PositiveNumber);
  train_cmd->add_flag("--quiet", ta.quiet);

  // sample
  std::string sample_model;
  std::string sample_out;
  Index sample_n = 1000;
  std::uint64_t sample_seed = 0;
  SamplerOptions sample_opts;
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw samples from a model");
  sample_cmd->add_option("--model", sample_model)->required();
  sample_cmd->add_option("--n", sample_n)->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--seed", sample_seed);
  sample_cmd->add_option("--out", sample_out, "CSV path (stdout when omitted)");
  sample_cmd->add_option("--threads", sample_opts.threads)->check(CLI::PositiveNumber);
  sample_cmd->add_option("--bisection-iters", sample_opts.bisection_iterations)
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("--max-retries", sample_opts.max_retries)
      ->check(CLI::NonNegativeNumber);

  // eval
  std::string eval_model;
  std::vector<std::string> eval_samples;
  std::string eval_metrics;
  bool eval_header = true;
  SlicedTvOptions stv;
  CLI::App* eval_cmd = app.add_subcommand("eval", "compare samples or score a model");
  eval_cmd->add_option("--model", eval_model);
  eval_cmd->add_option("--samples", eval_samples, "one CSV with --model, otherwise two")
      ->required()
      ->expected(1, 2);
  eval_cmd->add_option("--metrics", eval_metrics,
                       "comma list of sliced_tv, cross_entropy, negative_density_fraction");
  eval_cmd->add_option("--header", eval_header)->default_val(true);
  eval_cmd->add_option("--projections", stv.projections)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--grid", stv.grid)->check(CLI::Range(2, 1 << 24));
  eval_cmd->add_option("--seed", stv.seed);
  eval_cmd->add_option("--threads", stv.threads)->check(CLI::PositiveNumber);

  // grid
  std::string grid_model;
  std::string grid_out;
  std::vector<int> grid_dims{0, 1};
  int grid_resolution = 100;
  CLI::App* grid_cmd = app.add_subcommand("grid", "tabulate a 2D marginal");
  grid_cmd->add_option("--model", grid_model)->required();
  grid_cmd->add_option("--dims", grid_dims, "pair of zero-based coordinates")
      ->expected(2)
      ->delimiter(',');
  grid_cmd->add_option("--resolution", grid_resolution)->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", grid_out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      run_train(*train_cmd, ta, train_config);
    } else if (*sample_cmd) {
      const SampleResult r = sample(load_model(sample_model), sample_n, sample_seed, sample_opts);
      if (r.stats.failed_rows > 0) {
        std::cerr << "ttde: " << r.stats.failed_rows
                  << " rows failed after retries and are NaN\n";
      }
      write_samples(sample_out, r.samples);
    } else if (*eval_cmd) {
      std::vector<std::string> metrics;
      if (!eval_metrics.empty()) {
        metrics = split(eval_metrics, ',');
        for (const auto& m : metrics) {
          if (std::find(kMetrics.begin(), kMetrics.end(), m) == kMetrics.end()) {
            throw UsageError("unknown metric '" + m + "'");
          }
        }
      } else if (eval_model.empty()) {
        metrics = {"sliced_tv"};
      } else {
        metrics = kMetrics;
      }
      nlohmann::json out = nlohmann::json::object();
      if (eval_model.empty()) {
        if (eval_samples.size() != 2) throw UsageError("eval needs two CSVs or --model");
        for (const auto& m : metrics) {
          if (m != "sliced_tv") throw UsageError("metric '" + m + "' needs --model");
        }
        const Samples a = load_samples(eval_samples[0], eval_header);
        const Samples b = load_samples(eval_samples[1], eval_header);
        out["sliced_tv"] = sliced_tv(a, b, stv);
      } else {
        if (eval_samples.size() != 1) throw UsageError("eval with --model takes one CSV");
        const DensityModel model = load_model(eval_model);
        const Samples x = load_samples(eval_samples[0], eval_header);
        for (const auto& m : metrics) {
          if (m == "sliced_tv") {
            SamplerOptions so;
            so.threads = stv.threads;
            const Samples drawn = sample(model, x.rows(), stv.seed, so).samples;
            out[m] = sliced_tv(drawn, x, stv);
          } else if (m == "cross_entropy") {
            out[m] = cross_entropy(model, x).value;
          } else {
            Index negative = 0;
            const Vector q = model.evaluate_batch(x);
            for (Index i = 0; i < q.size(); ++i) negative += q[i] < 0.0 ? 1 : 0;
            out[m] = x.rows() > 0 ? static_cast<double>(negative) / static_cast<double>(x.rows())
                                  : 0.0;
          }
        }
      }
      std::cout << out.dump() << "\n";
    } else if (*grid_cmd) {
      const DensityModel model = load_model(grid_model);
      const int d = model.dims();
      const int i = grid_dims[0];
      const int j = grid_dims[1];
      if (i < 0 || j < 0 || i >= d || j >= d || i == j) {
        throw UsageError("--dims must name two distinct coordinates below " +
                         std::to_string(d));
      }
      const auto& bi = model.bases()[static_cast<std::size_t>(i)];
      const auto& bj = model.bases()[static_cast<std::size_t>(j)];
      std::vector<DimQuery> q(static_cast<std::size_t>(d), DimQuery::full());
      std::ostringstream buf;
      buf << "x,y,density\n";
      char line[96];
      const int n = grid_resolution;
      for (int a = 0; a < n; ++a) {
        const double x = bi.lower() + (bi.upper() - bi.lower()) * (a + 0.5) / n;
        for (int b = 0; b < n; ++b) {
          const double y = bj.lower() + (bj.upper() - bj.lower()) * (b + 0.5) / n;
          q[static_cast<std::size_t>(i)] = DimQuery::point(x);
          q[static_cast<std::size_t>(j)] = DimQuery::point(y);
          std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", x, y, model.query(q));
          buf << line;
        }
      }
      if (grid_out.empty() || grid_out == "-") {
        std::cout << buf.str();
      } else {
        std::ofstream f(grid_out);
        if (!f) throw std::runtime_error("cannot write '" + grid_out + "'");
        f << buf.str();
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "ttde: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ttde: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ttde: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
