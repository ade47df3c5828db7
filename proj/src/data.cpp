#include "ttde/data.hpp"

#include "ttde/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ttde {

Bounds compute_bounds(const Samples& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("compute_bounds: no rows");
  Bounds b;
  for (Index k = 0; k < samples.cols(); ++k) {
    const double lo = samples.col(k).minCoeff();
    const double hi = samples.col(k).maxCoeff();
    const double range = hi - lo;
    if (range > 0.0) {
      b.lower.push_back(lo - 1e-6 * range);
      b.upper.push_back(hi + 1e-6 * range);
    } else {
      b.lower.push_back(lo - 0.5);
      b.upper.push_back(hi + 0.5);
    }
  }
  return b;
}

Dataset::Dataset(Samples samples, std::uint64_t seed,
                 double validation_fraction)
    : samples_(std::move(samples)) {
  if (samples_.rows() == 0 || samples_.cols() == 0) {
    throw std::invalid_argument("Dataset: empty sample matrix");
  }
  if (!samples_.allFinite()) {
    throw std::invalid_argument("Dataset: non-finite sample");
  }
  bounds_ = compute_bounds(samples_);
  resplit(validation_fraction, seed);
}

void Dataset::resplit(double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("Dataset: validation fraction must be in [0, 1)");
  }
  seed_ = seed;
  validation_fraction_ = validation_fraction;
  const Index n = size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Engine engine = make_engine(seed, 0x5EED5);
  // Fisher-Yates with the portable uniform source.
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(uniform01(engine) * static_cast<double>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(std::min(j, i))]);
  }
  auto n_val = static_cast<Index>(std::llround(validation_fraction * static_cast<double>(n)));
  if (validation_fraction > 0.0 && n >= 2) n_val = std::clamp<Index>(n_val, 1, n - 1);
  validation_.assign(order.begin(), order.begin() + n_val);
  train_.assign(order.begin() + n_val, order.end());
  std::sort(validation_.begin(), validation_.end());
  std::sort(train_.begin(), train_.end());
}

Samples select_rows(const Samples& samples, std::span<const Index> rows) {
  Samples out(static_cast<Index>(rows.size()), samples.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = samples.row(rows[i]);
  }
  return out;
}

Samples Dataset::train() const { return select_rows(samples_, train_); }
Samples Dataset::validation() const { return select_rows(samples_, validation_); }

Samples two_moons(Index n, double noise, std::uint64_t seed) {
  if (n < 0 || noise < 0.0) throw std::invalid_argument("two_moons: bad arguments");
  Samples out(n, 2);
  const Index upper = (n + 1) / 2;
  for (Index i = 0; i < n; ++i) {
    Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
    const double t = M_PI * uniform01(engine);
    if (i < upper) {
      out(i, 0) = std::cos(t);
      out(i, 1) = std::sin(t);
    } else {
      out(i, 0) = 1.0 - std::cos(t);
      out(i, 1) = 0.5 - std::sin(t);
    }
    if (noise > 0.0) {
      std::normal_distribution<double> g(0.0, noise);
      out(i, 0) += g(engine);
      out(i, 1) += g(engine);
    }
  }
  return out;
}

Dataset gen_two_moons(Index n, double noise, std::uint64_t seed) {
  return Dataset(two_moons(n, noise, seed), seed);
}

Samples checkerboard(Index n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("checkerboard: negative count");
  Samples out(n, 2);
  for (Index i = 0; i < n; ++i) {
    Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
    const double x1 = 4.0 * uniform01(engine) - 2.0;
    const double shift = uniform01(engine) < 0.5 ? 0.0 : 2.0;
    const double x2 = uniform01(engine) - shift;
    const double parity = std::floor(x1) - 2.0 * std::floor(std::floor(x1) / 2.0);
    out(i, 0) = 2.0 * x1;
    out(i, 1) = 2.0 * (x2 + parity);
  }
  return out;
}

Dataset gen_checkerboard(Index n, std::uint64_t seed) {
  return Dataset(checkerboard(n, seed), seed);
}

CornerMixture::CornerMixture(Matrix centers, double sigma, int noise_dims)
    : centers_(std::move(centers)), sigma_(sigma), noise_dims_(noise_dims) {
  if (centers_.rows() < 1 || !(sigma_ > 0.0) || noise_dims_ < 0) {
    throw std::invalid_argument("CornerMixture: bad arguments");
  }
}

CornerMixture CornerMixture::seven_corners(double sigma, int noise_dims) {
  Matrix c(7, 3);
  for (int j = 1; j < 8; ++j) {
    for (int b = 0; b < 3; ++b) c(j - 1, b) = ((j >> b) & 1) ? 6.0 * sigma : 0.0;
  }
  return CornerMixture(c, sigma, noise_dims);
}

CornerMixture CornerMixture::random_corners(int cube_dims, int components,
                                            double sigma, int noise_dims,
                                            std::uint64_t seed) {
  if (cube_dims < 1 || cube_dims > 30 || components < 1 ||
      static_cast<std::uint64_t>(components) > (std::uint64_t{1} << cube_dims)) {
    throw std::invalid_argument("random_corners: bad corner count");
  }
  Engine engine = make_engine(seed, 0xC0FE);
  std::vector<std::uint64_t> chosen;
  const double total = std::ldexp(1.0, cube_dims);
  while (static_cast<int>(chosen.size()) < components) {
    const auto c = static_cast<std::uint64_t>(uniform01(engine) * total);
    if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
  }
  Matrix centers(components, cube_dims);
  for (int j = 0; j < components; ++j) {
    for (int b = 0; b < cube_dims; ++b) {
      centers(j, b) = static_cast<double>((chosen[static_cast<std::size_t>(j)] >> b) & 1U);
    }
  }
  return CornerMixture(centers, sigma, noise_dims);
}

Samples CornerMixture::sample(Index n, std::uint64_t seed,
                              std::vector<int>* labels) const {
  const int cube = static_cast<int>(centers_.cols());
  Samples out(n, dims());
  if (labels) labels->assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
    const int c = std::min(components() - 1,
                           static_cast<int>(uniform01(engine) * components()));
    if (labels) (*labels)[static_cast<std::size_t>(i)] = c;
    std::normal_distribution<double> g;
    for (int k = 0; k < cube; ++k) out(i, k) = centers_(c, k) + sigma_ * g(engine);
    for (int k = 0; k < noise_dims_; ++k) out(i, cube + k) = g(engine);
  }
  return out;
}

double CornerMixture::log_density(std::span<const double> x) const {
  const int cube = static_cast<int>(centers_.cols());
  if (static_cast<int>(x.size()) != dims()) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  const double log2pi = std::log(2.0 * M_PI);
  std::vector<double> terms(static_cast<std::size_t>(components()));
  for (int c = 0; c < components(); ++c) {
    double sq = 0.0;
    for (int k = 0; k < cube; ++k) {
      const double z = (x[static_cast<std::size_t>(k)] - centers_(c, k)) / sigma_;
      sq += z * z;
    }
    terms[static_cast<std::size_t>(c)] = -0.5 * sq;
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  double out = top + std::log(s / components()) -
               cube * (std::log(sigma_) + 0.5 * log2pi);
  for (int k = 0; k < noise_dims_; ++k) {
    const double z = x[static_cast<std::size_t>(cube + k)];
    out += -0.5 * z * z - 0.5 * log2pi;
  }
  return out;
}

Vector CornerMixture::log_density(const Samples& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    out[i] = log_density(std::span<const double>(x.row(i).data(),
                                                 static_cast<std::size_t>(x.cols())));
  }
  return out;
}

CornerMixture corner_mixture(int cube_dims, int components, int noise_dims,
                             double sigma, std::uint64_t seed) {
  if (cube_dims == 3 && components == 7) {
    return CornerMixture::seven_corners(sigma, noise_dims);
  }
  return CornerMixture::random_corners(cube_dims, components, sigma, noise_dims, seed);
}

Dataset gen_corner_mixture(int cube_dims, int components, int noise_dims,
                           double sigma, std::uint64_t seed, Index n) {
  const CornerMixture mix = corner_mixture(cube_dims, components, noise_dims, sigma, seed);
  return Dataset(mix.sample(n, seed), seed);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in, bool has_header) {
  CsvTable table;
  std::vector<double> values;
  std::string line;
  std::size_t width = 0;
  Index rows = 0;
  Index line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (header_pending) {
      for (auto f : fields) table.header.emplace_back(f);
      width = fields.size();
      header_pending = false;
      continue;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " fields, got " +
                               std::to_string(fields.size()));
    }
    bool finite = true;
    const std::size_t mark = values.size();
    for (auto f : fields) {
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": cannot parse '" + std::string(f) + "'");
      }
      if (!std::isfinite(v)) finite = false;
      values.push_back(v);
    }
    if (!finite) {
      values.resize(mark);
      ++table.rejected_rows;
      continue;
    }
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("csv: no data rows");
  table.samples = Eigen::Map<const Samples>(values.data(), rows, static_cast<Index>(width));
  if (table.header.empty()) table.header = default_header(static_cast<int>(width));
  return table;
}

CsvTable read_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, has_header);
}

Dataset load_csv(const std::string& path, bool has_header, std::uint64_t seed,
                 double validation_fraction) {
  return Dataset(read_csv(path, has_header).samples, seed, validation_fraction);
}

std::vector<std::string> default_header(int d) {
  std::vector<std::string> h;
  for (int k = 1; k <= d; ++k) h.push_back("x" + std::to_string(k));
  return h;
}

void write_csv(std::ostream& out, const Samples& samples,
               const std::vector<std::string>& header) {
  if (static_cast<Index>(header.size()) != samples.cols()) {
    throw std::invalid_argument("write_csv: header width mismatch");
  }
  for (std::size_t k = 0; k < header.size(); ++k) {
    out << (k ? "," : "") << header[k];
  }
  out << '\n';
  char buf[32];
  for (Index i = 0; i < samples.rows(); ++i) {
    for (Index k = 0; k < samples.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", samples(i, k));
      if (k) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const Samples& samples,
               const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, samples, header);
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string manifest_json(const Dataset& data) {
  nlohmann::ordered_json j;
  j["n"] = data.size();
  j["d"] = data.dims();
  j["lower"] = data.bounds().lower;
  j["upper"] = data.bounds().upper;
  j["seed"] = data.seed();
  j["validation_fraction"] = data.validation_fraction();
  j["train"] = data.train_indices().size();
  j["validation"] = data.validation_indices().size();
  return j.dump(2);
}

}  // namespace ttde
