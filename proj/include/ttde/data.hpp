#pragma once

#include "ttde/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ttde {

/// Per-dimension [lower, upper] boxes.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Data min/max widened by 1e-6 of the range on each side. A dimension with
/// zero range gets [x - 0.5, x + 0.5].
Bounds compute_bounds(const Samples& samples);

/// Sample matrix with domain bounds and a seeded train/validation split.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Samples samples, std::uint64_t seed = 0,
                   double validation_fraction = 0.1);

  const Samples& samples() const { return samples_; }
  Index size() const { return samples_.rows(); }
  int dims() const { return static_cast<int>(samples_.cols()); }
  const Bounds& bounds() const { return bounds_; }
  std::uint64_t seed() const { return seed_; }
  double validation_fraction() const { return validation_fraction_; }

  const std::vector<Index>& train_indices() const { return train_; }
  const std::vector<Index>& validation_indices() const { return validation_; }
  Samples train() const;
  Samples validation() const;

  /// Redraws the split. The bounds always cover all rows.
  void resplit(double validation_fraction, std::uint64_t seed);

 private:
  Samples samples_;
  Bounds bounds_;
  std::uint64_t seed_ = 0;
  double validation_fraction_ = 0.1;
  std::vector<Index> train_;
  std::vector<Index> validation_;
};

/// Rows of `samples` selected by `rows`, in that order.
Samples select_rows(const Samples& samples, std::span<const Index> rows);

/// Two interleaving unit half circles: (cos t, sin t) and
/// (1 - cos t, 0.5 - sin t), t ~ U[0, pi]. The first ceil(n/2) rows are the
/// upper moon. Isotropic Gaussian noise of standard deviation `noise`.
Samples two_moons(Index n, double noise, std::uint64_t seed);
Dataset gen_two_moons(Index n, double noise, std::uint64_t seed);

/// 2D checkerboard on [-4, 4]^2: uniform on the 8 dark cells of a 4x4
/// board of 2x2 cells.
Samples checkerboard(Index n, std::uint64_t seed);
Dataset gen_checkerboard(Index n, std::uint64_t seed);

/// Equal-weight isotropic Gaussians at cube corners, followed by independent
/// standard-normal noise coordinates.
class CornerMixture {
 public:
  CornerMixture(Matrix centers, double sigma, int noise_dims);

  /// The seven corners of {0, 6 sigma}^3 other than the origin.
  static CornerMixture seven_corners(double sigma, int noise_dims);
  /// `components` distinct corners of the unit cube {0, 1}^cube_dims, chosen
  /// uniformly at random.
  static CornerMixture random_corners(int cube_dims, int components,
                                      double sigma, int noise_dims,
                                      std::uint64_t seed);

  int dims() const { return static_cast<int>(centers_.cols()) + noise_dims_; }
  int components() const { return static_cast<int>(centers_.rows()); }
  const Matrix& centers() const { return centers_; }
  double sigma() const { return sigma_; }
  int noise_dims() const { return noise_dims_; }

  /// Rows with their component labels (if `labels` is non-null).
  Samples sample(Index n, std::uint64_t seed,
                 std::vector<int>* labels = nullptr) const;
  double log_density(std::span<const double> x) const;
  Vector log_density(const Samples& x) const;

 private:
  Matrix centers_;
  double sigma_;
  int noise_dims_;
};

/// Seven-corner layout when cube_dims == 3 and components == 7, random
/// distinct unit-cube corners otherwise.
CornerMixture corner_mixture(int cube_dims, int components, int noise_dims,
                             double sigma, std::uint64_t seed);
Dataset gen_corner_mixture(int cube_dims, int components, int noise_dims,
                           double sigma, std::uint64_t seed, Index n);

struct CsvTable {
  Samples samples;
  std::vector<std::string> header;
  /// Rows dropped because a field was NaN or infinite.
  Index rejected_rows = 0;
};

/// Reads a numeric CSV. Throws std::runtime_error on a missing or empty file,
/// ragged rows or unparsable fields.
CsvTable read_csv(const std::string& path, bool has_header);
CsvTable read_csv(std::istream& in, bool has_header);

/// read_csv plus bounds and split.
Dataset load_csv(const std::string& path, bool has_header,
                 std::uint64_t seed = 0, double validation_fraction = 0.1);

/// Default column names x1..xd.
std::vector<std::string> default_header(int d);

/// Writes with 17 significant digits, so reading back is lossless.
void write_csv(std::ostream& out, const Samples& samples,
               const std::vector<std::string>& header);
void write_csv(const std::string& path, const Samples& samples,
               const std::vector<std::string>& header);

/// {"n", "d", "lower", "upper", "seed", "validation_fraction"}.
std::string manifest_json(const Dataset& data);

}  // namespace ttde
