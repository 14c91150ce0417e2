#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace lgnh::nuseghop {

/// Learned projection for one Saab (or plain PCA) stage.
struct SaabKernel {
  /// M_kept x K; rows are retained principal directions.
  Eigen::MatrixXd weights;
  /// Share of total AC variance per retained row, non-increasing.
  std::vector<double> energies;
  /// (f, f, channels); K = product.
  std::array<int, 3> input_dims{1, 1, 1};
  /// True for spatial Saab: the per-cuboid mean is removed before projection
  /// and emitted as the first output column.
  bool dc_included = true;
  /// Feature mean subtracted before projection when dc_included is false.
  Eigen::VectorXd offset;

  int input_size() const { return input_dims[0] * input_dims[1] * input_dims[2]; }
  int ac_count() const { return static_cast<int>(weights.rows()); }
  int output_size() const { return ac_count() + (dc_included ? 1 : 0); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(weights.size()); }

  bool operator==(const SaabKernel& other) const;
};

struct SaabOptions {
  double energy_threshold = 1e-3;
  int max_dims = 10;
  /// Spatial Saab when true, spectral PCA when false.
  bool remove_dc = true;
};

/// Weighted first and second moments of K-dimensional samples.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int dims);

  void add(std::span<const double> x, double weight = 1.0);
  void add(std::span<const float> x, double weight = 1.0);
  /// Adds every row of `rows` with unit weight.
  void add_rows(const Eigen::MatrixXd& rows);
  void merge(const MomentAccumulator& other);

  int dims() const { return dims_; }
  double weight() const { return weight_; }
  Eigen::VectorXd mean() const;
  /// Population covariance.
  Eigen::MatrixXd covariance() const;

 private:
  int dims_;
  double weight_ = 0.0;
  Eigen::VectorXd sum_;
  Eigen::MatrixXd outer_;
  std::vector<double> scratch_;
};

/// Fits from gathered moments. Throws EmptyKernel when no component reaches
/// the energy threshold.
SaabKernel fit_saab(const MomentAccumulator& moments, const SaabOptions& opts, std::array<int, 3> dims);
/// Rows are cuboids, (N*L) x K.
SaabKernel fit_saab(const Eigen::MatrixXd& samples, const SaabOptions& opts, std::array<int, 3> dims);

/// L x output_size. For spatial kernels column 0 holds the cuboid mean and the
/// remaining columns the AC projections of the mean-removed cuboid.
Eigen::MatrixXd apply_saab(const Eigen::MatrixXd& cuboids, const SaabKernel& kernel);

/// Single-vector form writing output_size values.
void apply_saab(std::span<const double> cuboid, const SaabKernel& kernel, std::span<double> out);

}  // namespace lgnh::nuseghop
