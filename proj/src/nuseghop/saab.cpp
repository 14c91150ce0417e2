#include "lgnh/nuseghop/saab.hpp"

#include <algorithm>
#include <numeric>

#include "lgnh/core/error.hpp"

namespace lgnh::nuseghop {

bool SaabKernel::operator==(const SaabKernel& o) const {
  return weights.rows() == o.weights.rows() && weights.cols() == o.weights.cols() && weights == o.weights &&
         energies == o.energies && input_dims == o.input_dims && dc_included == o.dc_included &&
         offset.size() == o.offset.size() && offset == o.offset;
}

MomentAccumulator::MomentAccumulator(int dims)
    : dims_(dims), sum_(Eigen::VectorXd::Zero(dims)), outer_(Eigen::MatrixXd::Zero(dims, dims)), scratch_(dims) {}

void MomentAccumulator::add(std::span<const double> x, double w) {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), dims_);
  weight_ += w;
  sum_ += w * v;
  outer_.selfadjointView<Eigen::Lower>().rankUpdate(v, w);
}

void MomentAccumulator::add(std::span<const float> x, double w) {
  for (int i = 0; i < dims_; ++i) scratch_[i] = x[i];
  add(std::span<const double>(scratch_), w);
}

void MomentAccumulator::add_rows(const Eigen::MatrixXd& rows) {
  if (rows.cols() != dims_) throw InputError("moment rows have the wrong width");
  weight_ += static_cast<double>(rows.rows());
  sum_ += rows.colwise().sum().transpose();
  outer_.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  weight_ += other.weight_;
  sum_ += other.sum_;
  outer_ += other.outer_;
}

Eigen::VectorXd MomentAccumulator::mean() const {
  return weight_ > 0.0 ? Eigen::VectorXd(sum_ / weight_) : Eigen::VectorXd::Zero(dims_);
}

Eigen::MatrixXd MomentAccumulator::covariance() const {
  if (weight_ <= 0.0) return Eigen::MatrixXd::Zero(dims_, dims_);
  Eigen::MatrixXd second = outer_.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd mu = mean();
  return second / weight_ - mu * mu.transpose();
}

namespace {

SaabKernel fit_from(const Eigen::MatrixXd& raw_cov, const Eigen::VectorXd& raw_mean, double raw_scale,
                    const SaabOptions& opts, std::array<int, 3> dims) {
  const int k = static_cast<int>(raw_cov.rows());
  Eigen::MatrixXd cov = raw_cov;
  if (opts.remove_dc) {
    // Covariance of (I - 11'/K) x.
    const Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
    cov = proj * raw_cov * proj;
  }
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw EmptyKernel();
  const Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
  const double total = values.sum();
  if (!(total > 1e-12 * std::max(raw_scale, 1e-300))) throw EmptyKernel();

  int kept = 0;
  while (kept < k && kept < opts.max_dims && values[kept] / total >= opts.energy_threshold) ++kept;
  if (kept == 0) throw EmptyKernel();

  SaabKernel kernel;
  kernel.input_dims = dims;
  kernel.dc_included = opts.remove_dc;
  kernel.weights.resize(kept, k);
  for (int i = 0; i < kept; ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(k - 1 - i);
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0.0) v = -v;
    kernel.weights.row(i) = v.transpose();
    kernel.energies.push_back(values[i] / total);
  }
  if (!opts.remove_dc) kernel.offset = raw_mean;
  return kernel;
}

}  // namespace

SaabKernel fit_saab(const MomentAccumulator& m, const SaabOptions& opts, std::array<int, 3> dims) {
  if (dims[0] * dims[1] * dims[2] != m.dims()) throw InputError("Saab dims do not match sample size");
  const Eigen::MatrixXd cov = m.covariance();
  const Eigen::VectorXd mu = m.mean();
  const double scale = cov.trace() + mu.squaredNorm();
  return fit_from(cov, mu, scale, opts, dims);
}

SaabKernel fit_saab(const Eigen::MatrixXd& samples, const SaabOptions& opts, std::array<int, 3> dims) {
  if (samples.rows() < samples.cols()) throw InputError("fit_saab needs at least K samples");
  if (!samples.allFinite()) throw InputError("fit_saab samples must be finite");
  MomentAccumulator m(static_cast<int>(samples.cols()));
  std::vector<double> row(samples.cols());
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) row[c] = samples(r, c);
    m.add(std::span<const double>(row));
  }
  return fit_saab(m, opts, dims);
}

Eigen::MatrixXd apply_saab(const Eigen::MatrixXd& cuboids, const SaabKernel& kernel) {
  if (cuboids.cols() != kernel.input_size()) throw InputError("apply_saab: cuboid size mismatch");
  Eigen::MatrixXd out(cuboids.rows(), kernel.output_size());
  std::vector<double> in(cuboids.cols()), res(kernel.output_size());
  for (Eigen::Index r = 0; r < cuboids.rows(); ++r) {
    for (Eigen::Index c = 0; c < cuboids.cols(); ++c) in[c] = cuboids(r, c);
    apply_saab(in, kernel, res);
    for (int c = 0; c < kernel.output_size(); ++c) out(r, c) = res[c];
  }
  return out;
}

void apply_saab(std::span<const double> x, const SaabKernel& kernel, std::span<double> out) {
  const int k = kernel.input_size();
  if (static_cast<int>(x.size()) != k) throw InputError("apply_saab: cuboid size mismatch");
  if (kernel.dc_included) {
    const double dc = std::accumulate(x.begin(), x.end(), 0.0) / k;
    out[0] = dc;
    for (int i = 0; i < kernel.ac_count(); ++i) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += kernel.weights(i, j) * (x[j] - dc);
      out[i + 1] = acc;
    }
  } else {
    for (int i = 0; i < kernel.ac_count(); ++i) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += kernel.weights(i, j) * (x[j] - kernel.offset[j]);
      out[i] = acc;
    }
  }
}

}  // namespace lgnh::nuseghop
