#pragma once

#include <vector>

#include "lgnh/core/raster.hpp"

namespace lgnh {

/// Sampled, normalised Gaussian with radius ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);
/// Second derivative of the Gaussian, same support as gaussian_kernel.
std::vector<double> gaussian_second_derivative_kernel(double sigma);

/// Separable convolution of one channel with reflect-101 borders.
/// `row_kernel` runs along columns (x), `col_kernel` along rows (y).
GrayMap convolve_separable(const Raster<double>& src, int channel, const std::vector<double>& row_kernel,
                           const std::vector<double>& col_kernel);

GrayMap gaussian_blur(const Raster<double>& src, int channel, double sigma);

}  // namespace lgnh
