#pragma once

#include <complex>
#include <span>
#include <vector>

#include "dsfcnn/basis.hpp"
#include "dsfcnn/tensor.hpp"

namespace dsf {

/// The cyclic rotation group C_n: angles 2*pi*s/n for s = 0..n-1.
struct GroupConfig {
  int n = 1;

  static GroupConfig cyclic(int n);
  double angle(int s) const;
};

/// A feature map on the group: n orientation planes per channel, stored as a
/// Tensor4 of shape (B, C*n, H, W) with the orientation index fastest inside
/// each channel block. Plane s of channel c is the restriction to the coset
/// at angle 2*pi*s/n.
struct GFeatureMap {
  Tensor4 data;
  int channels = 0;
  GroupConfig group;

  GFeatureMap() = default;
  GFeatureMap(long b, int channels, GroupConfig g, long h, long w);
  static GFeatureMap wrap(Tensor4 t, int channels, GroupConfig g);

  long batch() const { return data.batch(); }
  long height() const { return data.height(); }
  long width() const { return data.width(); }

  double& at(long b, int c, int s, long y, long x) {
    return data.at(b, static_cast<long>(c) * group.n + s, y, x);
  }
  double at(long b, int c, int s, long y, long x) const {
    return data.at(b, static_cast<long>(c) * group.n + s, y, x);
  }
  std::span<double> plane(long b, int c, int s) {
    return data.plane(b, static_cast<long>(c) * group.n + s);
  }
  std::span<const double> plane(long b, int c, int s) const {
    return data.plane(b, static_cast<long>(c) * group.n + s);
  }
};

/// A steerable G-convolution layer: complex coefficients over a fixed basis.
/// Coefficient layout: [out][in][lambda][m][2], m indexing basis.filters and
/// the last axis holding (re, im). The lambda axis has length group.n for
/// hidden layers and 1 for the input layer. Imaginary parts of k = 0
/// coefficients stay at zero.
struct GConvLayer {
  SteerableBasis basis;
  GroupConfig group;
  int in_channels = 0;
  int out_channels = 0;
  bool is_input_layer = false;
  std::vector<double> weights;

  static GConvLayer input_layer(SteerableBasis basis, GroupConfig g, int in_c,
                                int out_c);
  static GConvLayer hidden_layer(SteerableBasis basis, GroupConfig g, int in_c,
                                 int out_c);

  int lambda_count() const { return is_input_layer ? 1 : group.n; }
  long weight_count() const;
  long coeff_index(int o, int c, int lambda, int m) const;
  std::complex<double> coeff(int o, int c, int lambda, int m) const;
  void set_coeff(int o, int c, int lambda, int m, std::complex<double> v);
};

/// Planar filters for every orientation of the input layer, packed as
/// (out*n, in, K, K) with kernel (o*n + s) synthesized at angle 2*pi*s/n.
KernelStack synthesize_input_kernels(const GConvLayer& layer);
KernelStack synthesize_input_kernels(const GConvLayer& layer,
                                     std::span<const double> weights);

/// Planar filters for the hidden-layer G-convolution, packed as
/// (out*n, in*n, K, K): kernel (o*n + t)(c*n + p) uses the coefficient set at
/// coset index (t - p) mod n with phase e^{-ik * 2*pi*p/n}, so output
/// orientation t sums plain convolutions over input orientations p.
KernelStack synthesize_hidden_kernels(const GConvLayer& layer);
KernelStack synthesize_hidden_kernels(const GConvLayer& layer,
                                      std::span<const double> weights);

/// Convolves a planar image with every filter orientation (same padding).
GFeatureMap input_g_conv(const Tensor4& image, const GConvLayer& layer);

/// The hidden-layer G-convolution, fused over input orientations.
GFeatureMap hidden_g_conv(const GFeatureMap& f, const GConvLayer& layer);

/// Reference path: materializes the n rotated copies of the G-filter (grid
/// rotation of the synthesized planes whenever the angle is a multiple of 90
/// degrees) and sums plain convolutions. Equal to hidden_g_conv up to
/// floating-point noise.
GFeatureMap hidden_g_conv_materialized(const GFeatureMap& f,
                                       const GConvLayer& layer);

/// The group action on feature maps: every orientation plane rotates by
/// 2*pi*s/n and the orientation axis cyclically shifts by s. Exact (index
/// permutation) when the angle is a multiple of 90 degrees, bilinear
/// otherwise. Rotating an input image by 2*pi*s/n shifts input_g_conv output
/// by exactly this action.
GFeatureMap gshift_rot(const GFeatureMap& f, int s);

/// Pointwise maximum over the n orientation planes; collapses a G-feature
/// map to a rotation-invariant planar map.
Tensor4 g_pool(const GFeatureMap& f);

enum class Mode { Train, Eval };

struct BatchNormState {
  std::vector<double> running_mean, running_var;
  bool initialized = false;
  double eps = 1e-5;
  double momentum = 0.9;
};

/// Group-equivariant batch normalization: moments per channel aggregated
/// over (batch, orientation, H, W). gamma/beta have one entry per channel,
/// not per orientation plane.
GFeatureMap g_batch_norm(const GFeatureMap& f, BatchNormState& state,
                         std::span<const double> gamma,
                         std::span<const double> beta, Mode mode);

// Planar tensor ops lifted orientation-wise.
GFeatureMap g_spatial_pool(const GFeatureMap& f);
GFeatureMap g_relu(const GFeatureMap& f);
GFeatureMap g_bilinear_up2(const GFeatureMap& f);
GFeatureMap g_concat(const std::vector<const GFeatureMap*>& fs);

namespace detail {

/// Basis planes pre-multiplied by e^{-ik theta_s} for every orientation s.
/// Shared by kernel synthesis and the autodiff projection of kernel
/// gradients back onto coefficients.
struct PhasedBasis {
  int n = 0;
  int m_count = 0;
  long area = 0;
  std::vector<double> re, im;  // [s][m][grid]

  const double* re_plane(int s, int m) const {
    return re.data() + (static_cast<long>(s) * m_count + m) * area;
  }
  const double* im_plane(int s, int m) const {
    return im.data() + (static_cast<long>(s) * m_count + m) * area;
  }
};

PhasedBasis phased_basis(const SteerableBasis& basis, const GroupConfig& g);

}  // namespace detail

}  // namespace dsf
