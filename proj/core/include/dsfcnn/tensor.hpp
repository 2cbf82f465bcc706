#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsfcnn/errors.hpp"

namespace dsf {

/// Dense row-major (batch, channels, height, width) array of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(long b, long c, long h, long w);

  long batch() const { return b_; }
  long channels() const { return c_; }
  long height() const { return h_; }
  long width() const { return w_; }
  long size() const { return static_cast<long>(data_.size()); }

  double& at(long b, long c, long y, long x) {
    return data_[((b * c_ + c) * h_ + y) * w_ + x];
  }
  double at(long b, long c, long y, long x) const {
    return data_[((b * c_ + c) * h_ + y) * w_ + x];
  }

  std::span<double> plane(long b, long c) {
    return {data_.data() + (b * c_ + c) * h_ * w_, static_cast<size_t>(h_ * w_)};
  }
  std::span<const double> plane(long b, long c) const {
    return {data_.data() + (b * c_ + c) * h_ * w_, static_cast<size_t>(h_ * w_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor4& o) const {
    return b_ == o.b_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  /// True when every entry is finite.
  bool all_finite() const;

 private:
  long b_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

/// Convolution kernels, shape (out_channels, in_channels, kh, kw). Spatial
/// dims must be odd so that same-padding is symmetric.
struct KernelStack {
  long out_c = 0, in_c = 0, kh = 0, kw = 0;
  std::vector<double> data;

  KernelStack() = default;
  KernelStack(long o, long c, long h, long w);

  double& at(long o, long c, long y, long x) {
    return data[((o * in_c + c) * kh + y) * kw + x];
  }
  double at(long o, long c, long y, long x) const {
    return data[((o * in_c + c) * kh + y) * kw + x];
  }
};

enum class Padding { Same, Valid };

/// Stride-1 cross-correlation (the deep-learning "convolution"; no kernel
/// flip). Same padding zero-fills; valid padding shrinks output to
/// (H-kh+1, W-kw+1).
Tensor4 conv2d(const Tensor4& input, const KernelStack& kernels, Padding padding);

/// Exact counter-clockwise rotation by quarter_turns * 90 degrees via index
/// permutation. Matches the complex-plane convention u = (x-c) + i(c-y): a
/// positive angle turns the image content counter-clockwise on screen.
Tensor4 rot90(const Tensor4& t, int quarter_turns);

/// Bilinear rotation about the grid centre by theta radians
/// (counter-clockwise, same convention as rot90). Samples falling outside
/// the grid read as zero.
Tensor4 rotate_interp(const Tensor4& t, double theta);

/// 2x2 max pooling with stride 2; requires even H and W.
Tensor4 max_pool2(const Tensor4& t);

/// 2x upsampling with bilinear interpolation (align-corners-false sampling,
/// edge-clamped).
Tensor4 bilinear_up2(const Tensor4& t);

Tensor4 relu(const Tensor4& t);

struct SoftmaxResult {
  double loss = 0.0;
  Tensor4 probs;  // (B, C, 1, 1)
};

/// Mean over the batch of -log softmax(logits)[label]. Logits must have
/// H = W = 1; labels must lie in [0, C).
SoftmaxResult softmax_cross_entropy(const Tensor4& logits,
                                    const std::vector<int>& labels);

namespace detail {

// Raw convolution kernels shared by the functional API and the autodiff
// tape. All loops accumulate in a fixed serial order per output element.
void conv2d_out_shape(long h, long w, long kh, long kw, Padding pad,
                      long* oh, long* ow);
void conv2d_forward(const double* x, long b, long c, long h, long w,
                    const double* k, long oc, long kh, long kw, Padding pad,
                    double* y);
void conv2d_backward_input(const double* dy, long b, long c, long h, long w,
                           const double* k, long oc, long kh, long kw,
                           Padding pad, double* dx);
void conv2d_backward_kernel(const double* dy, const double* x, long b, long c,
                            long h, long w, long oc, long kh, long kw,
                            Padding pad, double* dk);

void max_pool2_forward(const double* x, long planes, long h, long w, double* y,
                       std::uint8_t* argmax);
void bilinear_up2_forward(const double* x, long planes, long h, long w,
                          double* y);
void bilinear_up2_backward(const double* dy, long planes, long h, long w,
                           double* dx);

}  // namespace detail

}  // namespace dsf
