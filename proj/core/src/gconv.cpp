#include "dsfcnn/gconv.hpp"

#include <cmath>
#include <numbers>

namespace dsf {

GroupConfig GroupConfig::cyclic(int n) {
  if (n < 1) throw InvalidArgument("GroupConfig: group order must be >= 1");
  return GroupConfig{n};
}

double GroupConfig::angle(int s) const {
  return 2.0 * std::numbers::pi * static_cast<double>(s) /
         static_cast<double>(n);
}

GFeatureMap::GFeatureMap(long b, int channels, GroupConfig g, long h, long w)
    : data(b, static_cast<long>(channels) * g.n, h, w),
      channels(channels),
      group(g) {}

GFeatureMap GFeatureMap::wrap(Tensor4 t, int channels, GroupConfig g) {
  if (t.channels() != static_cast<long>(channels) * g.n)
    throw ShapeError("GFeatureMap::wrap: channel axis is not channels * n");
  GFeatureMap f;
  f.data = std::move(t);
  f.channels = channels;
  f.group = g;
  return f;
}

GConvLayer GConvLayer::input_layer(SteerableBasis basis, GroupConfig g,
                                   int in_c, int out_c) {
  GConvLayer l;
  l.basis = std::move(basis);
  l.group = g;
  l.in_channels = in_c;
  l.out_channels = out_c;
  l.is_input_layer = true;
  l.weights.assign(l.weight_count(), 0.0);
  return l;
}

GConvLayer GConvLayer::hidden_layer(SteerableBasis basis, GroupConfig g,
                                    int in_c, int out_c) {
  GConvLayer l;
  l.basis = std::move(basis);
  l.group = g;
  l.in_channels = in_c;
  l.out_channels = out_c;
  l.is_input_layer = false;
  l.weights.assign(l.weight_count(), 0.0);
  return l;
}

long GConvLayer::weight_count() const {
  return 2L * out_channels * in_channels * lambda_count() *
         basis.coefficient_count();
}

long GConvLayer::coeff_index(int o, int c, int lambda, int m) const {
  const long mc = basis.coefficient_count();
  return 2L * (((static_cast<long>(o) * in_channels + c) * lambda_count() +
                lambda) *
                   mc +
               m);
}

std::complex<double> GConvLayer::coeff(int o, int c, int lambda, int m) const {
  const long i = coeff_index(o, c, lambda, m);
  return {weights[i], weights[i + 1]};
}

void GConvLayer::set_coeff(int o, int c, int lambda, int m,
                           std::complex<double> v) {
  const long i = coeff_index(o, c, lambda, m);
  weights[i] = v.real();
  weights[i + 1] = v.imag();
}

namespace detail {

PhasedBasis phased_basis(const SteerableBasis& basis, const GroupConfig& g) {
  PhasedBasis pb;
  pb.n = g.n;
  pb.m_count = basis.coefficient_count();
  pb.area = static_cast<long>(basis.size) * basis.size;
  pb.re.resize(static_cast<size_t>(pb.n) * pb.m_count * pb.area);
  pb.im.resize(pb.re.size());
  for (int s = 0; s < pb.n; ++s) {
    const double theta = g.angle(s);
    for (int m = 0; m < pb.m_count; ++m) {
      const AtomicFilter& f = basis.filters[m];
      const std::complex<double> phase =
          std::polar(1.0, -static_cast<double>(f.freq) * theta);
      double* rp = pb.re.data() + (static_cast<long>(s) * pb.m_count + m) * pb.area;
      double* ip = pb.im.data() + (static_cast<long>(s) * pb.m_count + m) * pb.area;
      for (long i = 0; i < pb.area; ++i) {
        const std::complex<double> v = phase * f.samples[i];
        rp[i] = v.real();
        ip[i] = v.imag();
      }
    }
  }
  return pb;
}

}  // namespace detail

namespace {

using detail::PhasedBasis;
using detail::phased_basis;

void check_weights_size(const GConvLayer& layer, std::span<const double> w) {
  if (static_cast<long>(w.size()) != layer.weight_count())
    throw ShapeError("GConvLayer: weight buffer size mismatch");
}

}  // namespace

KernelStack synthesize_input_kernels(const GConvLayer& layer,
                                     std::span<const double> w) {
  if (!layer.is_input_layer)
    throw InvalidArgument("synthesize_input_kernels: layer is not input-layer");
  check_weights_size(layer, w);
  const int n = layer.group.n;
  const int mc = layer.basis.coefficient_count();
  const int K = layer.basis.size;
  const long area = static_cast<long>(K) * K;
  const PhasedBasis pb = phased_basis(layer.basis, layer.group);

  KernelStack ks(static_cast<long>(layer.out_channels) * n, layer.in_channels,
                 K, K);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < layer.in_channels; ++c) {
        double* dst = ks.data.data() +
                      ((static_cast<long>(o) * n + s) * layer.in_channels + c) *
                          area;
        for (int m = 0; m < mc; ++m) {
          const long wi = layer.coeff_index(o, c, 0, m);
          const double a = w[wi], b = w[wi + 1];
          const double* rp = pb.re_plane(s, m);
          const double* ip = pb.im_plane(s, m);
          for (long i = 0; i < area; ++i) dst[i] += a * rp[i] - b * ip[i];
        }
      }
    }
  }
  return ks;
}

KernelStack synthesize_input_kernels(const GConvLayer& layer) {
  return synthesize_input_kernels(layer, layer.weights);
}

KernelStack synthesize_hidden_kernels(const GConvLayer& layer,
                                      std::span<const double> w) {
  if (layer.is_input_layer)
    throw InvalidArgument("synthesize_hidden_kernels: layer is input-layer");
  check_weights_size(layer, w);
  const int n = layer.group.n;
  const int mc = layer.basis.coefficient_count();
  const int K = layer.basis.size;
  const long area = static_cast<long>(K) * K;
  const PhasedBasis pb = phased_basis(layer.basis, layer.group);

  KernelStack ks(static_cast<long>(layer.out_channels) * n,
                 static_cast<long>(layer.in_channels) * n, K, K);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int t = 0; t < n; ++t) {
      for (int c = 0; c < layer.in_channels; ++c) {
        for (int p = 0; p < n; ++p) {
          const int lambda = ((t - p) % n + n) % n;
          double* dst =
              ks.data.data() +
              ((static_cast<long>(o) * n + t) * layer.in_channels * n +
               static_cast<long>(c) * n + p) *
                  area;
          for (int m = 0; m < mc; ++m) {
            const long wi = layer.coeff_index(o, c, lambda, m);
            const double a = w[wi], b = w[wi + 1];
            const double* rp = pb.re_plane(p, m);
            const double* ip = pb.im_plane(p, m);
            for (long i = 0; i < area; ++i) dst[i] += a * rp[i] - b * ip[i];
          }
        }
      }
    }
  }
  return ks;
}

KernelStack synthesize_hidden_kernels(const GConvLayer& layer) {
  return synthesize_hidden_kernels(layer, layer.weights);
}

GFeatureMap input_g_conv(const Tensor4& image, const GConvLayer& layer) {
  if (!layer.is_input_layer)
    throw InvalidArgument("input_g_conv: layer is not an input layer");
  if (image.channels() != layer.in_channels)
    throw ShapeError("input_g_conv: image channels != layer in_channels");
  const KernelStack ks = synthesize_input_kernels(layer);
  return GFeatureMap::wrap(conv2d(image, ks, Padding::Same),
                           layer.out_channels, layer.group);
}

GFeatureMap hidden_g_conv(const GFeatureMap& f, const GConvLayer& layer) {
  if (layer.is_input_layer)
    throw InvalidArgument("hidden_g_conv: layer is an input layer");
  if (f.group.n != layer.group.n)
    throw ShapeError("hidden_g_conv: group order mismatch");
  if (f.channels != layer.in_channels)
    throw ShapeError("hidden_g_conv: feature channels != layer in_channels");
  const KernelStack ks = synthesize_hidden_kernels(layer);
  return GFeatureMap::wrap(conv2d(f.data, ks, Padding::Same),
                           layer.out_channels, layer.group);
}

GFeatureMap hidden_g_conv_materialized(const GFeatureMap& f,
                                       const GConvLayer& layer) {
  if (layer.is_input_layer)
    throw InvalidArgument("hidden_g_conv_materialized: layer is input-layer");
  if (f.group.n != layer.group.n)
    throw ShapeError("hidden_g_conv_materialized: group order mismatch");
  if (f.channels != layer.in_channels)
    throw ShapeError("hidden_g_conv_materialized: channel mismatch");

  const int n = layer.group.n;
  const int K = layer.basis.size;
  const int mc = layer.basis.coefficient_count();
  const long b = f.batch(), h = f.height(), w = f.width();

  // Base G-filter (rotation index 0): plane p holds the coefficient set at
  // coset (0 - p) mod n synthesized at angle 2*pi*p/n.
  std::vector<Tensor4> base(n);
  for (int p = 0; p < n; ++p) {
    Tensor4 planes(layer.out_channels, layer.in_channels, K, K);
    const double theta = layer.group.angle(p);
    const int lambda = ((-p) % n + n) % n;
    for (int o = 0; o < layer.out_channels; ++o) {
      for (int c = 0; c < layer.in_channels; ++c) {
        std::vector<std::complex<double>> wslice(mc);
        for (int m = 0; m < mc; ++m) wslice[m] = layer.coeff(o, c, lambda, m);
        const std::vector<double> grid =
            synthesize_filter(wslice, layer.basis, theta);
        std::copy(grid.begin(), grid.end(), planes.plane(o, c).begin());
      }
    }
    base[p] = std::move(planes);
  }

  GFeatureMap out(b, layer.out_channels, layer.group, h, w);
  for (int t = 0; t < n; ++t) {
    // Rotated copy t: plane p = base[(p - t) mod n] rotated by 2*pi*t/n.
    // Grid rotation (exact) when the angle is a multiple of 90 degrees,
    // phase re-synthesis otherwise.
    KernelStack slice(layer.out_channels, layer.in_channels, K, K);
    for (int p = 0; p < n; ++p) {
      const int src = ((p - t) % n + n) % n;
      Tensor4 rotated;
      if ((4L * t) % n == 0) {
        rotated = rot90(base[src], static_cast<int>(4L * t / n));
      } else {
        rotated = Tensor4(layer.out_channels, layer.in_channels, K, K);
        const int lambda = ((t - p) % n + n) % n;
        const double theta = layer.group.angle(p);
        for (int o = 0; o < layer.out_channels; ++o) {
          for (int c = 0; c < layer.in_channels; ++c) {
            std::vector<std::complex<double>> wslice(mc);
            for (int m = 0; m < mc; ++m)
              wslice[m] = layer.coeff(o, c, lambda, m);
            const std::vector<double> grid =
                synthesize_filter(wslice, layer.basis, theta);
            std::copy(grid.begin(), grid.end(), rotated.plane(o, c).begin());
          }
        }
      }
      std::copy(rotated.data().begin(), rotated.data().end(),
                slice.data.begin());
      // Correlate input orientation p against this plane stack, accumulate
      // into output orientation t.
      Tensor4 fp(b, layer.in_channels, h, w);
      for (long bi = 0; bi < b; ++bi)
        for (int c = 0; c < layer.in_channels; ++c) {
          const auto sp = f.plane(bi, c, p);
          std::copy(sp.begin(), sp.end(), fp.plane(bi, c).begin());
        }
      const Tensor4 part = conv2d(fp, slice, Padding::Same);
      for (long bi = 0; bi < b; ++bi)
        for (int o = 0; o < layer.out_channels; ++o) {
          auto dst = out.plane(bi, o, t);
          const auto sp = part.plane(bi, o);
          for (size_t i = 0; i < dst.size(); ++i) dst[i] += sp[i];
        }
    }
  }
  return out;
}

GFeatureMap gshift_rot(const GFeatureMap& f, int s) {
  const int n = f.group.n;
  int sn = s % n;
  if (sn < 0) sn += n;
  if (sn == 0) return f;

  GFeatureMap out(f.batch(), f.channels, f.group, f.height(), f.width());
  const bool exact = (4L * sn) % n == 0;
  const int quarters = exact ? static_cast<int>(4L * sn / n) : 0;
  const double theta = f.group.angle(sn);

  for (int c = 0; c < f.channels; ++c) {
    for (int sp = 0; sp < n; ++sp) {
      const int src = ((sp - sn) % n + n) % n;
      Tensor4 plane(f.batch(), 1, f.height(), f.width());
      for (long b = 0; b < f.batch(); ++b) {
        const auto sv = f.plane(b, c, src);
        std::copy(sv.begin(), sv.end(), plane.plane(b, 0).begin());
      }
      const Tensor4 rotated =
          exact ? rot90(plane, quarters) : rotate_interp(plane, theta);
      for (long b = 0; b < f.batch(); ++b) {
        const auto sv = rotated.plane(b, 0);
        auto dv = out.plane(b, c, sp);
        std::copy(sv.begin(), sv.end(), dv.begin());
      }
    }
  }
  return out;
}

Tensor4 g_pool(const GFeatureMap& f) {
  const int n = f.group.n;
  Tensor4 out(f.batch(), f.channels, f.height(), f.width());
  for (long b = 0; b < f.batch(); ++b) {
    for (int c = 0; c < f.channels; ++c) {
      auto dst = out.plane(b, c);
      for (int s = 0; s < n; ++s) {
        const auto src = f.plane(b, c, s);
        if (s == 0) {
          std::copy(src.begin(), src.end(), dst.begin());
        } else {
          for (size_t i = 0; i < dst.size(); ++i)
            if (src[i] > dst[i]) dst[i] = src[i];
        }
      }
    }
  }
  return out;
}

GFeatureMap g_batch_norm(const GFeatureMap& f, BatchNormState& state,
                         std::span<const double> gamma,
                         std::span<const double> beta, Mode mode) {
  const int C = f.channels;
  if (static_cast<int>(gamma.size()) != C || static_cast<int>(beta.size()) != C)
    throw ShapeError("g_batch_norm: gamma/beta must have one entry per channel");
  if (state.running_mean.empty()) {
    state.running_mean.assign(C, 0.0);
    state.running_var.assign(C, 1.0);
  }
  if (static_cast<int>(state.running_mean.size()) != C)
    throw ShapeError("g_batch_norm: state channel mismatch");

  const long n = f.group.n;
  const long per_channel = f.batch() * n * f.height() * f.width();

  std::vector<double> mean(C, 0.0), var(C, 0.0);
  if (mode == Mode::Train) {
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      for (long b = 0; b < f.batch(); ++b)
        for (int s = 0; s < n; ++s)
          for (double v : f.plane(b, c, s)) sum += v;
      mean[c] = sum / static_cast<double>(per_channel);
      double sq = 0.0;
      for (long b = 0; b < f.batch(); ++b)
        for (int s = 0; s < n; ++s)
          for (double v : f.plane(b, c, s)) {
            const double d = v - mean[c];
            sq += d * d;
          }
      var[c] = sq / static_cast<double>(per_channel);
    }
    if (!state.initialized) {
      state.running_mean = mean;
      state.running_var = var;
      state.initialized = true;
    } else {
      for (int c = 0; c < C; ++c) {
        state.running_mean[c] = state.momentum * state.running_mean[c] +
                                (1.0 - state.momentum) * mean[c];
        state.running_var[c] = state.momentum * state.running_var[c] +
                               (1.0 - state.momentum) * var[c];
      }
    }
  } else {
    if (!state.initialized)
      throw StateError("g_batch_norm: eval mode before any training step");
    mean = state.running_mean;
    var = state.running_var;
  }

  GFeatureMap out(f.batch(), C, f.group, f.height(), f.width());
  for (int c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(var[c] + state.eps);
    const double g = gamma[c], bshift = beta[c], mu = mean[c];
    for (long b = 0; b < f.batch(); ++b)
      for (int s = 0; s < n; ++s) {
        const auto src = f.plane(b, c, s);
        auto dst = out.plane(b, c, s);
        for (size_t i = 0; i < src.size(); ++i)
          dst[i] = g * (src[i] - mu) * inv + bshift;
      }
  }
  return out;
}

GFeatureMap g_spatial_pool(const GFeatureMap& f) {
  return GFeatureMap::wrap(max_pool2(f.data), f.channels, f.group);
}

GFeatureMap g_relu(const GFeatureMap& f) {
  return GFeatureMap::wrap(relu(f.data), f.channels, f.group);
}

GFeatureMap g_bilinear_up2(const GFeatureMap& f) {
  return GFeatureMap::wrap(bilinear_up2(f.data), f.channels, f.group);
}

GFeatureMap g_concat(const std::vector<const GFeatureMap*>& fs) {
  if (fs.empty()) throw InvalidArgument("g_concat: empty input list");
  const GFeatureMap& first = *fs.front();
  int channels = 0;
  for (const GFeatureMap* f : fs) {
    if (f->group.n != first.group.n)
      throw ShapeError("g_concat: group order mismatch");
    if (f->batch() != first.batch() || f->height() != first.height() ||
        f->width() != first.width())
      throw ShapeError("g_concat: spatial/batch shape mismatch");
    channels += f->channels;
  }
  GFeatureMap out(first.batch(), channels, first.group, first.height(),
                  first.width());
  for (long b = 0; b < first.batch(); ++b) {
    int co = 0;
    for (const GFeatureMap* f : fs) {
      for (int c = 0; c < f->channels; ++c) {
        for (int s = 0; s < f->group.n; ++s) {
          const auto src = f->plane(b, c, s);
          auto dst = out.plane(b, co + c, s);
          std::copy(src.begin(), src.end(), dst.begin());
        }
      }
      co += f->channels;
    }
  }
  return out;
}

}  // namespace dsf
