#include "dsfcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsfcnn/parallel.hpp"

namespace dsf {

Tensor4::Tensor4(long b, long c, long h, long w) : b_(b), c_(c), h_(h), w_(w) {
  if (b < 0 || c < 0 || h < 0 || w < 0)
    throw ShapeError("Tensor4: negative dimension");
  data_.assign(static_cast<size_t>(b) * c * h * w, 0.0);
}

bool Tensor4::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

KernelStack::KernelStack(long o, long c, long h, long w)
    : out_c(o), in_c(c), kh(h), kw(w) {
  if (o <= 0 || c <= 0 || h <= 0 || w <= 0)
    throw ShapeError("KernelStack: non-positive dimension");
  if (h % 2 == 0 || w % 2 == 0)
    throw ShapeError("KernelStack: kernel dims must be odd");
  data.assign(static_cast<size_t>(o) * c * h * w, 0.0);
}

namespace detail {

void conv2d_out_shape(long h, long w, long kh, long kw, Padding pad, long* oh,
                      long* ow) {
  if (pad == Padding::Same) {
    *oh = h;
    *ow = w;
  } else {
    *oh = h - kh + 1;
    *ow = w - kw + 1;
    if (*oh <= 0 || *ow <= 0)
      throw ShapeError("conv2d: kernel larger than input for valid padding");
  }
}

void conv2d_forward(const double* x, long b, long c, long h, long w,
                    const double* k, long oc, long kh, long kw, Padding pad,
                    double* y) {
  long oh, ow;
  conv2d_out_shape(h, w, kh, kw, pad, &oh, &ow);
  const long ph = pad == Padding::Same ? (kh - 1) / 2 : 0;
  const long pw = pad == Padding::Same ? (kw - 1) / 2 : 0;

  parallel_for(b * oc, [&](std::int64_t begin, std::int64_t end) {
    // Row accumulator keeps the output hot while every (c, ky, kx) tap
    // streams over it; the output row is stored once.
    std::vector<double> acc(static_cast<size_t>(ow));
    for (std::int64_t idx = begin; idx < end; ++idx) {
      const long bi = idx / oc;
      const long o = idx % oc;
      double* yplane = y + (bi * oc + o) * oh * ow;
      const double* xbase = x + bi * c * h * w;
      const double* kbase = k + o * c * kh * kw;
      for (long oy = 0; oy < oh; ++oy) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (long ci = 0; ci < c; ++ci) {
          const double* xplane = xbase + ci * h * w;
          const double* kplane = kbase + ci * kh * kw;
          for (long ky = 0; ky < kh; ++ky) {
            const long iy = oy + ky - ph;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xplane + iy * w;
            const double* krow = kplane + ky * kw;
            for (long kx = 0; kx < kw; ++kx) {
              const double wgt = krow[kx];
              const long ox_lo = std::max<long>(0, pw - kx);
              const long ox_hi = std::min<long>(ow, w + pw - kx);
              const double* xs = xrow + (kx - pw);
              double* a = acc.data();
              for (long ox = ox_lo; ox < ox_hi; ++ox) a[ox] += wgt * xs[ox];
            }
          }
        }
        std::copy(acc.begin(), acc.end(), yplane + oy * ow);
      }
    }
  });
}

void conv2d_backward_input(const double* dy, long b, long c, long h, long w,
                           const double* k, long oc, long kh, long kw,
                           Padding pad, double* dx) {
  long oh, ow;
  conv2d_out_shape(h, w, kh, kw, pad, &oh, &ow);
  const long ph = pad == Padding::Same ? (kh - 1) / 2 : 0;
  const long pw = pad == Padding::Same ? (kw - 1) / 2 : 0;

  parallel_for(b * c, [&](std::int64_t begin, std::int64_t end) {
    // dx[iy][ix] = sum over (o, ky, kx) of dy[iy - ky + ph][ix - kx + pw] *
    // k[ky][kx]; accumulate one input row at a time.
    std::vector<double> acc(static_cast<size_t>(w));
    for (std::int64_t idx = begin; idx < end; ++idx) {
      const long bi = idx / c;
      const long ci = idx % c;
      double* dxplane = dx + (bi * c + ci) * h * w;
      const double* dybase = dy + bi * oc * oh * ow;
      for (long iy = 0; iy < h; ++iy) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (long o = 0; o < oc; ++o) {
          const double* dyplane = dybase + o * oh * ow;
          const double* kplane = k + (o * c + ci) * kh * kw;
          for (long ky = 0; ky < kh; ++ky) {
            const long oy = iy - ky + ph;
            if (oy < 0 || oy >= oh) continue;
            const double* dyrow = dyplane + oy * ow;
            const double* krow = kplane + ky * kw;
            for (long kx = 0; kx < kw; ++kx) {
              const double wgt = krow[kx];
              // ox = ix - kx + pw must lie in [0, ow)
              const long ix_lo = std::max<long>(0, kx - pw);
              const long ix_hi = std::min<long>(w, ow + kx - pw);
              const double* ds = dyrow - (kx - pw);
              double* a = acc.data();
              for (long ix = ix_lo; ix < ix_hi; ++ix) a[ix] += wgt * ds[ix];
            }
          }
        }
        double* dxrow = dxplane + iy * w;
        for (long ix = 0; ix < w; ++ix) dxrow[ix] += acc[ix];
      }
    }
  });
}

void conv2d_backward_kernel(const double* dy, const double* x, long b, long c,
                            long h, long w, long oc, long kh, long kw,
                            Padding pad, double* dk) {
  long oh, ow;
  conv2d_out_shape(h, w, kh, kw, pad, &oh, &ow);
  const long ph = pad == Padding::Same ? (kh - 1) / 2 : 0;
  const long pw = pad == Padding::Same ? (kw - 1) / 2 : 0;

  parallel_for(oc * c, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t idx = begin; idx < end; ++idx) {
      const long o = idx / c;
      const long ci = idx % c;
      double* dkplane = dk + (o * c + ci) * kh * kw;
      for (long ky = 0; ky < kh; ++ky) {
        for (long kx = 0; kx < kw; ++kx) {
          const long oy_lo = std::max<long>(0, ph - ky);
          const long oy_hi = std::min<long>(oh, h + ph - ky);
          const long ox_lo = std::max<long>(0, pw - kx);
          const long ox_hi = std::min<long>(ow, w + pw - kx);
          double acc = 0.0;
          for (long bi = 0; bi < b; ++bi) {
            const double* dyplane = dy + (bi * oc + o) * oh * ow;
            const double* xplane = x + (bi * c + ci) * h * w;
            for (long oy = oy_lo; oy < oy_hi; ++oy) {
              const double* xrow = xplane + (oy + ky - ph) * w + (kx - pw);
              const double* dyrow = dyplane + oy * ow;
              for (long ox = ox_lo; ox < ox_hi; ++ox)
                acc += dyrow[ox] * xrow[ox];
            }
          }
          dkplane[ky * kw + kx] += acc;
        }
      }
    }
  });
}

void max_pool2_forward(const double* x, long planes, long h, long w, double* y,
                       std::uint8_t* argmax) {
  const long oh = h / 2, ow = w / 2;
  for (long p = 0; p < planes; ++p) {
    const double* xp = x + p * h * w;
    double* yp = y + p * oh * ow;
    std::uint8_t* ap = argmax != nullptr ? argmax + p * oh * ow : nullptr;
    for (long oy = 0; oy < oh; ++oy) {
      for (long ox = 0; ox < ow; ++ox) {
        double best = xp[(2 * oy) * w + 2 * ox];
        std::uint8_t arg = 0;
        // First index wins ties: window scanned row-major.
        for (std::uint8_t i = 1; i < 4; ++i) {
          const double v = xp[(2 * oy + i / 2) * w + 2 * ox + i % 2];
          if (v > best) {
            best = v;
            arg = i;
          }
        }
        yp[oy * ow + ox] = best;
        if (ap != nullptr) ap[oy * ow + ox] = arg;
      }
    }
  }
}

namespace {

// align-corners-false source coordinate: (i + 0.5) / 2 - 0.5, edge-clamped.
inline void up2_weights(long i, long n, long* i0, long* i1, double* w1) {
  double s = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
  if (s < 0.0) s = 0.0;
  if (s > static_cast<double>(n - 1)) s = static_cast<double>(n - 1);
  *i0 = static_cast<long>(s);
  *i1 = std::min(*i0 + 1, n - 1);
  *w1 = s - static_cast<double>(*i0);
}

}  // namespace

void bilinear_up2_forward(const double* x, long planes, long h, long w,
                          double* y) {
  const long oh = 2 * h, ow = 2 * w;
  for (long p = 0; p < planes; ++p) {
    const double* xp = x + p * h * w;
    double* yp = y + p * oh * ow;
    for (long oy = 0; oy < oh; ++oy) {
      long y0, y1;
      double fy;
      up2_weights(oy, h, &y0, &y1, &fy);
      for (long ox = 0; ox < ow; ++ox) {
        long x0, x1;
        double fx;
        up2_weights(ox, w, &x0, &x1, &fx);
        const double v = (1.0 - fy) * ((1.0 - fx) * xp[y0 * w + x0] +
                                       fx * xp[y0 * w + x1]) +
                         fy * ((1.0 - fx) * xp[y1 * w + x0] +
                               fx * xp[y1 * w + x1]);
        yp[oy * ow + ox] = v;
      }
    }
  }
}

void bilinear_up2_backward(const double* dy, long planes, long h, long w,
                           double* dx) {
  const long oh = 2 * h, ow = 2 * w;
  for (long p = 0; p < planes; ++p) {
    const double* dyp = dy + p * oh * ow;
    double* dxp = dx + p * h * w;
    for (long oy = 0; oy < oh; ++oy) {
      long y0, y1;
      double fy;
      up2_weights(oy, h, &y0, &y1, &fy);
      for (long ox = 0; ox < ow; ++ox) {
        long x0, x1;
        double fx;
        up2_weights(ox, w, &x0, &x1, &fx);
        const double g = dyp[oy * ow + ox];
        dxp[y0 * w + x0] += (1.0 - fy) * (1.0 - fx) * g;
        dxp[y0 * w + x1] += (1.0 - fy) * fx * g;
        dxp[y1 * w + x0] += fy * (1.0 - fx) * g;
        dxp[y1 * w + x1] += fy * fx * g;
      }
    }
  }
}

}  // namespace detail

Tensor4 conv2d(const Tensor4& input, const KernelStack& kernels, Padding pad) {
  if (input.channels() != kernels.in_c)
    throw ShapeError("conv2d: input channels do not match kernel in-channels");
  long oh, ow;
  detail::conv2d_out_shape(input.height(), input.width(), kernels.kh,
                           kernels.kw, pad, &oh, &ow);
  Tensor4 out(input.batch(), kernels.out_c, oh, ow);
  detail::conv2d_forward(input.data().data(), input.batch(), input.channels(),
                         input.height(), input.width(), kernels.data.data(),
                         kernels.out_c, kernels.kh, kernels.kw, pad,
                         out.data().data());
  return out;
}

Tensor4 rot90(const Tensor4& t, int quarter_turns) {
  int q = quarter_turns % 4;
  if (q < 0) q += 4;
  if (q == 0) return t;
  const long h = t.height(), w = t.width();
  const long oh = (q % 2 == 0) ? h : w;
  const long ow = (q % 2 == 0) ? w : h;
  Tensor4 out(t.batch(), t.channels(), oh, ow);
  for (long b = 0; b < t.batch(); ++b) {
    for (long c = 0; c < t.channels(); ++c) {
      for (long y = 0; y < oh; ++y) {
        for (long x = 0; x < ow; ++x) {
          double v;
          switch (q) {
            case 1: v = t.at(b, c, x, w - 1 - y); break;
            case 2: v = t.at(b, c, h - 1 - y, w - 1 - x); break;
            default: v = t.at(b, c, h - 1 - x, y); break;
          }
          out.at(b, c, y, x) = v;
        }
      }
    }
  }
  return out;
}

Tensor4 rotate_interp(const Tensor4& t, double theta) {
  const long h = t.height(), w = t.width();
  const double cy = 0.5 * static_cast<double>(h - 1);
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double ct = std::cos(theta), st = std::sin(theta);
  Tensor4 out(t.batch(), t.channels(), h, w);
  for (long b = 0; b < t.batch(); ++b) {
    for (long c = 0; c < t.channels(); ++c) {
      const auto src = t.plane(b, c);
      auto dst = out.plane(b, c);
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          // Value at z is the input at e^{-i theta} z, with
          // z = (x - cx) + i(cy - y).
          const double a = static_cast<double>(x) - cx;
          const double bb = cy - static_cast<double>(y);
          const double sa = a * ct + bb * st;
          const double sb = bb * ct - a * st;
          const double sx = cx + sa;
          const double sy = cy - sb;
          const long x0 = static_cast<long>(std::floor(sx));
          const long y0 = static_cast<long>(std::floor(sy));
          const double fx = sx - static_cast<double>(x0);
          const double fy = sy - static_cast<double>(y0);
          double v = 0.0;
          for (int dy = 0; dy <= 1; ++dy) {
            for (int dx = 0; dx <= 1; ++dx) {
              const long yy = y0 + dy, xx = x0 + dx;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              const double wgt = (dy == 0 ? 1.0 - fy : fy) *
                                 (dx == 0 ? 1.0 - fx : fx);
              if (wgt == 0.0) continue;
              v += wgt * src[yy * w + xx];
            }
          }
          dst[y * w + x] = v;
        }
      }
    }
  }
  return out;
}

Tensor4 max_pool2(const Tensor4& t) {
  if (t.height() % 2 != 0 || t.width() % 2 != 0)
    throw ShapeError("max_pool2: H and W must be even");
  Tensor4 out(t.batch(), t.channels(), t.height() / 2, t.width() / 2);
  detail::max_pool2_forward(t.data().data(), t.batch() * t.channels(),
                            t.height(), t.width(), out.data().data(), nullptr);
  return out;
}

Tensor4 bilinear_up2(const Tensor4& t) {
  Tensor4 out(t.batch(), t.channels(), 2 * t.height(), 2 * t.width());
  detail::bilinear_up2_forward(t.data().data(), t.batch() * t.channels(),
                               t.height(), t.width(), out.data().data());
  return out;
}

Tensor4 relu(const Tensor4& t) {
  Tensor4 out = t;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

SoftmaxResult softmax_cross_entropy(const Tensor4& logits,
                                    const std::vector<int>& labels) {
  if (logits.height() != 1 || logits.width() != 1)
    throw ShapeError("softmax_cross_entropy: logits must have H = W = 1");
  const long b = logits.batch(), c = logits.channels();
  if (static_cast<long>(labels.size()) != b)
    throw ShapeError("softmax_cross_entropy: one label per batch row");
  for (int l : labels)
    if (l < 0 || l >= c)
      throw InvalidArgument("softmax_cross_entropy: label out of range");

  SoftmaxResult r;
  r.probs = Tensor4(b, c, 1, 1);
  double total = 0.0;
  for (long bi = 0; bi < b; ++bi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long ci = 0; ci < c; ++ci) mx = std::max(mx, logits.at(bi, ci, 0, 0));
    double denom = 0.0;
    for (long ci = 0; ci < c; ++ci)
      denom += std::exp(logits.at(bi, ci, 0, 0) - mx);
    for (long ci = 0; ci < c; ++ci)
      r.probs.at(bi, ci, 0, 0) = std::exp(logits.at(bi, ci, 0, 0) - mx) / denom;
    total += -(logits.at(bi, labels[bi], 0, 0) - mx - std::log(denom));
  }
  r.loss = total / static_cast<double>(b);
  return r;
}

}  // namespace dsf
