#include "dsfcnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsfcnn/parallel.hpp"

namespace dsf {

Param* ParamStore::add(std::string name, std::vector<long> dims) {
  if (find(name) != nullptr)
    throw InvalidArgument("ParamStore: duplicate parameter '" + name + "'");
  long n = 1;
  for (long d : dims) n *= d;
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->dims = std::move(dims);
  p->value.assign(n, 0.0);
  p->grad.assign(n, 0.0);
  p->frozen.assign(n, 0);
  params_.push_back(std::move(p));
  return params_.back().get();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

long ParamStore::total_size() const {
  long n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

long ParamStore::trainable_size() const {
  long n = 0;
  for (const auto& p : params_)
    for (std::uint8_t f : p->frozen) n += f == 0 ? 1 : 0;
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

ValueId Tape::alloc(std::vector<long> dims) {
  long n = 1;
  for (long d : dims) n *= d;
  TapeValue v;
  v.dims = std::move(dims);
  v.x.assign(n, 0.0);
  v.g.assign(n, 0.0);
  vals_.push_back(std::move(v));
  return static_cast<ValueId>(vals_.size()) - 1;
}

TapeValue& Tape::at(ValueId id) {
  if (id < 0 || id >= static_cast<ValueId>(vals_.size()))
    throw StateError("Tape: invalid value id");
  return vals_[static_cast<size_t>(id)];
}

const TapeValue& Tape::value(ValueId id) const {
  if (id < 0 || id >= static_cast<ValueId>(vals_.size()))
    throw StateError("Tape: invalid value id");
  return vals_[static_cast<size_t>(id)];
}

void Tape::check_4d(ValueId id, const char* op) const {
  if (value(id).dims.size() != 4)
    throw ShapeError(std::string(op) + ": expected a 4-d value");
}

Tensor4 Tape::tensor(ValueId id) const {
  const TapeValue& v = value(id);
  if (v.dims.size() != 4) throw ShapeError("Tape::tensor: value is not 4-d");
  Tensor4 t(v.dims[0], v.dims[1], v.dims[2], v.dims[3]);
  t.data() = v.x;
  return t;
}

ValueId Tape::input(const Tensor4& t) {
  const ValueId id = alloc({t.batch(), t.channels(), t.height(), t.width()});
  at(id).x = t.data();
  return id;
}

ValueId Tape::input_g(const GFeatureMap& f) { return input(f.data); }

ValueId Tape::param(Param* p) {
  const ValueId id = alloc(p->dims.empty() ? std::vector<long>{p->size()}
                                           : p->dims);
  at(id).x = p->value;
  param_slots_.emplace_back(id, p);
  return id;
}

ValueId Tape::conv2d(ValueId x, ValueId k, Padding pad) {
  check_4d(x, "conv2d");
  check_4d(k, "conv2d");
  const std::vector<long> xd = value(x).dims;
  const std::vector<long> kd = value(k).dims;
  if (xd[1] != kd[1]) throw ShapeError("conv2d: channel mismatch");
  long oh, ow;
  detail::conv2d_out_shape(xd[2], xd[3], kd[2], kd[3], pad, &oh, &ow);
  const ValueId y = alloc({xd[0], kd[0], oh, ow});
  detail::conv2d_forward(at(x).x.data(), xd[0], xd[1], xd[2], xd[3],
                         at(k).x.data(), kd[0], kd[2], kd[3], pad,
                         at(y).x.data());
  nodes_.push_back({"conv2d", [this, x, k, y, pad] {
    const auto& xd2 = at(x).dims;
    const auto& kd2 = at(k).dims;
    detail::conv2d_backward_input(at(y).g.data(), xd2[0], xd2[1], xd2[2],
                                  xd2[3], at(k).x.data(), kd2[0], kd2[2],
                                  kd2[3], pad, at(x).g.data());
    detail::conv2d_backward_kernel(at(y).g.data(), at(x).x.data(), xd2[0],
                                   xd2[1], xd2[2], xd2[3], kd2[0], kd2[2],
                                   kd2[3], pad, at(k).g.data());
  }});
  return y;
}

ValueId Tape::add_bias(ValueId x, ValueId bias) {
  check_4d(x, "add_bias");
  const std::vector<long> xd = value(x).dims;
  if (value(bias).size() != xd[1])
    throw ShapeError("add_bias: bias length must equal channel count");
  const ValueId y = alloc(xd);
  const long plane = xd[2] * xd[3];
  for (long b = 0; b < xd[0]; ++b)
    for (long c = 0; c < xd[1]; ++c) {
      const double bv = at(bias).x[c];
      const double* src = at(x).x.data() + (b * xd[1] + c) * plane;
      double* dst = at(y).x.data() + (b * xd[1] + c) * plane;
      for (long i = 0; i < plane; ++i) dst[i] = src[i] + bv;
    }
  nodes_.push_back({"add_bias", [this, x, bias, y, plane] {
    const auto& xd2 = at(x).dims;
    for (long b = 0; b < xd2[0]; ++b)
      for (long c = 0; c < xd2[1]; ++c) {
        const double* gy = at(y).g.data() + (b * xd2[1] + c) * plane;
        double* gx = at(x).g.data() + (b * xd2[1] + c) * plane;
        double acc = 0.0;
        for (long i = 0; i < plane; ++i) {
          gx[i] += gy[i];
          acc += gy[i];
        }
        at(bias).g[c] += acc;
      }
  }});
  return y;
}

ValueId Tape::relu(ValueId x) {
  const ValueId y = alloc(value(x).dims);
  const long n = value(x).size();
  for (long i = 0; i < n; ++i) {
    const double v = at(x).x[i];
    at(y).x[i] = v > 0.0 ? v : 0.0;
  }
  nodes_.push_back({"relu", [this, x, y, n] {
    for (long i = 0; i < n; ++i)
      if (at(x).x[i] > 0.0) at(x).g[i] += at(y).g[i];
  }});
  return y;
}

ValueId Tape::max_pool2(ValueId x) {
  check_4d(x, "max_pool2");
  const std::vector<long> xd = value(x).dims;
  if (xd[2] % 2 != 0 || xd[3] % 2 != 0)
    throw ShapeError("max_pool2: H and W must be even");
  const ValueId y = alloc({xd[0], xd[1], xd[2] / 2, xd[3] / 2});
  auto argmax = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<size_t>(value(y).size()));
  detail::max_pool2_forward(at(x).x.data(), xd[0] * xd[1], xd[2], xd[3],
                            at(y).x.data(), argmax->data());
  nodes_.push_back({"max_pool2", [this, x, y, argmax] {
    const auto& xd2 = at(x).dims;
    const long h = xd2[2], w = xd2[3];
    const long oh = h / 2, ow = w / 2;
    for (long p = 0; p < xd2[0] * xd2[1]; ++p) {
      const double* gy = at(y).g.data() + p * oh * ow;
      double* gx = at(x).g.data() + p * h * w;
      const std::uint8_t* am = argmax->data() + p * oh * ow;
      for (long oy = 0; oy < oh; ++oy)
        for (long ox = 0; ox < ow; ++ox) {
          const std::uint8_t a = am[oy * ow + ox];
          gx[(2 * oy + a / 2) * w + 2 * ox + a % 2] += gy[oy * ow + ox];
        }
    }
  }});
  return y;
}

ValueId Tape::bilinear_up2(ValueId x) {
  check_4d(x, "bilinear_up2");
  const std::vector<long> xd = value(x).dims;
  const ValueId y = alloc({xd[0], xd[1], xd[2] * 2, xd[3] * 2});
  detail::bilinear_up2_forward(at(x).x.data(), xd[0] * xd[1], xd[2], xd[3],
                               at(y).x.data());
  nodes_.push_back({"bilinear_up2", [this, x, y] {
    const auto& xd2 = at(x).dims;
    detail::bilinear_up2_backward(at(y).g.data(), xd2[0] * xd2[1], xd2[2],
                                  xd2[3], at(x).g.data());
  }});
  return y;
}

ValueId Tape::concat(const std::vector<ValueId>& xs) {
  if (xs.empty()) throw InvalidArgument("concat: empty input list");
  const std::vector<long> d0 = value(xs[0]).dims;
  long channels = 0;
  for (ValueId x : xs) {
    check_4d(x, "concat");
    const auto& d = value(x).dims;
    if (d[0] != d0[0] || d[2] != d0[2] || d[3] != d0[3])
      throw ShapeError("concat: batch/spatial mismatch");
    channels += d[1];
  }
  const ValueId y = alloc({d0[0], channels, d0[2], d0[3]});
  const long plane = d0[2] * d0[3];
  for (long b = 0; b < d0[0]; ++b) {
    long co = 0;
    for (ValueId x : xs) {
      const long cx = at(x).dims[1];
      const double* src = at(x).x.data() + b * cx * plane;
      double* dst = at(y).x.data() + (b * channels + co) * plane;
      std::copy(src, src + cx * plane, dst);
      co += cx;
    }
  }
  nodes_.push_back({"concat", [this, xs, y, plane, channels] {
    const long bn = at(y).dims[0];
    for (long b = 0; b < bn; ++b) {
      long co = 0;
      for (ValueId x : xs) {
        const long cx = at(x).dims[1];
        const double* gy = at(y).g.data() + (b * channels + co) * plane;
        double* gx = at(x).g.data() + b * cx * plane;
        for (long i = 0; i < cx * plane; ++i) gx[i] += gy[i];
        co += cx;
      }
    }
  }});
  return y;
}

ValueId Tape::g_pool(ValueId x, int orientations) {
  check_4d(x, "g_pool");
  const std::vector<long> xd = value(x).dims;
  if (orientations < 1 || xd[1] % orientations != 0)
    throw ShapeError("g_pool: channel axis not divisible by group order");
  const long C = xd[1] / orientations;
  const long plane = xd[2] * xd[3];
  const ValueId y = alloc({xd[0], C, xd[2], xd[3]});
  auto argmax = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<size_t>(value(y).size()));
  for (long b = 0; b < xd[0]; ++b)
    for (long c = 0; c < C; ++c) {
      double* dst = at(y).x.data() + (b * C + c) * plane;
      std::uint8_t* am = argmax->data() + (b * C + c) * plane;
      for (int s = 0; s < orientations; ++s) {
        const double* src =
            at(x).x.data() + ((b * C + c) * orientations + s) * plane;
        if (s == 0) {
          std::copy(src, src + plane, dst);
          std::fill(am, am + plane, 0);
        } else {
          for (long i = 0; i < plane; ++i)
            if (src[i] > dst[i]) {  // first orientation wins ties
              dst[i] = src[i];
              am[i] = static_cast<std::uint8_t>(s);
            }
        }
      }
    }
  nodes_.push_back({"g_pool", [this, x, y, argmax, C, plane, orientations] {
    const long bn = at(y).dims[0];
    for (long b = 0; b < bn; ++b)
      for (long c = 0; c < C; ++c) {
        const double* gy = at(y).g.data() + (b * C + c) * plane;
        const std::uint8_t* am = argmax->data() + (b * C + c) * plane;
        for (long i = 0; i < plane; ++i) {
          double* gx = at(x).g.data() +
                       ((b * C + c) * orientations + am[i]) * plane;
          gx[i] += gy[i];
        }
      }
  }});
  return y;
}

ValueId Tape::g_batch_norm(ValueId x, int orientations, ValueId gamma,
                           ValueId beta, BatchNormState& state, Mode mode) {
  check_4d(x, "g_batch_norm");
  const std::vector<long> xd = value(x).dims;
  if (orientations < 1 || xd[1] % orientations != 0)
    throw ShapeError("g_batch_norm: channel axis not divisible by group order");
  const long C = xd[1] / orientations;
  if (value(gamma).size() != C || value(beta).size() != C)
    throw ShapeError("g_batch_norm: gamma/beta length must equal channels");
  if (state.running_mean.empty()) {
    state.running_mean.assign(C, 0.0);
    state.running_var.assign(C, 1.0);
  }
  if (static_cast<long>(state.running_mean.size()) != C)
    throw ShapeError("g_batch_norm: state channel mismatch");

  const long per_channel = xd[0] * orientations * xd[2] * xd[3];
  const long plane = xd[2] * xd[3];
  const long cn = xd[1];

  auto mean = std::make_shared<std::vector<double>>(C, 0.0);
  auto inv = std::make_shared<std::vector<double>>(C, 0.0);

  if (mode == Mode::Train) {
    for (long c = 0; c < C; ++c) {
      double sum = 0.0;
      for (long b = 0; b < xd[0]; ++b) {
        const double* base =
            at(x).x.data() + (b * cn + c * orientations) * plane;
        for (long i = 0; i < orientations * plane; ++i) sum += base[i];
      }
      (*mean)[c] = sum / static_cast<double>(per_channel);
      double sq = 0.0;
      for (long b = 0; b < xd[0]; ++b) {
        const double* base =
            at(x).x.data() + (b * cn + c * orientations) * plane;
        for (long i = 0; i < orientations * plane; ++i) {
          const double d = base[i] - (*mean)[c];
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(per_channel);
      (*inv)[c] = 1.0 / std::sqrt(var + state.eps);
      if (!state.initialized) {
        state.running_mean[c] = (*mean)[c];
        state.running_var[c] = var;
      } else {
        state.running_mean[c] = state.momentum * state.running_mean[c] +
                                (1.0 - state.momentum) * (*mean)[c];
        state.running_var[c] =
            state.momentum * state.running_var[c] + (1.0 - state.momentum) * var;
      }
    }
    if (!state.initialized) state.initialized = true;
  } else {
    if (!state.initialized)
      throw StateError("g_batch_norm: eval mode before any training step");
    for (long c = 0; c < C; ++c) {
      (*mean)[c] = state.running_mean[c];
      (*inv)[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  const ValueId y = alloc(xd);
  auto xhat = std::make_shared<std::vector<double>>(value(x).size());
  for (long b = 0; b < xd[0]; ++b)
    for (long c = 0; c < C; ++c) {
      const double* src = at(x).x.data() + (b * cn + c * orientations) * plane;
      double* dst = at(y).x.data() + (b * cn + c * orientations) * plane;
      double* xh = xhat->data() + (b * cn + c * orientations) * plane;
      const double mu = (*mean)[c], iv = (*inv)[c];
      const double gm = at(gamma).x[c], bt = at(beta).x[c];
      for (long i = 0; i < orientations * plane; ++i) {
        xh[i] = (src[i] - mu) * iv;
        dst[i] = gm * xh[i] + bt;
      }
    }

  const bool train = mode == Mode::Train;
  nodes_.push_back({"g_batch_norm",
                    [this, x, y, gamma, beta, xhat, inv, C, orientations,
                     plane, cn, per_channel, train] {
    const long bn = at(x).dims[0];
    for (long c = 0; c < C; ++c) {
      double sum_gy = 0.0, sum_gy_xh = 0.0;
      for (long b = 0; b < bn; ++b) {
        const double* gy = at(y).g.data() + (b * cn + c * orientations) * plane;
        const double* xh = xhat->data() + (b * cn + c * orientations) * plane;
        for (long i = 0; i < orientations * plane; ++i) {
          sum_gy += gy[i];
          sum_gy_xh += gy[i] * xh[i];
        }
      }
      at(beta).g[c] += sum_gy;
      at(gamma).g[c] += sum_gy_xh;
      const double gm = at(gamma).x[c];
      const double iv = (*inv)[c];
      const double inv_n = 1.0 / static_cast<double>(per_channel);
      for (long b = 0; b < bn; ++b) {
        const double* gy = at(y).g.data() + (b * cn + c * orientations) * plane;
        const double* xh = xhat->data() + (b * cn + c * orientations) * plane;
        double* gx = at(x).g.data() + (b * cn + c * orientations) * plane;
        for (long i = 0; i < orientations * plane; ++i) {
          if (train) {
            gx[i] += gm * iv *
                     (gy[i] - sum_gy * inv_n - xh[i] * sum_gy_xh * inv_n);
          } else {
            gx[i] += gm * iv * gy[i];
          }
        }
      }
    }
  }});
  return y;
}

namespace {

// dK projected onto coefficient coordinates: for W = a*Re(B) - b*Im(B),
// da = <dK, Re(B)> and db = -<dK, Im(B)>.
void project_kernel_grad(const double* dk, const detail::PhasedBasis& pb,
                         const GConvLayer& meta, double* dw, bool hidden) {
  const int n = meta.group.n;
  const int mc = pb.m_count;
  const long area = pb.area;
  const int lam_n = hidden ? n : 1;
  const long in_block = hidden ? static_cast<long>(meta.in_channels) * n
                               : meta.in_channels;
  for (int o = 0; o < meta.out_channels; ++o)
    for (int t = 0; t < n; ++t)
      for (int c = 0; c < meta.in_channels; ++c)
        for (int p = 0; p < lam_n; ++p) {
          const int phase_s = hidden ? p : t;
          const int lambda = hidden ? ((t - p) % n + n) % n : 0;
          const long col = hidden ? static_cast<long>(c) * n + p : c;
          const double* dkp =
              dk + ((static_cast<long>(o) * n + t) * in_block + col) * area;
          for (int m = 0; m < mc; ++m) {
            const double* rp = pb.re_plane(phase_s, m);
            const double* ip = pb.im_plane(phase_s, m);
            double da = 0.0, db = 0.0;
            for (long i = 0; i < area; ++i) {
              da += dkp[i] * rp[i];
              db -= dkp[i] * ip[i];
            }
            const long wi = meta.coeff_index(o, c, lambda, m);
            dw[wi] += da;
            dw[wi + 1] += db;
          }
        }
}

}  // namespace

ValueId Tape::synth_input_kernels(ValueId w, const GConvLayer& meta) {
  if (!meta.is_input_layer)
    throw InvalidArgument("synth_input_kernels: meta is not input-layer");
  if (value(w).size() != meta.weight_count())
    throw ShapeError("synth_input_kernels: weight size mismatch");
  const KernelStack ks = synthesize_input_kernels(meta, at(w).x);
  const ValueId y = alloc({ks.out_c, ks.in_c, ks.kh, ks.kw});
  at(y).x = ks.data;
  auto pb = std::make_shared<detail::PhasedBasis>(
      detail::phased_basis(meta.basis, meta.group));
  const GConvLayer* mp = &meta;
  nodes_.push_back({"synth_input_kernels", [this, w, y, pb, mp] {
    project_kernel_grad(at(y).g.data(), *pb, *mp, at(w).g.data(), false);
  }});
  return y;
}

ValueId Tape::synth_hidden_kernels(ValueId w, const GConvLayer& meta) {
  if (meta.is_input_layer)
    throw InvalidArgument("synth_hidden_kernels: meta is input-layer");
  if (value(w).size() != meta.weight_count())
    throw ShapeError("synth_hidden_kernels: weight size mismatch");
  const KernelStack ks = synthesize_hidden_kernels(meta, at(w).x);
  const ValueId y = alloc({ks.out_c, ks.in_c, ks.kh, ks.kw});
  at(y).x = ks.data;
  auto pb = std::make_shared<detail::PhasedBasis>(
      detail::phased_basis(meta.basis, meta.group));
  const GConvLayer* mp = &meta;
  nodes_.push_back({"synth_hidden_kernels", [this, w, y, pb, mp] {
    project_kernel_grad(at(y).g.data(), *pb, *mp, at(w).g.data(), true);
  }});
  return y;
}

ValueId Tape::global_avg_pool(ValueId x) {
  check_4d(x, "global_avg_pool");
  const std::vector<long> xd = value(x).dims;
  const long plane = xd[2] * xd[3];
  const ValueId y = alloc({xd[0], xd[1], 1, 1});
  for (long p = 0; p < xd[0] * xd[1]; ++p) {
    const double* src = at(x).x.data() + p * plane;
    double acc = 0.0;
    for (long i = 0; i < plane; ++i) acc += src[i];
    at(y).x[p] = acc / static_cast<double>(plane);
  }
  nodes_.push_back({"global_avg_pool", [this, x, y, plane] {
    const auto& xd2 = at(x).dims;
    for (long p = 0; p < xd2[0] * xd2[1]; ++p) {
      const double g = at(y).g[p] / static_cast<double>(plane);
      double* gx = at(x).g.data() + p * plane;
      for (long i = 0; i < plane; ++i) gx[i] += g;
    }
  }});
  return y;
}

ValueId Tape::softmax_cross_entropy(ValueId logits, std::vector<int> labels,
                                    Tensor4* probs_out) {
  check_4d(logits, "softmax_cross_entropy");
  const auto& ld = value(logits).dims;
  if (ld[2] != 1 || ld[3] != 1)
    throw ShapeError("softmax_cross_entropy: logits must have H = W = 1");
  const long B = ld[0], C = ld[1];
  if (static_cast<long>(labels.size()) != B)
    throw ShapeError("softmax_cross_entropy: one label per batch row");
  for (int l : labels)
    if (l < 0 || l >= C)
      throw InvalidArgument("softmax_cross_entropy: label out of range");

  auto probs = std::make_shared<std::vector<double>>(B * C);
  double total = 0.0;
  for (long b = 0; b < B; ++b) {
    const double* row = at(logits).x.data() + b * C;
    double mx = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < C; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (long c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
    for (long c = 0; c < C; ++c)
      (*probs)[b * C + c] = std::exp(row[c] - mx) / denom;
    total += -(row[labels[b]] - mx - std::log(denom));
  }
  const ValueId y = alloc({1});
  at(y).x[0] = total / static_cast<double>(B);
  if (probs_out != nullptr) {
    *probs_out = Tensor4(B, C, 1, 1);
    probs_out->data() = *probs;
  }
  nodes_.push_back({"softmax_cross_entropy",
                    [this, logits, y, probs, labels, B, C] {
    const double gl = at(y).g[0] / static_cast<double>(B);
    for (long b = 0; b < B; ++b) {
      double* gx = at(logits).g.data() + b * C;
      for (long c = 0; c < C; ++c) {
        const double onehot = labels[b] == static_cast<int>(c) ? 1.0 : 0.0;
        gx[c] += gl * ((*probs)[b * C + c] - onehot);
      }
    }
  }});
  return y;
}

ValueId Tape::sum(ValueId x) {
  const long n = value(x).size();
  const ValueId y = alloc({1});
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += at(x).x[i];
  at(y).x[0] = acc;
  nodes_.push_back({"sum", [this, x, y, n] {
    const double g = at(y).g[0];
    for (long i = 0; i < n; ++i) at(x).g[i] += g;
  }});
  return y;
}

void Tape::backward(ValueId loss) {
  if (nodes_.empty())
    throw StateError("Tape::backward: no forward pass recorded");
  if (value(loss).size() != 1)
    throw InvalidArgument("Tape::backward: loss must be scalar");
  at(loss).g[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backprop();
  for (auto& [slot, p] : param_slots_) {
    const TapeValue& v = value(slot);
    for (long i = 0; i < v.size(); ++i) p->grad[i] += v.g[i];
  }
}

void Tape::reset() {
  vals_.clear();
  nodes_.clear();
  param_slots_.clear();
}

std::vector<double> finite_diff(const std::function<double()>& f,
                                std::span<double> p, double eps) {
  std::vector<double> grad(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double f1 = f();
    p[i] = saved - eps;
    const double f2 = f();
    p[i] = saved;
    grad[i] = (f1 - f2) / (2.0 * eps);
  }
  return grad;
}

void AdamState::init_like(const ParamStore& params) {
  m.clear();
  v.clear();
  for (const auto& p : params.all()) {
    m.emplace_back(p->size(), 0.0);
    v.emplace_back(p->size(), 0.0);
  }
  step = 0;
  initialized = true;
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  if (!state.initialized) state.init_like(params);
  if (state.m.size() != params.all().size())
    throw ShapeError("adam_step: state does not match parameter store");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.all().size(); ++pi) {
    Param& p = *params.all()[pi];
    std::vector<double>& m = state.m[pi];
    std::vector<double>& v = state.v[pi];
    if (static_cast<long>(m.size()) != p.size())
      throw ShapeError("adam_step: moment shape mismatch for " + p.name);
    for (long i = 0; i < p.size(); ++i) {
      if (p.frozen[i] != 0) continue;
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace dsf
