#include "dsfcnn/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "dsfcnn/autodiff.hpp"
#include "dsfcnn/model.hpp"

namespace dsf {

namespace {

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-5;

// fn(grads) runs the forward pass against the current contents of the
// checked buffers and returns the loss; with grads != nullptr it also runs
// backward and deposits d(loss)/d(buffer) per buffer.
using Fn = std::function<double(std::vector<std::vector<double>>* grads)>;

double normalized_err(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

double run_check(const Fn& fn, const std::vector<std::vector<double>*>& bufs) {
  std::vector<std::vector<double>> analytic;
  fn(&analytic);
  double worst = 0.0;
  for (size_t bi = 0; bi < bufs.size(); ++bi) {
    const std::vector<double> numeric = finite_diff(
        [&] { return fn(nullptr); }, std::span<double>(*bufs[bi]), kEps);
    for (size_t i = 0; i < numeric.size(); ++i)
      worst = std::max(worst, normalized_err(analytic[bi][i], numeric[i]));
  }
  return worst;
}

Tensor4 random_tensor(long b, long c, long h, long w, std::uint64_t seed,
                      double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Tensor4 t(b, c, h, w);
  for (double& v : t.data()) v = uni(rng);
  return t;
}

double check_relu() {
  Tensor4 x = random_tensor(2, 3, 4, 4, 11);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.relu(xi));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data()});
}

double check_conv2d(Padding pad) {
  Tensor4 x = random_tensor(2, 2, 6, 6, 21);
  Tensor4 k = random_tensor(3, 2, 3, 3, 22);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId ki = t.input(k);
        const ValueId loss = t.sum(t.relu(t.conv2d(xi, ki, pad)));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g, t.value(ki).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data(), &k.data()});
}

double check_add_bias() {
  Tensor4 x = random_tensor(2, 3, 4, 4, 31);
  std::vector<double> b = {0.3, -0.7, 0.1};
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        ParamStore ps;
        Param* bp = ps.add("b", {3});
        bp->value = b;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.relu(t.add_bias(xi, t.param(bp))));
        if (grads != nullptr) {
          ps.zero_grad();
          t.backward(loss);
          *grads = {t.value(xi).g, bp->grad};
        }
        return t.value(loss).x[0];
      },
      {&x.data(), &b});
}

double check_max_pool2() {
  Tensor4 x = random_tensor(2, 2, 6, 6, 41);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.max_pool2(xi));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data()});
}

double check_bilinear_up2() {
  Tensor4 x = random_tensor(1, 2, 3, 3, 51);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.relu(t.bilinear_up2(xi)));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data()});
}

double check_concat() {
  Tensor4 a = random_tensor(1, 2, 3, 3, 61);
  Tensor4 b = random_tensor(1, 1, 3, 3, 62);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId ai = t.input(a);
        const ValueId bi = t.input(b);
        const ValueId loss = t.sum(t.relu(t.concat({ai, bi})));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(ai).g, t.value(bi).g};
        }
        return t.value(loss).x[0];
      },
      {&a.data(), &b.data()});
}

double check_g_pool() {
  Tensor4 x = random_tensor(2, 2 * 4, 3, 3, 71);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.g_pool(xi, 4));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data()});
}

double check_g_batch_norm() {
  Tensor4 x = random_tensor(2, 2 * 2, 3, 3, 81);
  std::vector<double> gamma = {1.2, 0.8};
  std::vector<double> beta = {0.1, -0.2};
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        ParamStore ps;
        Param* gp = ps.add("gamma", {2});
        Param* bp = ps.add("beta", {2});
        gp->value = gamma;
        bp->value = beta;
        BatchNormState state;  // fresh per evaluation: train-mode output
                               // depends only on batch stats
        const ValueId xi = t.input(x);
        const ValueId y = t.g_batch_norm(xi, 2, t.param(gp), t.param(bp),
                                         state, Mode::Train);
        const ValueId loss = t.sum(t.relu(y));
        if (grads != nullptr) {
          ps.zero_grad();
          t.backward(loss);
          *grads = {t.value(xi).g, gp->grad, bp->grad};
        }
        return t.value(loss).x[0];
      },
      {&x.data(), &gamma, &beta});
}

double check_global_avg_pool() {
  Tensor4 x = random_tensor(2, 3, 4, 4, 91);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId loss = t.sum(t.relu(t.global_avg_pool(xi)));
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(xi).g};
        }
        return t.value(loss).x[0];
      },
      {&x.data()});
}

double check_softmax_ce() {
  Tensor4 logits = random_tensor(4, 5, 1, 1, 101, -2.0, 2.0);
  const std::vector<int> labels = {0, 3, 2, 4};
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        const ValueId li = t.input(logits);
        const ValueId loss = t.softmax_cross_entropy(li, labels);
        if (grads != nullptr) {
          t.backward(loss);
          *grads = {t.value(li).g};
        }
        return t.value(loss).x[0];
      },
      {&logits.data()});
}

GConvLayer small_layer(bool input_layer, int n, int in_c, int out_c) {
  const FrequencySpec spec{{{0, 0}, {1, 2}}};
  const SteerableBasis basis = build_basis(spec, 5, 0.6);
  return input_layer
             ? GConvLayer::input_layer(basis, GroupConfig::cyclic(n), in_c,
                                       out_c)
             : GConvLayer::hidden_layer(basis, GroupConfig::cyclic(n), in_c,
                                        out_c);
}

double check_input_g_conv() {
  GConvLayer layer = small_layer(true, 4, 1, 2);
  Tensor4 x = random_tensor(2, 1, 8, 8, 111);
  std::vector<double> w(layer.weight_count());
  std::mt19937_64 rng(112);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (double& v : w) v = uni(rng);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        ParamStore ps;
        Param* wp = ps.add("w", {layer.weight_count()});
        wp->value = w;
        const ValueId xi = t.input(x);
        const ValueId ki = t.synth_input_kernels(t.param(wp), layer);
        const ValueId loss = t.sum(t.relu(t.conv2d(xi, ki, Padding::Same)));
        if (grads != nullptr) {
          ps.zero_grad();
          t.backward(loss);
          *grads = {t.value(xi).g, wp->grad};
        }
        return t.value(loss).x[0];
      },
      {&x.data(), &w});
}

double check_hidden_g_conv() {
  GConvLayer layer = small_layer(false, 4, 2, 2);
  Tensor4 x = random_tensor(1, 2 * 4, 6, 6, 121);
  std::vector<double> w(layer.weight_count());
  std::mt19937_64 rng(122);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  for (double& v : w) v = uni(rng);
  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        Tape t;
        ParamStore ps;
        Param* wp = ps.add("w", {layer.weight_count()});
        wp->value = w;
        const ValueId xi = t.input(x);
        const ValueId ki = t.synth_hidden_kernels(t.param(wp), layer);
        const ValueId loss = t.sum(t.relu(t.conv2d(xi, ki, Padding::Same)));
        if (grads != nullptr) {
          ps.zero_grad();
          t.backward(loss);
          *grads = {t.value(xi).g, wp->grad};
        }
        return t.value(loss).x[0];
      },
      {&x.data(), &w});
}

double check_composed_model() {
  ModelConfig cfg = ModelConfig::classifier_default(4);
  cfg.stem_channels = 2;
  cfg.stem_hidden_channels = 2;
  cfg.stem_hidden_size = 5;
  cfg.block_units = {1, 1};
  cfg.block_channels = {2, 2};
  cfg.growth1 = 2;
  cfg.growth2 = 1;
  cfg.head_hidden = 3;
  cfg.num_classes = 3;
  Model model = Model::build_classifier(cfg);
  model.init_params(1234);
  // Nudge every bias/shift off zero: dead cells otherwise sit exactly on the
  // ReLU kink (conv of all-zero inputs plus a zero bias), where central
  // differences straddle the non-smooth point.
  std::mt19937_64 nudge(132);
  std::uniform_real_distribution<double> small(0.01, 0.06);
  for (auto& p : model.params().all()) {
    if (p->name.ends_with(".b") || p->name.ends_with(".beta"))
      for (double& v : p->value) v = small(nudge) * (nudge() % 2 ? 1.0 : -1.0);
  }

  Tensor4 x = random_tensor(2, 1, 8, 8, 131, 0.0, 1.0);
  const std::vector<int> labels = {1, 2};

  std::vector<std::vector<double>*> bufs;
  bufs.push_back(&x.data());
  for (const auto& p : model.params().all()) bufs.push_back(&p->value);

  return run_check(
      [&](std::vector<std::vector<double>>* grads) {
        // Fresh batch-norm states per evaluation keep the train-mode loss a
        // pure function of inputs and parameters.
        for (auto& [key, bn] : model.bn_states()) bn = BatchNormState{};
        Tape t;
        const ValueId xi = t.input(x);
        const ValueId logits = model.forward(t, xi, Mode::Train);
        const ValueId loss = t.softmax_cross_entropy(logits, labels);
        if (grads != nullptr) {
          model.params().zero_grad();
          t.backward(loss);
          *grads = {};
          grads->push_back(t.value(xi).g);
          for (const auto& p : model.params().all())
            grads->push_back(p->grad);
        }
        return t.value(loss).x[0];
      },
      bufs);
}

}  // namespace

std::vector<GradCheckResult> run_grad_checks(const std::string& only_op) {
  const std::vector<std::pair<std::string, std::function<double()>>> checks = {
      {"relu", check_relu},
      {"conv2d_same", [] { return check_conv2d(Padding::Same); }},
      {"conv2d_valid", [] { return check_conv2d(Padding::Valid); }},
      {"add_bias", check_add_bias},
      {"max_pool2", check_max_pool2},
      {"bilinear_up2", check_bilinear_up2},
      {"concat", check_concat},
      {"g_pool", check_g_pool},
      {"g_batch_norm", check_g_batch_norm},
      {"global_avg_pool", check_global_avg_pool},
      {"softmax_cross_entropy", check_softmax_ce},
      {"input_g_conv", check_input_g_conv},
      {"hidden_g_conv", check_hidden_g_conv},
      {"composed_model", check_composed_model},
  };

  std::vector<GradCheckResult> results;
  bool matched = false;
  for (const auto& [name, fn] : checks) {
    if (!only_op.empty() && name != only_op) continue;
    matched = true;
    GradCheckResult r;
    r.op = name;
    r.max_err = fn();
    r.pass = r.max_err <= kTol;
    results.push_back(std::move(r));
  }
  if (!only_op.empty() && !matched)
    throw InvalidArgument("grad-check: unknown op '" + only_op + "'");
  return results;
}

}  // namespace dsf
