#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dsfcnn/gconv.hpp"
#include "dsfcnn/tensor.hpp"

namespace dsf {

/// A named trainable array. `frozen` marks coordinates the optimizer must
/// leave untouched (the imaginary parts of k = 0 steerable coefficients).
struct Param {
  std::string name;
  std::vector<long> dims;
  std::vector<double> value, grad;
  std::vector<std::uint8_t> frozen;

  long size() const { return static_cast<long>(value.size()); }
};

class ParamStore {
 public:
  Param* add(std::string name, std::vector<long> dims);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  long total_size() const;
  long trainable_size() const;  // excludes frozen coordinates
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

using ValueId = int;

struct TapeValue {
  std::vector<long> dims;
  std::vector<double> x, g;

  long size() const { return static_cast<long>(x.size()); }
};

/// Reverse-mode tape over whole-tensor operations. A forward pass appends
/// nodes; backward() applies the chain rule in reverse order and accumulates
/// into Param::grad for every parameter leaf. One tape per training thread.
class Tape {
 public:
  ValueId input(const Tensor4& t);
  ValueId input_g(const GFeatureMap& f);
  ValueId param(Param* p);

  ValueId conv2d(ValueId x, ValueId k, Padding pad);
  ValueId add_bias(ValueId x, ValueId bias);
  ValueId relu(ValueId x);
  ValueId max_pool2(ValueId x);
  ValueId bilinear_up2(ValueId x);
  ValueId concat(const std::vector<ValueId>& xs);
  ValueId g_pool(ValueId x, int orientations);
  ValueId g_batch_norm(ValueId x, int orientations, ValueId gamma,
                       ValueId beta, BatchNormState& state, Mode mode);
  ValueId synth_input_kernels(ValueId w, const GConvLayer& meta);
  ValueId synth_hidden_kernels(ValueId w, const GConvLayer& meta);
  ValueId global_avg_pool(ValueId x);
  ValueId softmax_cross_entropy(ValueId logits, std::vector<int> labels,
                                Tensor4* probs_out = nullptr);
  ValueId sum(ValueId x);

  const TapeValue& value(ValueId id) const;
  Tensor4 tensor(ValueId id) const;  // requires a 4-d value

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in
  /// reverse, then accumulates leaf gradients into their Params.
  void backward(ValueId loss);

  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::function<void()> backprop;
  };

  ValueId alloc(std::vector<long> dims);
  TapeValue& at(ValueId id);
  void check_4d(ValueId id, const char* op) const;

  std::vector<TapeValue> vals_;
  std::vector<Node> nodes_;
  std::vector<std::pair<ValueId, Param*>> param_slots_;
};

/// Central-difference gradient of f with respect to the array p, evaluated
/// coordinate by coordinate. f must be deterministic.
std::vector<double> finite_diff(const std::function<double()>& f,
                                std::span<double> p, double eps = 1e-6);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long step = 0;
  bool initialized = false;
  std::vector<std::vector<double>> m, v;  // parallel to ParamStore order

  void init_like(const ParamStore& params);
};

/// Standard Adam update with bias correction. Frozen coordinates keep their
/// value and zero moments.
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

}  // namespace dsf
