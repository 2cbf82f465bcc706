#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsfcnn/autodiff.hpp"
#include "dsfcnn/gconv.hpp"

namespace dsf {

/// Structure of one dense block: units of a 7x7 G-conv producing
/// `growth1` channels followed by a 5x5 G-conv producing `growth2`, each
/// unit consuming the concatenation of the block input and all previous
/// unit outputs, closed by a final 5x5 G-conv.
struct DenseBlockConfig {
  int units = 1;
  int conv1_size = 7;
  int conv1_growth = 14;
  int conv2_size = 5;
  int conv2_growth = 6;
  int final_size = 5;
  int out_channels = 0;
};

enum class HeadKind { Classifier, Segmenter };

struct ModelConfig {
  GroupConfig group{8};
  double sigma = 0.6;
  FrequencySpec spec7;  // basis caps for 7x7 filters
  FrequencySpec spec5;  // basis caps for 5x5 filters
  int in_channels = 1;

  int stem_channels = 16;
  int stem_hidden_channels = 16;
  int stem_hidden_size = 7;

  std::vector<int> block_units{3, 4, 5, 6};
  std::vector<int> block_channels{24, 32, 48, 64};
  int growth1 = 14;
  int growth2 = 6;

  HeadKind head = HeadKind::Classifier;
  int num_classes = 10;
  int num_maps = 2;
  int head_hidden = 64;

  std::vector<int> decoder_units{4, 3, 2};
  std::vector<int> decoder_channels;  // defaults to reversed encoder widths

  double width_mult = 1.0;
  std::optional<long> budget_target;

  static ModelConfig classifier_default(int group_order);
  static ModelConfig segmenter_default(int group_order);

  /// Channel width after applying the multiplier (round half up, min 1).
  int scaled(int width) const;
  const FrequencySpec& spec_for(int filter_size) const;
  void validate() const;
};

struct ForwardProbes {
  ValueId feature_a = -1;  // after the 2nd G-conv stage
  int feature_a_channels = 0;
  ValueId feature_b = -1;  // after the final pre-head G-conv stage
  int feature_b_channels = 0;
};

/// A built network: parameter store, batch-norm states, and a tape-forward.
class Model {
 public:
  static Model build_classifier(const ModelConfig& cfg);
  static Model build_segmenter(const ModelConfig& cfg);

  /// Records the whole network on the tape. Classifier output: logits
  /// (B, num_classes, 1, 1). Segmenter output: (B, num_maps, H, W).
  ValueId forward(Tape& tape, ValueId image, Mode mode,
                  ForwardProbes* probes = nullptr);

  /// Inference without gradient bookkeeping reuse; convenience wrapper that
  /// runs forward on a scratch tape and returns the output tensor.
  Tensor4 predict(const Tensor4& images, Mode mode = Mode::Eval);

  void init_params(std::uint64_t seed);

  /// Forward-invariance smoke test with the current parameters: classifier
  /// logits must match under a 90-degree input rotation. Throws
  /// NumericError on failure. Batch-norm states are restored afterwards.
  void invariance_check();

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::vector<std::pair<std::string, BatchNormState>>& bn_states() {
    return bn_;
  }
  const std::vector<std::pair<std::string, BatchNormState>>& bn_states() const {
    return bn_;
  }
  const ModelConfig& config() const { return cfg_; }
  /// Trainable parameter count: frozen coordinates (imaginary parts of k = 0
  /// steerable coefficients) are storage, not parameters.
  long param_total() const { return params_.trainable_size(); }

 private:
  struct GConvStage {
    GConvLayer meta;
    Param* w = nullptr;
    Param* gamma = nullptr;
    Param* beta = nullptr;
    int bn_index = -1;
  };
  struct Block {
    std::vector<std::pair<GConvStage, GConvStage>> units;
    GConvStage final_conv;
  };
  struct HeadConv {
    Param* w = nullptr;
    Param* b = nullptr;
  };

  GConvStage make_stage(const std::string& name, int filter_size, int in_c,
                        int out_c, bool input_layer);
  Block make_block(const std::string& name, int in_c, int units, int out_c);
  HeadConv make_head_conv(const std::string& name, int in_c, int out_c);

  ValueId run_stage(Tape& t, ValueId x, GConvStage& st, Mode mode);
  ValueId run_block(Tape& t, ValueId x, Block& blk, Mode mode);
  ValueId run_head_conv(Tape& t, ValueId x, HeadConv& hc);

  ModelConfig cfg_;
  ParamStore params_;
  std::vector<std::pair<std::string, BatchNormState>> bn_;

  GConvStage stem_input_, stem_hidden_;
  std::vector<Block> blocks_;
  std::vector<Block> decoder_blocks_;
  GConvStage decoder_final_;
  std::vector<HeadConv> head_;
};

/// Independent parameter ledger computed from the configuration arithmetic;
/// must equal Model::param_total() exactly.
long analytic_param_count(const ModelConfig& cfg);

enum class FilterFamily { Plain, Standard, Steerable };

/// Filter-count budgeting that holds total parameters roughly constant when
/// the group grows: plain filters keep the base count, standard G-filters
/// divide by sqrt(n), steerable G-filters divide by k*sqrt(n)/K^2. Round
/// half up, minimum 1.
long budget_filters(long base_filters, int group_order, long k_params,
                    int filter_size, FilterFamily family);

}  // namespace dsf
