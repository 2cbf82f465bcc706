#pragma once

#include <string>

#include "dsfcnn/model.hpp"

namespace dsf {

/// Flat `key = value` run configuration with `#` comments and dotted section
/// prefixes (model.*, train.*, data.*, output.*). Unknown keys are rejected;
/// relative paths resolve against the config file's directory.
struct RunConfig {
  // model
  int group_n = 8;
  double sigma = 0.6;
  std::string spec7 = "0:0,1:2,2:3,3:2";
  std::string spec5 = "0:0,1:2,2:2";
  std::string head = "classifier";
  int num_classes = 10;
  int num_maps = 2;
  int stem_channels = 16;
  int stem_hidden_channels = 16;
  int stem_hidden_size = 7;
  std::vector<int> block_units{3, 4, 5, 6};
  std::vector<int> block_channels{24, 32, 48, 64};
  std::vector<int> decoder_units{4, 3, 2};
  std::vector<int> decoder_channels;
  int growth1 = 14;
  int growth2 = 6;
  int head_hidden = 64;
  double width_mult = 1.0;
  long budget_target = 0;  // 0 = unset

  // train
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  double lr_decay_factor = 0.1;
  double lr_decay_at = 0.75;  // fraction of epochs
  std::uint64_t seed = 1;

  // data
  std::string train_images, train_labels, test_images, test_labels;
  long train_count = 10000;
  long test_count = 2000;
  bool rotate = true;
  std::uint64_t rotate_seed_train = 7001;
  std::uint64_t rotate_seed_test = 7002;
  int pad_to = 32;
  int downscale = 2;

  // output
  std::string out_dir = ".";
  std::string metrics = "metrics.csv";
  std::string checkpoint_dir = ".";
  bool stable_timing = false;  // write 0.000 wall seconds for diffable logs

  static RunConfig load(const std::string& path);

  ModelConfig model_config() const;
};

}  // namespace dsf
