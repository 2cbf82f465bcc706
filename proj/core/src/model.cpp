#include "dsfcnn/model.hpp"

#include <cmath>
#include <random>

namespace dsf {

ModelConfig ModelConfig::classifier_default(int group_order) {
  ModelConfig cfg;
  cfg.group = GroupConfig::cyclic(group_order);
  cfg.spec7 = FrequencySpec{{{0, 0}, {1, 2}, {2, 3}, {3, 2}}};
  cfg.spec5 = FrequencySpec{{{0, 0}, {1, 2}, {2, 2}}};
  cfg.head = HeadKind::Classifier;
  return cfg;
}

ModelConfig ModelConfig::segmenter_default(int group_order) {
  ModelConfig cfg = classifier_default(group_order);
  cfg.head = HeadKind::Segmenter;
  return cfg;
}

int ModelConfig::scaled(int width) const {
  const long s = static_cast<long>(
      std::floor(static_cast<double>(width) * width_mult + 0.5));
  return static_cast<int>(std::max<long>(1, s));
}

const FrequencySpec& ModelConfig::spec_for(int filter_size) const {
  if (filter_size == 7) return spec7;
  if (filter_size == 5) return spec5;
  throw InvalidArgument("ModelConfig: no basis spec for filter size " +
                        std::to_string(filter_size));
}

void ModelConfig::validate() const {
  if (group.n < 1) throw ConfigError("model: group order must be >= 1");
  if (sigma <= 0.0) throw ConfigError("model: sigma must be > 0");
  spec7.validate(7);
  spec5.validate(5);
  if (block_units.size() != block_channels.size())
    throw ConfigError("model: block_units and block_channels lengths differ");
  if (block_units.empty()) throw ConfigError("model: at least one dense block");
  for (int u : block_units)
    if (u < 1) throw ConfigError("model: block units must be >= 1");
  if (stem_hidden_size != 5 && stem_hidden_size != 7)
    throw ConfigError("model: stem hidden filter size must be 5 or 7");
  if (head == HeadKind::Segmenter) {
    if (decoder_units.size() != 3)
      throw ConfigError("model: segmenter decoder has exactly 3 dense blocks");
    if (block_units.size() != 4)
      throw ConfigError("model: segmenter encoder expects 4 dense blocks");
  }
}

Model::GConvStage Model::make_stage(const std::string& name, int filter_size,
                                    int in_c, int out_c, bool input_layer) {
  GConvStage st;
  const SteerableBasis basis =
      build_basis(cfg_.spec_for(filter_size), filter_size, cfg_.sigma);
  st.meta = input_layer
                ? GConvLayer::input_layer(basis, cfg_.group, in_c, out_c)
                : GConvLayer::hidden_layer(basis, cfg_.group, in_c, out_c);
  st.meta.weights.clear();  // coefficients live in the parameter store
  st.w = params_.add(name + ".w",
                     {out_c, in_c, st.meta.lambda_count(),
                      st.meta.basis.coefficient_count(), 2});
  // Freeze imaginary parts of k = 0 coefficients.
  const int mc = st.meta.basis.coefficient_count();
  for (long i = 0; i < st.w->size() / 2; ++i) {
    const int m = static_cast<int>(i % mc);
    if (st.meta.basis.filters[m].freq == 0) st.w->frozen[2 * i + 1] = 1;
  }
  st.gamma = params_.add(name + ".bn.gamma", {out_c});
  st.beta = params_.add(name + ".bn.beta", {out_c});
  bn_.emplace_back(name + ".bn", BatchNormState{});
  st.bn_index = static_cast<int>(bn_.size()) - 1;
  return st;
}

Model::Block Model::make_block(const std::string& name, int in_c, int units,
                               int out_c) {
  Block blk;
  const int g1 = cfg_.scaled(cfg_.growth1);
  const int g2 = cfg_.scaled(cfg_.growth2);
  int c = in_c;
  for (int u = 0; u < units; ++u) {
    const std::string uname = name + ".unit" + std::to_string(u);
    GConvStage c1 = make_stage(uname + ".conv1", 7, c, g1, false);
    GConvStage c2 = make_stage(uname + ".conv2", 5, g1, g2, false);
    blk.units.emplace_back(std::move(c1), std::move(c2));
    c += g2;
  }
  blk.final_conv = make_stage(name + ".final", 5, c, out_c, false);
  return blk;
}

Model::HeadConv Model::make_head_conv(const std::string& name, int in_c,
                                      int out_c) {
  HeadConv hc;
  hc.w = params_.add(name + ".w", {out_c, in_c, 1, 1});
  hc.b = params_.add(name + ".b", {out_c});
  return hc;
}

Model Model::build_classifier(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  m.cfg_.validate();

  const int sc = cfg.scaled(cfg.stem_channels);
  const int shc = cfg.scaled(cfg.stem_hidden_channels);
  m.stem_input_ = m.make_stage("stem.input", 7, cfg.in_channels, sc, true);
  m.stem_hidden_ =
      m.make_stage("stem.hidden", cfg.stem_hidden_size, sc, shc, false);

  int c = shc;
  for (size_t i = 0; i < cfg.block_units.size(); ++i) {
    const int out = cfg.scaled(cfg.block_channels[i]);
    m.blocks_.push_back(m.make_block("block" + std::to_string(i + 1), c,
                                     cfg.block_units[i], out));
    c = out;
  }

  const int hh = cfg.scaled(cfg.head_hidden);
  m.head_.push_back(m.make_head_conv("head.conv1", c, hh));
  m.head_.push_back(m.make_head_conv("head.conv2", hh, hh));
  m.head_.push_back(m.make_head_conv("head.conv3", hh, cfg.num_classes));
  return m;
}

Model Model::build_segmenter(const ModelConfig& cfg) {
  ModelConfig c2 = cfg;
  c2.head = HeadKind::Segmenter;
  c2.validate();
  Model m;
  m.cfg_ = c2;

  const int sc = c2.scaled(c2.stem_channels);
  const int shc = c2.scaled(c2.stem_hidden_channels);
  m.stem_input_ = m.make_stage("stem.input", 7, c2.in_channels, sc, true);
  m.stem_hidden_ =
      m.make_stage("stem.hidden", c2.stem_hidden_size, sc, shc, false);

  int c = shc;
  for (size_t i = 0; i < c2.block_units.size(); ++i) {
    const int out = c2.scaled(c2.block_channels[i]);
    m.blocks_.push_back(m.make_block("enc" + std::to_string(i + 1), c,
                                     c2.block_units[i], out));
    c = out;
  }

  std::vector<int> dec_c = c2.decoder_channels;
  if (dec_c.empty()) {
    dec_c = {c2.block_channels[2], c2.block_channels[1], c2.block_channels[0]};
  }
  if (dec_c.size() != 3)
    throw ConfigError("model: decoder_channels must have 3 entries");

  // Skip sources: encoder blocks 3, 2, 1 (scales H/4, H/2, H).
  for (int d = 0; d < 3; ++d) {
    const int skip_c = c2.scaled(c2.block_channels[2 - d]);
    const int in_c = c + skip_c;
    const int out = c2.scaled(dec_c[d]);
    m.decoder_blocks_.push_back(m.make_block("dec" + std::to_string(d + 1),
                                             in_c, c2.decoder_units[d], out));
    c = out;
  }
  m.decoder_final_ = m.make_stage("dec.final", 5, c, c, false);

  const int hh = c2.scaled(c2.head_hidden);
  m.head_.push_back(m.make_head_conv("head.conv1", c, hh));
  m.head_.push_back(m.make_head_conv("head.conv2", hh, c2.num_maps));
  return m;
}

ValueId Model::run_stage(Tape& t, ValueId x, GConvStage& st, Mode mode) {
  const ValueId w = t.param(st.w);
  const ValueId k = st.meta.is_input_layer ? t.synth_input_kernels(w, st.meta)
                                           : t.synth_hidden_kernels(w, st.meta);
  ValueId y = t.conv2d(x, k, Padding::Same);
  y = t.g_batch_norm(y, cfg_.group.n, t.param(st.gamma), t.param(st.beta),
                     bn_[st.bn_index].second, mode);
  return t.relu(y);
}

ValueId Model::run_block(Tape& t, ValueId x, Block& blk, Mode mode) {
  std::vector<ValueId> outs{x};
  for (auto& [c1, c2] : blk.units) {
    const ValueId cat = outs.size() == 1 ? outs[0] : t.concat(outs);
    ValueId h = run_stage(t, cat, c1, mode);
    h = run_stage(t, h, c2, mode);
    outs.push_back(h);
  }
  const ValueId cat = outs.size() == 1 ? outs[0] : t.concat(outs);
  return run_stage(t, cat, blk.final_conv, mode);
}

ValueId Model::run_head_conv(Tape& t, ValueId x, HeadConv& hc) {
  const ValueId w = t.param(hc.w);
  const ValueId b = t.param(hc.b);
  return t.add_bias(t.conv2d(x, w, Padding::Same), b);
}

ValueId Model::forward(Tape& t, ValueId image, Mode mode,
                       ForwardProbes* probes) {
  const auto dims = t.value(image).dims;
  if (dims.size() != 4) throw ShapeError("Model::forward: image must be 4-d");
  const long h = dims[2], w = dims[3];
  // One spatial pooling per encoder block for the classifier; the segmenter
  // keeps block 1 at full resolution.
  const long pools = cfg_.head == HeadKind::Classifier
                         ? static_cast<long>(blocks_.size())
                         : static_cast<long>(blocks_.size()) - 1;
  const long div = 1L << pools;
  if (h % div != 0 || w % div != 0)
    throw ConfigError("Model::forward: input spatial dims must be divisible by " +
                      std::to_string(div));

  ValueId x = run_stage(t, image, stem_input_, mode);
  x = run_stage(t, x, stem_hidden_, mode);
  if (probes != nullptr) {
    probes->feature_a = x;
    probes->feature_a_channels = stem_hidden_.meta.out_channels;
  }

  if (cfg_.head == HeadKind::Classifier) {
    for (auto& blk : blocks_) {
      x = t.max_pool2(x);
      x = run_block(t, x, blk, mode);
    }
    if (probes != nullptr) {
      probes->feature_b = x;
      probes->feature_b_channels = blocks_.back().final_conv.meta.out_channels;
    }
    ValueId p = t.g_pool(x, cfg_.group.n);
    p = run_head_conv(t, p, head_[0]);
    p = t.relu(p);
    p = run_head_conv(t, p, head_[1]);
    p = t.relu(p);
    p = run_head_conv(t, p, head_[2]);
    return t.global_avg_pool(p);
  }

  // Segmenter: pooling precedes encoder blocks 2..4 so that three decoder
  // upsamplings restore the input resolution.
  std::vector<ValueId> skips;
  x = run_block(t, x, blocks_[0], mode);
  skips.push_back(x);
  for (size_t i = 1; i < blocks_.size(); ++i) {
    x = t.max_pool2(x);
    x = run_block(t, x, blocks_[i], mode);
    if (i + 1 < blocks_.size()) skips.push_back(x);
  }
  for (int d = 0; d < 3; ++d) {
    x = t.bilinear_up2(x);
    x = t.concat({x, skips[skips.size() - 1 - d]});
    x = run_block(t, x, decoder_blocks_[d], mode);
  }
  x = run_stage(t, x, decoder_final_, mode);
  if (probes != nullptr) {
    probes->feature_b = x;
    probes->feature_b_channels = decoder_final_.meta.out_channels;
  }
  ValueId p = t.g_pool(x, cfg_.group.n);
  p = run_head_conv(t, p, head_[0]);
  p = t.relu(p);
  return run_head_conv(t, p, head_[1]);
}

Tensor4 Model::predict(const Tensor4& images, Mode mode) {
  Tape t;
  const ValueId out = forward(t, t.input(images), mode);
  return t.tensor(out);
}

void Model::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : params_.all()) {
    if (p->name.ends_with(".bn.gamma")) {
      std::fill(p->value.begin(), p->value.end(), 1.0);
    } else if (p->name.ends_with(".bn.beta") || p->name.ends_with(".b")) {
      std::fill(p->value.begin(), p->value.end(), 0.0);
    } else if (p->dims.size() == 5) {
      // Steerable coefficients: (out, in, lambda, m, 2).
      const long in_c = p->dims[1], lam = p->dims[2], mc = p->dims[3];
      const double s =
          std::sqrt(2.0 / static_cast<double>(in_c * lam * mc));
      for (long i = 0; i < p->size(); ++i) {
        const double draw = normal(rng) * s;
        p->value[i] = p->frozen[i] != 0 ? 0.0 : draw;
      }
    } else if (p->dims.size() == 4) {
      // 1x1 head convolutions: (out, in, 1, 1).
      const double s = std::sqrt(2.0 / static_cast<double>(p->dims[1]));
      for (long i = 0; i < p->size(); ++i) p->value[i] = normal(rng) * s;
    }
  }
  // Zero logits at initialization: the first loss is exactly ln(num_classes)
  // and early steps stay well-scaled.
  if (!head_.empty()) {
    Param* w = head_.back().w;
    std::fill(w->value.begin(), w->value.end(), 0.0);
  }
}

void Model::invariance_check() {
  const long div = cfg_.head == HeadKind::Classifier ? 16 : 8;
  const long hw = 2 * div;
  Tensor4 x(1, cfg_.in_channels, hw, hw);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : x.data()) v = uni(rng);

  const auto saved = bn_;
  Tensor4 a, b;
  try {
    a = predict(x, Mode::Train);
    b = predict(rot90(x, 1), Mode::Train);
  } catch (...) {
    bn_ = saved;
    throw;
  }
  bn_ = saved;

  if (cfg_.head == HeadKind::Segmenter) return;  // per-pixel output rotates

  double max_rel = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double denom = std::max(
        {std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-9});
    max_rel = std::max(max_rel, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  if (max_rel > 1e-6)
    throw NumericError(
        "Model::invariance_check: logits changed under 90-degree rotation "
        "(max rel " +
        std::to_string(max_rel) + ")");
}

long analytic_param_count(const ModelConfig& cfg) {
  cfg.validate();
  const int n = cfg.group.n;
  const long pc7 = param_count(cfg.spec7, n, true);
  const long pc5 = param_count(cfg.spec5, n, true);
  const long pc_stem_hidden = cfg.stem_hidden_size == 7 ? pc7 : pc5;
  const long pc_in = param_count(cfg.spec7, n, false);

  long total = 0;
  const long sc = cfg.scaled(cfg.stem_channels);
  const long shc = cfg.scaled(cfg.stem_hidden_channels);
  total += cfg.in_channels * sc * pc_in + 2 * sc;
  total += sc * shc * pc_stem_hidden + 2 * shc;

  const long g1 = cfg.scaled(cfg.growth1);
  const long g2 = cfg.scaled(cfg.growth2);
  auto block_params = [&](long in_c, int units, long out_c) {
    long t = 0;
    long c = in_c;
    for (int u = 0; u < units; ++u) {
      t += c * g1 * pc7 + 2 * g1;
      t += g1 * g2 * pc5 + 2 * g2;
      c += g2;
    }
    t += c * out_c * pc5 + 2 * out_c;
    return t;
  };

  long c = shc;
  std::vector<long> enc_out;
  for (size_t i = 0; i < cfg.block_units.size(); ++i) {
    const long out = cfg.scaled(cfg.block_channels[i]);
    total += block_params(c, cfg.block_units[i], out);
    enc_out.push_back(out);
    c = out;
  }

  const long hh = cfg.scaled(cfg.head_hidden);
  if (cfg.head == HeadKind::Classifier) {
    total += c * hh + hh;
    total += hh * hh + hh;
    total += hh * cfg.num_classes + cfg.num_classes;
    return total;
  }

  std::vector<long> dec_c;
  if (cfg.decoder_channels.empty()) {
    dec_c = {cfg.scaled(cfg.block_channels[2]), cfg.scaled(cfg.block_channels[1]),
             cfg.scaled(cfg.block_channels[0])};
  } else {
    for (int d : cfg.decoder_channels) dec_c.push_back(cfg.scaled(d));
  }
  for (int d = 0; d < 3; ++d) {
    const long in_c = c + enc_out[2 - d];
    total += block_params(in_c, cfg.decoder_units[d], dec_c[d]);
    c = dec_c[d];
  }
  total += c * c * pc5 + 2 * c;  // decoder final conv
  total += c * hh + hh;
  total += hh * cfg.num_maps + cfg.num_maps;
  return total;
}

long budget_filters(long base_filters, int group_order, long k_params,
                    int filter_size, FilterFamily family) {
  if (base_filters < 1 || group_order < 1 || k_params < 1 || filter_size < 1)
    throw InvalidArgument("budget_filters: positive inputs required");
  double out = static_cast<double>(base_filters);
  const double sqn = std::sqrt(static_cast<double>(group_order));
  switch (family) {
    case FilterFamily::Plain:
      break;
    case FilterFamily::Standard:
      out = static_cast<double>(base_filters) / sqn;
      break;
    case FilterFamily::Steerable:
      out = static_cast<double>(base_filters) *
            static_cast<double>(filter_size) * filter_size /
            (static_cast<double>(k_params) * sqn);
      break;
  }
  return std::max<long>(1, static_cast<long>(std::floor(out + 0.5)));
}

}  // namespace dsf
