#include "dsfcnn/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>

#include "dsfcnn/checkpoint.hpp"
#include "dsfcnn/dataset.hpp"
#include "dsfcnn/gradcheck.hpp"
#include "dsfcnn/pgm.hpp"
#include "dsfcnn/run_config.hpp"

namespace dsf {

namespace {

namespace fs = std::filesystem;

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct Split {
  Tensor4 images;
  std::vector<int> labels;
};

Split load_split(const std::string& images_path, const std::string& labels_path,
                 long count, bool rotate, std::uint64_t rotate_seed, int pad_to,
                 int downscale) {
  if (images_path.empty() || labels_path.empty())
    throw ConfigError("data paths not set");
  IdxDataset ds = load_idx(images_path, labels_path);
  if (count > ds.count)
    throw DataError("requested " + std::to_string(count) + " samples, have " +
                    std::to_string(ds.count));
  ds = subset(ds, 0, count);
  if (rotate) ds = rotate_augment(ds, rotate_seed);
  Split split;
  split.labels = label_vector(ds);
  split.images = to_tensor(ds, pad_to, downscale);
  return split;
}

Tensor4 gather_batch(const Tensor4& all, const std::vector<long>& order,
                     long from, long to) {
  Tensor4 batch(to - from, all.channels(), all.height(), all.width());
  const long plane = all.channels() * all.height() * all.width();
  for (long i = from; i < to; ++i) {
    const double* src = all.data().data() + order[i] * plane;
    std::copy(src, src + plane, batch.data().data() + (i - from) * plane);
  }
  return batch;
}

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
};

EvalResult evaluate(Model& model, const Tensor4& xs,
                    const std::vector<int>& ys, int batch_size) {
  EvalResult r;
  long correct = 0;
  double loss_sum = 0.0;
  const long count = xs.batch();
  std::vector<long> order(count);
  for (long i = 0; i < count; ++i) order[i] = i;
  for (long from = 0; from < count; from += batch_size) {
    const long to = std::min<long>(count, from + batch_size);
    const Tensor4 batch = gather_batch(xs, order, from, to);
    std::vector<int> labels(ys.begin() + from, ys.begin() + to);
    Tape tape;
    Tensor4 probs;
    const ValueId logits = model.forward(tape, tape.input(batch), Mode::Eval);
    const ValueId loss =
        tape.softmax_cross_entropy(logits, labels, &probs);
    loss_sum += tape.value(loss).x[0] * static_cast<double>(to - from);
    for (long b = 0; b < to - from; ++b) {
      long best = 0;
      for (long c = 1; c < probs.channels(); ++c)
        if (probs.at(b, c, 0, 0) > probs.at(b, best, 0, 0)) best = c;
      if (best == labels[b]) ++correct;
    }
  }
  r.loss = loss_sum / static_cast<double>(count);
  r.acc = static_cast<double>(correct) / static_cast<double>(count);
  return r;
}

Model build_from(const RunConfig& cfg) {
  const ModelConfig mc = cfg.model_config();
  return mc.head == HeadKind::Segmenter ? Model::build_segmenter(mc)
                                        : Model::build_classifier(mc);
}

void print_spec_warnings(const ModelConfig& mc) {
  for (const auto& w : mc.spec7.warnings())
    std::cerr << "warning: spec7: " << w << "\n";
  for (const auto& w : mc.spec5.warnings())
    std::cerr << "warning: spec5: " << w << "\n";
}

}  // namespace

int cmd_train(const std::string& config_path) {
  return guard([&]() -> int {
    const RunConfig cfg = RunConfig::load(config_path);
    const ModelConfig mc = cfg.model_config();
    print_spec_warnings(mc);

    Model model = build_from(cfg);
    model.init_params(cfg.seed);
    model.invariance_check();

    if (mc.budget_target.has_value()) {
      const long actual = model.param_total();
      std::cout << "parameter budget: target " << *mc.budget_target
                << ", actual " << actual << "\n";
    }
    std::cout << "parameters: " << model.param_total() << " (ledger "
              << analytic_param_count(mc) << ")\n";

    const Split train = load_split(cfg.train_images, cfg.train_labels,
                                   cfg.train_count, cfg.rotate,
                                   cfg.rotate_seed_train, cfg.pad_to,
                                   cfg.downscale);
    const Split test = load_split(cfg.test_images, cfg.test_labels,
                                  cfg.test_count, cfg.rotate,
                                  cfg.rotate_seed_test, cfg.pad_to,
                                  cfg.downscale);

    fs::create_directories(fs::path(cfg.metrics).parent_path().empty()
                               ? "."
                               : fs::path(cfg.metrics).parent_path().string());
    fs::create_directories(cfg.checkpoint_dir);
    std::ofstream csv(cfg.metrics);
    if (!csv) throw DataError("cannot open metrics file " + cfg.metrics);
    csv << "epoch,train_loss,train_acc,test_acc,wall_seconds\n";
    csv.flush();

    const std::string best_path =
        (fs::path(cfg.checkpoint_dir) / "best.ckpt").string();
    AdamState adam;
    if (cfg.epochs == 0) {
      save_checkpoint(best_path, model, nullptr);
      std::cout << "no epochs requested; wrote untrained checkpoint to "
                << best_path << "\n";
      return 0;
    }

    std::mt19937_64 shuffle_rng(cfg.seed);
    const long count = train.images.batch();
    std::vector<long> order(count);
    for (long i = 0; i < count; ++i) order[i] = i;

    double best_acc = -1.0;
    const long decay_epoch = static_cast<long>(
        std::ceil(cfg.lr_decay_at * static_cast<double>(cfg.epochs)));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      AdamConfig opt;
      opt.lr = cfg.lr * (epoch >= decay_epoch ? cfg.lr_decay_factor : 1.0);

      double loss_sum = 0.0;
      long correct = 0;
      for (long from = 0; from < count; from += cfg.batch_size) {
        const long to = std::min<long>(count, from + cfg.batch_size);
        const Tensor4 batch = gather_batch(train.images, order, from, to);
        std::vector<int> labels(to - from);
        for (long i = from; i < to; ++i)
          labels[i - from] = train.labels[order[i]];

        Tape tape;
        Tensor4 probs;
        const ValueId logits =
            model.forward(tape, tape.input(batch), Mode::Train);
        const ValueId loss =
            tape.softmax_cross_entropy(logits, labels, &probs);
        const double loss_val = tape.value(loss).x[0];
        if (!std::isfinite(loss_val))
          throw NumericError("training loss is not finite at epoch " +
                             std::to_string(epoch + 1));
        loss_sum += loss_val * static_cast<double>(to - from);
        for (long b = 0; b < to - from; ++b) {
          long best = 0;
          for (long c = 1; c < probs.channels(); ++c)
            if (probs.at(b, c, 0, 0) > probs.at(b, best, 0, 0)) best = c;
          if (best == labels[b]) ++correct;
        }
        model.params().zero_grad();
        tape.backward(loss);
        adam_step(model.params(), adam, opt);
      }

      const EvalResult ev =
          evaluate(model, test.images, test.labels, cfg.batch_size);
      const double train_loss = loss_sum / static_cast<double>(count);
      const double train_acc =
          static_cast<double>(correct) / static_cast<double>(count);
      const double wall =
          cfg.stable_timing
              ? 0.0
              : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();

      char row[160];
      std::snprintf(row, sizeof(row), "%d,%.6f,%.4f,%.4f,%.3f\n", epoch + 1,
                    train_loss, train_acc, ev.acc, wall);
      csv << row;
      csv.flush();
      std::cout << "epoch " << (epoch + 1) << "/" << cfg.epochs
                << " train_loss=" << train_loss << " train_acc=" << train_acc
                << " test_acc=" << ev.acc << " (" << wall << "s)\n";

      if (ev.acc > best_acc) {
        best_acc = ev.acc;
        save_checkpoint(best_path, model, &adam);
      }
    }
    std::cout << "best test_acc=" << best_acc << " (error "
              << 100.0 * (1.0 - best_acc) << "%), checkpoint " << best_path
              << "\n";
    return 0;
  });
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path) {
  return guard([&]() -> int {
    const RunConfig cfg = RunConfig::load(config_path);
    Model model = build_from(cfg);
    load_checkpoint(ckpt_path, model);
    const Split test = load_split(cfg.test_images, cfg.test_labels,
                                  cfg.test_count, cfg.rotate,
                                  cfg.rotate_seed_test, cfg.pad_to,
                                  cfg.downscale);
    const EvalResult ev =
        evaluate(model, test.images, test.labels, cfg.batch_size);
    std::cout << "test_loss=" << ev.loss << " test_acc=" << ev.acc
              << " test_err=" << 100.0 * (1.0 - ev.acc) << "%\n";
    return 0;
  });
}

namespace {

Tensor4 rotate_step(const Tensor4& x, int m) {
  // m * 45 degrees; exact permutation for even m.
  if (m % 2 == 0) return rot90(x, m / 2);
  return rotate_interp(x, std::numbers::pi / 4.0 * static_cast<double>(m));
}

Tensor4 unrotate_step(const Tensor4& x, int m) {
  if (m % 2 == 0) return rot90(x, 4 - m / 2);
  return rotate_interp(x, -std::numbers::pi / 4.0 * static_cast<double>(m));
}

// Undoes the group action on a (1, C*n, H, W) feature tensor produced from
// an input rotated by m * 45 degrees: planes rotate back and the orientation
// axis unshifts by s = m*n/8. Returns nothing when the shift is fractional
// (the feature planes of those orientations are not comparable). For n = 1
// the cyclic shift is trivially zero and every angle aligns planarly.
std::optional<Tensor4> align_features(const Tensor4& f, int m, int n) {
  if (n != 1 && (m * n) % 8 != 0) return std::nullopt;
  const int shift = n == 1 ? 0 : (m * n / 8) % n;
  const long C = f.channels() / n;
  Tensor4 unrot = unrotate_step(f, m);
  Tensor4 out(f.batch(), f.channels(), f.height(), f.width());
  for (long b = 0; b < f.batch(); ++b)
    for (long c = 0; c < C; ++c)
      for (int s = 0; s < n; ++s) {
        const auto src = unrot.plane(b, c * n + (s + shift) % n);
        auto dst = out.plane(b, c * n + s);
        std::copy(src.begin(), src.end(), dst.begin());
      }
  return out;
}

struct VarianceStats {
  double mean = 0.0;
  double max = 0.0;
  std::vector<double> map;  // (h, w) mean variance per pixel
  long h = 0, w = 0;
};

VarianceStats variance_over(const std::vector<Tensor4>& copies, long border) {
  VarianceStats st;
  if (copies.empty()) return st;
  const long C = copies[0].channels();
  const long H = copies[0].height(), W = copies[0].width();
  st.h = H - 2 * border;
  st.w = W - 2 * border;
  st.map.assign(st.h * st.w, 0.0);
  double total = 0.0;
  long cells = 0;
  for (long c = 0; c < C; ++c)
    for (long y = border; y < H - border; ++y)
      for (long x = border; x < W - border; ++x) {
        double mean = 0.0;
        for (const auto& t : copies) mean += t.at(0, c, y, x);
        mean /= static_cast<double>(copies.size());
        double var = 0.0;
        for (const auto& t : copies) {
          const double d = t.at(0, c, y, x) - mean;
          var += d * d;
        }
        var /= static_cast<double>(copies.size());
        st.map[(y - border) * st.w + (x - border)] += var / static_cast<double>(C);
        total += var;
        st.max = std::max(st.max, var);
        ++cells;
      }
  st.mean = total / static_cast<double>(cells);
  return st;
}

struct ProbeRun {
  std::vector<Tensor4> a, b, out;  // aligned copies
  std::vector<Tensor4> a_exact, b_exact, out_exact;
};

ProbeRun run_protocol(Model& model, const Tensor4& image) {
  const int n = model.config().group.n;
  ProbeRun run;
  for (int m = 0; m < 8; ++m) {
    const Tensor4 xm = rotate_step(image, m);
    Tape tape;
    ForwardProbes probes;
    const ValueId logits =
        model.forward(tape, tape.input(xm), Mode::Eval, &probes);
    const Tensor4 fa = tape.tensor(probes.feature_a);
    const Tensor4 fb = tape.tensor(probes.feature_b);
    const Tensor4 out = tape.tensor(logits);

    const auto fa_al = align_features(fa, m, n);
    const auto fb_al = align_features(fb, m, n);
    run.out.push_back(out);
    if (m % 2 == 0) run.out_exact.push_back(out);
    if (fa_al.has_value()) {
      run.a.push_back(*fa_al);
      run.b.push_back(*fb_al);
      if (m % 2 == 0) {
        run.a_exact.push_back(*fa_al);
        run.b_exact.push_back(*fb_al);
      }
    }
  }
  return run;
}

}  // namespace

int cmd_equiv_report(const std::string& config_path,
                     const std::string& ckpt_path, int image_index) {
  return guard([&]() -> int {
    const RunConfig cfg = RunConfig::load(config_path);
    if (cfg.group_n % 4 != 0)
      throw ConfigError("equiv-report: group order must be divisible by 4");

    Model model = build_from(cfg);
    load_checkpoint(ckpt_path, model);

    IdxDataset ds = load_idx(cfg.test_images, cfg.test_labels);
    if (image_index < 0 || image_index >= ds.count)
      throw DataError("image index out of range");
    ds = subset(ds, image_index, 1);
    const Tensor4 image = to_tensor(ds, cfg.pad_to, cfg.downscale);

    // Plain-CNN contrast: same architecture at group order 1, random
    // weights (equivariance is architectural, not learned), batch-norm
    // moments bootstrapped from the probe image.
    RunConfig base_cfg = cfg;
    base_cfg.group_n = 1;
    Model baseline = build_from(base_cfg);
    baseline.init_params(cfg.seed);
    {
      Tape warm;
      baseline.forward(warm, warm.input(image), Mode::Train);
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream report((fs::path(cfg.out_dir) / "equiv_report.txt").string());
    if (!report) throw DataError("cannot write report in " + cfg.out_dir);

    const long border = 4;
    report << "image_index=" << image_index << " group_n=" << cfg.group_n
           << " crop_border=" << border << "\n";

    struct Row {
      std::string model, probe, subset;
      VarianceStats st;
    };
    std::vector<Row> rows;
    auto emit = [&](const std::string& mname, Model& m) {
      const ProbeRun run = run_protocol(m, image);
      rows.push_back({mname, "A", "exact", variance_over(run.a_exact, border)});
      rows.push_back({mname, "A", "full", variance_over(run.a, border)});
      rows.push_back({mname, "B", "exact", variance_over(run.b_exact, border)});
      rows.push_back({mname, "B", "full", variance_over(run.b, border)});
      rows.push_back({mname, "output", "exact", variance_over(run.out_exact, 0)});
      rows.push_back({mname, "output", "full", variance_over(run.out, 0)});
    };
    emit("equivariant", model);
    emit("plain", baseline);

    for (const Row& r : rows) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "model=%s probe=%s subset=%s mean_var=%.6e max_var=%.6e\n",
                    r.model.c_str(), r.probe.c_str(), r.subset.c_str(),
                    r.st.mean, r.st.max);
      report << line;
      if (!r.st.map.empty() && r.probe != "output") {
        const std::string pgm =
            (fs::path(cfg.out_dir) /
             ("var_" + r.model + "_" + r.probe + "_" + r.subset + ".pgm"))
                .string();
        write_pgm(pgm, r.st.map.data(), r.st.h, r.st.w);
      }
    }
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "equiv_report.txt").string()
              << "\n";
    return 0;
  });
}

int cmd_export_filters(const std::string& config_path,
                       const std::string& ckpt_path,
                       const std::string& out_dir) {
  return guard([&]() -> int {
    const RunConfig cfg = RunConfig::load(config_path);
    const ModelConfig mc = cfg.model_config();
    print_spec_warnings(mc);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
      throw DataError("cannot create output directory " + out_dir);

    // Basis panels: real and imaginary parts per (j, k).
    const SteerableBasis basis = build_basis(mc.spec7, 7, mc.sigma);
    for (const AtomicFilter& f : basis.filters) {
      std::vector<double> re(f.samples.size()), im(f.samples.size());
      for (size_t i = 0; i < f.samples.size(); ++i) {
        re[i] = f.samples[i].real();
        im[i] = f.samples[i].imag();
      }
      const std::string stem = "basis_j" + std::to_string(f.ring) + "_k" +
                               std::to_string(f.freq);
      write_pgm((fs::path(out_dir) / (stem + "_re.pgm")).string(), re.data(),
                f.size, f.size);
      write_pgm((fs::path(out_dir) / (stem + "_im.pgm")).string(), im.data(),
                f.size, f.size);
    }

    // Learned input-layer filters at every orientation.
    Model model = build_from(cfg);
    if (!ckpt_path.empty()) {
      load_checkpoint(ckpt_path, model);
    } else {
      model.init_params(cfg.seed);
    }
    const Param* w = model.params().find("stem.input.w");
    if (w == nullptr) throw StateError("model has no input-layer weights");
    const long out_c = w->dims[0], in_c = w->dims[1], mc_count = w->dims[3];
    for (long o = 0; o < out_c; ++o)
      for (long c = 0; c < in_c; ++c) {
        std::vector<std::complex<double>> slice(mc_count);
        for (long m = 0; m < mc_count; ++m) {
          const long idx = ((o * in_c + c) * 1 * mc_count + m) * 2;
          slice[m] = {w->value[idx], w->value[idx + 1]};
        }
        for (int s = 0; s < mc.group.n; ++s) {
          const std::vector<double> grid =
              synthesize_filter(slice, basis, mc.group.angle(s));
          const std::string name = "filter_o" + std::to_string(o) + "_c" +
                                   std::to_string(c) + "_s" +
                                   std::to_string(s) + ".pgm";
          write_pgm((fs::path(out_dir) / name).string(), grid.data(), 7, 7);
        }
      }
    std::cout << "exported filters to " << out_dir << "\n";
    return 0;
  });
}

int cmd_grad_check(const std::string& only_op) {
  return guard([&]() -> int {
    const auto results = run_grad_checks(only_op);
    bool all_pass = true;
    for (const auto& r : results) {
      std::printf("%-24s %s (max err %.3e)\n", r.op.c_str(),
                  r.pass ? "PASS" : "FAIL", r.max_err);
      all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 4;
  });
}

}  // namespace dsf
