// Acceptance suite: runs every gate and prints one PASS/FAIL line each.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gvseg/dataset.hpp"
#include "gvseg/image.hpp"
#include "gvseg/labelspace.hpp"
#include "gvseg/loss.hpp"
#include "gvseg/metrics.hpp"
#include "gvseg/net.hpp"
#include "gvseg/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gvseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args, const fs::path& workdir) {
  const std::string cmd = std::string("cd '") + workdir.string() + "' && '" +
                          GVSEG_CLI_PATH + "' " + args + " > cli_log.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Gradient correctness: full net at 1e-4 over >= 1000 samples, loss module
//    alone at 1e-6, in under 60 seconds.
Outcome criterion_gradients() {
  const auto start = std::chrono::steady_clock::now();

  std::mt19937_64 rng(7);
  const Index height = 16, width = 16;
  const int num_classes = 3;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int32_t> pick(0, num_classes - 1);
  LabelMap labels(height, width);
  for (Index h = 0; h < height; ++h) {
    for (Index w = 0; w < width; ++w) {
      labels(h, w) = unit(rng) < 0.1 ? kVoidLabel : pick(rng);
    }
  }
  const WeightVector weights = image_weights(labels, num_classes);

  // loss module alone
  const Tensor3d activations = testutil::random_tensor(height, width, num_classes, 1.0, rng);
  const Tensor3d grad_tensor = loss_gradient(labels, activations, weights);
  const Eigen::VectorXd loss_analytic =
      Eigen::Map<const Eigen::VectorXd>(grad_tensor.data(), grad_tensor.size());
  const Eigen::VectorXd flat =
      Eigen::Map<const Eigen::VectorXd>(activations.data(), activations.size());
  const GradCheckReport loss_report = finite_difference_check(
      [&](const Eigen::VectorXd& v) {
        Tensor3d t(height, width, num_classes);
        t.flat() = Eigen::Map<const Eigen::ArrayXd>(v.data(), v.size());
        return weighted_loss(labels, t, weights).total;
      },
      loss_analytic, flat, flat.size(), 1e-4, 11);

  // full depth-2 network
  NetworkConfig config;
  config.depth = 2;
  config.base_channels = 8;
  config.num_classes = num_classes;
  config.seed = 7;
  const EncoderDecoderNet net(config);
  const Eigen::VectorXd params = net.init_params();
  Tensor3d image(height, width, 3);
  for (Index i = 0; i < image.size(); ++i) image.flat()[i] = unit(rng);

  const Eigen::VectorXd net_analytic = net.backward(params, image, labels, weights).second;
  const GradCheckReport net_report = finite_difference_check(
      [&](const Eigen::VectorXd& p) {
        return weighted_loss(labels, net.forward(p, image), weights).total;
      },
      net_analytic, params, 1000, 1e-4, 12);

  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = loss_report.max_rel_error <= 1e-6 && net_report.max_rel_error <= 1e-4 &&
             net_report.samples >= 1000 && elapsed < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "loss max err %.2e (<=1e-6), net max err %.2e over %ld samples (<=1e-4), %.1fs",
                loss_report.max_rel_error, net_report.max_rel_error,
                static_cast<long>(net_report.samples), elapsed);
  out.detail = buf;
  return out;
}

// 2. Weighting reductions: balanced maps reduce to unweighted cross-entropy;
//    the weight identity sum w_c |y_c| = |y| holds on imbalanced maps.
Outcome criterion_weighting() {
  std::mt19937_64 rng(21);
  double worst_reduction = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const LabelMap y = testutil::balanced_labels(8, 8, 4, rng);
    const Tensor3d a = testutil::random_tensor(8, 8, 4, 2.0, rng);
    const double weighted = weighted_loss(y, a, image_weights(y, 4)).total;
    const double unweighted = weighted_loss(y, a, uniform_weights(y, 4)).total;
    worst_reduction = std::max(
        worst_reduction, std::abs(weighted - unweighted) / std::max(1.0, std::abs(unweighted)));
  }

  double worst_identity = 0.0;
  std::uniform_int_distribution<int> extra(0, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    // random imbalanced map with every class present
    LabelMap y = testutil::random_labels(8, 8, 4, 0.1, rng);
    y(0, 0) = 0;
    y(1, 1) = 1;
    y(2, 2) = 2;
    y(3, 3) = 3;
    const int skew = extra(rng);
    for (Index h = 4; h < 8; ++h) {
      for (Index w = 0; w < 8; ++w) {
        if (static_cast<int>(h * 8 + w) % 41 < skew) y(h, w) = 0;
      }
    }
    const WeightVector wv = image_weights(y, 4);
    double recovered = 0.0;
    for (Index c = 0; c < 4; ++c) {
      recovered += wv.weights[c] * static_cast<double>(wv.class_counts[c]);
    }
    worst_identity = std::max(
        worst_identity, std::abs(recovered - static_cast<double>(wv.valid_pixels)) /
                            static_cast<double>(wv.valid_pixels));
  }

  Outcome out;
  out.pass = worst_reduction <= 1e-12 && worst_identity <= 1e-9;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "balanced reduction err %.2e (<=1e-12), weight identity err %.2e (<=1e-9)",
                worst_reduction, worst_identity);
  out.detail = buf;
  return out;
}

// 3. Void invariance for loss, gradients and metrics, 100 randomized trials.
Outcome criterion_void_invariance() {
  std::mt19937_64 rng(33);
  const ClassCatalog catalog(
      {{"bg", {0, 0, 255}, false}, {"veg", {0, 255, 0}, true}, {"x", {255, 0, 0}, false}},
      {0, 0, 0});
  std::normal_distribution<double> bump(0.0, 25.0);

  double worst = 0.0;
  bool counts_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    LabelMap y = testutil::random_labels(8, 8, 3, 0.25, rng);
    y(0, 0) = 0;
    y(0, 1) = 1;
    y(7, 7) = kVoidLabel;
    const WeightVector wv = image_weights(y, 3);
    const Tensor3d a = testutil::random_tensor(8, 8, 3, 1.5, rng);

    Tensor3d perturbed = a;
    for (Index h = 0; h < 8; ++h) {
      for (Index w = 0; w < 8; ++w) {
        if (y(h, w) == kVoidLabel) {
          for (Index c = 0; c < 3; ++c) perturbed(h, w, c) += bump(rng);
        }
      }
    }

    const LossValue loss_a = weighted_loss(y, a, wv);
    const LossValue loss_b = weighted_loss(y, perturbed, wv);
    worst = std::max(worst, std::abs(loss_a.total - loss_b.total));

    const Tensor3d grad_a = loss_gradient(y, a, wv);
    const Tensor3d grad_b = loss_gradient(y, perturbed, wv);
    for (Index h = 0; h < 8; ++h) {
      for (Index w = 0; w < 8; ++w) {
        for (Index c = 0; c < 3; ++c) {
          if (y(h, w) != kVoidLabel) {
            worst = std::max(worst, std::abs(grad_a(h, w, c) - grad_b(h, w, c)));
          } else {
            worst = std::max(worst, std::abs(grad_b(h, w, c)));
          }
        }
      }
    }

    // metrics: flip predictions at gt-void pixels
    const LabelMap pred = testutil::random_labels(8, 8, 3, 0.0, rng);
    LabelMap flipped = pred;
    for (Index h = 0; h < 8; ++h) {
      for (Index w = 0; w < 8; ++w) {
        if (y(h, w) == kVoidLabel) flipped(h, w) = (flipped(h, w) + 1) % 3;
      }
    }
    const MetricsReport ra = evaluate({{"t", y, pred}}, catalog);
    const MetricsReport rb = evaluate({{"t", y, flipped}}, catalog);
    counts_ok = counts_ok && ra.void_skipped == rb.void_skipped &&
                ra.gvi_pred[0].greenery_pixels == rb.gvi_pred[0].greenery_pixels &&
                ra.gvi_pred[0].valid_pixels == rb.gvi_pred[0].valid_pixels;
    worst = std::max(worst, std::abs(ra.mean_iou - rb.mean_iou));
    worst = std::max(worst, std::abs(ra.greenery_iou - rb.greenery_iou));
    worst = std::max(worst, std::abs(ra.error_stats.mae_pct - rb.error_stats.mae_pct));
  }

  Outcome out;
  out.pass = worst <= 1e-15 && counts_ok;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max deviation %.2e (<=1e-15), counts %s", worst,
                counts_ok ? "bitwise equal" : "DIFFER");
  out.detail = buf;
  return out;
}

// 4. Collapse prevention: uniform weighting collapses on a 95/5 set while
//    per-image weighting keeps the minority class segmentable.
Outcome criterion_collapse_prevention() {
  const auto start = std::chrono::steady_clock::now();

  SyntheticSpec spec;
  spec.count = 64;
  spec.height = 32;
  spec.width = 32;
  spec.num_classes = 2;
  spec.minority_fraction = 0.05;
  spec.shape = SyntheticShape::kDisks;
  spec.noise = 0.22;
  spec.seed = 404;
  const auto samples = generate_synthetic(spec);

  std::vector<TrainItem> items;
  for (const auto& sample : samples) {
    items.push_back(TrainItem{sample.id, sample.image, sample.labels});
  }

  NetworkConfig net_config;
  net_config.depth = 2;
  net_config.base_channels = 8;
  net_config.num_classes = 2;
  net_config.seed = 1234;
  const EncoderDecoderNet net(net_config);

  TrainConfig base;
  base.learning_rate = 0.15;
  base.momentum = 0.9;
  base.epochs = 200;
  base.batch_size = 8;
  base.seed = 1234;

  auto run_mode = [&](WeightingMode mode, double* recall, double* iou_minority) {
    TrainConfig config = base;
    config.weighting = mode;
    const TrainResult result = train(net, items, {}, config);
    std::int64_t tp = 0, fn = 0, fp = 0;
    for (const auto& item : items) {
      const LabelMap pred = net.predict(result.params, item.image);
      for (Index h = 0; h < pred.rows(); ++h) {
        for (Index w = 0; w < pred.cols(); ++w) {
          const bool gt_min = item.labels(h, w) == 1;
          const bool pr_min = pred(h, w) == 1;
          if (gt_min && pr_min) ++tp;
          else if (gt_min && !pr_min) ++fn;
          else if (!gt_min && pr_min) ++fp;
        }
      }
    }
    *recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    *iou_minority = tp + fn + fp > 0
                        ? static_cast<double>(tp) / static_cast<double>(tp + fn + fp)
                        : 0.0;
  };

  double uniform_recall = 0.0, uniform_iou = 0.0;
  run_mode(WeightingMode::kUniform, &uniform_recall, &uniform_iou);
  double eq2_recall = 0.0, eq2_iou = 0.0;
  run_mode(WeightingMode::kPerImageEq2, &eq2_recall, &eq2_iou);

  const double elapsed = seconds_since(start);
  Outcome out;
  out.pass = uniform_recall < 0.10 && eq2_iou >= 0.50 && elapsed < 900.0;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "uniform recall %.3f (<0.10), weighted minority IoU %.3f (>=0.50), %.0fs",
                uniform_recall, eq2_iou, elapsed);
  out.detail = buf;
  return out;
}

// 5. Metric oracle equivalence on 1000 random 8x8 paired maps.
Outcome criterion_metric_oracles() {
  std::mt19937_64 rng(55);
  const Index num_classes = 4;
  const std::vector<Index> greenery = {1, 3};
  const std::set<std::int32_t> greenery_set = {1, 3};

  double worst = 0.0;
  std::vector<double> gvi_pred_series, gvi_gt_series;
  std::vector<GviRecord> pred_records, gt_records;

  for (int trial = 0; trial < 1000; ++trial) {
    LabelMap gt = testutil::random_labels(8, 8, num_classes, 0.15, rng);
    gt(0, 0) = 0;  // keep at least one valid pixel
    const LabelMap pred = testutil::random_labels(8, 8, num_classes, 0.0, rng);

    ConfusionMatrix cm(num_classes);
    accumulate_confusion(gt, pred, cm);
    const auto ocm = oracle::confusion(gt, pred, num_classes);

    for (Index c = 0; c < num_classes; ++c) {
      double want = 0.0;
      const bool defined = oracle::single_class_iou(ocm, static_cast<std::size_t>(c), &want);
      const auto got = class_iou(cm, c);
      if (defined != got.has_value()) return {false, "per-class IoU definedness mismatch"};
      if (defined) worst = std::max(worst, std::abs(*got - want));
    }
    worst = std::max(worst, std::abs(mean_iou(cm) - oracle::mean_iou(ocm)));

    double want_green = 0.0;
    if (oracle::merged_iou(gt, pred, greenery_set, &want_green)) {
      worst = std::max(worst, std::abs(iou(cm, greenery) - want_green));
    }

    const GviRecord rec_gt = gvi(gt, greenery, "t" + std::to_string(trial));
    worst = std::max(worst, std::abs(rec_gt.gvi - oracle::gvi(gt, greenery_set)));
    const GviRecord rec_pred = masked_gvi(pred, gt, greenery, rec_gt.id);
    LabelMap masked = pred;
    for (Index h = 0; h < 8; ++h) {
      for (Index w = 0; w < 8; ++w) {
        if (gt(h, w) == kVoidLabel) masked(h, w) = kVoidLabel;
      }
    }
    worst = std::max(worst, std::abs(rec_pred.gvi - oracle::gvi(masked, greenery_set)));

    gt_records.push_back(rec_gt);
    pred_records.push_back(rec_pred);
    gvi_gt_series.push_back(rec_gt.gvi);
    gvi_pred_series.push_back(rec_pred.gvi);
  }

  // aggregate GVI against a direct ratio of sums
  std::int64_t green = 0, valid = 0;
  for (const auto& r : gt_records) {
    green += r.greenery_pixels;
    valid += r.valid_pixels;
  }
  worst = std::max(worst, std::abs(aggregate_gvi(gt_records) -
                                   static_cast<double>(green) / static_cast<double>(valid)));

  const GviErrorStats stats = gvi_error_stats(pred_records, gt_records);
  worst = std::max(worst, std::abs(stats.mae_pct -
                                   oracle::mae_pct(gvi_pred_series, gvi_gt_series)));
  double want_pcc = 0.0;
  if (!oracle::pearson(gvi_pred_series, gvi_gt_series, &want_pcc) || !stats.pcc) {
    return {false, "PCC definedness mismatch"};
  }
  worst = std::max(worst, std::abs(*stats.pcc - want_pcc));

  std::vector<double> errors;
  for (std::size_t i = 0; i < gvi_pred_series.size(); ++i) {
    errors.push_back(100.0 * (gvi_pred_series[i] - gvi_gt_series[i]));
  }
  worst = std::max(worst, std::abs(stats.ee_p5_pct - oracle::percentile(errors, 0.05)));
  worst = std::max(worst, std::abs(stats.ee_p95_pct - oracle::percentile(errors, 0.95)));

  Outcome out;
  out.pass = worst <= 1e-9;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |metric - oracle| = %.2e (<=1e-9)", worst);
  out.detail = buf;
  return out;
}

// 6. The shipped 7-class remap conserves valid pixels and greenery.
Outcome criterion_remap_conservation() {
  const std::string data = GVSEG_DATA_DIR;
  const ClassCatalog source =
      ClassCatalog::load(data + "/camvid/class_dict.csv", data + "/camvid/greenery.txt");
  const ClassCatalog target =
      ClassCatalog::load(data + "/camvid/class_dict_7.csv", data + "/camvid/greenery.txt");
  const RemapTable table =
      RemapTable::load(data + "/camvid/remap_to_7.csv", source, target);

  std::mt19937_64 rng(66);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMap y =
        testutil::random_labels(16, 16, source.num_classes(), 0.1, rng);
    const LabelMap out = remap(y, table);

    if (valid_pixel_count(out) != valid_pixel_count(y)) {
      return {false, "valid pixel count changed"};
    }
    for (Index h = 0; h < 16; ++h) {
      for (Index w = 0; w < 16; ++w) {
        if ((y(h, w) == kVoidLabel) != (out(h, w) == kVoidLabel)) {
          return {false, "void positions changed"};
        }
      }
    }
    std::int64_t greenery_before = 0, greenery_after = 0;
    const ClassHistogram before = class_histogram(y, source.num_classes());
    const ClassHistogram after = class_histogram(out, target.num_classes());
    for (const Index c : source.greenery_indices()) greenery_before += before.counts[c];
    for (const Index c : target.greenery_indices()) greenery_after += after.counts[c];
    if (greenery_before != greenery_after) return {false, "greenery pixel count changed"};
  }
  return {true, "100 random 32-class maps conserved exactly"};
}

// 7. Aggregate GVI semantics: ratio of sums, not mean of ratios.
Outcome criterion_aggregation() {
  std::vector<GviRecord> equal_sizes;
  equal_sizes.push_back({"a", 10, 100, 0.10});
  equal_sizes.push_back({"b", 90, 100, 0.90});
  const double first = aggregate_gvi(equal_sizes);

  std::vector<GviRecord> unequal;
  unequal.push_back({"a", 1, 10, 0.1});
  unequal.push_back({"b", 0, 90, 0.0});
  const double second = aggregate_gvi(unequal);

  Outcome out;
  out.pass = first == 0.5 && second == 0.01;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "{10/100, 90/100} -> %g, {1/10, 0/90} -> %g", first,
                second);
  out.detail = buf;
  return out;
}

// 8. Determinism: two identical CLI train runs produce byte-identical
//    checkpoints and eval JSONs.
Outcome criterion_determinism() {
  testutil::TempDir dir("acceptance_determinism");
  if (run_cli("synth --count 8 --size 16x16 --classes 2 --minority 0.2 --shape disks "
              "--noise 0.15 --seed 3 --out ds",
              dir.path()) != 0) {
    return {false, "synth failed"};
  }
  const std::string train_args =
      "--deterministic train --data ds --classes ds/class_dict.csv "
      "--greenery ds/greenery.txt --depth 2 --base-channels 4 --lr 0.1 --momentum 0.9 "
      "--epochs 5 --batch 2 --weighting eq2 --seed 11 --out ";
  if (run_cli(train_args + "run1.ckpt", dir.path()) != 0) return {false, "train run 1 failed"};
  if (run_cli(train_args + "run2.ckpt", dir.path()) != 0) return {false, "train run 2 failed"};

  const bool ckpt_same = read_bytes(dir.path() / "run1.ckpt") ==
                         read_bytes(dir.path() / "run2.ckpt");
  const bool metrics_same = read_bytes(dir.path() / "run1.ckpt.metrics.json") ==
                            read_bytes(dir.path() / "run2.ckpt.metrics.json");
  const bool nonempty = !read_bytes(dir.path() / "run1.ckpt").empty() &&
                        !read_bytes(dir.path() / "run1.ckpt.metrics.json").empty();

  Outcome out;
  out.pass = ckpt_same && metrics_same && nonempty;
  out.detail = std::string("checkpoint bytes ") + (ckpt_same ? "identical" : "DIFFER") +
               ", metrics JSON bytes " + (metrics_same ? "identical" : "DIFFER");
  return out;
}

// 9. Dataset plumbing: 701 pairs split 421/112/168 by default; overlapping
//    split files exit with code 2 through the CLI.
Outcome criterion_dataset_plumbing() {
  testutil::TempDir dir("acceptance_dataset");
  const fs::path root = dir.path() / "camvid_like";
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");

  ImageU8 img(4, 4);
  ImageU8 label(4, 4);
  for (Index h = 0; h < 4; ++h) {
    for (Index w = 0; w < 4; ++w) label.set(h, w, {0, 0, 255});
  }
  for (int i = 0; i < 701; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "seq_%05d", i);
    write_png_rgb8(root / "images" / (std::string(id) + ".png"), img);
    write_png_rgb8(root / "labels" / (std::string(id) + "_L.png"), label);
  }

  const DatasetManifest manifest = scan_dataset(root);
  const auto n_train = manifest.count(Split::kTrain);
  const auto n_val = manifest.count(Split::kVal);
  const auto n_test = manifest.count(Split::kTest);
  const bool sizes_ok = manifest.entries.size() == 701 && n_train == 421 &&
                        n_val == 112 && n_test == 168;

  // overlapping split files must be rejected with exit code 2
  fs::create_directories(root / "splits");
  {
    std::ofstream train_file(root / "splits" / "train.txt");
    std::ofstream val_file(root / "splits" / "val.txt");
    std::ofstream test_file(root / "splits" / "test.txt");
    for (const auto& entry : manifest.entries) {
      if (entry.split == Split::kTrain) train_file << entry.id << "\n";
      if (entry.split == Split::kVal) val_file << entry.id << "\n";
      if (entry.split == Split::kTest) test_file << entry.id << "\n";
    }
    val_file << manifest.entries.front().id << "\n";  // also listed in train
  }
  const ClassCatalog catalog({{"a", {0, 0, 255}, false}, {"b", {0, 255, 0}, true}},
                             {0, 0, 0});
  (void)catalog;
  std::ofstream dict(dir.path() / "classes.csv");
  dict << "name,r,g,b\na,0,0,255\nb,0,255,0\nVoid,0,0,0\n";
  dict.close();
  const int code =
      run_cli("weights --data camvid_like --classes classes.csv", dir.path());

  Outcome out;
  out.pass = sizes_ok && code == 2;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "split sizes (%ld, %ld, %ld), overlap exit code %d",
                static_cast<long>(n_train), static_cast<long>(n_val),
                static_cast<long>(n_test), code);
  out.detail = buf;
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_gradients},
      {2, "weighting reductions", criterion_weighting},
      {3, "void invariance", criterion_void_invariance},
      {4, "collapse prevention", criterion_collapse_prevention},
      {5, "metric oracle equivalence", criterion_metric_oracles},
      {6, "remap conservation", criterion_remap_conservation},
      {7, "aggregation semantics", criterion_aggregation},
      {8, "determinism", criterion_determinism},
      {9, "dataset plumbing", criterion_dataset_plumbing},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL",
                criterion.id, criterion.name, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
