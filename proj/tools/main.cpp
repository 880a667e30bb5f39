#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvseg/checkpoint.hpp"
#include "gvseg/dataset.hpp"
#include "gvseg/errors.hpp"
#include "gvseg/image.hpp"
#include "gvseg/labelspace.hpp"
#include "gvseg/loss.hpp"
#include "gvseg/metrics.hpp"
#include "gvseg/net.hpp"
#include "gvseg/train.hpp"
#include "gvseg/version.hpp"

namespace fs = std::filesystem;
using namespace gvseg;

namespace {

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string iso8601_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Every file-producing run drops a <first-output>.run.json next to its outputs.
class RunRecord {
 public:
  RunRecord(std::string command, const std::vector<std::string>& argv)
      : command_(std::move(command)), argv_(argv), started_(iso8601_now()) {}

  void add_seed(const std::string& name, std::uint64_t value) {
    seeds_[name] = value;
  }
  void add_output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write() const {
    if (outputs_.empty()) return;
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["seeds"] = seeds_;
    j["version"] = kVersion;
    j["started"] = started_;
    j["finished"] = iso8601_now();
    j["outputs"] = outputs_;
    std::ofstream out(outputs_.front() + ".run.json");
    out << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::map<std::string, std::uint64_t> seeds_;
  std::vector<std::string> outputs_;
  std::string started_;
};

ClassCatalog load_catalog(const std::string& classes_csv, const std::string& greenery) {
  std::optional<fs::path> greenery_path;
  if (!greenery.empty()) greenery_path = fs::path(greenery);
  return ClassCatalog::load(classes_csv, greenery_path);
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string id_of(const fs::path& png) {
  std::string stem = png.stem().string();
  if (stem.size() > 2 && stem.ends_with("_L")) stem.resize(stem.size() - 2);
  return stem;
}

void parse_size(const std::string& text, Index* height, Index* width) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw UsageError("size must look like 32x32");
  try {
    *height = std::stol(text.substr(0, x));
    *width = std::stol(text.substr(x + 1));
  } catch (const std::exception&) {
    throw UsageError("size must look like 32x32");
  }
  if (*height <= 0 || *width <= 0) throw UsageError("size must be positive");
}

std::vector<TrainItem> load_items(const std::vector<DatasetEntry>& entries,
                                  const ClassCatalog& catalog) {
  std::vector<TrainItem> items;
  items.reserve(entries.size());
  for (const auto& entry : entries) {
    TrainItem item;
    item.id = entry.id;
    item.image = to_unit_tensor(read_png_rgb8(entry.image));
    item.labels = decode_label_image(read_png_rgb8(entry.label), catalog);
    items.push_back(std::move(item));
  }
  return items;
}

// ---------------------------------------------------------------------------

struct ClassesArgs {
  std::string classes_csv;
  std::string greenery;
};

void run_classes(const ClassesArgs& args) {
  const ClassCatalog catalog = load_catalog(args.classes_csv, args.greenery);
  std::printf("%-6s %-24s %-13s %s\n", "index", "name", "color", "greenery");
  for (Index c = 0; c < catalog.num_classes(); ++c) {
    const auto& def = catalog.class_def(c);
    char color[16];
    std::snprintf(color, sizeof(color), "%d,%d,%d", def.color[0], def.color[1],
                  def.color[2]);
    std::printf("%-6ld %-24s %-13s %s\n", static_cast<long>(c), def.name.c_str(), color,
                def.greenery ? "yes" : "no");
  }
  const Rgb vc = catalog.void_color();
  std::printf("%-6s %-24s %d,%d,%d\n", "void", "Void", vc[0], vc[1], vc[2]);
  std::printf("C = %ld non-void classes, %zu greenery\n",
              static_cast<long>(catalog.num_classes()), catalog.greenery_indices().size());
}

struct RemapArgs {
  std::string labels_dir;
  std::string classes_csv;
  std::string table_csv;
  std::string target_classes_csv;
  std::string out_dir;
};

void run_remap(const RemapArgs& args, RunRecord& record) {
  const ClassCatalog source = load_catalog(args.classes_csv, "");
  const ClassCatalog target = load_catalog(args.target_classes_csv, "");
  const RemapTable table = RemapTable::load(args.table_csv, source, target);

  fs::create_directories(args.out_dir);
  const auto pngs = list_pngs(args.labels_dir);
  if (pngs.empty()) throw DataError("no label PNGs in " + args.labels_dir);
  for (const auto& png : pngs) {
    const LabelMap labels = decode_label_image(read_png_rgb8(png), source);
    const fs::path out_path = fs::path(args.out_dir) / png.filename();
    write_png_rgb8(out_path, encode_label_image(remap(labels, table), target));
    record.add_output(out_path);
  }
  std::printf("remapped %zu label images into %s\n", pngs.size(), args.out_dir.c_str());
}

struct WeightsArgs {
  std::string data_dir;
  std::string classes_csv;
  std::string greenery;
  std::string split = "all";
  std::string out_csv;
};

void run_weights(const WeightsArgs& args, RunRecord& record) {
  const ClassCatalog catalog = load_catalog(args.classes_csv, args.greenery);
  const DatasetManifest manifest = scan_dataset(args.data_dir);

  std::vector<DatasetEntry> entries;
  if (args.split == "all") {
    entries = manifest.entries;
  } else if (args.split == "train") {
    entries = manifest.split_entries(Split::kTrain);
  } else if (args.split == "val") {
    entries = manifest.split_entries(Split::kVal);
  } else if (args.split == "test") {
    entries = manifest.split_entries(Split::kTest);
  } else {
    throw UsageError("--split must be one of all, train, val, test");
  }

  std::ostringstream csv;
  csv << "image,class,count,weight\n";
  for (const auto& entry : entries) {
    const LabelMap labels = decode_label_image(read_png_rgb8(entry.label), catalog);
    WeightVector wv;
    try {
      wv = image_weights(labels, catalog.num_classes());
    } catch (const EmptyImageError&) {
      throw EmptyImageError("image '" + entry.id + "' has no valid pixels");
    }
    for (Index c = 0; c < catalog.num_classes(); ++c) {
      csv << entry.id << "," << catalog.class_def(c).name << "," << wv.class_counts[c]
          << "," << format_g6(wv.weights[c]) << "\n";
    }
  }

  if (args.out_csv.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out_csv);
    if (!out) throw DataError("cannot write " + args.out_csv);
    out << csv.str();
    record.add_output(args.out_csv);
  }
}

struct SynthArgs {
  int count = 16;
  std::string size = "32x32";
  int num_classes = 2;
  double minority = 0.05;
  std::string shape = "disks";
  double noise = 0.15;
  double void_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void run_synth(const SynthArgs& args, RunRecord& record) {
  SyntheticSpec spec;
  spec.count = args.count;
  parse_size(args.size, &spec.height, &spec.width);
  spec.num_classes = args.num_classes;
  spec.minority_fraction = args.minority;
  if (args.shape == "disks") {
    spec.shape = SyntheticShape::kDisks;
  } else if (args.shape == "stripes") {
    spec.shape = SyntheticShape::kStripes;
  } else {
    throw UsageError("--shape must be disks or stripes");
  }
  spec.noise = args.noise;
  spec.void_fraction = args.void_fraction;
  spec.seed = args.seed;

  const auto samples = generate_synthetic(spec);
  write_synthetic_dataset(samples, spec.num_classes, args.out_dir);
  record.add_seed("seed", args.seed);
  record.add_output(fs::path(args.out_dir) / "class_dict.csv");
  std::printf("wrote %zu image/label pairs under %s\n", samples.size(),
              args.out_dir.c_str());
}

struct TrainArgs {
  std::string data_dir;
  std::string classes_csv;
  std::string greenery;
  int depth = 2;
  int base_channels = 8;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 10;
  int batch = 8;
  std::string weighting = "eq2";
  std::uint64_t seed = 0;
  std::string out_ckpt;
};

void run_train(const TrainArgs& args, int threads, RunRecord& record) {
  const ClassCatalog catalog = load_catalog(args.classes_csv, args.greenery);
  const DatasetManifest manifest = scan_dataset(args.data_dir);

  const auto train_items = load_items(manifest.split_entries(Split::kTrain), catalog);
  const auto val_items = load_items(manifest.split_entries(Split::kVal), catalog);

  NetworkConfig net_config;
  net_config.depth = args.depth;
  net_config.base_channels = args.base_channels;
  net_config.in_channels = 3;
  net_config.num_classes = static_cast<int>(catalog.num_classes());
  net_config.seed = args.seed;
  const EncoderDecoderNet net(net_config);

  TrainConfig train_config;
  train_config.learning_rate = args.learning_rate;
  train_config.momentum = args.momentum;
  train_config.epochs = args.epochs;
  train_config.batch_size = args.batch;
  if (args.weighting == "eq2") {
    train_config.weighting = WeightingMode::kPerImageEq2;
  } else if (args.weighting == "uniform") {
    train_config.weighting = WeightingMode::kUniform;
  } else {
    throw UsageError("--weighting must be eq2 or uniform");
  }
  train_config.seed = args.seed;
  train_config.threads = threads;

  const TrainResult result = train(net, train_items, val_items, train_config);

  Checkpoint ckpt{net_config, catalog, args.epochs, "rgb/255", result.params};
  save_checkpoint(args.out_ckpt, ckpt);
  record.add_seed("seed", args.seed);
  record.add_output(args.out_ckpt);

  {
    std::ofstream log(args.out_ckpt + ".log.csv");
    if (!log) throw DataError("cannot write " + args.out_ckpt + ".log.csv");
    log << "epoch,train_loss,val_mean_iou\n";
    for (const auto& stats : result.log) {
      log << stats.epoch << "," << format_g6(stats.train_loss) << ",";
      if (stats.has_val) log << format_g6(stats.val_mean_iou);
      log << "\n";
    }
    record.add_output(args.out_ckpt + ".log.csv");
  }

  // Final metrics over the validation split (training split when no val).
  const auto& eval_items = val_items.empty() ? train_items : val_items;
  std::vector<EvalPair> pairs;
  for (const auto& item : eval_items) {
    pairs.push_back(EvalPair{item.id, item.labels, net.predict(result.params, item.image)});
  }
  const MetricsReport report = evaluate(pairs, catalog);
  {
    std::ofstream out(args.out_ckpt + ".metrics.json");
    if (!out) throw DataError("cannot write " + args.out_ckpt + ".metrics.json");
    out << report_to_json(report).dump(2) << "\n";
    record.add_output(args.out_ckpt + ".metrics.json");
  }

  const auto& last = result.log.back();
  std::printf("trained %d epochs: final loss %s", args.epochs,
              format_g6(last.train_loss).c_str());
  if (last.has_val) std::printf(", val mean IoU %s", format_g6(last.val_mean_iou).c_str());
  std::printf("\ncheckpoint: %s\n", args.out_ckpt.c_str());
}

struct PredictArgs {
  std::string ckpt;
  std::string image;
  std::string out;
};

void run_predict(const PredictArgs& args, RunRecord& record) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const EncoderDecoderNet net(ckpt.config);
  const Tensor3d image = to_unit_tensor(read_png_rgb8(args.image));
  const LabelMap pred = net.predict(ckpt.params, image);
  write_png_rgb8(args.out, encode_label_image(pred, ckpt.catalog));
  record.add_output(args.out);
  std::printf("wrote %s\n", args.out.c_str());
}

struct EvalArgs {
  std::string gt_dir;
  std::string pred_dir;
  std::string classes_csv;
  std::string greenery;
  std::string out_json;
};

void run_eval(const EvalArgs& args, RunRecord& record) {
  const ClassCatalog catalog = load_catalog(args.classes_csv, args.greenery);

  std::map<std::string, fs::path> preds;
  for (const auto& png : list_pngs(args.pred_dir)) preds[id_of(png)] = png;

  std::vector<EvalPair> pairs;
  for (const auto& png : list_pngs(args.gt_dir)) {
    const std::string id = id_of(png);
    const auto it = preds.find(id);
    if (it == preds.end()) throw DataError("no prediction for image '" + id + "'");
    EvalPair pair;
    pair.id = id;
    pair.gt = decode_label_image(read_png_rgb8(png), catalog);
    pair.pred = decode_label_image(read_png_rgb8(it->second), catalog);
    pairs.push_back(std::move(pair));
    preds.erase(it);
  }
  if (!preds.empty()) {
    throw DataError("prediction '" + preds.begin()->first + "' has no ground truth");
  }
  if (pairs.empty()) throw DataError("no ground-truth PNGs in " + args.gt_dir);

  const MetricsReport report = evaluate(pairs, catalog);
  std::ofstream out(args.out_json);
  if (!out) throw DataError("cannot write " + args.out_json);
  out << report_to_json(report).dump(2) << "\n";
  record.add_output(args.out_json);

  std::printf("mean IoU %s, greenery IoU %s, MAE %s%%\n",
              format_g6(report.mean_iou).c_str(), format_g6(report.greenery_iou).c_str(),
              format_g6(report.error_stats.mae_pct).c_str());
}

struct GviArgs {
  std::string labels_dir;
  std::string classes_csv;
  std::string greenery;
  std::string out_csv;
};

void run_gvi(const GviArgs& args, RunRecord& record) {
  const ClassCatalog catalog = load_catalog(args.classes_csv, args.greenery);
  const auto greenery = catalog.greenery_indices();
  if (greenery.empty()) throw DataError("greenery subset is empty");

  const auto pngs = list_pngs(args.labels_dir);
  if (pngs.empty()) throw DataError("no label PNGs in " + args.labels_dir);

  std::vector<GviRecord> records;
  std::ostringstream csv;
  csv << "id,greenery_pixels,valid_pixels,gvi\n";
  for (const auto& png : pngs) {
    const LabelMap labels = decode_label_image(read_png_rgb8(png), catalog);
    records.push_back(gvi(labels, greenery, id_of(png)));
    const auto& r = records.back();
    csv << r.id << "," << r.greenery_pixels << "," << r.valid_pixels << ","
        << format_g6(r.gvi) << "\n";
  }
  std::int64_t total_greenery = 0, total_valid = 0;
  for (const auto& r : records) {
    total_greenery += r.greenery_pixels;
    total_valid += r.valid_pixels;
  }
  csv << "aggregate," << total_greenery << "," << total_valid << ","
      << format_g6(aggregate_gvi(records)) << "\n";

  if (args.out_csv.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.out_csv);
    if (!out) throw DataError("cannot write " + args.out_csv);
    out << csv.str();
    record.add_output(args.out_csv);
  }
}

struct GradcheckArgs {
  int depth = 2;
  std::string size = "16x16";
  int num_classes = 3;
  int base_channels = 8;
  Index samples = 1000;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  bool loss_only = false;
};

void run_gradcheck(const GradcheckArgs& args) {
  Index height = 0, width = 0;
  parse_size(args.size, &height, &width);

  std::mt19937_64 rng(args.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int32_t> pick_class(0, args.num_classes - 1);

  LabelMap labels(height, width);
  for (Index h = 0; h < height; ++h) {
    for (Index w = 0; w < width; ++w) {
      labels(h, w) = unit(rng) < 0.1 ? kVoidLabel : pick_class(rng);
    }
  }
  const WeightVector weights = image_weights(labels, args.num_classes);

  GradCheckReport report;
  if (args.loss_only) {
    Tensor3d activations(height, width, args.num_classes);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index i = 0; i < activations.size(); ++i) activations.flat()[i] = gauss(rng);

    Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(activations.data(),
                                                             activations.size());
    auto unflatten = [&](const Eigen::VectorXd& v) {
      Tensor3d t(height, width, args.num_classes);
      t.flat() = Eigen::Map<const Eigen::ArrayXd>(v.data(), v.size());
      return t;
    };
    const Tensor3d grad_tensor = loss_gradient(labels, activations, weights);
    const Eigen::VectorXd analytic =
        Eigen::Map<const Eigen::VectorXd>(grad_tensor.data(), grad_tensor.size());
    report = finite_difference_check(
        [&](const Eigen::VectorXd& v) {
          return weighted_loss(labels, unflatten(v), weights).total;
        },
        analytic, flat, args.samples, args.epsilon, args.seed + 1);
  } else {
    Tensor3d image(height, width, 3);
    for (Index i = 0; i < image.size(); ++i) image.flat()[i] = unit(rng);

    NetworkConfig config;
    config.depth = args.depth;
    config.base_channels = args.base_channels;
    config.num_classes = args.num_classes;
    config.seed = args.seed;
    const EncoderDecoderNet net(config);
    const Eigen::VectorXd params = net.init_params();
    const Eigen::VectorXd analytic = net.backward(params, image, labels, weights).second;
    report = finite_difference_check(
        [&](const Eigen::VectorXd& p) {
          return weighted_loss(labels, net.forward(p, image), weights).total;
        },
        analytic, params, args.samples, args.epsilon, args.seed + 1);
  }

  const bool pass = report.max_rel_error <= args.tolerance;
  std::printf("gradcheck %s: max_rel_error=%.3e samples=%ld epsilon=%g tolerance=%g: %s\n",
              args.loss_only ? "loss-only" : "full-net", report.max_rel_error,
              static_cast<long>(report.samples), args.epsilon, args.tolerance,
              pass ? "PASS" : "FAIL");
  if (!pass) {
    throw NumericError("gradient check failed: max relative error " +
                       format_g6(report.max_rel_error) + " exceeds " +
                       format_g6(args.tolerance));
  }
}

void run_report(const std::vector<std::string>& files) {
  if (files.empty()) throw UsageError("report needs at least one eval JSON");
  std::printf("%-32s %10s %10s %8s %16s\n", "run", "IoU g. (%)", "MAE (%)", "PCC",
              "EE 5-95% (%)");
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad eval JSON " + file + ": " + e.what());
    }
    const double ioug = j.at("greenery_iou").get<double>() * 100.0;
    const double mae = j.at("mae_pct").get<double>();
    const std::string pcc =
        j.at("pcc").is_null() ? "n/a" : format_g6(j.at("pcc").get<double>());
    const double p5 = j.at("ee_pct").at("p5").get<double>();
    const double p95 = j.at("ee_pct").at("p95").get<double>();
    char ee[32];
    std::snprintf(ee, sizeof(ee), "%.1f, %.1f", p5, p95);
    std::printf("%-32s %10.1f %10.2f %8s %16s\n", fs::path(file).filename().c_str(),
                ioug, mae, pcc.c_str(), ee);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greenery segmentation toolkit"};
  app.set_version_flag("--version", std::string("gvseg ") + kVersion);
  app.require_subcommand(1);

  int threads = 1;
  bool deterministic = false;
  app.add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic,
               "force sequential reductions (single worker)");

  std::vector<std::string> argv_copy(argv, argv + argc);

  ClassesArgs classes_args;
  auto* classes_cmd = app.add_subcommand("classes", "inspect a class dictionary");
  classes_cmd->add_option("--classes", classes_args.classes_csv, "class dictionary CSV")
      ->required();
  classes_cmd->add_option("--greenery", classes_args.greenery, "greenery class list");

  RemapArgs remap_args;
  auto* remap_cmd = app.add_subcommand("remap", "relabel label images through a remap table");
  remap_cmd->add_option("--labels", remap_args.labels_dir, "directory of label PNGs")
      ->required();
  remap_cmd->add_option("--classes", remap_args.classes_csv, "source class dictionary")
      ->required();
  remap_cmd->add_option("--table", remap_args.table_csv, "remap table CSV")->required();
  remap_cmd->add_option("--target-classes", remap_args.target_classes_csv,
                        "target class dictionary")
      ->required();
  remap_cmd->add_option("--out", remap_args.out_dir, "output directory")->required();

  WeightsArgs weights_args;
  auto* weights_cmd = app.add_subcommand("weights", "per-image class weights as CSV");
  weights_cmd->add_option("--data", weights_args.data_dir, "dataset root")->required();
  weights_cmd->add_option("--classes", weights_args.classes_csv, "class dictionary CSV")
      ->required();
  weights_cmd->add_option("--greenery", weights_args.greenery, "greenery class list");
  weights_cmd->add_option("--split", weights_args.split, "all, train, val or test");
  weights_cmd->add_option("--out", weights_args.out_csv, "output CSV (stdout if omitted)");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--count", synth_args.count, "image count")->required();
  synth_cmd->add_option("--size", synth_args.size, "HxW, e.g. 32x32");
  synth_cmd->add_option("--classes", synth_args.num_classes, "class count");
  synth_cmd->add_option("--minority", synth_args.minority, "minority class fraction");
  synth_cmd->add_option("--shape", synth_args.shape, "disks or stripes");
  synth_cmd->add_option("--noise", synth_args.noise, "color noise sigma");
  synth_cmd->add_option("--void", synth_args.void_fraction, "void pixel fraction");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the toy encoder-decoder net");
  train_cmd->add_option("--data", train_args.data_dir, "dataset root")->required();
  train_cmd->add_option("--classes", train_args.classes_csv, "class dictionary CSV")
      ->required();
  train_cmd->add_option("--greenery", train_args.greenery, "greenery class list")
      ->required();
  train_cmd->add_option("--depth", train_args.depth, "encoder stage count");
  train_cmd->add_option("--base-channels", train_args.base_channels, "first stage channels");
  train_cmd->add_option("--lr", train_args.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", train_args.momentum, "SGD momentum");
  train_cmd->add_option("--epochs", train_args.epochs, "epoch count");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--weighting", train_args.weighting, "eq2 or uniform");
  train_cmd->add_option("--seed", train_args.seed, "init and shuffle seed");
  train_cmd->add_option("--out", train_args.out_ckpt, "output checkpoint")->required();

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "predict a label image");
  predict_cmd->add_option("--ckpt", predict_args.ckpt, "checkpoint")->required();
  predict_cmd->add_option("--image", predict_args.image, "input PNG")->required();
  predict_cmd->add_option("--out", predict_args.out, "output label PNG")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions against ground truth");
  eval_cmd->add_option("--gt", eval_args.gt_dir, "ground-truth label directory")->required();
  eval_cmd->add_option("--pred", eval_args.pred_dir, "prediction label directory")
      ->required();
  eval_cmd->add_option("--classes", eval_args.classes_csv, "class dictionary CSV")
      ->required();
  eval_cmd->add_option("--greenery", eval_args.greenery, "greenery class list")->required();
  eval_cmd->add_option("--out", eval_args.out_json, "output report JSON")->required();

  GviArgs gvi_args;
  auto* gvi_cmd = app.add_subcommand("gvi", "per-image and aggregate green view index");
  gvi_cmd->add_option("--labels", gvi_args.labels_dir, "directory of label PNGs")
      ->required();
  gvi_cmd->add_option("--classes", gvi_args.classes_csv, "class dictionary CSV")->required();
  gvi_cmd->add_option("--greenery", gvi_args.greenery, "greenery class list")->required();
  gvi_cmd->add_option("--out", gvi_args.out_csv, "output CSV (stdout if omitted)");

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck_cmd->add_option("--depth", gradcheck_args.depth, "encoder stage count");
  gradcheck_cmd->add_option("--size", gradcheck_args.size, "input HxW");
  gradcheck_cmd->add_option("--classes", gradcheck_args.num_classes, "class count");
  gradcheck_cmd->add_option("--base-channels", gradcheck_args.base_channels,
                            "first stage channels");
  gradcheck_cmd->add_option("--samples", gradcheck_args.samples, "sampled coordinates");
  gradcheck_cmd->add_option("--epsilon", gradcheck_args.epsilon, "finite difference step");
  gradcheck_cmd->add_option("--tol", gradcheck_args.tolerance, "pass threshold");
  gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "instance seed");
  gradcheck_cmd->add_flag("--loss-only", gradcheck_args.loss_only,
                          "check the loss module alone");

  std::vector<std::string> report_files;
  auto* report_cmd = app.add_subcommand("report", "summary table from eval JSONs");
  report_cmd->add_option("files", report_files, "eval JSON files");

  try {
    app.parse(argc, argv);
    if (deterministic) threads = 1;

    if (*classes_cmd) {
      run_classes(classes_args);
    } else if (*remap_cmd) {
      RunRecord record("remap", argv_copy);
      run_remap(remap_args, record);
      record.write();
    } else if (*weights_cmd) {
      RunRecord record("weights", argv_copy);
      run_weights(weights_args, record);
      record.write();
    } else if (*synth_cmd) {
      RunRecord record("synth", argv_copy);
      run_synth(synth_args, record);
      record.write();
    } else if (*train_cmd) {
      RunRecord record("train", argv_copy);
      run_train(train_args, threads, record);
      record.write();
    } else if (*predict_cmd) {
      RunRecord record("predict", argv_copy);
      run_predict(predict_args, record);
      record.write();
    } else if (*eval_cmd) {
      RunRecord record("eval", argv_copy);
      run_eval(eval_args, record);
      record.write();
    } else if (*gvi_cmd) {
      RunRecord record("gvi", argv_copy);
      run_gvi(gvi_args, record);
      record.write();
    } else if (*gradcheck_cmd) {
      run_gradcheck(gradcheck_args);
    } else if (*report_cmd) {
      run_report(report_files);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "gvseg: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "gvseg: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
