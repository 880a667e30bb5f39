#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "gvseg/labelspace.hpp"

namespace gvseg {

// Row = ground truth class, column = predicted class, counts over valid
// pixels only; ground-truth void pixels are tallied separately.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  std::int64_t void_skipped = 0;

  explicit ConfusionMatrix(Index num_classes)
      : counts(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
            num_classes, num_classes)) {}

  Index num_classes() const { return counts.rows(); }
  std::int64_t total() const { return counts.sum(); }

  // Associative merge for per-image parallel accumulation.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

void accumulate_confusion(const LabelMap& gt, const LabelMap& pred, ConfusionMatrix& cm);

// IoU of the merged super-class: TP / (TP + FP + FN) with the subset treated
// as a single class. Throws UndefinedIoUError when the union is empty.
double iou(const ConfusionMatrix& cm, std::span<const Index> classes);

// Single-class IoU; nullopt when the class has empty union in the matrix.
std::optional<double> class_iou(const ConfusionMatrix& cm, Index c);

// Mean over classes with nonzero union; classes absent from both gt and pred
// are skipped, not counted as 0 or 1.
double mean_iou(const ConfusionMatrix& cm);

struct GviRecord {
  std::string id;
  std::int64_t greenery_pixels = 0;
  std::int64_t valid_pixels = 0;
  double gvi = 0.0;  // greenery_pixels / valid_pixels
};

// Proportion of valid (non-void) pixels in the greenery classes.
GviRecord gvi(const LabelMap& labels, std::span<const Index> greenery,
              const std::string& id = "");

// GVI of `labels` counted only where `void_mask` is valid, so predictions
// are scored over the same pixel set as their ground truth.
GviRecord masked_gvi(const LabelMap& labels, const LabelMap& void_mask,
                     std::span<const Index> greenery, const std::string& id = "");

// Sum of greenery pixels over sum of valid areas, NOT the mean of ratios.
double aggregate_gvi(std::span<const GviRecord> records);

struct GviErrorStats {
  double mae_pct = 0.0;            // mean |100 * (pred - gt)|
  std::optional<double> pcc;       // nullopt when variance is zero (undefined)
  double ee_p5_pct = 0.0;          // empirical 5th percentile of signed errors
  double ee_p95_pct = 0.0;         // empirical 95th percentile
};

// Pairs records by id; percentiles interpolate linearly between order
// statistics at rank h = (n - 1) * q.
GviErrorStats gvi_error_stats(std::span<const GviRecord> pred,
                              std::span<const GviRecord> gt);

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> per_class_iou;
  double mean_iou = 0.0;
  double greenery_iou = 0.0;
  std::vector<GviRecord> gvi_pred;
  std::vector<GviRecord> gvi_gt;
  double aggregate_gvi_pred = 0.0;
  double aggregate_gvi_gt = 0.0;
  GviErrorStats error_stats;
  std::int64_t void_skipped = 0;
};

struct EvalPair {
  std::string id;
  LabelMap gt;
  LabelMap pred;
};

MetricsReport evaluate(const std::vector<EvalPair>& pairs, const ClassCatalog& catalog);

// JSON schema used by the `eval` subcommand; numbers carry 6 significant digits.
nlohmann::ordered_json report_to_json(const MetricsReport& report);

// Round-trip a double through %.6g so serialized reports are diff-stable.
double round_sig6(double v);

}  // namespace gvseg
