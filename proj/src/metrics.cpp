#include "gvseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace gvseg {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes() != num_classes()) {
    throw ShapeMismatchError("confusion matrices have different class counts");
  }
  counts += other.counts;
  void_skipped += other.void_skipped;
  return *this;
}

void accumulate_confusion(const LabelMap& gt, const LabelMap& pred, ConfusionMatrix& cm) {
  if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) {
    throw ShapeMismatchError("prediction shape does not match ground truth");
  }
  const Index num_classes = cm.num_classes();
  for (Index h = 0; h < gt.rows(); ++h) {
    for (Index w = 0; w < gt.cols(); ++w) {
      const std::int32_t t = gt(h, w);
      if (t == kVoidLabel) {
        ++cm.void_skipped;
        continue;
      }
      const std::int32_t p = pred(h, w);
      if (p == kVoidLabel) throw DataError("prediction contains void pixels");
      if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
        throw DataError("label index out of range in confusion accumulation");
      }
      ++cm.counts(t, p);
    }
  }
}

double iou(const ConfusionMatrix& cm, std::span<const Index> classes) {
  if (classes.empty()) throw DataError("IoU requested for an empty class subset");
  std::vector<bool> in_set(static_cast<std::size_t>(cm.num_classes()), false);
  for (const Index c : classes) {
    if (c < 0 || c >= cm.num_classes()) throw DataError("IoU class index out of range");
    in_set[static_cast<std::size_t>(c)] = true;
  }
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (Index i = 0; i < cm.num_classes(); ++i) {
    for (Index j = 0; j < cm.num_classes(); ++j) {
      const bool gi = in_set[static_cast<std::size_t>(i)];
      const bool pj = in_set[static_cast<std::size_t>(j)];
      if (gi && pj) tp += cm.counts(i, j);
      else if (!gi && pj) fp += cm.counts(i, j);
      else if (gi && !pj) fn += cm.counts(i, j);
    }
  }
  const std::int64_t denom = tp + fp + fn;
  if (denom == 0) throw UndefinedIoUError();
  return static_cast<double>(tp) / static_cast<double>(denom);
}

std::optional<double> class_iou(const ConfusionMatrix& cm, Index c) {
  if (c < 0 || c >= cm.num_classes()) throw DataError("IoU class index out of range");
  const std::int64_t tp = cm.counts(c, c);
  const std::int64_t fp = cm.counts.col(c).sum() - tp;
  const std::int64_t fn = cm.counts.row(c).sum() - tp;
  const std::int64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

double mean_iou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  Index defined = 0;
  for (Index c = 0; c < cm.num_classes(); ++c) {
    if (const auto v = class_iou(cm, c)) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) throw UndefinedIoUError("mean IoU undefined: no class has pixels");
  return sum / static_cast<double>(defined);
}

namespace {

// Interpolated percentile at rank h = (n - 1) * q over sorted values.
double percentile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

GviRecord gvi(const LabelMap& labels, std::span<const Index> greenery,
              const std::string& id) {
  if (greenery.empty()) throw DataError("greenery subset is empty");
  GviRecord record;
  record.id = id;
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t v = labels(h, w);
      if (v == kVoidLabel) continue;
      ++record.valid_pixels;
      if (std::find(greenery.begin(), greenery.end(), static_cast<Index>(v)) !=
          greenery.end()) {
        ++record.greenery_pixels;
      }
    }
  }
  if (record.valid_pixels == 0) throw EmptyImageError("GVI undefined for an all-void image");
  record.gvi = static_cast<double>(record.greenery_pixels) /
               static_cast<double>(record.valid_pixels);
  return record;
}

GviRecord masked_gvi(const LabelMap& labels, const LabelMap& void_mask,
                     std::span<const Index> greenery, const std::string& id) {
  if (labels.rows() != void_mask.rows() || labels.cols() != void_mask.cols()) {
    throw ShapeMismatchError("mask shape does not match the label map");
  }
  LabelMap masked = labels;
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      if (void_mask(h, w) == kVoidLabel) masked(h, w) = kVoidLabel;
    }
  }
  return gvi(masked, greenery, id);
}

double aggregate_gvi(std::span<const GviRecord> records) {
  if (records.empty()) throw DataError("aggregate GVI of an empty record list");
  std::int64_t greenery = 0, valid = 0;
  for (const auto& r : records) {
    greenery += r.greenery_pixels;
    valid += r.valid_pixels;
  }
  return static_cast<double>(greenery) / static_cast<double>(valid);
}

GviErrorStats gvi_error_stats(std::span<const GviRecord> pred,
                              std::span<const GviRecord> gt) {
  if (pred.size() != gt.size()) {
    throw DataError("unpaired GVI records: list sizes differ");
  }
  if (pred.empty()) throw DataError("GVI error stats of empty record lists");

  std::unordered_map<std::string, const GviRecord*> by_id;
  for (const auto& r : gt) by_id.emplace(r.id, &r);

  std::vector<double> errors;  // signed, percentage points
  std::vector<double> xs, ys;
  errors.reserve(pred.size());
  for (const auto& p : pred) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw DataError("unpaired GVI record '" + p.id + "'");
    errors.push_back(100.0 * (p.gvi - it->second->gvi));
    xs.push_back(p.gvi);
    ys.push_back(it->second->gvi);
  }

  GviErrorStats stats;
  double abs_sum = 0.0;
  for (const double e : errors) abs_sum += std::abs(e);
  stats.mae_pct = abs_sum / static_cast<double>(errors.size());

  const std::size_t n = xs.size();
  // A constant series has zero variance and an undefined PCC; detect it
  // exactly so rounding in the mean cannot fake a tiny variance.
  const bool x_constant =
      *std::max_element(xs.begin(), xs.end()) == *std::min_element(xs.begin(), xs.end());
  const bool y_constant =
      *std::max_element(ys.begin(), ys.end()) == *std::min_element(ys.begin(), ys.end());
  if (n >= 2 && !x_constant && !y_constant) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx > 0.0 && syy > 0.0) {
      stats.pcc = sxy / std::sqrt(sxx * syy);
    }
  }

  std::sort(errors.begin(), errors.end());
  stats.ee_p5_pct = percentile(errors, 0.05);
  stats.ee_p95_pct = percentile(errors, 0.95);
  return stats;
}

MetricsReport evaluate(const std::vector<EvalPair>& pairs, const ClassCatalog& catalog) {
  if (pairs.empty()) throw DataError("nothing to evaluate");
  const auto greenery = catalog.greenery_indices();
  if (greenery.empty()) throw DataError("greenery metrics requested with an empty greenery subset");

  ConfusionMatrix cm(catalog.num_classes());
  MetricsReport report;
  for (const auto& pair : pairs) {
    accumulate_confusion(pair.gt, pair.pred, cm);
    report.gvi_gt.push_back(gvi(pair.gt, greenery, pair.id));
    report.gvi_pred.push_back(masked_gvi(pair.pred, pair.gt, greenery, pair.id));
  }

  for (Index c = 0; c < catalog.num_classes(); ++c) {
    report.class_names.push_back(catalog.class_def(c).name);
    report.per_class_iou.push_back(class_iou(cm, c));
  }
  report.mean_iou = mean_iou(cm);
  report.greenery_iou = iou(cm, greenery);
  report.aggregate_gvi_pred = aggregate_gvi(report.gvi_pred);
  report.aggregate_gvi_gt = aggregate_gvi(report.gvi_gt);
  report.error_stats = gvi_error_stats(report.gvi_pred, report.gvi_gt);
  report.void_skipped = cm.void_skipped;
  return report;
}

double round_sig6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_class;
  for (std::size_t i = 0; i < report.class_names.size(); ++i) {
    if (report.per_class_iou[i]) {
      per_class[report.class_names[i]] = round_sig6(*report.per_class_iou[i]);
    } else {
      per_class[report.class_names[i]] = nullptr;
    }
  }
  j["per_class_iou"] = std::move(per_class);
  j["mean_iou"] = round_sig6(report.mean_iou);
  j["greenery_iou"] = round_sig6(report.greenery_iou);

  nlohmann::ordered_json per_image;
  for (std::size_t i = 0; i < report.gvi_pred.size(); ++i) {
    per_image[report.gvi_pred[i].id] = {
        {"pred", round_sig6(report.gvi_pred[i].gvi)},
        {"gt", round_sig6(report.gvi_gt[i].gvi)},
    };
  }
  j["per_image_gvi"] = std::move(per_image);
  j["aggregate_gvi"] = {{"pred", round_sig6(report.aggregate_gvi_pred)},
                        {"gt", round_sig6(report.aggregate_gvi_gt)}};
  j["mae_pct"] = round_sig6(report.error_stats.mae_pct);
  if (report.error_stats.pcc) {
    j["pcc"] = round_sig6(*report.error_stats.pcc);
  } else {
    j["pcc"] = nullptr;
  }
  j["ee_pct"] = {{"p5", round_sig6(report.error_stats.ee_p5_pct)},
                 {"p95", round_sig6(report.error_stats.ee_p95_pct)}};
  j["void_skipped"] = report.void_skipped;
  return j;
}

}  // namespace gvseg
