#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "gvseg/errors.hpp"
#include "gvseg/image.hpp"
#include "gvseg/tensor.hpp"

namespace gvseg {

// Per-pixel class indices. Entries are either in [0, C) or kVoidLabel.
// Void marks pixels treated as missing data: they never enter weights,
// loss or metrics, and are never a channel of their own.
using LabelMap = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
inline constexpr std::int32_t kVoidLabel = -1;

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

struct ClassDef {
  std::string name;
  Rgb color{};
  bool greenery = false;
};

// Ordered class universe with exact-match RGB encoding and a void sentinel.
class ClassCatalog {
 public:
  ClassCatalog(std::vector<ClassDef> classes, Rgb void_color);

  // Class dictionary CSV with header `name,r,g,b`, one row per class; the
  // row named `Void` supplies the void color. Greenery membership comes
  // from an optional companion file listing class names, one per line.
  static ClassCatalog load(const std::filesystem::path& csv_path,
                           const std::optional<std::filesystem::path>& greenery_path = {});

  Index num_classes() const { return static_cast<Index>(classes_.size()); }
  const ClassDef& class_def(Index index) const { return classes_.at(static_cast<std::size_t>(index)); }
  const std::vector<ClassDef>& classes() const { return classes_; }
  Rgb void_color() const { return void_color_; }

  // kVoidLabel for the void color, class index otherwise, nullopt if unknown.
  std::optional<std::int32_t> index_of_color(Rgb color) const;
  std::optional<Index> index_of_name(const std::string& name) const;

  std::vector<Index> greenery_indices() const;

 private:
  std::vector<ClassDef> classes_;
  Rgb void_color_{};
  std::unordered_map<std::uint32_t, std::int32_t> color_index_;
};

struct LabelDecodeOptions {
  bool unknown_as_void = false;  // strict mode errors on unknown colors
};

LabelMap decode_label_image(const ImageU8& pixels, const ClassCatalog& catalog,
                            const LabelDecodeOptions& options = {});
ImageU8 encode_label_image(const LabelMap& labels, const ClassCatalog& catalog);

// Exactly one channel set at valid pixels, all channels zero at void pixels.
Tensor3d one_hot(const LabelMap& labels, Index num_classes);

struct ClassHistogram {
  CountVector counts;            // |y_c| per class
  std::int64_t void_count = 0;
  std::int64_t valid = 0;        // |y| = sum of counts
};

ClassHistogram class_histogram(const LabelMap& labels, Index num_classes);

inline std::int64_t valid_pixel_count(const LabelMap& labels) {
  return static_cast<std::int64_t>((labels != kVoidLabel).count());
}

// Total map from source class indices to target class indices; void passes
// through unchanged and never appears as a source or target row.
class RemapTable {
 public:
  RemapTable(std::vector<std::int32_t> mapping, ClassCatalog target_catalog);

  // CSV with header `source,target`, class names as text. Every non-void
  // source class must be mapped and every target class must be hit.
  static RemapTable load(const std::filesystem::path& csv_path,
                         const ClassCatalog& source, const ClassCatalog& target);

  static RemapTable identity(const ClassCatalog& catalog);

  Index source_classes() const { return static_cast<Index>(mapping_.size()); }
  std::int32_t target_of(Index source_index) const;
  const ClassCatalog& target_catalog() const { return target_; }

 private:
  std::vector<std::int32_t> mapping_;
  ClassCatalog target_;
};

LabelMap remap(const LabelMap& labels, const RemapTable& table);

}  // namespace gvseg
