#include "gvseg/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gvseg/image.hpp"

namespace gvseg {

namespace fs = std::filesystem;

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::int64_t DatasetManifest::count(Split split) const {
  return std::count_if(entries.begin(), entries.end(),
                       [split](const DatasetEntry& e) { return e.split == split; });
}

std::vector<DatasetEntry> DatasetManifest::split_entries(Split split) const {
  std::vector<DatasetEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> read_id_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string id = trim(line);
    if (!id.empty()) ids.push_back(id);
  }
  return ids;
}

}  // namespace

DatasetManifest scan_dataset(const fs::path& root) {
  const fs::path images_dir = root / "images";
  const fs::path labels_dir = root / "labels";
  if (!fs::is_directory(images_dir)) {
    throw DataError("missing images directory " + images_dir.string());
  }
  if (!fs::is_directory(labels_dir)) {
    throw DataError("missing labels directory " + labels_dir.string());
  }

  DatasetManifest manifest;
  manifest.root = root;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string id = entry.path().stem().string();
    const fs::path label = labels_dir / (id + "_L.png");
    if (!fs::exists(label)) {
      throw DataError("missing label for image '" + id + "' (expected " +
                      label.string() + ")");
    }
    manifest.entries.push_back(DatasetEntry{id, entry.path(), label, Split::kTrain});
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });

  const fs::path splits_dir = root / "splits";
  const std::array<std::pair<Split, fs::path>, 3> split_files = {
      std::make_pair(Split::kTrain, splits_dir / "train.txt"),
      std::make_pair(Split::kVal, splits_dir / "val.txt"),
      std::make_pair(Split::kTest, splits_dir / "test.txt"),
  };
  const bool any_split_file = std::any_of(
      split_files.begin(), split_files.end(),
      [](const auto& p) { return fs::exists(p.second); });

  if (any_split_file) {
    std::map<std::string, Split> assignment;
    for (const auto& [split, path] : split_files) {
      if (!fs::exists(path)) continue;
      std::set<std::string> seen_here;
      for (const auto& id : read_id_file(path)) {
        if (!seen_here.insert(id).second) {
          throw DataError("duplicate id '" + id + "' in " + path.string());
        }
        const auto [it, inserted] = assignment.emplace(id, split);
        if (!inserted) {
          throw DataError("split overlap: id '" + id + "' appears in both " +
                          std::string(split_name(it->second)) + " and " +
                          std::string(split_name(split)));
        }
      }
    }
    for (auto& entry : manifest.entries) {
      const auto it = assignment.find(entry.id);
      if (it == assignment.end()) {
        throw DataError("id '" + entry.id + "' is not assigned to any split");
      }
      entry.split = it->second;
      assignment.erase(it);
    }
    if (!assignment.empty()) {
      throw DataError("split file lists unknown id '" + assignment.begin()->first + "'");
    }
  } else {
    // No list files: assign by sorted-filename order in 421:112:168 proportions.
    const std::int64_t n = static_cast<std::int64_t>(manifest.entries.size());
    const std::int64_t n_train = std::llround(static_cast<double>(n) * 421.0 / 701.0);
    const std::int64_t n_val = std::llround(static_cast<double>(n) * 112.0 / 701.0);
    for (std::int64_t i = 0; i < n; ++i) {
      auto& entry = manifest.entries[static_cast<std::size_t>(i)];
      entry.split = i < n_train           ? Split::kTrain
                    : i < n_train + n_val ? Split::kVal
                                          : Split::kTest;
    }
  }
  return manifest;
}

void write_split_files(const DatasetManifest& manifest, const fs::path& dir) {
  fs::create_directories(dir);
  for (const Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::ofstream out(dir / (std::string(split_name(split)) + ".txt"));
    if (!out) throw DataError("cannot write split files under " + dir.string());
    for (const auto& entry : manifest.entries) {
      if (entry.split == split) out << entry.id << "\n";
    }
  }
}

namespace {

// Base colors the image pixels are drawn around, one per class.
constexpr std::array<std::array<double, 3>, 8> kImagePalette = {{
    {0.36, 0.42, 0.48},
    {0.62, 0.66, 0.30},
    {0.70, 0.35, 0.35},
    {0.35, 0.70, 0.70},
    {0.75, 0.55, 0.25},
    {0.45, 0.30, 0.65},
    {0.25, 0.55, 0.35},
    {0.65, 0.40, 0.60},
}};

// Saturated label-encoding colors; Void is black.
constexpr std::array<Rgb, 8> kLabelPalette = {{
    {0, 0, 255},
    {0, 255, 0},
    {255, 0, 0},
    {255, 255, 0},
    {255, 0, 255},
    {0, 255, 255},
    {255, 128, 0},
    {128, 0, 255},
}};

void validate_spec(const SyntheticSpec& spec) {
  if (spec.count < 1) throw DataError("synthetic spec: count must be >= 1");
  if (spec.height < 4 || spec.width < 4) {
    throw DataError("synthetic spec: size must be at least 4x4");
  }
  if (spec.num_classes < 2 ||
      spec.num_classes > static_cast<int>(kLabelPalette.size())) {
    throw DataError("synthetic spec: class count must be in [2, 8]");
  }
  if (spec.minority_fraction <= 0.0 || spec.minority_fraction >= 0.5) {
    throw DataError("synthetic spec: minority fraction must be in (0, 0.5)");
  }
  if (spec.minority_fraction * static_cast<double>(spec.height * spec.width) < 1.0) {
    throw DataError("synthetic spec: minority fraction yields no pixels");
  }
  if (spec.noise < 0.0) throw DataError("synthetic spec: noise must be >= 0");
  if (spec.void_fraction < 0.0 || spec.void_fraction >= 0.5) {
    throw DataError("synthetic spec: void fraction must be in [0, 0.5)");
  }
}

// Paints disks of class c over background pixels until ~target pixels are
// covered; radii shrink with the remaining budget so there is no overshoot.
void paint_disks(LabelMap& labels, std::int32_t cls, std::int64_t target,
                 std::mt19937_64& rng) {
  const Index height = labels.rows(), width = labels.cols();
  std::int64_t painted = 0;
  int attempts = 0;
  while (painted + 2 < target && attempts < 500) {
    ++attempts;
    const std::int64_t remaining = target - painted;
    const double ideal = std::floor(std::sqrt(static_cast<double>(remaining) / 3.14159265));
    const Index radius = std::max<Index>(1, static_cast<Index>(ideal));
    std::uniform_int_distribution<Index> pick_h(0, height - 1);
    std::uniform_int_distribution<Index> pick_w(0, width - 1);
    const Index ch = pick_h(rng), cw = pick_w(rng);
    for (Index h = std::max<Index>(0, ch - radius);
         h <= std::min(height - 1, ch + radius); ++h) {
      for (Index w = std::max<Index>(0, cw - radius);
           w <= std::min(width - 1, cw + radius); ++w) {
        if (painted >= target) break;
        const Index dh = h - ch, dw = w - cw;
        if (dh * dh + dw * dw <= radius * radius && labels(h, w) == 0) {
          labels(h, w) = cls;
          ++painted;
        }
      }
    }
  }
}

void paint_stripes(LabelMap& labels, const std::vector<std::int64_t>& row_counts,
                   std::mt19937_64& rng) {
  const Index height = labels.rows();
  std::uniform_int_distribution<Index> pick_offset(0, height - 1);
  const Index offset = pick_offset(rng);
  Index row = 0;
  for (std::size_t cls = 0; cls < row_counts.size(); ++cls) {
    for (std::int64_t k = 0; k < row_counts[cls]; ++k, ++row) {
      labels.row((row + offset) % height).setConstant(static_cast<std::int32_t>(cls));
    }
  }
}

}  // namespace

std::vector<SyntheticSample> generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index height = spec.height, width = spec.width;
  const std::int64_t area = static_cast<std::int64_t>(height) * width;
  const std::int32_t minority = spec.num_classes - 1;

  // Non-background classes other than the minority share the rest evenly
  // with the background.
  const double other_fraction =
      spec.num_classes > 2
          ? (1.0 - spec.minority_fraction) / static_cast<double>(spec.num_classes - 1)
          : 0.0;

  std::vector<SyntheticSample> samples;
  samples.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    SyntheticSample sample;
    {
      std::ostringstream name;
      name << "synth_" << std::setw(5) << std::setfill('0') << i;
      sample.id = name.str();
    }
    sample.labels = LabelMap::Zero(height, width);

    if (spec.shape == SyntheticShape::kDisks) {
      for (std::int32_t cls = 1; cls < minority; ++cls) {
        paint_disks(sample.labels, cls,
                    std::llround(other_fraction * static_cast<double>(area)), rng);
      }
      paint_disks(sample.labels, minority,
                  std::llround(spec.minority_fraction * static_cast<double>(area)), rng);
    } else {
      std::vector<std::int64_t> rows(static_cast<std::size_t>(spec.num_classes), 0);
      const std::int64_t minority_rows =
          std::llround(spec.minority_fraction * static_cast<double>(height));
      rows[static_cast<std::size_t>(minority)] = std::max<std::int64_t>(1, minority_rows);
      std::int64_t left = height - rows[static_cast<std::size_t>(minority)];
      for (std::int32_t cls = 0; cls < minority; ++cls) {
        const std::int64_t share = left / (minority - cls);
        rows[static_cast<std::size_t>(cls)] = share;
        left -= share;
      }
      rows[0] += left;
      paint_stripes(sample.labels, rows, rng);
    }

    if (spec.void_fraction > 0.0) {
      const std::int64_t void_target =
          std::llround(spec.void_fraction * static_cast<double>(area));
      std::vector<Index> cells(static_cast<std::size_t>(area));
      std::iota(cells.begin(), cells.end(), Index{0});
      for (std::int64_t k = 0; k < void_target; ++k) {
        std::uniform_int_distribution<Index> pick(static_cast<Index>(k),
                                                  static_cast<Index>(area - 1));
        std::swap(cells[static_cast<std::size_t>(k)],
                  cells[static_cast<std::size_t>(pick(rng))]);
        const Index cell = cells[static_cast<std::size_t>(k)];
        sample.labels(cell / width, cell % width) = kVoidLabel;
      }
    }

    sample.image = Tensor3d(height, width, 3);
    for (Index h = 0; h < height; ++h) {
      for (Index w = 0; w < width; ++w) {
        const std::int32_t cls = sample.labels(h, w);
        const auto& base =
            kImagePalette[static_cast<std::size_t>(cls == kVoidLabel ? 0 : cls)];
        for (Index c = 0; c < 3; ++c) {
          const double v = base[static_cast<std::size_t>(c)] + spec.noise * gauss(rng);
          sample.image(h, w, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

ClassCatalog synthetic_catalog(int num_classes) {
  if (num_classes < 2 || num_classes > static_cast<int>(kLabelPalette.size())) {
    throw DataError("synthetic catalog supports 2 to 8 classes");
  }
  std::vector<ClassDef> classes;
  for (int c = 0; c < num_classes; ++c) {
    classes.push_back(ClassDef{"class" + std::to_string(c),
                               kLabelPalette[static_cast<std::size_t>(c)],
                               c == num_classes - 1});
  }
  return ClassCatalog(std::move(classes), Rgb{0, 0, 0});
}

void write_synthetic_dataset(const std::vector<SyntheticSample>& samples,
                             int num_classes, const fs::path& out_dir) {
  const ClassCatalog catalog = synthetic_catalog(num_classes);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");

  for (const auto& sample : samples) {
    write_png_rgb8(out_dir / "images" / (sample.id + ".png"), to_image_u8(sample.image));
    write_png_rgb8(out_dir / "labels" / (sample.id + "_L.png"),
                   encode_label_image(sample.labels, catalog));
  }

  std::ofstream dict(out_dir / "class_dict.csv");
  dict << "name,r,g,b\n";
  for (Index c = 0; c < catalog.num_classes(); ++c) {
    const auto& def = catalog.class_def(c);
    dict << def.name << "," << int(def.color[0]) << "," << int(def.color[1]) << ","
         << int(def.color[2]) << "\n";
  }
  const Rgb vc = catalog.void_color();
  dict << "Void," << int(vc[0]) << "," << int(vc[1]) << "," << int(vc[2]) << "\n";

  std::ofstream greenery(out_dir / "greenery.txt");
  greenery << catalog.class_def(catalog.num_classes() - 1).name << "\n";
}

}  // namespace gvseg
