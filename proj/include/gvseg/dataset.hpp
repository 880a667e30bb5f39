#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gvseg/labelspace.hpp"
#include "gvseg/tensor.hpp"

namespace gvseg {

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split split);

struct DatasetEntry {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path label;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;  // sorted by id

  std::int64_t count(Split split) const;
  std::vector<DatasetEntry> split_entries(Split split) const;
};

// Directory convention: images/*.png paired with labels/<id>_L.png, plus
// optional splits/{train,val,test}.txt listing ids one per line. Split files,
// when present, must cover every id exactly once. Without them the manifest
// is split by sorted-filename order in 421:112:168 proportions.
DatasetManifest scan_dataset(const std::filesystem::path& root);

// Writes splits/{train,val,test}.txt reproducing the manifest's assignment.
void write_split_files(const DatasetManifest& manifest, const std::filesystem::path& dir);

enum class SyntheticShape { kDisks, kStripes };

struct SyntheticSpec {
  int count = 1;
  Index height = 32;
  Index width = 32;
  int num_classes = 2;
  double minority_fraction = 0.05;  // in (0, 0.5), assigned to the last class
  SyntheticShape shape = SyntheticShape::kDisks;
  double noise = 0.15;              // Gaussian sigma added per channel
  double void_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  std::string id;
  Tensor3d image;   // H x W x 3, values in [0, 1]
  LabelMap labels;
};

// Deterministic given the seed. Class-correlated colors plus noise make the
// task learnable; the minority class forms disks or stripe bands.
std::vector<SyntheticSample> generate_synthetic(const SyntheticSpec& spec);

// Catalog matching generate_synthetic's label encoding: classes named
// class0..classN with a distinct palette, Void black, minority class greenery.
ClassCatalog synthetic_catalog(int num_classes);

// Writes images/, labels/, class_dict.csv and greenery.txt under out_dir.
void write_synthetic_dataset(const std::vector<SyntheticSample>& samples,
                             int num_classes, const std::filesystem::path& out_dir);

}  // namespace gvseg
