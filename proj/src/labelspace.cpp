#include "gvseg/labelspace.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace gvseg {

namespace {

std::uint32_t pack_rgb(Rgb color) {
  return (static_cast<std::uint32_t>(color[0]) << 16) |
         (static_cast<std::uint32_t>(color[1]) << 8) |
         static_cast<std::uint32_t>(color[2]);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  return fields;
}

std::uint8_t parse_channel(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw DataError("bad color value '" + s + "' in " + context);
  }
  if (pos != s.size() || v < 0 || v > 255) {
    throw DataError("bad color value '" + s + "' in " + context);
  }
  return static_cast<std::uint8_t>(v);
}

constexpr const char* kVoidName = "Void";

}  // namespace

ClassCatalog::ClassCatalog(std::vector<ClassDef> classes, Rgb void_color)
    : classes_(std::move(classes)), void_color_(void_color) {
  if (classes_.size() < 2) {
    throw DataError("class catalog needs at least 2 non-void classes");
  }
  std::set<std::string> names;
  for (const auto& def : classes_) {
    if (def.name.empty()) throw DataError("empty class name");
    if (def.name == kVoidName) throw DataError("void must not be listed as a class");
    if (!names.insert(def.name).second) {
      throw DataError("duplicate class name '" + def.name + "'");
    }
  }
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto key = pack_rgb(classes_[i].color);
    if (!color_index_.emplace(key, static_cast<std::int32_t>(i)).second) {
      throw DataError("duplicate class color for '" + classes_[i].name + "'");
    }
  }
  if (!color_index_.emplace(pack_rgb(void_color_), kVoidLabel).second) {
    throw DataError("void color collides with a class color");
  }
}

ClassCatalog ClassCatalog::load(const std::filesystem::path& csv_path,
                                const std::optional<std::filesystem::path>& greenery_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open class dictionary " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty class dictionary " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() != 4 || header[0] != "name" || header[1] != "r" ||
      header[2] != "g" || header[3] != "b") {
    throw DataError("class dictionary header must be 'name,r,g,b' in " + csv_path.string());
  }

  std::vector<ClassDef> classes;
  std::optional<Rgb> void_color;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw DataError("malformed row '" + line + "' in " + csv_path.string());
    }
    const Rgb color{parse_channel(fields[1], csv_path.string()),
                    parse_channel(fields[2], csv_path.string()),
                    parse_channel(fields[3], csv_path.string())};
    if (fields[0] == kVoidName) {
      if (void_color) throw DataError("duplicate Void row in " + csv_path.string());
      void_color = color;
    } else {
      classes.push_back(ClassDef{fields[0], color, false});
    }
  }
  if (!void_color) {
    throw DataError("class dictionary must contain a Void row: " + csv_path.string());
  }

  if (greenery_path) {
    std::ifstream gin(*greenery_path);
    if (!gin) throw DataError("cannot open greenery list " + greenery_path->string());
    std::set<std::string> greenery;
    while (std::getline(gin, line)) {
      const std::string name = trim(line);
      if (!name.empty()) greenery.insert(name);
    }
    for (auto& def : classes) {
      if (greenery.erase(def.name) > 0) def.greenery = true;
    }
    if (!greenery.empty()) {
      throw DataError("greenery class '" + *greenery.begin() + "' not in catalog");
    }
  }

  return ClassCatalog(std::move(classes), *void_color);
}

std::optional<std::int32_t> ClassCatalog::index_of_color(Rgb color) const {
  const auto it = color_index_.find(pack_rgb(color));
  if (it == color_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> ClassCatalog::index_of_name(const std::string& name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].name == name) return static_cast<Index>(i);
  }
  return std::nullopt;
}

std::vector<Index> ClassCatalog::greenery_indices() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].greenery) out.push_back(static_cast<Index>(i));
  }
  return out;
}

LabelMap decode_label_image(const ImageU8& pixels, const ClassCatalog& catalog,
                            const LabelDecodeOptions& options) {
  LabelMap labels(pixels.height, pixels.width);
  for (Index h = 0; h < pixels.height; ++h) {
    for (Index w = 0; w < pixels.width; ++w) {
      const Rgb color = pixels.at(h, w);
      const auto index = catalog.index_of_color(color);
      if (index) {
        labels(h, w) = *index;
      } else if (options.unknown_as_void) {
        labels(h, w) = kVoidLabel;
      } else {
        throw UnknownColorError(color, static_cast<long>(w), static_cast<long>(h));
      }
    }
  }
  return labels;
}

ImageU8 encode_label_image(const LabelMap& labels, const ClassCatalog& catalog) {
  ImageU8 out(labels.rows(), labels.cols());
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t v = labels(h, w);
      if (v == kVoidLabel) {
        out.set(h, w, catalog.void_color());
      } else if (v >= 0 && v < catalog.num_classes()) {
        out.set(h, w, catalog.class_def(v).color);
      } else {
        throw DataError("label index " + std::to_string(v) + " out of range");
      }
    }
  }
  return out;
}

Tensor3d one_hot(const LabelMap& labels, Index num_classes) {
  Tensor3d out(labels.rows(), labels.cols(), num_classes);
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t v = labels(h, w);
      if (v == kVoidLabel) continue;
      if (v < 0 || v >= num_classes) {
        throw DataError("label index " + std::to_string(v) + " out of range");
      }
      out(h, w, v) = 1.0;
    }
  }
  return out;
}

ClassHistogram class_histogram(const LabelMap& labels, Index num_classes) {
  ClassHistogram hist;
  hist.counts = CountVector::Zero(num_classes);
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t v = labels(h, w);
      if (v == kVoidLabel) {
        ++hist.void_count;
      } else if (v >= 0 && v < num_classes) {
        ++hist.counts[v];
        ++hist.valid;
      } else {
        throw DataError("label index " + std::to_string(v) + " out of range");
      }
    }
  }
  return hist;
}

RemapTable::RemapTable(std::vector<std::int32_t> mapping, ClassCatalog target_catalog)
    : mapping_(std::move(mapping)), target_(std::move(target_catalog)) {
  std::vector<bool> hit(static_cast<std::size_t>(target_.num_classes()), false);
  for (std::size_t i = 0; i < mapping_.size(); ++i) {
    const std::int32_t t = mapping_[i];
    if (t < 0 || t >= target_.num_classes()) {
      throw UnmappedClassError("source class " + std::to_string(i) +
                               " maps outside the target catalog");
    }
    hit[static_cast<std::size_t>(t)] = true;
  }
  for (Index t = 0; t < target_.num_classes(); ++t) {
    if (!hit[static_cast<std::size_t>(t)]) {
      throw DataError("target class '" + target_.class_def(t).name +
                      "' has no source class");
    }
  }
}

RemapTable RemapTable::load(const std::filesystem::path& csv_path,
                            const ClassCatalog& source, const ClassCatalog& target) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open remap table " + csv_path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty remap table " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "source" || header[1] != "target") {
    throw DataError("remap table header must be 'source,target' in " + csv_path.string());
  }

  std::vector<std::int32_t> mapping(static_cast<std::size_t>(source.num_classes()), -1);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw DataError("malformed row '" + line + "' in " + csv_path.string());
    }
    if (fields[0] == kVoidName || fields[1] == kVoidName) {
      throw DataError("void must not appear in a remap table");
    }
    const auto src = source.index_of_name(fields[0]);
    if (!src) throw DataError("unknown source class '" + fields[0] + "'");
    const auto tgt = target.index_of_name(fields[1]);
    if (!tgt) throw DataError("unknown target class '" + fields[1] + "'");
    if (mapping[static_cast<std::size_t>(*src)] != -1) {
      throw DataError("duplicate source class '" + fields[0] + "'");
    }
    mapping[static_cast<std::size_t>(*src)] = static_cast<std::int32_t>(*tgt);
  }
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (mapping[i] == -1) {
      throw UnmappedClassError("source class '" + source.class_def(static_cast<Index>(i)).name +
                               "' has no remap row");
    }
  }
  return RemapTable(std::move(mapping), target);
}

RemapTable RemapTable::identity(const ClassCatalog& catalog) {
  std::vector<std::int32_t> mapping(static_cast<std::size_t>(catalog.num_classes()));
  for (std::size_t i = 0; i < mapping.size(); ++i) mapping[i] = static_cast<std::int32_t>(i);
  return RemapTable(std::move(mapping), catalog);
}

std::int32_t RemapTable::target_of(Index source_index) const {
  if (source_index < 0 || source_index >= source_classes()) {
    throw UnmappedClassError("source class " + std::to_string(source_index) +
                             " outside the table domain");
  }
  return mapping_[static_cast<std::size_t>(source_index)];
}

LabelMap remap(const LabelMap& labels, const RemapTable& table) {
  LabelMap out(labels.rows(), labels.cols());
  for (Index h = 0; h < labels.rows(); ++h) {
    for (Index w = 0; w < labels.cols(); ++w) {
      const std::int32_t v = labels(h, w);
      out(h, w) = (v == kVoidLabel) ? kVoidLabel : table.target_of(v);
    }
  }
  return out;
}

}  // namespace gvseg
