#include "gvseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace gvseg {

namespace {

constexpr char kMagic[8] = {'G', 'V', 'S', 'E', 'G', 'C', 'K', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

double get_f64le(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::ordered_json catalog_to_json(const ClassCatalog& catalog) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& def : catalog.classes()) {
    classes.push_back({{"name", def.name},
                       {"color", {def.color[0], def.color[1], def.color[2]}},
                       {"greenery", def.greenery}});
  }
  const Rgb vc = catalog.void_color();
  return {{"classes", std::move(classes)}, {"void_color", {vc[0], vc[1], vc[2]}}};
}

ClassCatalog catalog_from_json(const nlohmann::json& j) {
  std::vector<ClassDef> classes;
  for (const auto& entry : j.at("classes")) {
    ClassDef def;
    def.name = entry.at("name").get<std::string>();
    const auto& c = entry.at("color");
    def.color = {c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(),
                 c.at(2).get<std::uint8_t>()};
    def.greenery = entry.at("greenery").get<bool>();
    classes.push_back(std::move(def));
  }
  const auto& vc = j.at("void_color");
  return ClassCatalog(std::move(classes),
                      Rgb{vc.at(0).get<std::uint8_t>(), vc.at(1).get<std::uint8_t>(),
                          vc.at(2).get<std::uint8_t>()});
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());

  nlohmann::ordered_json header;
  header["config"] = {{"depth", ckpt.config.depth},
                      {"base_channels", ckpt.config.base_channels},
                      {"in_channels", ckpt.config.in_channels},
                      {"num_classes", ckpt.config.num_classes},
                      {"skip_connections", ckpt.config.skip_connections},
                      {"seed", ckpt.config.seed}};
  header["epoch"] = ckpt.epoch;
  header["normalization"] = ckpt.normalization;
  header["catalog"] = catalog_to_json(ckpt.catalog);
  header["param_count"] = ckpt.params.size();
  const std::string header_bytes = header.dump();

  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, header_bytes.size());
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (Index i = 0; i < ckpt.params.size(); ++i) put_f64le(out, ckpt.params[i]);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = get_u32(in);
  if (version != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = get_u64(in);
  std::string header_bytes(header_len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }

  NetworkConfig config;
  const auto& jc = header.at("config");
  config.depth = jc.at("depth").get<int>();
  config.base_channels = jc.at("base_channels").get<int>();
  config.in_channels = jc.at("in_channels").get<int>();
  config.num_classes = jc.at("num_classes").get<int>();
  config.skip_connections = jc.at("skip_connections").get<bool>();
  config.seed = jc.at("seed").get<std::uint64_t>();

  Checkpoint ckpt{config, catalog_from_json(header.at("catalog")),
                  header.at("epoch").get<int>(),
                  header.at("normalization").get<std::string>(),
                  Eigen::VectorXd()};

  const auto count = header.at("param_count").get<Index>();
  ckpt.params.resize(count);
  for (Index i = 0; i < count; ++i) ckpt.params[i] = get_f64le(in);
  if (!in) throw DataError("truncated checkpoint parameters: " + path.string());
  return ckpt;
}

}  // namespace gvseg
