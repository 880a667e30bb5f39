#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "gvseg/labelspace.hpp"
#include "gvseg/net.hpp"

namespace gvseg {

// Versioned binary blob: 8-byte magic, u32 version, u64 header length, JSON
// header (config, catalog, seed, epoch, normalization), then the parameter
// vector as little-endian 64-bit floats in layout order.
struct Checkpoint {
  NetworkConfig config;
  ClassCatalog catalog;
  int epoch = 0;
  std::string normalization = "rgb/255";
  Eigen::VectorXd params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gvseg
