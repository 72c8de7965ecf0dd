// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Tensor persistence: a JSON manifest (tensor name, shape, byte offset) next
// to a single little-endian float64 binary blob. Loading is bit-exact.

#ifndef CALM_CHECKPOINT_HPP
#define CALM_CHECKPOINT_HPP

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "calm/common.hpp"

namespace calm {

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian; big-endian hosts unsupported");

// Ordered name -> matrix map; doubles as the model parameter set and the
// feature-dataset container.
class TensorStore {
 public:
  using Map = std::map<std::string, Matrix>;

  Map& tensors() { return tensors_; }
  const Map& tensors() const { return tensors_; }

  bool contains(const std::string& name) const {
    return tensors_.count(name) > 0;
  }

  Matrix& at(const std::string& name) {
    auto it = tensors_.find(name);
    CALM_CHECK(it != tensors_.end(), "TensorStore: missing tensor " << name);
    return it->second;
  }
  const Matrix& at(const std::string& name) const {
    auto it = tensors_.find(name);
    CALM_CHECK(it != tensors_.end(), "TensorStore: missing tensor " << name);
    return it->second;
  }

  void put(const std::string& name, Matrix m) { tensors_[name] = std::move(m); }

  // Writes <path> (JSON manifest) and <path>.bin (blob).
  void save(const std::string& path) const {
    const std::string blob_path = path + ".bin";
    std::ofstream blob(blob_path, std::ios::binary);
    CALM_CHECK(blob.good(), "cannot open " << blob_path << " for writing");

    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["dtype"] = "float64";
    manifest["byte_order"] = "little";
    manifest["blob"] = std::filesystem::path(blob_path).filename().string();
    manifest["tensors"] = nlohmann::json::array();

    std::uint64_t offset = 0;
    for (const auto& [name, m] : tensors_) {
      manifest["tensors"].push_back({{"name", name},
                                     {"rows", m.rows()},
                                     {"cols", m.cols()},
                                     {"offset", offset}});
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          double v = m(r, c);
          blob.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
      }
      offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
    }
    blob.close();
    CALM_CHECK(blob.good(), "write failed: " << blob_path);

    std::ofstream mf(path);
    CALM_CHECK(mf.good(), "cannot open " << path << " for writing");
    mf << manifest.dump(2) << "\n";
  }

  static TensorStore load(const std::string& path) {
    std::ifstream mf(path);
    CALM_CHECK(mf.good(), "cannot open manifest " << path);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    CALM_CHECK(manifest.value("schema_version", 0) == 1,
               "unsupported manifest schema in " << path);
    CALM_CHECK(manifest.value("dtype", "") == "float64",
               "unsupported dtype in " << path);

    const auto blob_path =
        std::filesystem::path(path).parent_path() /
        manifest.at("blob").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    CALM_CHECK(blob.good(), "cannot open blob " << blob_path.string());

    TensorStore store;
    for (const auto& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      blob.seekg(static_cast<std::streamoff>(offset));
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          double v;
          blob.read(reinterpret_cast<char*>(&v), sizeof(double));
          m(r, c) = v;
        }
      }
      CALM_CHECK(blob.good(), "short read in blob for tensor " << name);
      store.put(name, std::move(m));
    }
    return store;
  }

 private:
  Map tensors_;
};

}  // namespace calm

#endif  // CALM_CHECKPOINT_HPP
