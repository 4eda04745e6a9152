#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace culgen {

// Flat named-array container ("CGTF" format, docs/formats.md). Used for
// adapter checkpoints and latent dumps. Arrays are float64, row-major,
// little-endian; a JSON metadata blob rides along.
struct NamedTensors {
  struct Entry {
    std::vector<uint64_t> dims;
    std::vector<double> data;
  };

  std::string meta_json = "{}";
  std::map<std::string, Entry> arrays;

  void put_matrix(const std::string& name, const Eigen::MatrixXd& m);
  void put_vector(const std::string& name, const Eigen::VectorXd& v);
  Eigen::MatrixXd get_matrix(const std::string& name) const;
  Eigen::VectorXd get_vector(const std::string& name) const;
  bool contains(const std::string& name) const { return arrays.count(name) > 0; }

  void save(const std::string& path) const;
  static NamedTensors load(const std::string& path);
};

}  // namespace culgen
