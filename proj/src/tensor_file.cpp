#include "culgen/tensor_file.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"

namespace culgen {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'T', 'F'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void NamedTensors::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  Entry e;
  e.dims = {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())};
  e.data.resize(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      e.data[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
  arrays[name] = std::move(e);
}

void NamedTensors::put_vector(const std::string& name, const Eigen::VectorXd& v) {
  Entry e;
  e.dims = {static_cast<uint64_t>(v.size())};
  e.data.assign(v.data(), v.data() + v.size());
  arrays[name] = std::move(e);
}

Eigen::MatrixXd NamedTensors::get_matrix(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw NotFoundError("tensor file: no array named '" + name + "'");
  const Entry& e = it->second;
  if (e.dims.size() != 2)
    throw InvalidInputError("tensor file: '" + name + "' is not 2-dimensional");
  Eigen::MatrixXd m(e.dims[0], e.dims[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = e.data[static_cast<size_t>(r) * m.cols() + c];
  return m;
}

Eigen::VectorXd NamedTensors::get_vector(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw NotFoundError("tensor file: no array named '" + name + "'");
  const Entry& e = it->second;
  if (e.dims.size() != 1)
    throw InvalidInputError("tensor file: '" + name + "' is not 1-dimensional");
  Eigen::VectorXd v(static_cast<Eigen::Index>(e.data.size()));
  std::memcpy(v.data(), e.data.data(), e.data.size() * sizeof(double));
  return v;
}

void NamedTensors::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(meta_json.size()));
  os.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  write_u32(os, static_cast<uint32_t>(arrays.size()));
  for (const auto& [name, e] : arrays) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(e.dims.size()));
    uint64_t total = 1;
    for (uint64_t d : e.dims) {
      write_u64(os, d);
      total *= d;
    }
    if (total != e.data.size())
      throw InvalidInputError("tensor file: dims/data mismatch for '" + name + "'");
    os.write(reinterpret_cast<const char*>(e.data.data()),
             static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed: " + path);
}

NamedTensors NamedTensors::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("not a CGTF tensor file: " + path);
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw ParseError("unsupported CGTF version " + std::to_string(version) + ": " + path);
  NamedTensors out;
  const uint32_t meta_len = read_u32(is);
  out.meta_json.resize(meta_len);
  is.read(out.meta_json.data(), meta_len);
  const uint32_t count = read_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    Entry e;
    const uint32_t ndim = read_u32(is);
    uint64_t total = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      e.dims.push_back(read_u64(is));
      total *= e.dims.back();
    }
    e.data.resize(total);
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!is) throw ParseError("truncated CGTF tensor file: " + path);
    out.arrays[name] = std::move(e);
  }
  return out;
}

}  // namespace culgen
