#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

// Independent oracles for the unit and acceptance suites. Everything here
// is written straight-line, without the library's linear algebra or RNG
// code, so it can disagree with the implementation under test.

namespace oracle {

// --- plain-loop cross-attention ------------------------------------------

using Mat = std::vector<std::vector<double>>;

inline Mat matmul(const Mat& a, const Mat& b) {
  const size_t n = a.size(), m = b[0].size(), k = b.size();
  Mat out(n, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j)
      for (size_t t = 0; t < k; ++t) out[i][j] += a[i][t] * b[t][j];
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  std::vector<double> e(v.size());
  double sum = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    e[i] = std::exp(v[i] - mx);
    sum += e[i];
  }
  for (auto& x : e) x /= sum;
  return e;
}

// Single-head attention: out = softmax(scale * (Q Wq)(C Wk)^T) (C Wv) Wo.
inline Mat attention(const Mat& q, const Mat& c, const Mat& wq, const Mat& wk, const Mat& wv,
                     const Mat& wo) {
  const Mat qp = matmul(q, wq), kp = matmul(c, wk), vp = matmul(c, wv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(wq[0].size()));
  Mat out;
  for (size_t i = 0; i < qp.size(); ++i) {
    std::vector<double> scores(kp.size(), 0.0);
    for (size_t j = 0; j < kp.size(); ++j)
      for (size_t t = 0; t < qp[i].size(); ++t) scores[j] += qp[i][t] * kp[j][t] * scale;
    const auto w = softmax(scores);
    std::vector<double> mix(vp[0].size(), 0.0);
    for (size_t j = 0; j < vp.size(); ++j)
      for (size_t t = 0; t < mix.size(); ++t) mix[t] += w[j] * vp[j][t];
    out.push_back(std::move(mix));
  }
  return matmul(out, wo);
}

// --- independent SplitMix64 -------------------------------------------

struct SplitMix {
  uint64_t state;
  explicit SplitMix(uint64_t seed) : state(seed) {}
  uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  uint64_t bounded(uint64_t n) { return next() % n; }
};

// Fisher-Yates partial shuffle of {0..n-1}, then a reference draw, as
// documented for retrieval.
struct RetrievalDraw {
  std::vector<size_t> selected;
  size_t reference_index;  // into selected
};

inline RetrievalDraw retrieval_draw(size_t n, size_t k, uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix rng(seed);
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.bounded(n - i));
    std::swap(order[i], order[j]);
  }
  RetrievalDraw d;
  d.selected.assign(order.begin(), order.begin() + static_cast<long>(k));
  d.reference_index = static_cast<size_t>(rng.bounded(k));
  return d;
}

// --- central finite differences -------------------------------------

inline double central_diff(const std::function<double(double)>& f, double x0, double eps = 1e-4) {
  return (f(x0 + eps) - f(x0 - eps)) / (2.0 * eps);
}

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace oracle

namespace testutil {

// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("culgen_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Minimal P3 writer so image fixtures can be made on the fly.
inline void write_p3(const std::filesystem::path& path, int w, int h,
                     const std::function<std::array<int, 3>(int, int)>& pixel) {
  std::ofstream os(path);
  os << "P3\n" << w << " " << h << "\n255\n";
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto p = pixel(x, y);
      os << p[0] << " " << p[1] << " " << p[2] << "\n";
    }
}

inline std::string data_dir() {
#ifdef CULGEN_DATA_DIR
  return CULGEN_DATA_DIR;
#else
  return "data";
#endif
}

}  // namespace testutil
