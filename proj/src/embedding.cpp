#include "culgen/embedding.hpp"

#include <cmath>
#include <sstream>

#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/rng.hpp"

namespace culgen {

Embedding::Embedding(Matrix rows, std::string encoder_id)
    : rows_(std::move(rows)), encoder_id_(std::move(encoder_id)) {
  if (rows_.rows() < 1 || rows_.cols() < 1)
    throw InvalidInputError("Embedding: needs at least one row and one column");
  if (!rows_.allFinite()) throw InvalidInputError("Embedding: non-finite entries");
}

std::string ActionReason::render() const {
  if (action.empty() || reason.empty())
    throw InvalidInputError("ActionReason: action and reason must be non-empty");
  return "I should " + action + " because " + reason;
}

ActionReason ActionReason::parse(const std::string& statement) {
  static const std::string kPrefix = "I should ";
  static const std::string kSep = " because ";
  if (statement.rfind(kPrefix, 0) != 0)
    throw ParseError("action-reason statement must start with 'I should ': " + statement);
  const size_t sep = statement.find(kSep, kPrefix.size());
  if (sep == std::string::npos)
    throw ParseError("action-reason statement has no ' because ': " + statement);
  ActionReason ar{statement.substr(kPrefix.size(), sep - kPrefix.size()),
                  statement.substr(sep + kSep.size())};
  if (ar.action.empty() || ar.reason.empty())
    throw ParseError("action-reason statement has an empty part: " + statement);
  return ar;
}

Embedding encode_text(const std::string& text, const TextEncoder& enc) {
  if (text.empty()) throw InvalidInputError("encode_text: empty text");
  Embedding out = enc.encode(text);
  if (out.dim() != enc.output_dim())
    throw InvalidInputError("encoder '" + enc.id() + "' violated its declared output_dim");
  return out;
}

Embedding encode_image(const std::string& image_path, const ImageEncoder& enc) {
  Embedding out = enc.encode(image_path);
  if (out.dim() != enc.output_dim())
    throw InvalidInputError("encoder '" + enc.id() + "' violated its declared output_dim");
  return out;
}

Embedding concat_sequences(const std::vector<Embedding>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_sequences: empty part list");
  const int dim = parts[0].dim();
  for (size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].dim() != dim) {
      std::ostringstream msg;
      msg << "concat_sequences: parts[" << i << "] has dim " << parts[i].dim()
          << " but parts[0] has dim " << dim;
      throw InvalidInputError(msg.str());
    }
  }
  if (parts.size() == 1) return parts[0];

  int total = 0;
  for (const auto& p : parts) total += p.length();
  Matrix rows(total, dim);
  std::string id;
  int at = 0;
  for (const auto& p : parts) {
    rows.middleRows(at, p.length()) = p.rows();
    at += p.length();
    if (!id.empty()) id += "+";
    id += p.encoder_id();
  }
  return Embedding(std::move(rows), id);
}

// --- toy text encoder --------------------------------------------------

ToyHashTextEncoder::ToyHashTextEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw InvalidInputError("ToyHashTextEncoder: dim must be >= 1");
}

std::string ToyHashTextEncoder::id() const {
  return "toy-text-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::string> ToyHashTextEncoder::tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

Embedding ToyHashTextEncoder::encode(const std::string& text) const {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw InvalidInputError("encode_text: text has no tokens");
  Matrix rows(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (size_t t = 0; t < tokens.size(); ++t) {
    SeededRng rng(fnv1a64(tokens[t]) ^ seed_);
    for (int j = 0; j < dim_; ++j) rows(static_cast<Eigen::Index>(t), j) = rng.uniform(-1.0, 1.0);
  }
  return Embedding(std::move(rows), id());
}

// --- toy image encoder --------------------------------------------------

ToyImageEncoder::ToyImageEncoder(int dim) : dim_(dim) {
  if (dim < 1) throw InvalidInputError("ToyImageEncoder: dim must be >= 1");
}

std::string ToyImageEncoder::id() const { return "toy-image-d" + std::to_string(dim_); }

Vector ToyImageEncoder::features(const Image& img) const {
  // Virtual RGB view so gray and color images yield the same feature order.
  auto channel = [&](int x, int y, int c) -> double {
    const int cc = img.channels == 1 ? 0 : c;
    return img.at(x, y, cc) / 255.0;
  };

  std::vector<double> feats;
  feats.reserve(static_cast<size_t>(dim_));
  const double n = static_cast<double>(img.width) * img.height;
  double mean[3] = {0, 0, 0}, var[3] = {0, 0, 0};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) mean[c] += channel(x, y, c);
  for (int c = 0; c < 3; ++c) mean[c] /= n;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = channel(x, y, c) - mean[c];
        var[c] += d * d;
      }
  for (int c = 0; c < 3; ++c) feats.push_back(mean[c]);
  for (int c = 0; c < 3; ++c) feats.push_back(std::sqrt(var[c] / n));

  // Grid-cell channel means, finer grids until dim is covered.
  for (int grid = 2; static_cast<int>(feats.size()) < dim_; grid *= 2) {
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        const int x0 = gx * img.width / grid, x1 = (gx + 1) * img.width / grid;
        const int y0 = gy * img.height / grid, y1 = (gy + 1) * img.height / grid;
        double cell[3] = {0, 0, 0};
        int count = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) cell[c] += channel(x, y, c);
            ++count;
          }
        for (int c = 0; c < 3; ++c)
          feats.push_back(count > 0 ? cell[c] / count : 0.0);
      }
    }
  }

  Vector out(dim_);
  for (int j = 0; j < dim_; ++j) out[j] = feats[static_cast<size_t>(j)];
  return out;
}

Embedding ToyImageEncoder::encode(const std::string& image_path) const {
  const Image img = read_image(image_path);
  Matrix rows(1, dim_);
  rows.row(0) = features(img).transpose();
  return Embedding(std::move(rows), id());
}

}  // namespace culgen
