#include "culgen/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/backbone.hpp"
#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

AlignmentScore AlignmentScore::of(double ar, double country) {
  if (ar < 0.0 || ar > 1.0 || country < 0.0 || country > 1.0)
    throw InvalidInputError("AlignmentScore: scores must lie in [0,1]");
  return {ar, country, (ar + country) / 2.0};
}

double AlignmentScorer::score_path(const std::string& image_path, const std::string& text) {
  return score(read_image(image_path), text);
}

ToyCosineScorer::ToyCosineScorer(int dim, uint64_t text_seed)
    : dim_(dim), text_enc_(dim, text_seed) {}

std::string ToyCosineScorer::id() const { return "toy-cosine-d" + std::to_string(dim_); }

double ToyCosineScorer::score(const Image& image, const std::string& text) {
  const ToyImageEncoder image_enc(dim_);
  const Vector img_vec = image_enc.features(image);
  // Mean-pool the token rows.
  const Embedding emb = encode_text(text, text_enc_);
  const Vector txt_vec = emb.rows().colwise().mean().transpose();
  const double denom = img_vec.norm() * txt_vec.norm();
  if (denom < 1e-12) return 0.5;
  const double cos = img_vec.dot(txt_vec) / denom;
  return (1.0 + cos) / 2.0;
}

AlignmentScore score_alignment(const Image& image, const ActionReason& ar,
                               const std::string& country, AlignmentScorer& scorer) {
  const double ar_score = scorer.score(image, ar.render());
  const double country_score = scorer.score(image, country);
  return AlignmentScore::of(ar_score, country_score);
}

int EvalProtocol::samples() const {
  return static_cast<int>(statements.size()) * static_cast<int>(countries.size());
}

void EvalProtocol::validate() const {
  if (statements.empty()) throw ConfigError("EvalProtocol: no statements");
  if (countries.empty()) throw ConfigError("EvalProtocol: no countries");
  if (samples() != static_cast<int>(statements.size()) * static_cast<int>(countries.size()))
    throw ConfigError("EvalProtocol: sample count must equal statements x countries");
}

std::vector<ActionReason> load_statements(const std::string& path, int limit) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open statements file: " + path);
  std::vector<ActionReason> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": " << e.what();
      throw ParseError(msg.str());
    }
    out.push_back({j.at("action").get<std::string>(), j.at("reason").get<std::string>()});
    if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
  }
  if (out.empty()) throw InvalidInputError("no statements in " + path);
  return out;
}

Variant variant_from_string(const std::string& s) {
  if (s == "none") return Variant::kNone;
  if (s == "no_cultural") return Variant::kNoCultural;
  if (s == "early") return Variant::kEarly;
  if (s == "late") return Variant::kLate;
  if (s == "no_style") return Variant::kNoStyle;
  if (s == "multi_style") return Variant::kMultiStyle;
  if (s == "culgen") return Variant::kCulgen;
  throw ConfigError("unknown ablation variant '" + s +
                    "' (none|no_cultural|early|late|no_style|multi_style|culgen)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kNoCultural: return "no_cultural";
    case Variant::kEarly: return "early";
    case Variant::kLate: return "late";
    case Variant::kNoStyle: return "no_style";
    case Variant::kMultiStyle: return "multi_style";
    case Variant::kCulgen: return "culgen";
  }
  return "?";
}

AblationFlags flags_for_variant(Variant v) {
  AblationFlags flags;  // defaults reproduce the full method
  switch (v) {
    case Variant::kCulgen: break;
    case Variant::kNone:
      flags.include_cultural = false;
      flags.include_style_image = false;
      break;
    case Variant::kNoCultural: flags.include_cultural = false; break;
    case Variant::kEarly: flags.cultural_start = CulturalStart::kEarly; break;
    case Variant::kLate: flags.cultural_start = CulturalStart::kLate; break;
    case Variant::kNoStyle: flags.include_style_image = false; break;
    case Variant::kMultiStyle: flags.num_style_images = 3; break;
  }
  return flags;
}

AblationRow run_ablation(Variant variant, const EvalProtocol& protocol,
                         AlignmentScorer& scorer, const PipelineContext& base_ctx,
                         const std::filesystem::path& run_dir,
                         std::vector<SampleScore>* per_sample) {
  protocol.validate();

  PipelineContext ctx = base_ctx;
  ctx.flags = flags_for_variant(variant);

  const bool persist = !run_dir.empty();
  fs::path samples_dir;
  if (persist) {
    samples_dir = run_dir / "samples";
    fs::create_directories(samples_dir);
  }

  std::vector<SampleScore> scores;
  scores.reserve(static_cast<size_t>(protocol.samples()));
  double sum_ar = 0.0, sum_country = 0.0, sum_avg = 0.0;
  int index = 0;
  for (const auto& ar : protocol.statements) {
    for (const auto& country : protocol.countries) {
      GenerationSpec spec;
      spec.country = country;
      spec.ar = ar;
      spec.retrieval_seed = derive_seed(protocol.seed, static_cast<uint64_t>(index));
      spec.noise_seed = spec.retrieval_seed + 1;
      const GenerationOutput out = generate_sample(spec, ctx);
      const Image vis = visualize_latent(out.sample.latent);

      if (persist) {
        std::string slug = country;
        for (auto& c : slug)
          if (c == ' ') c = '_';
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << index << "_" << slug;
        write_png((samples_dir / (name.str() + ".png")).string(), vis);
        save_latent((samples_dir / (name.str() + ".cgtf")).string(), out.sample.latent);
      }

      const AlignmentScore s = score_alignment(vis, ar, country, scorer);
      scores.push_back({index, country, ar.render(), s.ar_score, s.country_score, s.average});
      sum_ar += s.ar_score;
      sum_country += s.country_score;
      sum_avg += s.average;
      ++index;
    }
  }

  if (persist) {
    save_scores((run_dir / "scores.jsonl").string(), scores);
    json meta = {{"variant", to_string(variant)},
                 {"seed", protocol.seed},
                 {"samples", static_cast<int>(scores.size())},
                 {"scorer", scorer.id()}};
    std::ofstream os(run_dir / "run.json");
    os << meta.dump(2) << "\n";
  }
  if (per_sample) *per_sample = scores;

  const double n = static_cast<double>(scores.size());
  return AblationRow{to_string(variant), sum_avg / n, sum_ar / n, sum_country / n,
                     static_cast<int>(scores.size())};
}

void save_scores(const std::string& path, const std::vector<SampleScore>& scores) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& s : scores) {
    json j = {{"index", s.index},           {"country", s.country},
              {"statement", s.statement},   {"ar_score", s.ar_score},
              {"country_score", s.country_score}, {"average", s.average}};
    os << j.dump() << "\n";
  }
}

std::vector<SampleScore> load_scores(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scores file: " + path);
  std::vector<SampleScore> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    out.push_back({j.at("index").get<int>(), j.at("country").get<std::string>(),
                   j.at("statement").get<std::string>(), j.at("ar_score").get<double>(),
                   j.at("country_score").get<double>(), j.at("average").get<double>()});
  }
  return out;
}

}  // namespace culgen
