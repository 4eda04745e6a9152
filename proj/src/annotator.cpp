#include "culgen/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/log.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string strip_outer_punct(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) s.pop_back();
  return trim(s);
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

// --- fixture client ---------------------------------------------------

FixtureVLMClient::FixtureVLMClient(const std::string& fixture_path, bool verify_crc)
    : verify_crc_(verify_crc) {
  std::ifstream is(fixture_path);
  if (!is) throw IoError("cannot open annotation fixture: " + fixture_path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << fixture_path << ":" << line_no << ": " << e.what();
      throw ParseError(msg.str());
    }
    Record rec;
    rec.response = j.at("response").get<std::string>();
    rec.instruction_version = j.value("instruction_version", "");
    if (j.contains("image_crc32")) rec.image_crc32 = j.at("image_crc32").get<uint32_t>();
    records_[j.at("image").get<std::string>()] = std::move(rec);
  }
}

std::string FixtureVLMClient::query(const std::string& image_ref,
                                    const std::string& instruction) {
  (void)instruction;
  const std::string key = fs::path(image_ref).filename().string();
  auto it = records_.find(key);
  if (it == records_.end())
    throw TransportError("annotation fixture has no record for image '" + key + "'");
  if (!it->second.instruction_version.empty() &&
      it->second.instruction_version != kAnnotationInstructionVersion)
    throw TransportError("annotation fixture for '" + key + "' was recorded with instruction " +
                         it->second.instruction_version + ", current is " +
                         kAnnotationInstructionVersion);
  if (verify_crc_ && it->second.image_crc32) {
    const uint32_t actual = crc32_of_file(image_ref);
    if (actual != *it->second.image_crc32)
      throw TransportError("annotation fixture crc mismatch for '" + key +
                           "': image changed since recording");
  }
  return it->second.response;
}

// --- vocabulary ---------------------------------------------------------

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open country vocabulary: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("country vocabulary: ") + e.what());
  }
  Vocabulary v;
  for (const auto& c : j.at("canonical")) {
    const auto name = c.get<std::string>();
    v.canonical_.push_back(name);
    v.lookup_[to_lower(name)] = name;
  }
  if (j.contains("aliases")) {
    for (auto& [alias, target] : j.at("aliases").items()) {
      const auto t = target.get<std::string>();
      if (!v.contains(t))
        throw ParseError("alias '" + alias + "' points at unknown country '" + t + "'");
      v.lookup_[to_lower(alias)] = t;
    }
  }
  if (v.canonical_.empty()) throw ParseError("country vocabulary is empty: " + path);
  return v;
}

bool Vocabulary::contains(const std::string& canonical) const {
  auto it = lookup_.find(to_lower(canonical));
  return it != lookup_.end() && it->second == canonical;
}

std::string Vocabulary::canonicalize(const std::string& raw) const {
  const std::string key = to_lower(strip_outer_punct(trim(raw)));
  auto it = lookup_.find(key);
  if (it != lookup_.end()) return it->second;
  std::ostringstream msg;
  msg << "unknown country name '" << raw << "'; nearest canonical names:";
  for (const auto& c : nearest(raw)) msg << " '" << c << "'";
  throw ParseError(msg.str());
}

std::vector<std::string> Vocabulary::nearest(const std::string& raw, int k) const {
  const std::string key = to_lower(strip_outer_punct(trim(raw)));
  std::vector<std::pair<int, std::string>> scored;
  for (const auto& c : canonical_) scored.emplace_back(levenshtein(key, to_lower(c)), c);
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
    out.push_back(scored[static_cast<size_t>(i)].second);
  return out;
}

RegionMap RegionMap::load(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open region map: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("region map: ") + e.what());
  }
  RegionMap m;
  for (auto& [country, region] : j.items()) m.region_[country] = region.get<std::string>();
  std::vector<std::string> missing;
  for (const auto& c : vocab.canonical())
    if (m.region_.find(c) == m.region_.end()) missing.push_back(c);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "region map is not total; missing:";
    for (const auto& c : missing) msg << " '" << c << "'";
    throw ParseError(msg.str());
  }
  return m;
}

const std::string& RegionMap::of(const std::string& country) const {
  auto it = region_.find(country);
  if (it == region_.end()) throw NotFoundError("no region for country '" + country + "'");
  return it->second;
}

// --- annotation ---------------------------------------------------------

namespace {

struct ParsedResponse {
  std::vector<std::string> countries;
  std::vector<std::string> components;
};

// Country section: entries introduced by "<digit>." or "<digit>)", possibly
// several per line. Component section (after a "Components" marker or in
// "- " lines): one component per line.
ParsedResponse parse_annotation_response(const std::string& raw) {
  ParsedResponse out;
  std::string head = raw;
  std::string tail;
  const std::string lowered = to_lower(raw);
  const size_t comp_at = lowered.find("components");
  if (comp_at != std::string::npos) {
    head = raw.substr(0, comp_at);
    tail = raw.substr(comp_at);
  }

  // Numbered entries in the head.
  std::vector<size_t> starts;
  for (size_t i = 0; i + 1 < head.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(head[i])) &&
        (head[i + 1] == '.' || head[i + 1] == ')') &&
        (i == 0 || std::isspace(static_cast<unsigned char>(head[i - 1])))) {
      starts.push_back(i);
    }
  }
  for (size_t s = 0; s < starts.size(); ++s) {
    const size_t from = starts[s] + 2;
    const size_t to = s + 1 < starts.size() ? starts[s + 1] : head.size();
    std::string entry = head.substr(from, to - from);
    const size_t nl = entry.find('\n');
    if (nl != std::string::npos) entry = entry.substr(0, nl);
    entry = strip_outer_punct(trim(entry));
    if (!entry.empty()) out.countries.push_back(entry);
  }

  // "- " lines anywhere in the tail (or the whole text when no marker).
  std::istringstream lines(tail.empty() ? raw : tail);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string t = trim(line);
    if (t.size() > 2 && (t[0] == '-' || t[0] == '*') && t[1] == ' ')
      out.components.push_back(trim(t.substr(2)));
  }
  return out;
}

}  // namespace

AnnotationResult annotate(const std::string& image_ref, VLMClient& client,
                          const Vocabulary& vocab, const std::string& instruction) {
  const std::string raw = client.query(image_ref, instruction);
  ParsedResponse parsed = parse_annotation_response(raw);
  if (parsed.countries.empty())
    throw ParseError("annotation response for '" + image_ref +
                     "' contains no country predictions; raw response: " + raw);

  AnnotationResult result;
  result.image_id = fs::path(image_ref).filename().string();
  result.raw_response = raw;
  result.components = std::move(parsed.components);
  if (parsed.countries.size() > 3) {
    log_warn("annotation for '" + result.image_id + "' returned " +
             std::to_string(parsed.countries.size()) + " countries; keeping the first 3");
    parsed.countries.resize(3);
    result.truncated = true;
  }
  for (const auto& c : parsed.countries) {
    try {
      result.countries.push_back(vocab.canonicalize(c));
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + "; raw response: " + raw);
    }
  }
  return result;
}

AnnotationResult annotate_with_retries(const std::string& image_ref, VLMClient& client,
                                       const Vocabulary& vocab, const std::string& instruction,
                                       int max_attempts) {
  for (int attempt = 1;; ++attempt) {
    try {
      return annotate(image_ref, client, vocab, instruction);
    } catch (const TransportError& e) {
      if (attempt >= max_attempts) throw;
      log_warn("annotation attempt " + std::to_string(attempt) + " failed (" + e.what() +
               "); retrying");
    }
  }
}

AnnotationMetrics score_annotations(const std::vector<AnnotationResult>& preds,
                                    const std::map<std::string, std::string>& gold,
                                    const RegionMap* grouping) {
  if (preds.empty()) throw InvalidInputError("score_annotations: no predictions");
  std::vector<std::string> missing;
  for (const auto& p : preds)
    if (gold.find(p.image_id) == gold.end()) missing.push_back(p.image_id);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "score_annotations: no gold label for:";
    for (const auto& id : missing) msg << " '" << id << "'";
    throw InvalidInputError(msg.str());
  }

  auto project = [&](const std::string& country) {
    return grouping ? grouping->of(country) : country;
  };
  int hit_any = 0, hit_top1 = 0;
  for (const auto& p : preds) {
    const std::string g = project(gold.at(p.image_id));
    bool any = false;
    for (const auto& c : p.countries) any = any || (project(c) == g);
    if (any) ++hit_any;
    if (!p.countries.empty() && project(p.countries.front()) == g) ++hit_top1;
  }
  const double n = static_cast<double>(preds.size());
  return AnnotationMetrics{hit_any / n, hit_top1 / n, static_cast<int>(preds.size())};
}

std::map<std::string, int> distribution_report(const std::vector<AnnotationResult>& annotations) {
  if (annotations.empty()) throw InvalidInputError("distribution_report: no annotations");
  std::map<std::string, int> counts;
  for (const auto& a : annotations) counts[a.countries.front()] += 1;
  return counts;
}

void save_annotations(const std::string& path, const std::vector<AnnotationResult>& annotations) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& a : annotations) {
    json j = {{"image_id", a.image_id},
              {"countries", a.countries},
              {"components", a.components},
              {"raw_response", a.raw_response},
              {"truncated", a.truncated}};
    os << j.dump() << "\n";
  }
}

std::vector<AnnotationResult> load_annotations(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotation store: " + path);
  std::vector<AnnotationResult> out;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line);
    AnnotationResult a;
    a.image_id = j.at("image_id").get<std::string>();
    for (const auto& c : j.at("countries")) a.countries.push_back(c.get<std::string>());
    for (const auto& c : j.at("components")) a.components.push_back(c.get<std::string>());
    a.raw_response = j.value("raw_response", "");
    a.truncated = j.value("truncated", false);
    out.push_back(std::move(a));
  }
  return out;
}

std::map<std::string, std::string> load_gold_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open gold labels: " + path);
  std::map<std::string, std::string> gold;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (first) {
      first = false;
      if (to_lower(t).rfind("image_id", 0) == 0) continue;  // header
    }
    const size_t comma = t.find(',');
    if (comma == std::string::npos)
      throw ParseError("gold csv line without comma: " + t);
    gold[trim(t.substr(0, comma))] = trim(t.substr(comma + 1));
  }
  return gold;
}

}  // namespace culgen
