#include "culgen/bias_audit.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "culgen/errors.hpp"
#include "culgen/image.hpp"
#include "culgen/log.hpp"
#include "culgen/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace culgen {

std::string to_string(Axis a) { return a == Axis::kRace ? "race" : "gender"; }

Axis axis_from_string(const std::string& s) {
  if (s == "race") return Axis::kRace;
  if (s == "gender") return Axis::kGender;
  throw ConfigError("unknown attribute axis '" + s + "' (race|gender)");
}

const std::vector<std::string>& race_labels6() {
  static const std::vector<std::string> labels = {"Asian",  "Black",          "Indian",
                                                  "Latinx", "Middle-Eastern", "White"};
  return labels;
}

const std::vector<std::string>& race_labels5() {
  static const std::vector<std::string> labels = {"White", "Latinx", "Asian", "Black",
                                                  "Middle-Eastern"};
  return labels;
}

const std::vector<std::string>& gender_labels() {
  static const std::vector<std::string> labels = {"man", "woman"};
  return labels;
}

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Raw analyzer label -> closed-set label; empty optional for recognized
// non-binary outputs.
std::optional<std::string> map_gender(const std::string& raw) {
  static const std::map<std::string, std::string> aliases = {
      {"man", "man"},     {"male", "man"},     {"men", "man"},
      {"woman", "woman"}, {"female", "woman"}, {"women", "woman"}};
  const std::string key = to_lower(raw);
  auto it = aliases.find(key);
  if (it != aliases.end()) return it->second;
  if (key == "non-binary" || key == "nonbinary" || key == "nb") return std::nullopt;
  throw AuditError("unmappable gender label '" + raw + "'");
}

std::string map_race(const std::string& raw) {
  static const std::map<std::string, std::string> aliases = {
      {"white", "White"},
      {"black", "Black"},
      {"asian", "Asian"},
      {"indian", "Indian"},
      {"latinx", "Latinx"},
      {"latino", "Latinx"},
      {"latina", "Latinx"},
      {"latino hispanic", "Latinx"},
      {"hispanic", "Latinx"},
      {"middle-eastern", "Middle-Eastern"},
      {"middle eastern", "Middle-Eastern"}};
  auto it = aliases.find(to_lower(raw));
  if (it == aliases.end()) throw AuditError("unmappable race label '" + raw + "'");
  return it->second;
}

}  // namespace

FixtureFaceAnalyzer::FixtureFaceAnalyzer(const std::string& fixture_path) {
  std::ifstream is(fixture_path);
  if (!is) throw IoError("cannot open face fixture: " + fixture_path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    std::vector<RawFace> faces;
    for (const auto& f : j.at("faces"))
      faces.push_back({f.at("gender").get<std::string>(), f.at("race").get<std::string>()});
    records_[j.at("image").get<std::string>()] = std::move(faces);
  }
}

std::vector<RawFace> FixtureFaceAnalyzer::analyze(const std::string& image_ref) {
  const std::string key = fs::path(image_ref).filename().string();
  auto it = records_.find(key);
  if (it == records_.end())
    throw TransportError("face fixture has no record for image '" + key + "'");
  return it->second;
}

std::vector<DemographicProfile> profile_faces(const std::string& image_ref,
                                              FaceAnalyzerClient& analyzer,
                                              int* nonbinary_count) {
  const auto faces = analyzer.analyze(image_ref);
  std::vector<DemographicProfile> profiles;
  int face_index = 0;
  for (const auto& f : faces) {
    const auto gender = map_gender(f.gender);
    const std::string race = map_race(f.race);
    if (!gender) {
      if (nonbinary_count) ++(*nonbinary_count);
      ++face_index;
      continue;
    }
    profiles.push_back({fs::path(image_ref).filename().string(), face_index, *gender, race});
    ++face_index;
  }
  return profiles;
}

DistributionTable tabulate_demographics(const std::vector<DemographicProfile>& profiles,
                                        const std::map<std::string, std::string>& topics,
                                        Axis axis, const std::vector<std::string>& labels) {
  DistributionTable table;
  table.axis = axis;
  table.columns =
      labels.empty() ? (axis == Axis::kRace ? race_labels5() : gender_labels()) : labels;
  const std::set<std::string> label_set(table.columns.begin(), table.columns.end());

  // Percentages are over all detected faces in the topic; faces whose
  // label falls outside the requested column set stay in the denominator
  // (so a five-way row can sum below 100) and are counted separately.
  std::map<std::string, std::map<std::string, int>> counts;
  std::map<std::string, int> totals;
  for (const auto& p : profiles) {
    auto topic_it = topics.find(p.image_id);
    if (topic_it == topics.end())
      throw InvalidInputError("tabulate_demographics: no topic for image '" + p.image_id + "'");
    const std::string& label = axis == Axis::kRace ? p.race : p.gender;
    totals[topic_it->second] += 1;
    totals["Overall"] += 1;
    if (label_set.find(label) == label_set.end()) {
      table.out_of_set_faces += 1;
      continue;
    }
    counts[topic_it->second][label] += 1;
    counts["Overall"][label] += 1;
  }

  for (const auto& [topic, total] : totals) {
    if (topic != "Overall") table.topics.push_back(topic);
    table.faces_per_topic[topic] = total;
    for (const auto& label : table.columns) {
      const auto tc = counts.find(topic);
      const int c = tc != counts.end() && tc->second.count(label) ? tc->second.at(label) : 0;
      table.pct[topic][label] = total > 0 ? 100.0 * c / total : 0.0;
    }
  }
  table.topics.push_back("Overall");
  return table;
}

// --- swap pairs ---------------------------------------------------------

std::string LocalSwapTextEditor::edit(const EditRequest& request) {
  const std::string lowered = to_lower(request.description);
  auto word_find = [&lowered](const std::string& needle) {
    size_t from = 0;
    while (true) {
      const size_t at = lowered.find(needle, from);
      if (at == std::string::npos) return std::string::npos;
      const bool left_ok = at == 0 || !std::isalpha(static_cast<unsigned char>(lowered[at - 1]));
      const size_t end = at + needle.size();
      const bool right_ok =
          end >= lowered.size() || !std::isalpha(static_cast<unsigned char>(lowered[end]));
      if (left_ok && right_ok) return at;
      from = at + 1;
    }
  };

  // "<source> person" for race edits; bare "<source>" for gender edits.
  const std::string phrase = to_lower(request.source_value) + " person";
  size_t at = word_find(phrase);
  std::string replacement = request.target_value + " person";
  size_t len = phrase.size();
  if (at == std::string::npos) {
    at = word_find(to_lower(request.source_value));
    replacement = request.target_value;
    len = request.source_value.size();
  }
  if (at == std::string::npos)
    throw TransportError("text editor: description does not mention '" + request.source_value +
                         "'");
  std::string out = request.description;
  out.replace(at, len, replacement);
  return out;
}

std::string LocalTintImageEditor::edit(const EditRequest& request) {
  Image img = read_image(request.source_image);
  // Deterministic per-value tint keeps variants distinguishable.
  const uint64_t h = fnv1a64(request.target_value);
  const int dr = static_cast<int>(h % 64), dg = static_cast<int>((h >> 8) % 64),
            db = static_cast<int>((h >> 16) % 64);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const int delta = c == 0 ? dr : (c == 1 ? dg : db);
        img.at(x, y, c) = static_cast<uint8_t>(std::min(255, img.at(x, y, c) + delta));
      }
  fs::create_directories(out_dir_);
  std::string value_slug = to_lower(request.target_value);
  std::replace(value_slug.begin(), value_slug.end(), ' ', '_');
  const fs::path out = fs::path(out_dir_) /
                       (fs::path(request.source_image).stem().string() + "_" + value_slug +
                        fs::path(request.source_image).extension().string());
  if (fs::path(request.source_image).extension() == ".png")
    write_png(out.string(), img);
  else
    write_ppm(out.string(), img);
  return out.string();
}

std::vector<PairTrial> build_swap_pairs(const SwapBase& base,
                                        const std::vector<std::string>& values,
                                        ImageEditClient& image_editor,
                                        TextEditClient& text_editor,
                                        const PromptTemplates& templates,
                                        std::vector<std::string>* skipped_values) {
  if (values.size() < 2)
    throw InvalidInputError("build_swap_pairs: need at least two attribute values");

  const std::string& image_tmpl =
      base.attribute == Axis::kRace ? templates.edit_image_race : templates.edit_image_gender;
  const std::string& text_tmpl =
      base.attribute == Axis::kRace ? templates.edit_text_race : templates.edit_text_gender;
  const std::string slot = base.attribute == Axis::kRace ? "race" : "gender";

  std::vector<SwapVariant> variants;
  for (const auto& value : values) {
    if (value == base.source_value) {
      variants.push_back({base.image_ref, base.description, value});
      continue;
    }
    EditRequest req;
    req.description = base.description;
    req.source_image = base.image_ref;
    req.source_value = base.source_value;
    req.target_value = value;
    try {
      req.instruction = render_template(image_tmpl, {{slot, value}});
      const std::string image_ref = image_editor.edit(req);
      req.instruction = render_template(text_tmpl, {{slot, value}, {"description", base.description}});
      const std::string description = text_editor.edit(req);
      variants.push_back({image_ref, description, value});
    } catch (const Error& e) {
      log_warn("swap edit for base '" + base.id + "' value '" + value + "' failed (" + e.what() +
               "); skipping that value");
      if (skipped_values) skipped_values->push_back(value);
    }
  }

  std::vector<PairTrial> trials;
  for (size_t i = 0; i < variants.size(); ++i) {
    for (size_t j = i + 1; j < variants.size(); ++j) {
      PairTrial t;
      t.pair_id = base.id + ":" + variants[i].value + "-" + variants[j].value;
      t.topic = base.topic;
      t.attribute = base.attribute;
      t.variant_a = variants[i];
      t.variant_b = variants[j];
      t.ar = base.ar;
      // Variants may differ only in the swapped attribute.
      if (t.variant_a.value == t.variant_b.value)
        throw InvalidInputError("build_swap_pairs: duplicate value in pair " + t.pair_id);
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

// --- judging ---------------------------------------------------------

std::string to_string(Order o) { return o == Order::kAB ? "ab" : "ba"; }

std::string PositionBiasedJudge::respond(const JudgeRequest&) {
  return "Explanation: the option presented at position " + std::to_string(index_) +
         " reads as more persuasive.\nAnswer: " + std::to_string(index_);
}

UniformRandomJudge::UniformRandomJudge(uint64_t seed, std::string modality)
    : state_(seed), modality_(std::move(modality)) {}

std::string UniformRandomJudge::respond(const JudgeRequest&) {
  SeededRng rng(state_);
  state_ = rng.next();
  const int index = 1 + static_cast<int>(state_ & 1);
  return "Explanation: both options are comparably persuasive.\nAnswer: " +
         std::to_string(index);
}

std::string ContentHashJudge::respond(const JudgeRequest& request) {
  const int index = fnv1a64(request.first_content) <= fnv1a64(request.second_content) ? 1 : 2;
  return "Explanation: judged on content alone.\nAnswer: " + std::to_string(index);
}

ScriptedJudge::ScriptedJudge(const std::string& fixture_path, std::string judge_id,
                             std::string modality)
    : judge_id_(std::move(judge_id)), modality_(std::move(modality)) {
  std::ifstream is(fixture_path);
  if (!is) throw IoError("cannot open judge fixture: " + fixture_path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    transcripts_[j.at("pair_id").get<std::string>() + "#" + j.at("order").get<std::string>()] =
        j.at("transcript").get<std::string>();
  }
}

void ScriptedJudge::set_current(const std::string& pair_id, Order order) {
  current_key_ = pair_id + "#" + to_string(order);
}

std::string ScriptedJudge::respond(const JudgeRequest&) {
  auto it = transcripts_.find(current_key_);
  if (it == transcripts_.end())
    throw TransportError("judge fixture has no transcript for " + current_key_);
  return it->second;
}

namespace {

// Last "Answer" marker, then the first digit that follows it.
std::optional<int> parse_answer_index(const std::string& transcript) {
  size_t best = std::string::npos;
  size_t from = 0;
  while (true) {
    const size_t at = transcript.find("Answer", from);
    if (at == std::string::npos) break;
    best = at;
    from = at + 6;
  }
  if (best == std::string::npos) return std::nullopt;
  for (size_t i = best + 6; i < transcript.size(); ++i) {
    const char c = transcript[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      const int v = c - '0';
      if (v == 1 || v == 2) return v;
      return std::nullopt;
    }
    if (c == '\n') return std::nullopt;
  }
  return std::nullopt;
}

std::string parse_explanation(const std::string& transcript) {
  const size_t at = transcript.find("Explanation");
  if (at == std::string::npos) return "";
  size_t from = transcript.find(':', at);
  if (from == std::string::npos) return "";
  ++from;
  size_t to = transcript.find("Answer", from);
  if (to == std::string::npos) to = transcript.size();
  const std::string text = transcript.substr(from, to - from);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

}  // namespace

JudgeVerdict judge_pair(const PairTrial& trial, JudgeClient& judge, Order order,
                        const PromptTemplates& templates) {
  const SwapVariant& first = order == Order::kAB ? trial.variant_a : trial.variant_b;
  const SwapVariant& second = order == Order::kAB ? trial.variant_b : trial.variant_a;

  JudgeRequest request;
  if (judge.modality() == "LLM") {
    request.prompt = render_template(templates.judge_llm, {{"description_1", first.description},
                                                           {"description_2", second.description}});
    request.first_content = first.description;
    request.second_content = second.description;
  } else {
    request.prompt = templates.judge_mllm;
    request.first_content = first.image_ref;
    request.second_content = second.image_ref;
  }
  if (auto* scripted = dynamic_cast<ScriptedJudge*>(&judge))
    scripted->set_current(trial.pair_id, order);

  JudgeVerdict verdict;
  verdict.pair_id = trial.pair_id;
  verdict.judge_id = judge.id();
  verdict.modality = judge.modality();
  verdict.order = order;
  verdict.raw_transcript = judge.respond(request);
  verdict.explanation = parse_explanation(verdict.raw_transcript);

  const auto index = parse_answer_index(verdict.raw_transcript);
  if (!index) {
    verdict.valid = false;
    return verdict;
  }
  verdict.valid = true;
  verdict.winner_value = (*index == 1 ? first : second).value;
  return verdict;
}

WinTable aggregate_wins(const std::vector<JudgeVerdict>& verdicts,
                        const std::vector<PairTrial>& trials) {
  if (verdicts.empty()) throw InvalidInputError("aggregate_wins: no verdicts");

  std::map<std::string, const PairTrial*> by_id;
  for (const auto& t : trials) by_id[t.pair_id] = &t;

  WinTable table;
  table.judge_id = verdicts.front().judge_id;
  table.modality = verdicts.front().modality;

  const PairTrial* any_trial = nullptr;
  std::map<std::string, std::vector<const JudgeVerdict*>> per_pair;
  for (const auto& v : verdicts) {
    if (v.judge_id != table.judge_id || v.modality != table.modality)
      throw InvalidInputError("aggregate_wins: verdicts from mixed judges; group them first");
    auto it = by_id.find(v.pair_id);
    if (it == by_id.end())
      throw InvalidInputError("aggregate_wins: verdict for unknown pair '" + v.pair_id + "'");
    any_trial = it->second;
    per_pair[v.pair_id].push_back(&v);
  }
  table.attribute = any_trial->attribute;

  std::set<std::string> value_set;
  for (const auto& t : trials) {
    value_set.insert(t.variant_a.value);
    value_set.insert(t.variant_b.value);
  }
  // Canonical column orders where applicable.
  const auto& canon = table.attribute == Axis::kRace ? race_labels6() : gender_labels();
  for (const auto& v : canon)
    if (value_set.count(v)) table.values.push_back(v);
  for (const auto& v : value_set)
    if (std::find(table.values.begin(), table.values.end(), v) == table.values.end())
      table.values.push_back(v);

  // topic -> value -> wins; totals count included verdicts.
  std::map<std::string, std::map<std::string, int>> wins;
  std::map<std::string, int> included, all_verdicts;
  for (const auto& [pair_id, list] : per_pair) {
    const PairTrial* trial = by_id.at(pair_id);
    const std::string& topic = trial->topic;
    bool has_ab = false, has_ba = false;
    int invalid = 0;
    for (const auto* v : list) {
      if (!v->valid) {
        ++invalid;
        continue;
      }
      (v->order == Order::kAB ? has_ab : has_ba) = true;
    }
    table.invalid_verdicts += invalid;
    all_verdicts[topic] += static_cast<int>(list.size());
    all_verdicts["Overall"] += static_cast<int>(list.size());
    if (!(has_ab && has_ba)) {
      table.excluded_pairs += 1;
      continue;
    }
    for (const auto* v : list) {
      if (!v->valid) continue;
      wins[topic][v->winner_value] += 1;
      wins["Overall"][v->winner_value] += 1;
      included[topic] += 1;
      included["Overall"] += 1;
    }
  }

  std::set<std::string> topic_set;
  for (const auto& t : trials) topic_set.insert(t.topic);
  for (const auto& t : topic_set)
    if (included.count(t)) table.topics.push_back(t);
  table.topics.push_back("Overall");

  for (const auto& topic : table.topics) {
    const int denom = included.count(topic) ? included.at(topic) : 0;
    const int raw_denom = all_verdicts.count(topic) ? all_verdicts.at(topic) : 0;
    table.verdicts_per_topic[topic] = denom;
    for (const auto& value : table.values) {
      const int w = wins.count(topic) && wins.at(topic).count(value) ? wins.at(topic).at(value) : 0;
      table.pct[topic][value] = denom > 0 ? 100.0 * w / denom : 0.0;
      table.raw_pct[topic][value] = raw_denom > 0 ? 100.0 * w / raw_denom : 0.0;
    }
  }
  return table;
}

void save_verdicts(const std::string& path, const std::vector<JudgeVerdict>& verdicts) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& v : verdicts) {
    const json j = {{"pair_id", v.pair_id},     {"judge_id", v.judge_id},
                    {"modality", v.modality},   {"order", to_string(v.order)},
                    {"valid", v.valid},         {"winner", v.winner_value},
                    {"explanation", v.explanation}, {"transcript", v.raw_transcript}};
    os << j.dump() << "\n";
  }
}

void save_trials(const std::string& path, const std::vector<PairTrial>& trials) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& t : trials) {
    const json j = {{"pair_id", t.pair_id},
                    {"topic", t.topic},
                    {"attribute", to_string(t.attribute)},
                    {"a", {{"image", t.variant_a.image_ref},
                           {"description", t.variant_a.description},
                           {"value", t.variant_a.value}}},
                    {"b", {{"image", t.variant_b.image_ref},
                           {"description", t.variant_b.description},
                           {"value", t.variant_b.value}}},
                    {"action", t.ar.action},
                    {"reason", t.ar.reason}};
    os << j.dump() << "\n";
  }
}

std::vector<PairTrial> load_trials(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open trial store: " + path);
  std::vector<PairTrial> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    PairTrial t;
    t.pair_id = j.at("pair_id").get<std::string>();
    t.topic = j.at("topic").get<std::string>();
    t.attribute = axis_from_string(j.at("attribute").get<std::string>());
    t.variant_a = {j.at("a").at("image").get<std::string>(),
                   j.at("a").at("description").get<std::string>(),
                   j.at("a").at("value").get<std::string>()};
    t.variant_b = {j.at("b").at("image").get<std::string>(),
                   j.at("b").at("description").get<std::string>(),
                   j.at("b").at("value").get<std::string>()};
    t.ar = {j.at("action").get<std::string>(), j.at("reason").get<std::string>()};
    out.push_back(std::move(t));
  }
  return out;
}

void save_profiles(const std::string& path, const std::vector<DemographicProfile>& profiles) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& p : profiles) {
    const json j = {{"image_id", p.image_id},
                    {"face_index", p.face_index},
                    {"gender", p.gender},
                    {"race", p.race}};
    os << j.dump() << "\n";
  }
}

std::vector<DemographicProfile> load_profiles(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open profile store: " + path);
  std::vector<DemographicProfile> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    out.push_back({j.at("image_id").get<std::string>(), j.at("face_index").get<int>(),
                   j.at("gender").get<std::string>(), j.at("race").get<std::string>()});
  }
  return out;
}

std::vector<JudgeVerdict> load_verdicts(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open verdict store: " + path);
  std::vector<JudgeVerdict> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    JudgeVerdict v;
    v.pair_id = j.at("pair_id").get<std::string>();
    v.judge_id = j.at("judge_id").get<std::string>();
    v.modality = j.at("modality").get<std::string>();
    v.order = j.at("order").get<std::string>() == "ab" ? Order::kAB : Order::kBA;
    v.valid = j.at("valid").get<bool>();
    v.winner_value = j.value("winner", "");
    v.explanation = j.value("explanation", "");
    v.raw_transcript = j.value("transcript", "");
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace culgen
