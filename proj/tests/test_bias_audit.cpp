#include <doctest.h>

#include <cmath>
#include <fstream>

#include "culgen/bias_audit.hpp"
#include "culgen/errors.hpp"
#include "culgen/rng.hpp"
#include "test_support.hpp"

using namespace culgen;

namespace {

const PromptTemplates& templates() {
  static const PromptTemplates t = PromptTemplates::load(testutil::data_dir() + "/prompts");
  return t;
}

struct ScriptedAnalyzer : FaceAnalyzerClient {
  std::vector<RawFace> faces;
  std::vector<RawFace> analyze(const std::string&) override { return faces; }
};

PairTrial make_trial(const std::string& id, const std::string& va, const std::string& vb,
                     const std::string& topic = "shopping", Axis axis = Axis::kRace) {
  PairTrial t;
  t.pair_id = id;
  t.topic = topic;
  t.attribute = axis;
  t.variant_a = {"a.png", "a " + va + " person smiling", va};
  t.variant_b = {"b.png", "a " + vb + " person smiling", vb};
  t.ar = {"buy this", "it helps"};
  return t;
}

}  // namespace

TEST_CASE("profile_faces maps aliases and handles empty/non-binary output") {
  ScriptedAnalyzer analyzer;
  SUBCASE("no faces") {
    CHECK(profile_faces("x.png", analyzer).empty());
  }
  SUBCASE("one mapped face") {
    analyzer.faces = {{"man", "White"}};
    const auto profiles = profile_faces("x.png", analyzer);
    REQUIRE(profiles.size() == 1);
    CHECK(profiles[0].gender == "man");
    CHECK(profiles[0].race == "White");
  }
  SUBCASE("alias mapping") {
    analyzer.faces = {{"female", "latino hispanic"}, {"Male", "middle eastern"}};
    const auto profiles = profile_faces("x.png", analyzer);
    REQUIRE(profiles.size() == 2);
    CHECK(profiles[0].gender == "woman");
    CHECK(profiles[0].race == "Latinx");
    CHECK(profiles[1].race == "Middle-Eastern");
  }
  SUBCASE("non-binary counted, not profiled") {
    analyzer.faces = {{"non-binary", "Asian"}, {"woman", "Black"}};
    int nb = 0;
    const auto profiles = profile_faces("x.png", analyzer, &nb);
    CHECK(profiles.size() == 1);
    CHECK(nb == 1);
  }
  SUBCASE("unmappable label raises with the raw text") {
    analyzer.faces = {{"man", "martian"}};
    try {
      profile_faces("x.png", analyzer);
      FAIL("expected AuditError");
    } catch (const AuditError& e) {
      CHECK(std::string(e.what()).find("martian") != std::string::npos);
    }
  }
}

TEST_CASE("tabulate_demographics: percentage arithmetic") {
  std::vector<DemographicProfile> profiles;
  auto add = [&](const std::string& img, const std::string& gender, const std::string& race) {
    profiles.push_back({img, static_cast<int>(profiles.size()), gender, race});
  };
  add("i1", "man", "White");
  add("i1", "man", "White");
  add("i2", "woman", "Asian");
  add("i2", "man", "Black");
  const std::map<std::string, std::string> topics = {{"i1", "clothing"}, {"i2", "clothing"}};

  const DistributionTable race = tabulate_demographics(profiles, topics, Axis::kRace);
  CHECK(race.pct.at("clothing").at("White") == doctest::Approx(50.0));
  CHECK(race.pct.at("clothing").at("Asian") == doctest::Approx(25.0));
  CHECK(race.pct.at("clothing").at("Black") == doctest::Approx(25.0));
  CHECK(race.pct.at("clothing").at("Latinx") == 0.0);
  CHECK(race.pct.at("clothing").at("Middle-Eastern") == 0.0);
  CHECK(race.pct.at("Overall").at("White") == doctest::Approx(50.0));

  // All-men fixture.
  std::vector<DemographicProfile> men = {{"i1", 0, "man", "White"}, {"i1", 1, "man", "Asian"}};
  const DistributionTable gender = tabulate_demographics(men, topics, Axis::kGender);
  CHECK(gender.pct.at("clothing").at("man") == doctest::Approx(100.0));
  CHECK(gender.pct.at("clothing").at("woman") == 0.0);
}

TEST_CASE("tabulate_demographics reproduces the published overall race row from counts") {
  // 73 White, 3 Latinx, 8 Asian, 13 Black, 2 Middle-Eastern over 100
  // detected faces; the published row sums to 99, the residual face being
  // outside the five-way column set.
  std::vector<DemographicProfile> profiles;
  const std::vector<std::pair<std::string, int>> counts = {
      {"White", 73}, {"Latinx", 3},  {"Asian", 8},
      {"Black", 13}, {"Middle-Eastern", 2}, {"Indian", 1}};
  int i = 0;
  for (const auto& [race, n] : counts)
    for (int k = 0; k < n; ++k) profiles.push_back({"img", i++, "man", race});
  const std::map<std::string, std::string> topics = {{"img", "clothing"}};
  const DistributionTable t = tabulate_demographics(profiles, topics, Axis::kRace);
  CHECK(t.faces_per_topic.at("Overall") == 100);
  CHECK(t.pct.at("Overall").at("White") == doctest::Approx(73.0));
  CHECK(t.pct.at("Overall").at("Latinx") == doctest::Approx(3.0));
  CHECK(t.pct.at("Overall").at("Asian") == doctest::Approx(8.0));
  CHECK(t.pct.at("Overall").at("Black") == doctest::Approx(13.0));
  CHECK(t.pct.at("Overall").at("Middle-Eastern") == doctest::Approx(2.0));
}

TEST_CASE("six-way labels keep Indian as its own column") {
  std::vector<DemographicProfile> profiles = {{"i", 0, "man", "Indian"},
                                              {"i", 1, "man", "White"}};
  const std::map<std::string, std::string> topics = {{"i", "cars"}};
  const DistributionTable five = tabulate_demographics(profiles, topics, Axis::kRace);
  CHECK(five.out_of_set_faces == 1);  // Indian outside the 5-way set
  CHECK(five.pct.at("Overall").at("White") == doctest::Approx(50.0));
  const DistributionTable six =
      tabulate_demographics(profiles, topics, Axis::kRace, race_labels6());
  CHECK(six.out_of_set_faces == 0);
  CHECK(six.pct.at("Overall").at("Indian") == doctest::Approx(50.0));
}

TEST_CASE("build_swap_pairs: variant counts and template substitution") {
  const auto dir = testutil::scratch_dir("swap");
  testutil::write_p3(dir / "base.ppm", 4, 4,
                     [](int x, int y) { return std::array<int, 3>{200, x * 30, y * 30}; });
  SwapBase base;
  base.id = "t1";
  base.image_ref = (dir / "base.ppm").string();
  base.description = "a white person smiling at the camera";
  base.topic = "shopping";
  base.ar = {"buy this", "it helps"};
  base.attribute = Axis::kRace;
  base.source_value = "White";

  LocalTintImageEditor image_editor((dir / "edits").string());
  LocalSwapTextEditor text_editor;

  SUBCASE("two values give one pair") {
    const auto trials = build_swap_pairs(base, {"White", "Black"}, image_editor, text_editor,
                                         templates());
    REQUIRE(trials.size() == 1);
    CHECK(trials[0].variant_a.value == "White");
    CHECK(trials[0].variant_b.value == "Black");
    CHECK(trials[0].variant_a.description == base.description);
    CHECK(trials[0].variant_b.description == "a Black person smiling at the camera");
    CHECK(trials[0].variant_a.image_ref == base.image_ref);
    CHECK(trials[0].variant_b.image_ref != base.image_ref);
    // Both variants share AR and topic.
    CHECK(trials[0].ar.action == base.ar.action);
  }
  SUBCASE("six race values give C(6,2) = 15 pairs") {
    const auto trials =
        build_swap_pairs(base, race_labels6(), image_editor, text_editor, templates());
    CHECK(trials.size() == 15);
  }
  SUBCASE("editor failure skips the value with provenance") {
    struct FailingEditor : TextEditClient {
      std::string edit(const EditRequest& req) override {
        if (req.target_value == "Asian") throw TransportError("editor down");
        LocalSwapTextEditor fallback;
        return fallback.edit(req);
      }
    } failing;
    std::vector<std::string> skipped;
    const auto trials = build_swap_pairs(base, {"White", "Black", "Asian"}, image_editor,
                                         failing, templates(), &skipped);
    CHECK(trials.size() == 1);  // only White-Black remains
    REQUIRE(skipped.size() == 1);
    CHECK(skipped[0] == "Asian");
  }
}

TEST_CASE("judge_pair parses answers and maps them through the order") {
  const PairTrial trial = make_trial("p1", "White", "Black");
  SUBCASE("index 1 under both orders") {
    PositionBiasedJudge judge(1);
    const JudgeVerdict ab = judge_pair(trial, judge, Order::kAB, templates());
    CHECK(ab.valid);
    CHECK(ab.winner_value == "White");
    const JudgeVerdict ba = judge_pair(trial, judge, Order::kBA, templates());
    CHECK(ba.winner_value == "Black");
  }
  SUBCASE("'Answer: 2' under order ab means variant_b") {
    struct Fixed : JudgeClient {
      std::string respond(const JudgeRequest&) override {
        return "Explanation: the second is stronger.\nAnswer: 2";
      }
      std::string id() const override { return "fixed2"; }
      std::string modality() const override { return "LLM"; }
    } judge;
    const JudgeVerdict v = judge_pair(trial, judge, Order::kAB, templates());
    CHECK(v.valid);
    CHECK(v.winner_value == "Black");
    CHECK(v.explanation == "the second is stronger.");
  }
  SUBCASE("unparseable answers yield invalid verdicts") {
    struct Mumbling : JudgeClient {
      std::string respond(const JudgeRequest&) override { return "both are fine"; }
      std::string id() const override { return "mumble"; }
      std::string modality() const override { return "LLM"; }
    } judge;
    const JudgeVerdict v = judge_pair(trial, judge, Order::kAB, templates());
    CHECK_FALSE(v.valid);
    CHECK(v.raw_transcript == "both are fine");
  }
  SUBCASE("LLM prompt embeds descriptions in presentation order") {
    struct Capture : JudgeClient {
      std::string prompt;
      std::string respond(const JudgeRequest& r) override {
        prompt = r.prompt;
        return "Answer: 1";
      }
      std::string id() const override { return "cap"; }
      std::string modality() const override { return "LLM"; }
    } judge;
    judge_pair(trial, judge, Order::kBA, templates());
    const size_t first = judge.prompt.find(trial.variant_b.description);
    const size_t second = judge.prompt.find(trial.variant_a.description);
    REQUIRE(first != std::string::npos);
    REQUIRE(second != std::string::npos);
    CHECK(first < second);
  }
}

TEST_CASE("position-biased judge aggregates to an exact 50/50 split") {
  PositionBiasedJudge judge(1);
  std::vector<PairTrial> trials;
  std::vector<JudgeVerdict> verdicts;
  for (int i = 0; i < 7; ++i) {
    trials.push_back(make_trial("p" + std::to_string(i), "White", "Black"));
    verdicts.push_back(judge_pair(trials.back(), judge, Order::kAB, templates()));
    verdicts.push_back(judge_pair(trials.back(), judge, Order::kBA, templates()));
  }
  const WinTable table = aggregate_wins(verdicts, trials);
  CHECK(table.pct.at("Overall").at("White") == doctest::Approx(50.0));
  CHECK(table.pct.at("Overall").at("Black") == doctest::Approx(50.0));
  CHECK(table.invalid_verdicts == 0);
  CHECK(table.excluded_pairs == 0);
}

TEST_CASE("unanimous content judge yields 100% for its preferred value") {
  struct AlwaysWhite : JudgeClient {
    std::string respond(const JudgeRequest& r) override {
      const bool first_is_white = r.first_content.find("White") != std::string::npos ||
                                  r.first_content.find("white") != std::string::npos;
      return std::string("Answer: ") + (first_is_white ? "1" : "2");
    }
    std::string id() const override { return "white-only"; }
    std::string modality() const override { return "LLM"; }
  } judge;
  std::vector<PairTrial> trials = {make_trial("p0", "White", "Black"),
                                   make_trial("p1", "White", "Asian")};
  std::vector<JudgeVerdict> verdicts;
  for (const auto& t : trials) {
    verdicts.push_back(judge_pair(t, judge, Order::kAB, templates()));
    verdicts.push_back(judge_pair(t, judge, Order::kBA, templates()));
  }
  const WinTable table = aggregate_wins(verdicts, trials);
  CHECK(table.pct.at("Overall").at("White") == doctest::Approx(100.0));
  CHECK(table.pct.at("Overall").at("Black") == 0.0);
}

TEST_CASE("content-pure judges give order-independent winners") {
  ContentHashJudge judge;
  for (int i = 0; i < 20; ++i) {
    const PairTrial trial =
        make_trial("p" + std::to_string(i), "White", i % 2 ? "Black" : "Asian");
    const JudgeVerdict ab = judge_pair(trial, judge, Order::kAB, templates());
    const JudgeVerdict ba = judge_pair(trial, judge, Order::kBA, templates());
    REQUIRE(ab.valid);
    REQUIRE(ba.valid);
    CHECK(ab.winner_value == ba.winner_value);
  }
}

TEST_CASE("aggregate_wins excludes incomplete pairs and reports counts") {
  std::vector<PairTrial> trials = {make_trial("p0", "White", "Black"),
                                   make_trial("p1", "White", "Black")};
  PositionBiasedJudge judge(1);
  std::vector<JudgeVerdict> verdicts;
  verdicts.push_back(judge_pair(trials[0], judge, Order::kAB, templates()));
  verdicts.push_back(judge_pair(trials[0], judge, Order::kBA, templates()));
  // p1 only gets one order: excluded.
  verdicts.push_back(judge_pair(trials[1], judge, Order::kAB, templates()));
  const WinTable table = aggregate_wins(verdicts, trials);
  CHECK(table.excluded_pairs == 1);
  CHECK(table.verdicts_per_topic.at("Overall") == 2);
  CHECK(table.pct.at("Overall").at("White") == doctest::Approx(50.0));
  // Raw row over all 3 verdicts.
  CHECK(table.raw_pct.at("Overall").at("White") ==
        doctest::Approx(100.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("aggregation is invariant to relabeling ab<->ba") {
  UniformRandomJudge judge(5);
  std::vector<PairTrial> trials;
  std::vector<JudgeVerdict> verdicts;
  for (int i = 0; i < 25; ++i) {
    trials.push_back(make_trial("p" + std::to_string(i), "White", "Black"));
    verdicts.push_back(judge_pair(trials.back(), judge, Order::kAB, templates()));
    verdicts.push_back(judge_pair(trials.back(), judge, Order::kBA, templates()));
  }
  const WinTable before = aggregate_wins(verdicts, trials);
  for (auto& v : verdicts) v.order = v.order == Order::kAB ? Order::kBA : Order::kAB;
  const WinTable after = aggregate_wins(verdicts, trials);
  CHECK(before.pct.at("Overall").at("White") ==
        doctest::Approx(after.pct.at("Overall").at("White")));
}

TEST_CASE("win-table rows sum to 100 over valid verdicts") {
  UniformRandomJudge judge(17);
  std::vector<PairTrial> trials;
  std::vector<JudgeVerdict> verdicts;
  const auto& races = race_labels6();
  int idx = 0;
  for (size_t i = 0; i < races.size(); ++i)
    for (size_t j = i + 1; j < races.size(); ++j) {
      trials.push_back(make_trial("p" + std::to_string(idx++), races[i], races[j],
                                  idx % 2 ? "cars" : "shopping"));
      verdicts.push_back(judge_pair(trials.back(), judge, Order::kAB, templates()));
      verdicts.push_back(judge_pair(trials.back(), judge, Order::kBA, templates()));
    }
  const WinTable table = aggregate_wins(verdicts, trials);
  for (const auto& topic : table.topics) {
    double sum = 0.0;
    for (const auto& v : table.values) sum += table.pct.at(topic).at(v);
    CHECK(std::abs(sum - 100.0) < 0.1);
  }
}

TEST_CASE("gender tables break down by topic") {
  PositionBiasedJudge judge(1);
  std::vector<PairTrial> trials = {
      make_trial("g0", "man", "woman", "clothing", Axis::kGender),
      make_trial("g1", "man", "woman", "cars", Axis::kGender),
  };
  std::vector<JudgeVerdict> verdicts;
  for (const auto& t : trials) {
    verdicts.push_back(judge_pair(t, judge, Order::kAB, templates()));
    verdicts.push_back(judge_pair(t, judge, Order::kBA, templates()));
  }
  const WinTable table = aggregate_wins(verdicts, trials);
  CHECK(table.attribute == Axis::kGender);
  CHECK(table.topics == std::vector<std::string>{"cars", "clothing", "Overall"});
  CHECK(table.pct.at("clothing").at("man") == doctest::Approx(50.0));
}

TEST_CASE("scripted judge replays fixture transcripts") {
  ScriptedJudge judge(testutil::data_dir() + "/fixtures/judge_transcripts.jsonl", "scripted",
                      "LLM");
  const PairTrial trial = make_trial("swap01:White-Black", "White", "Black");
  const JudgeVerdict ab = judge_pair(trial, judge, Order::kAB, templates());
  CHECK(ab.valid);
  CHECK(ab.winner_value == "Black");  // transcript answers 2 under ab
  const JudgeVerdict ba = judge_pair(trial, judge, Order::kBA, templates());
  CHECK(ba.winner_value == "Black");  // answers 1 under ba = first presented = b

  const PairTrial invalid_trial = make_trial("swap01:Black-Asian", "Black", "Asian");
  const JudgeVerdict bad = judge_pair(invalid_trial, judge, Order::kAB, templates());
  CHECK_FALSE(bad.valid);
}

TEST_CASE("verdict store round-trips") {
  const auto dir = testutil::scratch_dir("verdicts");
  PositionBiasedJudge judge(1);
  const PairTrial trial = make_trial("p0", "White", "Black");
  std::vector<JudgeVerdict> verdicts = {judge_pair(trial, judge, Order::kAB, templates()),
                                        judge_pair(trial, judge, Order::kBA, templates())};
  const auto path = (dir / "verdicts.jsonl").string();
  save_verdicts(path, verdicts);
  const auto loaded = load_verdicts(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].winner_value == verdicts[0].winner_value);
  CHECK(loaded[1].order == Order::kBA);
}
