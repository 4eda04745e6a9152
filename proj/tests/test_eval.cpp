#include <doctest.h>

#include <fstream>

#include "culgen/backbone.hpp"
#include "culgen/errors.hpp"
#include "culgen/eval.hpp"
#include "culgen/image.hpp"
#include "culgen/report.hpp"
#include "test_support.hpp"

using namespace culgen;

namespace {

Image tiny_image() {
  Image img(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      img.at(x, y, 0) = static_cast<uint8_t>(40 * x);
      img.at(x, y, 1) = static_cast<uint8_t>(40 * y);
      img.at(x, y, 2) = 128;
    }
  return img;
}

}  // namespace

TEST_CASE("score_alignment arithmetic and the published derived averages") {
  SUBCASE("constant-1 scorer") {
    ConstantScorer one(1.0);
    const AlignmentScore s = score_alignment(tiny_image(), {"buy this", "it helps"}, "France",
                                             one);
    CHECK(s.ar_score == 1.0);
    CHECK(s.country_score == 1.0);
    CHECK(s.average == 1.0);
  }
  SUBCASE("0.69/0.81 averages to exactly 0.75") {
    const AlignmentScore s = AlignmentScore::of(0.69, 0.81);
    CHECK(s.average == 0.75);
    CHECK(format_score(s.average) == "0.75");
  }
  SUBCASE("0.78/0.63 averages to 0.705 and formats as 0.70") {
    const AlignmentScore s = AlignmentScore::of(0.78, 0.63);
    CHECK(s.average == doctest::Approx(0.705).epsilon(1e-12));
    CHECK(format_score(s.average) == "0.70");
  }
  SUBCASE("average identity holds") {
    const AlignmentScore s = AlignmentScore::of(0.123, 0.456);
    CHECK(s.average == (s.ar_score + s.country_score) / 2.0);
  }
  SUBCASE("range validation") {
    CHECK_THROWS_AS(AlignmentScore::of(1.2, 0.5), InvalidInputError);
  }
}

TEST_CASE("toy cosine scorer is deterministic and bounded") {
  ToyCosineScorer scorer(16);
  const Image img = tiny_image();
  const double a = scorer.score(img, "buy this drink");
  const double b = scorer.score(img, "buy this drink");
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  // Zero image: cosine undefined, defined midpoint.
  Image black(2, 2, 3);
  CHECK(scorer.score(black, "anything") == 0.5);
}

TEST_CASE("eval protocol validates the sample-count identity") {
  EvalProtocol protocol;
  protocol.statements = load_statements(testutil::data_dir() + "/fixtures/ar_statements.jsonl");
  CHECK(protocol.statements.size() == 100);
  CHECK(protocol.countries.size() == 5);
  CHECK(protocol.samples() == 500);
  protocol.validate();

  EvalProtocol limited;
  limited.statements = load_statements(
      testutil::data_dir() + "/fixtures/ar_statements.jsonl", 7);
  CHECK(limited.statements.size() == 7);

  EvalProtocol bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("variant flag mapping matches the documented table") {
  CHECK(flags_for_variant(Variant::kCulgen).include_cultural);
  CHECK(flags_for_variant(Variant::kCulgen).num_style_images == 1);
  CHECK_FALSE(flags_for_variant(Variant::kNoCultural).include_cultural);
  CHECK(flags_for_variant(Variant::kNoCultural).include_style_image);
  CHECK(flags_for_variant(Variant::kEarly).cultural_start == CulturalStart::kEarly);
  CHECK(flags_for_variant(Variant::kLate).cultural_start == CulturalStart::kLate);
  CHECK_FALSE(flags_for_variant(Variant::kNoStyle).include_style_image);
  CHECK(flags_for_variant(Variant::kMultiStyle).num_style_images == 3);
  CHECK_FALSE(flags_for_variant(Variant::kNone).include_cultural);
  CHECK_FALSE(flags_for_variant(Variant::kNone).include_style_image);
  CHECK(variant_from_string("multi_style") == Variant::kMultiStyle);
  CHECK_THROWS_AS(variant_from_string("bogus"), ConfigError);
}

TEST_CASE("format_score rounds half-even at the decimal boundary") {
  CHECK(format_score(0.75) == "0.75");
  CHECK(format_score(0.705) == "0.70");
  CHECK(format_score(0.715) == "0.72");
  CHECK(format_score(0.7049) == "0.70");
  CHECK(format_score(0.7051) == "0.71");
  CHECK(format_pct(33.333333) == "33.33");
  CHECK(format_pct(50.0) == "50.00");
}

TEST_CASE("run_ablation produces per-sample scores whose means match a recompute") {
  const std::string data = testutil::data_dir();
  const CulturalDB db = [&] {
    CulturalDB d = CulturalDB::ingest(data + "/fixtures/cultural_manifest.jsonl");
    d.attach_visual_elements(VisualElementTable::load(data + "/visual_elements.json"));
    return d;
  }();
  const ToyDenoiser denoiser(LatentShape{2, 4, 4}, 12, 8, 7);
  const AdapterParams adapters = AdapterParams::random(8, 8, 8, 11, 0.4);
  const ToyHashTextEncoder text_enc(8);
  const ToyImageEncoder image_enc(8);
  const PromptTemplates prompts = PromptTemplates::load(data + "/prompts");
  ScheduleConfig schedule;
  schedule.total_steps = 4;
  const PipelineContext ctx{db,        denoiser, adapters, text_enc,
                            image_enc, prompts,  schedule, AblationFlags{}};

  EvalProtocol protocol;
  protocol.statements = load_statements(data + "/fixtures/ar_statements.jsonl", 3);
  protocol.countries = {"China", "France"};
  protocol.seed = 0;

  ToyCosineScorer scorer(8);
  const auto dir = testutil::scratch_dir("ablation_run");
  std::vector<SampleScore> per_sample;
  const AblationRow row =
      run_ablation(Variant::kCulgen, protocol, scorer, ctx, dir, &per_sample);

  CHECK(row.n == 6);
  REQUIRE(per_sample.size() == 6);
  double sum_avg = 0.0, sum_ar = 0.0, sum_country = 0.0;
  for (const auto& s : per_sample) {
    CHECK(s.average == (s.ar_score + s.country_score) / 2.0);
    sum_avg += s.average;
    sum_ar += s.ar_score;
    sum_country += s.country_score;
  }
  CHECK(row.average == doctest::Approx(sum_avg / 6).epsilon(1e-12));
  CHECK(row.ar == doctest::Approx(sum_ar / 6).epsilon(1e-12));
  CHECK(row.country == doctest::Approx(sum_country / 6).epsilon(1e-12));

  // scores.jsonl reloads to the same values (the mean-recompute oracle's
  // data path).
  const auto loaded = load_scores((dir / "scores.jsonl").string());
  REQUIRE(loaded.size() == 6);
  for (size_t i = 0; i < 6; ++i) {
    CHECK(loaded[i].average == per_sample[i].average);
    CHECK(loaded[i].country == per_sample[i].country);
  }

  // Determinism: rerun into a fresh dir gives identical score rows.
  const auto dir2 = testutil::scratch_dir("ablation_run2");
  std::vector<SampleScore> again;
  run_ablation(Variant::kCulgen, protocol, scorer, ctx, dir2, &again);
  REQUIRE(again.size() == per_sample.size());
  for (size_t i = 0; i < again.size(); ++i)
    CHECK(again[i].average == per_sample[i].average);

  // no_cultural variant: stage traces contain no cultural rows, so the
  // final condition length equals prompt + projected image only.
  std::vector<SampleScore> nc;
  const AblationRow nc_row = run_ablation(Variant::kNoCultural, protocol, scorer, ctx,
                                          testutil::scratch_dir("ablation_nc"), &nc);
  CHECK(nc_row.n == 6);
}

TEST_CASE("emit_report writes deterministic tables and a manifest") {
  ReportInputs inputs;
  TableDoc doc;
  doc.name = "alignment";
  doc.columns = {"Variant", "Average", "AR", "Country"};
  doc.rows = {{"culgen", "0.75", "0.69", "0.81"}};
  inputs.tables.push_back(doc);
  inputs.distributions.push_back(
      {"country_distribution", {{"China", 5.0}, {"France", 3.0}}});

  const auto dir = testutil::scratch_dir("report");
  const auto files = emit_report(inputs, dir);
  CHECK(files.size() == 5);  // tsv, json, png, dist tsv, manifest

  // TSV cells match the in-memory table exactly.
  std::ifstream tsv(dir / "tables" / "alignment.tsv");
  std::string header, row;
  std::getline(tsv, header);
  std::getline(tsv, row);
  CHECK(header == "Variant\tAverage\tAR\tCountry");
  CHECK(row == "culgen\t0.75\t0.69\t0.81");

  // Idempotent re-run: manifest bytes identical.
  const auto manifest_path = dir / "manifest.json";
  std::ifstream m1(manifest_path, std::ios::binary);
  const std::string before((std::istreambuf_iterator<char>(m1)),
                           std::istreambuf_iterator<char>());
  emit_report(inputs, dir);
  std::ifstream m2(manifest_path, std::ios::binary);
  const std::string after((std::istreambuf_iterator<char>(m2)),
                          std::istreambuf_iterator<char>());
  CHECK(before == after);

  CHECK_THROWS_AS(emit_report(ReportInputs{}, dir), InvalidInputError);
}

TEST_CASE("win tables and distribution tables render through TableDoc") {
  WinTable wt;
  wt.judge_id = "mock";
  wt.modality = "LLM";
  wt.attribute = Axis::kRace;
  wt.values = {"Black", "White"};
  wt.topics = {"Overall"};
  wt.pct["Overall"] = {{"Black", 50.0}, {"White", 50.0}};
  wt.raw_pct["Overall"] = {{"Black", 40.0}, {"White", 40.0}};
  wt.invalid_verdicts = 2;
  const TableDoc doc = to_table(wt, "persuasion_race_mock");
  REQUIRE(doc.rows.size() == 2);  // valid row + raw row
  CHECK(doc.rows[0][1] == "50.00");
  CHECK(doc.rows[1][0] == "Overall (raw)");
  CHECK(doc.rows[1][1] == "40.00");
}
