#include <doctest.h>

#include "culgen/errors.hpp"
#include "culgen/rng.hpp"
#include "culgen/scheduler.hpp"
#include "test_support.hpp"

using namespace culgen;

namespace {

Embedding text_emb(const std::string& text, int dim = 4) {
  ToyHashTextEncoder enc(dim);
  return encode_text(text, enc);
}

struct Fixture {
  AdapterParams adapters = AdapterParams::random(4, 3, 4, 5, 0.5);
  Embedding prompt = text_emb("a b c");            // L=3
  Embedding cultural = text_emb("lantern dragon"); // L=2
  Embedding reason = text_emb("it is fresh and light");
  Embedding image{Matrix::Ones(1, 3) * 0.25, "img"};

  ConditionBundle bundle() const { return {prompt, cultural, reason, {image}}; }
};

}  // namespace

TEST_CASE("stage_of follows the half-open boundary rule") {
  ScheduleConfig cfg;
  cfg.total_steps = 30;
  CHECK(stage_of(0, cfg) == Stage::kStage1);
  CHECK(stage_of(29, cfg) == Stage::kStage3);
  ScheduleConfig third = cfg;
  third.b1 = 1.0 / 3.0;
  CHECK(stage_of(10, third) == Stage::kStage2);  // 10/30 >= 1/3
  CHECK(stage_of(9, third) == Stage::kStage1);
  CHECK_THROWS_AS(stage_of(-1, cfg), InvalidInputError);
  CHECK_THROWS_AS(stage_of(30, cfg), InvalidInputError);
}

TEST_CASE("stage_of is monotone and covers all stages for T >= 3") {
  for (int T : {3, 10, 30, 50}) {
    ScheduleConfig cfg;
    cfg.total_steps = T;
    bool saw[4] = {false, false, false, false};
    int prev = 0;
    for (int i = 0; i < T; ++i) {
      const int s = static_cast<int>(stage_of(i, cfg));
      CHECK(s >= prev);
      prev = s;
      saw[s] = true;
    }
    CHECK(saw[1]);
    CHECK(saw[2]);
    CHECK(saw[3]);
  }
}

TEST_CASE("ScheduleConfig validation") {
  ScheduleConfig bad;
  bad.b1 = 0.7;
  bad.b2 = 0.3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.b1 = 0.0;
  bad.b2 = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("stage1 condition is bit-identical to the prompt") {
  Fixture f;
  AblationFlags flags;
  const Embedding cond = build_condition(Stage::kStage1, f.bundle(), f.adapters, flags);
  CHECK(cond.rows() == f.prompt.rows());
  CHECK(cond.encoder_id() == f.prompt.encoder_id());
}

TEST_CASE("stage2 concatenates prompt then cultural") {
  Fixture f;
  AblationFlags flags;
  const Embedding cond = build_condition(Stage::kStage2, f.bundle(), f.adapters, flags);
  CHECK(cond.length() == 5);
  CHECK(cond.rows().topRows(3) == f.prompt.rows());
  CHECK(cond.rows().bottomRows(2) == f.cultural.rows());
}

TEST_CASE("stage3 is (projected image, prompt, cultural) with L = 2*Lc + Lp") {
  Fixture f;
  AblationFlags flags;
  const Embedding cond = build_condition(Stage::kStage3, f.bundle(), f.adapters, flags);
  const int lc = f.cultural.length(), lp = f.prompt.length();
  CHECK(cond.length() == 2 * lc + lp);
  // Block order: projected image first, then prompt, then cultural.
  CHECK(cond.rows().middleRows(lc, lp) == f.prompt.rows());
  CHECK(cond.rows().bottomRows(lc) == f.cultural.rows());
  const Matrix pi = build_projected_image_forward(f.cultural.rows(), f.reason.rows(),
                                                  f.image.rows(), f.adapters);
  CHECK(cond.rows().topRows(lc) == pi);
}

TEST_CASE("missing bundle members raise configuration errors naming them") {
  Fixture f;
  AblationFlags flags;
  ConditionBundle no_cultural{f.prompt, std::nullopt, f.reason, {f.image}};
  try {
    build_condition(Stage::kStage2, no_cultural, f.adapters, flags);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cultural") != std::string::npos);
    CHECK(msg.find("stage2") != std::string::npos);
  }
  ConditionBundle no_reason{f.prompt, f.cultural, std::nullopt, {f.image}};
  CHECK_THROWS_AS(build_condition(Stage::kStage3, no_reason, f.adapters, flags), ConfigError);
  ConditionBundle no_image{f.prompt, f.cultural, f.reason, {}};
  CHECK_THROWS_AS(build_condition(Stage::kStage3, no_image, f.adapters, flags), ConfigError);
}

TEST_CASE("no-cultural flags drop cultural rows everywhere and make stage2 = stage1") {
  Fixture f;
  AblationFlags flags;
  flags.include_cultural = false;
  const Embedding s1 = build_condition(Stage::kStage1, f.bundle(), f.adapters, flags);
  const Embedding s2 = build_condition(Stage::kStage2, f.bundle(), f.adapters, flags);
  CHECK(s1.rows() == s2.rows());
  CHECK(s1.rows() == f.prompt.rows());
  const Embedding s3 = build_condition(Stage::kStage3, f.bundle(), f.adapters, flags);
  CHECK(s3.length() == f.cultural.length() + f.prompt.length());  // PI block + prompt only
  CHECK(s3.rows().bottomRows(f.prompt.length()) == f.prompt.rows());
}

TEST_CASE("early flags make stage1 equal the default stage2") {
  Fixture f;
  AblationFlags early;
  early.cultural_start = CulturalStart::kEarly;
  AblationFlags defaults;
  const Embedding s1_early = build_condition(Stage::kStage1, f.bundle(), f.adapters, early);
  const Embedding s2_default = build_condition(Stage::kStage2, f.bundle(), f.adapters, defaults);
  CHECK(s1_early.rows() == s2_default.rows());
}

TEST_CASE("late flags keep cultural out of stage2") {
  Fixture f;
  AblationFlags late;
  late.cultural_start = CulturalStart::kLate;
  const Embedding s2 = build_condition(Stage::kStage2, f.bundle(), f.adapters, late);
  CHECK(s2.rows() == f.prompt.rows());
  const Embedding s3 = build_condition(Stage::kStage3, f.bundle(), f.adapters, late);
  CHECK(s3.length() == 2 * f.cultural.length() + f.prompt.length());
}

TEST_CASE("no-style flags drop the projected image block") {
  Fixture f;
  AblationFlags flags;
  flags.include_style_image = false;
  const Embedding s3 = build_condition(Stage::kStage3, f.bundle(), f.adapters, flags);
  CHECK(s3.length() == f.prompt.length() + f.cultural.length());
  CHECK(s3.rows().topRows(f.prompt.length()) == f.prompt.rows());
}

TEST_CASE("multi-style flags concatenate one block per style image") {
  Fixture f;
  AblationFlags flags;
  flags.num_style_images = 3;
  ConditionBundle bundle = f.bundle();
  bundle.images.push_back(Embedding(Matrix::Ones(2, 3) * 0.5, "img2"));
  bundle.images.push_back(Embedding(Matrix::Ones(1, 3) * -0.25, "img3"));
  const Embedding s3 = build_condition(Stage::kStage3, bundle, f.adapters, flags);
  CHECK(s3.length() == 4 * f.cultural.length() + f.prompt.length());
}

TEST_CASE("reason re-feed flag appends the reason block in stage3") {
  Fixture f;
  AblationFlags flags;
  flags.include_reason_stage3 = true;
  const Embedding s3 = build_condition(Stage::kStage3, f.bundle(), f.adapters, flags);
  CHECK(s3.length() == 2 * f.cultural.length() + f.prompt.length() + f.reason.length());
  CHECK(s3.rows().bottomRows(f.reason.length()) == f.reason.rows());
}

TEST_CASE("condition length is a pure function of stage and bundle lengths") {
  Fixture f;
  SeededRng rng(3);
  ToyHashTextEncoder enc(4);
  for (int lp = 1; lp <= 3; ++lp) {
    for (int lc = 1; lc <= 3; ++lc) {
      for (int lr = 1; lr <= 2; ++lr) {
        auto words = [&](int n, const std::string& stem) {
          std::string text = stem + "0";
          for (int i = 1; i < n; ++i) text += " " + stem + std::to_string(i);
          return encode_text(text, enc);
        };
        ConditionBundle bundle{words(lp, "p"), words(lc, "c"), words(lr, "r"), {f.image}};
        for (Stage stage : {Stage::kStage1, Stage::kStage2, Stage::kStage3}) {
          for (AblationFlags flags : {AblationFlags{}}) {
            const Embedding cond = build_condition(stage, bundle, f.adapters, flags);
            CHECK(cond.length() == condition_length(stage, lp, lc, lr, flags));
          }
        }
      }
    }
  }
}

TEST_CASE("ablation flags validate num_style_images") {
  AblationFlags flags;
  flags.num_style_images = 4;
  CHECK_THROWS_AS(flags.validate(), ConfigError);
}
