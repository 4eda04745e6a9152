// Acceptance suite: eight criteria, one pass/fail line each, with wall
// times checked against their budgets. Exits nonzero when any criterion
// fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "culgen/annotator.hpp"
#include "culgen/backbone.hpp"
#include "culgen/bias_audit.hpp"
#include "culgen/cultural_db.hpp"
#include "culgen/embedding.hpp"
#include "culgen/errors.hpp"
#include "culgen/eval.hpp"
#include "culgen/image.hpp"
#include "culgen/log.hpp"
#include "culgen/pipeline.hpp"
#include "culgen/projector.hpp"
#include "culgen/report.hpp"
#include "culgen/rng.hpp"
#include "culgen/scheduler.hpp"
#include "culgen/trainer.hpp"

#include "../test_support.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace culgen;

namespace {

struct Args {
  std::string data = "data";
  std::string cli;
  std::string workdir = "acceptance_work";
};

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.str().empty()) detail << "; ";
      detail << what;
    }
  }
};

Matrix random_mat(int r, int c, SeededRng& rng, double s = 0.8) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = s * rng.normal();
  return m;
}

Embedding words(int n, const std::string& stem, const TextEncoder& enc) {
  std::string text = stem + "0";
  for (int i = 1; i < n; ++i) text += " " + stem + std::to_string(i);
  return encode_text(text, enc);
}

// --- criterion 1: schedule contract ------------------------------------

void criterion_schedule(const Args&, Check& check) {
  ToyHashTextEncoder enc(6);
  AdapterParams adapters = AdapterParams::random(6, 4, 6, 3, 0.5);

  const std::vector<std::pair<double, double>> boundaries = {
      {1.0 / 3.0, 2.0 / 3.0}, {0.2, 0.5}, {0.25, 0.75}, {0.4, 0.8}, {0.1, 0.9}};
  for (int T : {3, 10, 30, 50}) {
    for (size_t bi = 0; bi < boundaries.size(); ++bi) {
      ScheduleConfig cfg{boundaries[bi].first, boundaries[bi].second, T};
      int prev = 0;
      std::set<int> seen;
      for (int i = 0; i < T; ++i) {
        const int s = static_cast<int>(stage_of(i, cfg));
        check.expect(s >= prev, "stage_of not monotone");
        prev = s;
        seen.insert(s);
      }
      if (bi == 0 && T >= 3) check.expect(seen.size() == 3, "default boundaries miss a stage");
    }
  }

  for (int lp : {1, 3, 5}) {
    for (int lc : {1, 2, 4}) {
      for (int lr : {1, 3}) {
        const Embedding prompt = words(lp, "p", enc);
        const Embedding cultural = words(lc, "c", enc);
        const Embedding reason = words(lr, "r", enc);
        SeededRng rng(7);
        std::vector<Embedding> images = {Embedding(random_mat(1, 4, rng), "img"),
                                         Embedding(random_mat(2, 4, rng), "img"),
                                         Embedding(random_mat(1, 4, rng), "img")};
        const ConditionBundle bundle{prompt, cultural, reason, images};

        AblationFlags defaults;
        const Embedding s1 = build_condition(Stage::kStage1, bundle, adapters, defaults);
        check.expect(s1.rows() == prompt.rows(), "stage1 not bit-identical to prompt");
        const Embedding s2 = build_condition(Stage::kStage2, bundle, adapters, defaults);
        check.expect(s2.length() == lp + lc, "stage2 length");
        const Embedding s3 = build_condition(Stage::kStage3, bundle, adapters, defaults);
        check.expect(s3.length() == 2 * lc + lp, "stage3 length");
        check.expect(s3.length() == condition_length(Stage::kStage3, lp, lc, lr, defaults),
                     "closed-form stage3 length");

        AblationFlags no_cultural;
        no_cultural.include_cultural = false;
        const Embedding nc1 = build_condition(Stage::kStage1, bundle, adapters, no_cultural);
        const Embedding nc2 = build_condition(Stage::kStage2, bundle, adapters, no_cultural);
        const Embedding nc3 = build_condition(Stage::kStage3, bundle, adapters, no_cultural);
        check.expect(nc1.rows() == nc2.rows(), "no-cultural: stage2 != stage1");
        check.expect(nc3.length() == lc + lp, "no-cultural stage3 length");

        AblationFlags early;
        early.cultural_start = CulturalStart::kEarly;
        const Embedding e1 = build_condition(Stage::kStage1, bundle, adapters, early);
        check.expect(e1.rows() == s2.rows(), "early: stage1 != default stage2");

        AblationFlags late;
        late.cultural_start = CulturalStart::kLate;
        check.expect(build_condition(Stage::kStage2, bundle, adapters, late).length() == lp,
                     "late: stage2 has cultural rows");

        AblationFlags no_style;
        no_style.include_style_image = false;
        check.expect(
            build_condition(Stage::kStage3, bundle, adapters, no_style).length() == lp + lc,
            "no-style stage3 length");

        AblationFlags multi;
        multi.num_style_images = 3;
        check.expect(
            build_condition(Stage::kStage3, bundle, adapters, multi).length() == 4 * lc + lp,
            "multi-style stage3 length");
      }
    }
  }
}

// --- criterion 2: attention oracle -------------------------------------

void criterion_attention(const Args&, Check& check) {
  SeededRng rng(11);
  auto to_oracle = [](const Matrix& m) {
    oracle::Mat out(static_cast<size_t>(m.rows()),
                    std::vector<double>(static_cast<size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out[static_cast<size_t>(r)][static_cast<size_t>(c)] = m(r, c);
    return out;
  };

  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int lq = 1 + static_cast<int>(rng.bounded(5));
    const int lc = 1 + static_cast<int>(rng.bounded(5));
    const int d_in = 1 + static_cast<int>(rng.bounded(8));
    const int d_attn = 1 + static_cast<int>(rng.bounded(8));
    const int d_out = 1 + static_cast<int>(rng.bounded(8));
    CrossAttentionParams p = CrossAttentionParams::random(d_in, d_attn, d_out, rng, 0.7);
    const Matrix q = random_mat(lq, d_in, rng, 1.0);
    const Matrix c = random_mat(lc, d_in, rng, 1.0);

    CrossAttentionCache cache;
    const Matrix got = cross_attention_forward(q, c, p, &cache);
    const auto want = oracle::attention(to_oracle(q), to_oracle(c), to_oracle(p.w_q),
                                        to_oracle(p.w_k), to_oracle(p.w_v), to_oracle(p.w_o));
    for (int r = 0; r < lq; ++r)
      for (int j = 0; j < d_out; ++j)
        if (std::abs(got(r, j) - want[static_cast<size_t>(r)][static_cast<size_t>(j)]) > 1e-6)
          ++mismatches;

    for (Eigen::Index r = 0; r < cache.attn[0].rows(); ++r)
      check.expect(std::abs(cache.attn[0].row(r).sum() - 1.0) < 1e-6,
                   "softmax row does not sum to 1");

    // Permutation invariances.
    if (lc >= 2) {
      Matrix cp(c.rows(), c.cols());
      for (int r = 0; r < lc; ++r) cp.row(r) = c.row((r + 1) % lc);
      check.expect((cross_attention_forward(q, cp, p) - got).cwiseAbs().maxCoeff() < 1e-9,
                   "context permutation changed output");
    }
    if (lq >= 2) {
      Matrix qp(q.rows(), q.cols());
      for (int r = 0; r < lq; ++r) qp.row(r) = q.row((r + 1) % lq);
      const Matrix out_qp = cross_attention_forward(qp, c, p);
      bool match = true;
      for (int r = 0; r < lq; ++r)
        match = match && (out_qp.row(r) - got.row((r + 1) % lq)).cwiseAbs().maxCoeff() < 1e-9;
      check.expect(match, "query permutation did not permute output");
    }
  }
  check.expect(mismatches == 0,
               "oracle mismatches > 1e-6: " + std::to_string(mismatches));
}

// --- criterion 3: gradients --------------------------------------------

void criterion_gradients(const Args&, Check& check) {
  const LatentShape shape{2, 3, 3};
  const ToyDenoiser denoiser(shape, 8, 6, 31);
  const ToyHashTextEncoder enc(6);
  const ScheduleConfig schedule;
  const AblationFlags flags;

  int instances = 0, bad = 0;
  double worst = 0.0;
  for (uint64_t seed = 1; instances < 24; ++seed, ++instances) {
    SeededRng rng(seed * 97);
    AdapterParams adapters = AdapterParams::random(6, 6, 6, seed, 0.3 + 0.2 * rng.uniform());
    ConditionBundle bundle{words(1 + static_cast<int>(rng.bounded(3)), "p", enc),
                           words(1 + static_cast<int>(rng.bounded(3)), "c", enc),
                           words(1 + static_cast<int>(rng.bounded(2)), "r", enc),
                           {Embedding(random_mat(1 + static_cast<int>(rng.bounded(2)), 6, rng),
                                      "img")}};
    TrainItem item{random_latent(shape, rng), bundle, "acc"};
    const Latent eps = random_latent(shape, rng);
    const double tau = 0.05 + 0.2 * rng.uniform();  // stage3

    AdapterGrads grads = AdapterGrads::zeros_like(adapters);
    adapter_loss(item, tau, eps, denoiser, adapters, schedule, flags, &grads);
    auto loss_with = [&](const AdapterParams& a) {
      return adapter_loss(item, tau, eps, denoiser, a, schedule, flags, nullptr);
    };

    auto probe = [&](double analytic, const std::function<void(AdapterParams&, double)>& set,
                     double x0) {
      auto f = [&](double x) {
        AdapterParams a = adapters;
        set(a, x);
        return loss_with(a);
      };
      const double numeric = oracle::central_diff(f, x0);
      const double err = oracle::rel_error(analytic, numeric);
      worst = std::max(worst, err);
      if (err >= 1e-3) ++bad;
    };

    const int r = static_cast<int>(rng.bounded(6)), cidx = static_cast<int>(rng.bounded(6));
    probe(grads.ca1.w_q(r, cidx),
          [&](AdapterParams& a, double x) { a.ca1.w_q(r, cidx) = x; },
          adapters.ca1.w_q(r, cidx));
    probe(grads.ca1.w_k(cidx, r),
          [&](AdapterParams& a, double x) { a.ca1.w_k(cidx, r) = x; },
          adapters.ca1.w_k(cidx, r));
    probe(grads.ca1.w_v(r, r), [&](AdapterParams& a, double x) { a.ca1.w_v(r, r) = x; },
          adapters.ca1.w_v(r, r));
    probe(grads.ca1.w_o(cidx, cidx),
          [&](AdapterParams& a, double x) { a.ca1.w_o(cidx, cidx) = x; },
          adapters.ca1.w_o(cidx, cidx));
    probe(grads.ca2.w_q(r, r), [&](AdapterParams& a, double x) { a.ca2.w_q(r, r) = x; },
          adapters.ca2.w_q(r, r));
    probe(grads.ca2.w_k(r, cidx),
          [&](AdapterParams& a, double x) { a.ca2.w_k(r, cidx) = x; },
          adapters.ca2.w_k(r, cidx));
    probe(grads.ca2.w_v(cidx, r),
          [&](AdapterParams& a, double x) { a.ca2.w_v(cidx, r) = x; },
          adapters.ca2.w_v(cidx, r));
    probe(grads.ca2.w_o(r, cidx),
          [&](AdapterParams& a, double x) { a.ca2.w_o(r, cidx) = x; },
          adapters.ca2.w_o(r, cidx));
    probe(grads.proj_w(r, cidx),
          [&](AdapterParams& a, double x) { a.proj.w(r, cidx) = x; },
          adapters.proj.w(r, cidx));
    probe(grads.proj_b(cidx), [&](AdapterParams& a, double x) { a.proj.b(cidx) = x; },
          adapters.proj.b(cidx));
  }
  std::ostringstream msg;
  msg << bad << " probes exceeded 1e-3 (worst " << worst << ") across " << instances
      << " instances";
  check.expect(bad == 0, msg.str());
  check.detail << "worst rel err " << worst << " over " << instances << " instances";
}

// --- criterion 4: frozen training ----------------------------------------

void criterion_training(const Args& args, Check& check) {
  const std::string manifest = args.data + "/fixtures/train_manifest.jsonl";
  CulturalDB db = CulturalDB::ingest(args.data + "/fixtures/cultural_manifest.jsonl");
  db.attach_visual_elements(VisualElementTable::load(args.data + "/visual_elements.json"));
  const PromptTemplates templates = PromptTemplates::load(args.data + "/prompts");

  const LatentShape shape{4, 8, 8};
  const ToyDenoiser denoiser(shape, 32, 16, 7);
  const ToyHashTextEncoder text_enc(16);
  const ToyImageEncoder image_enc(12);
  const ScheduleConfig schedule;
  const AblationFlags flags;

  // Overfit fixture config: unit-normal adapter init, lr 1e-2.
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 1;
  cfg.grad_accum = 4;
  cfg.seed = 0;

  const fs::path work = fs::path(args.workdir) / "training";
  fs::create_directories(work);

  // (a) 100 steps leave backbone/encoder checksums bit-identical.
  {
    const uint32_t denoiser_before = denoiser.checksum();
    const Embedding probe_before = encode_text("probe string", text_enc);
    cfg.steps = 100;
    TrainState state(AdapterParams::random(16, 12, 16, 11, 1.0), cfg.seed);
    train(cfg, db, manifest, denoiser, text_enc, image_enc, templates, schedule, flags, state,
          (work / "a.cgtf").string(), "");
    check.expect(denoiser.checksum() == denoiser_before, "denoiser checksum changed");
    const Embedding probe_after = encode_text("probe string", text_enc);
    check.expect(probe_before.rows() == probe_after.rows(), "encoder output changed");
  }

  // (b) 300 steps halve the smoothed loss on the 8-example fixture.
  double ratio = 1.0;
  {
    cfg.steps = 300;
    TrainState state(AdapterParams::random(16, 12, 16, 11, 1.0), cfg.seed);
    const TrainRunResult result =
        train(cfg, db, manifest, denoiser, text_enc, image_enc, templates, schedule, flags,
              state, (work / "b.cgtf").string(), (work / "b_loss.csv").string());
    ratio = result.final_smoothed / result.initial_smoothed;
    std::ostringstream msg;
    msg << "smoothed loss ratio " << ratio << " (need < 0.5; " << result.initial_smoothed
        << " -> " << result.final_smoothed << ")";
    check.expect(result.final_smoothed < 0.5 * result.initial_smoothed, msg.str());
    for (double loss : result.losses)
      check.expect(std::isfinite(loss) && loss >= 0.0, "non-finite or negative loss");
  }

  // (c) seeded rerun reproduces the loss curve exactly.
  {
    cfg.steps = 120;
    TrainState s1(AdapterParams::random(16, 12, 16, 11, 1.0), cfg.seed);
    TrainState s2(AdapterParams::random(16, 12, 16, 11, 1.0), cfg.seed);
    const TrainRunResult r1 = train(cfg, db, manifest, denoiser, text_enc, image_enc,
                                    templates, schedule, flags, s1, "", "");
    const TrainRunResult r2 = train(cfg, db, manifest, denoiser, text_enc, image_enc,
                                    templates, schedule, flags, s2, "", "");
    check.expect(r1.losses == r2.losses, "seeded rerun diverged");
  }
  check.detail << "loss ratio " << ratio;
}

// --- criterion 5: retrieval -------------------------------------------

void criterion_retrieval(const Args& args, Check& check) {
  CulturalDB db = CulturalDB::ingest(args.data + "/fixtures/cultural_manifest.jsonl");
  const auto& sorted = db.records("China");
  check.expect(sorted.size() == 5, "fixture must have 5 China records");

  for (uint64_t seed = 0; seed < 100; ++seed) {
    const RetrievalResult got = db.retrieve("China", seed);
    const auto want = oracle::retrieval_draw(5, 3, seed);
    bool match = got.selected.size() == 3;
    for (size_t i = 0; match && i < 3; ++i)
      match = got.selected[i].id == sorted[want.selected[i]].id;
    match = match && got.reference.id == sorted[want.selected[want.reference_index]].id;
    check.expect(match, "seed " + std::to_string(seed) + " disagrees with the RNG oracle");
    if (!match) break;
  }

  // n <= 3 returns every record.
  for (uint64_t seed : {0ull, 5ull, 9ull}) {
    check.expect(db.retrieve("South Africa", seed).selected.size() == 2,
                 "2-record country must return both records");
    check.expect(db.retrieve("United States", seed).selected.size() == 1,
                 "1-record country must return its record");
    std::set<std::string> ids;
    for (const auto& rec : db.retrieve("France", seed).selected) ids.insert(rec.id);
    check.expect(ids.size() == 3, "3-record country must return all three");
  }

  // Uniformity over 3-subsets of the 5-record country.
  std::map<std::set<std::string>, int> counts;
  const int draws = 10000;
  for (int seed = 0; seed < draws; ++seed) {
    std::set<std::string> subset;
    for (const auto& rec : db.retrieve("China", static_cast<uint64_t>(seed)).selected)
      subset.insert(rec.id);
    counts[subset] += 1;
  }
  check.expect(counts.size() == 10, "not every 3-subset appeared");
  double chi2 = 0.0;
  for (const auto& [subset, n] : counts) {
    const double expected = draws / 10.0;
    chi2 += (n - expected) * (n - expected) / expected;
  }
  // dof 9: p > 0.001 <=> chi2 < 27.88.
  std::ostringstream msg;
  msg << "chi-square " << chi2 << " (limit 27.88)";
  check.expect(chi2 < 27.88, msg.str());
  check.detail << "chi2 " << chi2;
}

// --- criterion 6: metrics arithmetic --------------------------------------

void criterion_metrics(const Args& args, Check& check) {
  const Vocabulary vocab = Vocabulary::load(args.data + "/countries.json");
  const RegionMap regions = RegionMap::load(args.data + "/regions.json", vocab);

  auto pred = [](const std::string& id, std::vector<std::string> cs) {
    AnnotationResult r;
    r.image_id = id;
    r.countries = std::move(cs);
    return r;
  };

  const std::vector<AnnotationResult> hand = {
      pred("a", {"France"}),
      pred("b", {"China", "Japan"}),
      pred("c", {"Japan", "China"}),
      pred("d", {"Italy", "Spain", "Greece"}),
  };
  const std::map<std::string, std::string> gold = {
      {"a", "France"}, {"b", "China"}, {"c", "China"}, {"d", "Mexico"}};
  const AnnotationMetrics m = score_annotations(hand, gold, nullptr);
  check.expect(m.recall == 0.75 && m.p_at_1 == 0.5, "hand-enumerated 0.75/0.5 case failed");

  SeededRng rng(17);
  const auto& countries = vocab.canonical();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AnnotationResult> preds;
    std::map<std::string, std::string> g;
    const int n = 1 + static_cast<int>(rng.bounded(10));
    for (int i = 0; i < n; ++i) {
      const std::string id = "img" + std::to_string(i);
      g[id] = countries[rng.bounded(countries.size())];
      std::vector<std::string> cs;
      for (uint64_t j = 0; j <= rng.bounded(3); ++j)
        cs.push_back(countries[rng.bounded(countries.size())]);
      preds.push_back(pred(id, cs));
    }
    const AnnotationMetrics plain = score_annotations(preds, g, nullptr);
    const AnnotationMetrics grouped = score_annotations(preds, g, &regions);
    check.expect(plain.p_at_1 <= plain.recall + 1e-12, "p@1 > recall");
    check.expect(grouped.recall + 1e-12 >= plain.recall, "grouped recall < ungrouped");
  }

  const AlignmentScore culgen_row = AlignmentScore::of(0.69, 0.81);
  check.expect(culgen_row.average == 0.75, "(0.69+0.81)/2 != 0.75");
  check.expect(format_score(culgen_row.average) == "0.75", "culgen average formats wrong");
  const AlignmentScore sd3_row = AlignmentScore::of(0.78, 0.63);
  check.expect(std::abs(sd3_row.average - 0.705) < 1e-12, "(0.78+0.63)/2 != 0.705");
  check.expect(format_score(sd3_row.average) == "0.70", "0.705 must format as 0.70");
}

// --- criterion 7: debiasing ---------------------------------------------

void criterion_debiasing(const Args& args, Check& check) {
  const PromptTemplates templates = PromptTemplates::load(args.data + "/prompts");
  auto make_trial = [](const std::string& id, const std::string& va, const std::string& vb) {
    PairTrial t;
    t.pair_id = id;
    t.topic = "shopping";
    t.attribute = Axis::kRace;
    t.variant_a = {"a.png", "a " + va + " person with the product", va};
    t.variant_b = {"b.png", "a " + vb + " person with the product", vb};
    t.ar = {"buy this", "it helps"};
    return t;
  };

  // Position-biased judge: exact 50/50 after both orders.
  {
    PositionBiasedJudge judge(1);
    std::vector<PairTrial> trials;
    std::vector<JudgeVerdict> verdicts;
    for (int i = 0; i < 20; ++i) {
      trials.push_back(make_trial("p" + std::to_string(i), "White", "Black"));
      verdicts.push_back(judge_pair(trials.back(), judge, Order::kAB, templates));
      verdicts.push_back(judge_pair(trials.back(), judge, Order::kBA, templates));
    }
    const WinTable table = aggregate_wins(verdicts, trials);
    check.expect(table.pct.at("Overall").at("White") == 50.0 &&
                     table.pct.at("Overall").at("Black") == 50.0,
                 "position-biased judge did not cancel to exactly 50/50");
  }

  // Uniform-random judge over 1e4 six-race pairs: 16.67 +- 1.5 per race.
  {
    UniformRandomJudge judge(123);
    const auto& races = race_labels6();
    std::vector<PairTrial> trials;
    trials.reserve(10000);
    int idx = 0;
    while (static_cast<int>(trials.size()) < 10000) {
      for (size_t i = 0; i < races.size() && static_cast<int>(trials.size()) < 10000; ++i)
        for (size_t j = i + 1; j < races.size() && static_cast<int>(trials.size()) < 10000; ++j)
          trials.push_back(make_trial("p" + std::to_string(idx++), races[i], races[j]));
    }
    std::vector<JudgeVerdict> verdicts;
    verdicts.reserve(trials.size() * 2);
    for (const auto& t : trials) {
      verdicts.push_back(judge_pair(t, judge, Order::kAB, templates));
      verdicts.push_back(judge_pair(t, judge, Order::kBA, templates));
    }
    const WinTable table = aggregate_wins(verdicts, trials);
    double worst = 0.0;
    for (const auto& race : races)
      worst = std::max(worst, std::abs(table.pct.at("Overall").at(race) - 100.0 / 6.0));
    std::ostringstream msg;
    msg << "uniform judge: worst deviation " << worst << " (limit 1.5)";
    check.expect(worst < 1.5, msg.str());
    check.detail << "worst uniform deviation " << worst;
  }

  // Content-pure judge: order-independent winners.
  {
    ContentHashJudge judge;
    for (int i = 0; i < 50; ++i) {
      const PairTrial t = make_trial("c" + std::to_string(i), "White",
                                     race_labels6()[static_cast<size_t>(i % 5)]);
      if (t.variant_a.value == t.variant_b.value) continue;
      const JudgeVerdict ab = judge_pair(t, judge, Order::kAB, templates);
      const JudgeVerdict ba = judge_pair(t, judge, Order::kBA, templates);
      check.expect(ab.valid && ba.valid && ab.winner_value == ba.winner_value,
                   "content-pure judge depended on order");
    }
  }
}

// --- criterion 8: end-to-end smoke ------------------------------------

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = shell_quote(cli) + " " + args + " > " + shell_quote(log.string()) +
                          " 2>&1";
  return std::system(cmd.c_str());
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void criterion_e2e(const Args& args, Check& check) {
  if (args.cli.empty()) {
    check.expect(false, "no --cli path given");
    return;
  }
  const fs::path work = fs::path(args.workdir) / "e2e";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path log = work / "cli.log";

  const std::string db = (work / "db.json").string();
  int rc = run_cli(args.cli,
                   "ingest --manifest " + shell_quote(args.data +
                   "/fixtures/cultural_manifest.jsonl") + " --visual-elements " +
                   shell_quote(args.data + "/visual_elements.json") + " --out " +
                   shell_quote(db), log);
  check.expect(rc == 0, "ingest failed (see " + log.string() + ")");
  if (rc != 0) return;

  // Config pointing at the shipped data dir so templates resolve.
  const fs::path cfg_path = work / "config.json";
  {
    json cfg;
    cfg["paths"] = {{"data_dir", args.data}};
    std::ofstream os(cfg_path);
    os << cfg.dump(2) << "\n";
  }

  const std::string ckpt = (work / "adapter.cgtf").string();
  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " train --db " + shell_quote(db) +
               " --manifest " + shell_quote(args.data + "/fixtures/train_manifest.jsonl") +
               " --steps 50 --seed 0 --out-checkpoint " + shell_quote(ckpt) + " --out-loss " +
               shell_quote((work / "loss.csv").string()), log);
  check.expect(rc == 0, "train failed (see " + log.string() + ")");
  if (rc != 0) return;

  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " generate --db " +
               shell_quote(db) + " --checkpoint " + shell_quote(ckpt) +
               " --country China --action 'drink this tea' --reason 'it is calm' --seed 0 "
               "-T 30 --out " + shell_quote((work / "gen").string()), log);
  check.expect(rc == 0, "generate failed (see " + log.string() + ")");
  if (rc != 0) return;
  check.expect(fs::exists(work / "gen" / "sample_China_s0.png"), "sample PNG missing");

  const fs::path run1 = work / "align";
  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " eval alignment --db " +
               shell_quote(db) + " --checkpoint " + shell_quote(ckpt) + " --seed 0 --out " +
               shell_quote(run1.string()), log);
  check.expect(rc == 0, "eval alignment failed (see " + log.string() + ")");
  if (rc != 0) return;

  rc = run_cli(args.cli, "report --run " + shell_quote(run1.string()), log);
  check.expect(rc == 0, "report failed (see " + log.string() + ")");
  if (rc != 0) return;

  // Manifest is valid: every listed artifact exists with matching size+crc.
  const fs::path manifest_path = run1 / "manifest.json";
  check.expect(fs::exists(manifest_path), "manifest.json missing");
  if (fs::exists(manifest_path)) {
    const json manifest = json::parse(file_bytes(manifest_path));
    check.expect(manifest.contains("files") && !manifest["files"].empty(), "manifest empty");
    for (const auto& f : manifest["files"]) {
      const fs::path p = run1 / f.at("path").get<std::string>();
      if (!fs::exists(p)) {
        check.expect(false, "manifest lists missing file " + p.string());
        continue;
      }
      check.expect(fs::file_size(p) == f.at("bytes").get<uint64_t>(),
                   "size mismatch for " + p.string());
      check.expect(crc32_of_file(p.string()) == f.at("crc32").get<uint32_t>(),
                   "crc mismatch for " + p.string());
    }
  }

  // Determinism under seed 0: a second pass produces byte-identical scores.
  const fs::path run2 = work / "align_rerun";
  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " eval alignment --db " +
               shell_quote(db) + " --checkpoint " + shell_quote(ckpt) + " --seed 0 --out " +
               shell_quote(run2.string()), log);
  check.expect(rc == 0, "eval rerun failed");
  check.expect(file_bytes(run1 / "scores.jsonl") == file_bytes(run2 / "scores.jsonl"),
               "rerun scores.jsonl differs");
  const int samples =
      static_cast<int>(load_scores((run1 / "scores.jsonl").string()).size());
  check.expect(samples == 500, "expected 500 protocol samples, got " + std::to_string(samples));

  // Documented exit codes: 2 for configuration errors, 3 for client errors.
  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " eval alignment --db " +
               shell_quote(db) + " --variant bogus --out " +
               shell_quote((work / "bad").string()), log);
  check.expect(WEXITSTATUS(rc) == 2,
               "configuration error must exit 2, got " + std::to_string(WEXITSTATUS(rc)));
  {
    std::ofstream os(work / "bad_gold.csv");
    os << "image_id,country\nmissing.ppm,France\n";
  }
  rc = run_cli(args.cli,
               "--config " + shell_quote(cfg_path.string()) + " annotate --fixture " +
               shell_quote(args.data + "/fixtures/annotation_responses.jsonl") +
               " --images " + shell_quote(args.data + "/fixtures/images") + " --gold " +
               shell_quote((work / "bad_gold.csv").string()) + " --out " +
               shell_quote((work / "bad_annot").string()), log);
  check.expect(WEXITSTATUS(rc) == 3,
               "client error must exit 3, got " + std::to_string(WEXITSTATUS(rc)));

  check.detail << samples << " samples, manifest verified, exit codes 2/3 honored";
}

struct Criterion {
  int number;
  std::string name;
  double limit_seconds;
  std::function<void(const Args&, Check&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  Args args;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--data") args.data = next();
    else if (arg == "--cli") args.cli = next();
    else if (arg == "--workdir") args.workdir = next();
    else {
      std::cerr << "unknown argument " << arg << "\n";
      return 2;
    }
  }
  log_quiet() = true;
  fs::create_directories(args.workdir);

  const std::vector<Criterion> criteria = {
      {1, "schedule contract suite", 5.0, criterion_schedule},
      {2, "attention oracle suite", 10.0, criterion_attention},
      {3, "gradient suite", 60.0, criterion_gradients},
      {4, "frozen-training suite", 300.0, criterion_training},
      {5, "retrieval suite", 30.0, criterion_retrieval},
      {6, "metrics arithmetic", 5.0, criterion_metrics},
      {7, "debiasing suite", 60.0, criterion_debiasing},
      {8, "end-to-end smoke", 600.0, criterion_e2e},
  };

  bool all_ok = true;
  for (const auto& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.fn(args, check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds >= criterion.limit_seconds) {
      check.ok = false;
      check.detail << "; over time budget";
    }
    std::ostringstream line;
    line << (check.ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number << ": "
         << criterion.name << " (" << std::fixed << std::setprecision(2) << seconds << "s / "
         << criterion.limit_seconds << "s)";
    const std::string detail = check.detail.str();
    if (!detail.empty()) line << " -- " << detail;
    std::cout << line.str() << std::endl;
    all_ok = all_ok && check.ok;
  }
  return all_ok ? 0 : 1;
}
