// culgen: culture-targeted ad generation at desk scale, plus the bias and
// alignment measurement tooling around it. Subcommands: ingest, annotate,
// train, generate, audit {demographics,persuasion}, eval {alignment,
// ablation}, report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "culgen/annotator.hpp"
#include "culgen/backbone.hpp"
#include "culgen/bias_audit.hpp"
#include "culgen/config.hpp"
#include "culgen/cultural_db.hpp"
#include "culgen/errors.hpp"
#include "culgen/eval.hpp"
#include "culgen/image.hpp"
#include "culgen/log.hpp"
#include "culgen/pipeline.hpp"
#include "culgen/report.hpp"
#include "culgen/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace culgen;

namespace {

struct Session {
  RunConfig cfg;
  std::unique_ptr<ToyHashTextEncoder> text_enc;
  std::unique_ptr<ToyImageEncoder> image_enc;
  std::unique_ptr<ToyDenoiser> denoiser;
  AdapterParams adapters{{}, {}, {}};
  PromptTemplates templates;

  explicit Session(const RunConfig& config) : cfg(config) {
    text_enc = std::make_unique<ToyHashTextEncoder>(cfg.d_text, cfg.encoder_seed);
    image_enc = std::make_unique<ToyImageEncoder>(cfg.d_img);
    denoiser = std::make_unique<ToyDenoiser>(cfg.latent, cfg.model_dim, cfg.d_text,
                                             cfg.denoiser_seed);
    adapters = AdapterParams::random(cfg.d_text, cfg.d_img, cfg.d_attn, cfg.adapter_seed,
                                     cfg.adapter_init_stddev, cfg.num_heads);
    templates = PromptTemplates::load(cfg.data_dir + "/prompts");
  }

  void load_checkpoint(const std::string& path) {
    if (!path.empty()) adapters = AdapterParams::load(path);
  }

  CulturalDB open_db(const std::string& db_index) const {
    const std::string path = !db_index.empty() ? db_index : cfg.db_index;
    if (path.empty()) throw ConfigError("no db index given (--db or paths.db_index)");
    CulturalDB db = CulturalDB::load_index(path);
    if (db.visual_elements().size() == 0) {
      const fs::path ve = fs::path(cfg.data_dir) / "visual_elements.json";
      if (fs::exists(ve)) db.attach_visual_elements(VisualElementTable::load(ve.string()));
    }
    return db;
  }
};

RunConfig load_config(const std::string& config_path) {
  return config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
}

int cmd_ingest(const RunConfig& cfg, const std::string& manifest,
               const std::string& visual_elements, const std::string& out) {
  CulturalDB::IngestReport report;
  CulturalDB db = CulturalDB::ingest(manifest, &report);
  std::string ve = visual_elements;
  if (ve.empty()) {
    const fs::path fallback = fs::path(cfg.data_dir) / "visual_elements.json";
    if (fs::exists(fallback)) ve = fallback.string();
  }
  if (!ve.empty()) db.attach_visual_elements(VisualElementTable::load(ve));
  db.save_index(out);
  std::cout << "ingested " << report.total << " records across " << report.per_country.size()
            << " countries -> " << out << "\n";
  for (const auto& [country, n] : report.per_country)
    std::cout << "  " << country << ": " << n << "\n";
  return 0;
}

int cmd_annotate(const RunConfig& cfg, const std::string& fixture,
                 const std::string& images_dir, const std::string& gold_csv, bool grouped,
                 const std::string& out_dir) {
  const Vocabulary vocab = Vocabulary::load(cfg.data_dir + "/countries.json");
  const std::string instruction =
      PromptTemplates::load(cfg.data_dir + "/prompts").annotation_instruction;
  FixtureVLMClient client(fixture);

  const auto gold = load_gold_csv(gold_csv);
  std::vector<AnnotationResult> annotations;
  for (const auto& [image_id, country] : gold) {
    const fs::path image = fs::path(images_dir) / image_id;
    annotations.push_back(annotate_with_retries(image.string(), client, vocab, instruction));
  }

  fs::create_directories(out_dir);
  save_annotations((fs::path(out_dir) / "annotations.jsonl").string(), annotations);
  fs::copy_file(gold_csv, fs::path(out_dir) / "gold_labels.csv",
                fs::copy_options::overwrite_existing);

  const AnnotationMetrics plain = score_annotations(annotations, gold, nullptr);
  std::cout << "recall " << format_pct(100.0 * plain.recall) << "%  P@1 "
            << format_pct(100.0 * plain.p_at_1) << "%  over " << plain.n << " images\n";
  if (grouped) {
    const RegionMap regions = RegionMap::load(cfg.data_dir + "/regions.json", vocab);
    const AnnotationMetrics g = score_annotations(annotations, gold, &regions);
    std::cout << "grouped recall " << format_pct(100.0 * g.recall) << "%  P@1 "
              << format_pct(100.0 * g.p_at_1) << "%\n";
  }
  const auto counts = distribution_report(annotations);
  std::cout << "countries identified: " << counts.size() << "\n";
  return 0;
}

int cmd_train(Session& session, const std::string& db_index, const std::string& manifest,
              const std::string& out_checkpoint, const std::string& out_loss) {
  const CulturalDB db = session.open_db(db_index);
  TrainState state(session.adapters, session.cfg.train.seed);
  const TrainRunResult result =
      train(session.cfg.train, db, manifest, *session.denoiser, *session.text_enc,
            *session.image_enc, session.templates, session.cfg.schedule, session.cfg.flags,
            state, out_checkpoint, out_loss);
  std::cout << "trained " << result.losses.size() << " steps (" << result.optimizer_steps
            << " optimizer updates, " << result.skipped_examples << " examples skipped)\n";
  if (!result.losses.empty())
    std::cout << "smoothed loss " << result.initial_smoothed << " -> " << result.final_smoothed
              << "\n";
  std::cout << "checkpoint: " << out_checkpoint << "\n";
  return 0;
}

int cmd_generate(Session& session, const std::string& db_index, const std::string& country,
                 const std::string& action, const std::string& reason, uint64_t seed,
                 const std::string& out_dir) {
  const CulturalDB db = session.open_db(db_index);
  const PipelineContext ctx{db,
                            *session.denoiser,
                            session.adapters,
                            *session.text_enc,
                            *session.image_enc,
                            session.templates,
                            session.cfg.schedule,
                            session.cfg.flags,
                            session.cfg.per_component_cultural};
  GenerationSpec spec;
  spec.country = country;
  spec.ar = {action, reason};
  spec.retrieval_seed = seed;
  spec.noise_seed = seed + 1;
  const GenerationOutput out = generate_sample(spec, ctx);

  fs::create_directories(out_dir);
  std::string slug = country;
  for (auto& ch : slug)
    if (ch == ' ') ch = '_';
  const fs::path base = fs::path(out_dir) / ("sample_" + slug + "_s" + std::to_string(seed));
  save_latent(base.string() + ".cgtf", out.sample.latent);
  write_png(base.string() + ".png", visualize_latent(out.sample.latent));

  json trace = json::array();
  for (size_t i = 0; i < out.sample.trace.stages.size(); ++i)
    trace.push_back({{"step", i},
                     {"stage", to_string(out.sample.trace.stages[i])},
                     {"condition_length", out.sample.trace.condition_lengths[i]}});
  json meta = {{"country", country},
               {"statement", spec.ar.render()},
               {"prompt", out.prompt_text},
               {"seed", seed},
               {"reference_image", out.retrieval.reference.image_ref},
               {"components", out.retrieval.components},
               {"trace", trace}};
  std::ofstream meta_os(base.string() + ".json");
  meta_os << meta.dump(2) << "\n";

  std::cout << "sample written to " << base.string() << ".{png,cgtf,json}\n";
  std::cout << "condition lengths:";
  for (int len : out.sample.trace.condition_lengths) std::cout << " " << len;
  std::cout << "\n";
  return 0;
}

int cmd_audit_demographics(const std::string& faces_fixture, const std::string& topics_csv,
                           const std::string& out_dir) {
  FixtureFaceAnalyzer analyzer(faces_fixture);
  const auto topics = load_gold_csv(topics_csv);  // same two-column layout

  std::vector<DemographicProfile> profiles;
  int nonbinary = 0;
  for (const auto& [image_id, topic] : topics) {
    const auto faces = profile_faces(image_id, analyzer, &nonbinary);
    profiles.insert(profiles.end(), faces.begin(), faces.end());
  }
  if (profiles.empty()) throw InvalidInputError("no faces found for any listed image");

  const DistributionTable race = tabulate_demographics(profiles, topics, Axis::kRace);
  const DistributionTable gender = tabulate_demographics(profiles, topics, Axis::kGender);

  fs::create_directories(out_dir);
  save_profiles((fs::path(out_dir) / "profiles.jsonl").string(), profiles);
  fs::copy_file(topics_csv, fs::path(out_dir) / "topics.csv",
                fs::copy_options::overwrite_existing);

  ReportInputs inputs;
  inputs.tables.push_back(to_table(race, "diversity_race"));
  inputs.tables.push_back(to_table(gender, "diversity_gender"));
  emit_report(inputs, out_dir);
  std::cout << "profiled " << profiles.size() << " faces (" << nonbinary
            << " non-binary outputs counted, not tabulated)\n";
  std::cout << "tables under " << (fs::path(out_dir) / "tables").string() << "\n";
  return 0;
}

std::unique_ptr<JudgeClient> make_judge(const std::string& spec, const std::string& modality) {
  if (spec == "first") return std::make_unique<PositionBiasedJudge>(1, modality);
  if (spec == "second") return std::make_unique<PositionBiasedJudge>(2, modality);
  if (spec == "content") return std::make_unique<ContentHashJudge>(modality);
  if (spec.rfind("uniform", 0) == 0) {
    uint64_t seed = 0;
    const auto colon = spec.find(':');
    if (colon != std::string::npos) seed = std::stoull(spec.substr(colon + 1));
    return std::make_unique<UniformRandomJudge>(seed, modality);
  }
  if (spec.rfind("fixture:", 0) == 0)
    return std::make_unique<ScriptedJudge>(spec.substr(8), "fixture-judge", modality);
  throw ConfigError("unknown judge '" + spec +
                    "' (first|second|content|uniform[:seed]|fixture:<path>)");
}

int cmd_audit_persuasion(const RunConfig& cfg, const std::string& bases_path,
                         const std::string& judge_spec, const std::string& modality,
                         const std::string& out_dir) {
  const PromptTemplates templates = PromptTemplates::load(cfg.data_dir + "/prompts");
  auto judge = make_judge(judge_spec, modality);

  std::ifstream is(bases_path);
  if (!is) throw IoError("cannot open swap bases: " + bases_path);
  const fs::path base_dir = fs::path(bases_path).parent_path();
  fs::create_directories(fs::path(out_dir) / "edits");
  LocalTintImageEditor image_editor((fs::path(out_dir) / "edits").string());
  LocalSwapTextEditor text_editor;

  std::vector<PairTrial> trials;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    SwapBase base;
    base.id = j.at("id").get<std::string>();
    base.image_ref = (base_dir / j.at("image").get<std::string>()).string();
    base.description = j.at("description").get<std::string>();
    base.topic = j.at("topic").get<std::string>();
    base.ar = {j.at("action").get<std::string>(), j.at("reason").get<std::string>()};
    base.attribute = axis_from_string(j.at("attribute").get<std::string>());
    base.source_value = j.at("source_value").get<std::string>();
    const auto& values = base.attribute == Axis::kRace ? race_labels6() : gender_labels();
    const auto batch = build_swap_pairs(base, values, image_editor, text_editor, templates);
    trials.insert(trials.end(), batch.begin(), batch.end());
  }
  if (trials.empty()) throw InvalidInputError("no swap pairs could be built");

  std::vector<JudgeVerdict> verdicts;
  for (const auto& trial : trials) {
    verdicts.push_back(judge_pair(trial, *judge, Order::kAB, templates));
    verdicts.push_back(judge_pair(trial, *judge, Order::kBA, templates));
  }

  fs::create_directories(out_dir);
  save_trials((fs::path(out_dir) / "trials.jsonl").string(), trials);
  save_verdicts((fs::path(out_dir) / "verdicts.jsonl").string(), verdicts);

  ReportInputs inputs;
  for (Axis axis : {Axis::kRace, Axis::kGender}) {
    std::vector<PairTrial> subset;
    for (const auto& t : trials)
      if (t.attribute == axis) subset.push_back(t);
    if (subset.empty()) continue;
    std::vector<JudgeVerdict> subset_verdicts;
    for (const auto& v : verdicts)
      for (const auto& t : subset)
        if (t.pair_id == v.pair_id) {
          subset_verdicts.push_back(v);
          break;
        }
    const WinTable table = aggregate_wins(subset_verdicts, subset);
    inputs.tables.push_back(
        to_table(table, "persuasion_" + to_string(axis) + "_" + judge->id()));
    std::cout << to_string(axis) << " wins (" << judge->id() << "), "
              << table.verdicts_per_topic.at("Overall") << " verdicts, "
              << table.invalid_verdicts << " invalid, " << table.excluded_pairs
              << " pairs excluded\n";
  }
  emit_report(inputs, out_dir);
  std::cout << "tables under " << (fs::path(out_dir) / "tables").string() << "\n";
  return 0;
}

int cmd_eval(Session& session, const std::string& db_index, const std::string& statements,
             const std::string& variants_arg, const std::string& out_dir) {
  const CulturalDB db = session.open_db(db_index);
  EvalProtocol protocol;
  protocol.countries = session.cfg.countries;
  protocol.seed = session.cfg.eval_seed;
  const std::string stmts =
      statements.empty() ? session.cfg.data_dir + "/fixtures/ar_statements.jsonl" : statements;
  protocol.statements = load_statements(stmts, session.cfg.max_statements);
  protocol.validate();

  std::vector<Variant> variants;
  if (variants_arg == "all") {
    variants = {Variant::kNone,    Variant::kNoCultural, Variant::kEarly,  Variant::kLate,
                Variant::kNoStyle, Variant::kMultiStyle, Variant::kCulgen};
  } else {
    std::istringstream vs(variants_arg);
    for (std::string v; std::getline(vs, v, ',');) variants.push_back(variant_from_string(v));
  }

  ToyCosineScorer scorer(session.cfg.d_text, session.cfg.encoder_seed);
  const PipelineContext ctx{db,
                            *session.denoiser,
                            session.adapters,
                            *session.text_enc,
                            *session.image_enc,
                            session.templates,
                            session.cfg.schedule,
                            session.cfg.flags,
                            session.cfg.per_component_cultural};

  std::vector<AblationRow> rows;
  for (Variant variant : variants) {
    const fs::path run_dir =
        variants.size() == 1 ? fs::path(out_dir) : fs::path(out_dir) / to_string(variant);
    fs::create_directories(run_dir);
    const AblationRow row = run_ablation(variant, protocol, scorer, ctx, run_dir, nullptr);
    rows.push_back(row);
    std::cout << row.variant << ": average " << format_score(row.average) << "  AR "
              << format_score(row.ar) << "  country " << format_score(row.country)
              << "  (n=" << row.n << ")\n";
  }

  ReportInputs inputs;
  inputs.tables.push_back(to_table(rows));
  emit_report(inputs, out_dir);
  std::cout << "tables under " << (fs::path(out_dir) / "tables").string() << "\n";
  return 0;
}

std::string file_contents(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

int cmd_report(const RunConfig& cfg, const std::string& run_dir) {
  ReportInputs inputs;
  const fs::path dir(run_dir);
  if (!fs::exists(dir)) throw IoError("run directory does not exist: " + run_dir);

  // Alignment scores (top level or per-variant subdirectories).
  std::vector<fs::path> score_files;
  if (fs::exists(dir / "scores.jsonl")) score_files.push_back(dir / "scores.jsonl");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "scores.jsonl"))
      score_files.push_back(entry.path() / "scores.jsonl");
  std::sort(score_files.begin(), score_files.end());
  std::vector<AblationRow> rows;
  for (const auto& file : score_files) {
    const auto scores = load_scores(file.string());
    if (scores.empty()) continue;
    AblationRow row;
    row.variant = file.parent_path() == dir ? "run" : file.parent_path().filename().string();
    const fs::path meta_path = file.parent_path() / "run.json";
    if (fs::exists(meta_path)) {
      const json meta = json::parse(file_contents(meta_path));
      row.variant = meta.value("variant", row.variant);
    }
    for (const auto& s : scores) {
      row.average += s.average;
      row.ar += s.ar_score;
      row.country += s.country_score;
    }
    row.n = static_cast<int>(scores.size());
    row.average /= row.n;
    row.ar /= row.n;
    row.country /= row.n;
    rows.push_back(row);
  }
  if (!rows.empty()) inputs.tables.push_back(to_table(rows));

  // Persuasion verdicts.
  if (fs::exists(dir / "verdicts.jsonl") && fs::exists(dir / "trials.jsonl")) {
    const auto trials = load_trials((dir / "trials.jsonl").string());
    const auto verdicts = load_verdicts((dir / "verdicts.jsonl").string());
    for (Axis axis : {Axis::kRace, Axis::kGender}) {
      std::vector<PairTrial> subset;
      for (const auto& t : trials)
        if (t.attribute == axis) subset.push_back(t);
      if (subset.empty()) continue;
      std::vector<JudgeVerdict> subset_verdicts;
      for (const auto& v : verdicts)
        for (const auto& t : subset)
          if (t.pair_id == v.pair_id) {
            subset_verdicts.push_back(v);
            break;
          }
      const WinTable table = aggregate_wins(subset_verdicts, subset);
      inputs.tables.push_back(
          to_table(table, "persuasion_" + to_string(axis) + "_" + table.judge_id));
    }
  }

  // Demographic profiles.
  if (fs::exists(dir / "profiles.jsonl") && fs::exists(dir / "topics.csv")) {
    const auto profiles = load_profiles((dir / "profiles.jsonl").string());
    const auto topics = load_gold_csv((dir / "topics.csv").string());
    inputs.tables.push_back(
        to_table(tabulate_demographics(profiles, topics, Axis::kRace), "diversity_race"));
    inputs.tables.push_back(
        to_table(tabulate_demographics(profiles, topics, Axis::kGender), "diversity_gender"));
  }

  // Annotations.
  if (fs::exists(dir / "annotations.jsonl")) {
    const auto annotations = load_annotations((dir / "annotations.jsonl").string());
    const auto counts = distribution_report(annotations);
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [country, n] : counts) bars.emplace_back(country, n);
    inputs.distributions.push_back({"country_distribution", bars});
    if (fs::exists(dir / "gold_labels.csv")) {
      const auto gold = load_gold_csv((dir / "gold_labels.csv").string());
      const Vocabulary vocab = Vocabulary::load(cfg.data_dir + "/countries.json");
      const RegionMap regions = RegionMap::load(cfg.data_dir + "/regions.json", vocab);
      const AnnotationMetrics plain = score_annotations(annotations, gold, nullptr);
      const AnnotationMetrics grouped = score_annotations(annotations, gold, &regions);
      TableDoc metrics;
      metrics.name = "annotation_metrics";
      metrics.columns = {"Grouping", "Recall", "P@1", "N"};
      metrics.rows = {
          {"none", format_pct(100.0 * plain.recall), format_pct(100.0 * plain.p_at_1),
           std::to_string(plain.n)},
          {"region", format_pct(100.0 * grouped.recall), format_pct(100.0 * grouped.p_at_1),
           std::to_string(grouped.n)}};
      inputs.tables.push_back(std::move(metrics));
    }
  }

  const auto files = emit_report(inputs, dir);
  std::cout << "report: " << files.size() << " artifacts under " << run_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"culture-aware ad generation and bias audit toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run config JSON (docs/config.md)");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress warnings");

  auto* ingest = app.add_subcommand("ingest", "build the cultural database index");
  std::string ingest_manifest, ingest_ve, ingest_out = "db_index.json";
  ingest->add_option("--manifest", ingest_manifest, "JSON-lines manifest")->required();
  ingest->add_option("--visual-elements", ingest_ve, "country->element JSON");
  ingest->add_option("--out", ingest_out, "output index path");

  auto* annotate_cmd =
      app.add_subcommand("annotate", "country annotation over a fixture client");
  std::string ann_fixture, ann_images, ann_gold, ann_out = "runs/annotate";
  bool ann_grouped = false;
  annotate_cmd->add_option("--fixture", ann_fixture, "recorded responses JSONL")->required();
  annotate_cmd->add_option("--images", ann_images, "image directory")->required();
  annotate_cmd->add_option("--gold", ann_gold, "gold labels CSV")->required();
  annotate_cmd->add_flag("--grouped", ann_grouped, "also report region-grouped metrics");
  annotate_cmd->add_option("--out", ann_out, "output directory");

  auto* train_cmd = app.add_subcommand("train", "adapter-only training");
  std::string train_db, train_manifest, train_ckpt = "adapter.cgtf", train_loss = "loss.csv";
  int train_steps = -1;
  double train_lr = -1.0;
  uint64_t train_seed = 0;
  bool train_seed_set = false;
  train_cmd->add_option("--db", train_db, "db index JSON");
  train_cmd->add_option("--manifest", train_manifest, "training manifest JSONL")->required();
  train_cmd->add_option("--out-checkpoint", train_ckpt, "checkpoint path");
  train_cmd->add_option("--out-loss", train_loss, "loss curve CSV path");
  train_cmd->add_option("--steps", train_steps, "override train.steps");
  train_cmd->add_option("--learning-rate", train_lr, "override train.learning_rate");
  train_cmd->add_option("--seed", train_seed, "override train.seed")
      ->each([&train_seed_set](const std::string&) { train_seed_set = true; });

  auto* gen = app.add_subcommand("generate", "generate one country-targeted sample");
  std::string gen_db, gen_country, gen_action, gen_reason, gen_ckpt, gen_out = "runs/generate";
  uint64_t gen_seed = 0;
  int gen_T = -1;
  gen->add_option("--db", gen_db, "db index JSON");
  gen->add_option("--country", gen_country, "target country")->required();
  gen->add_option("--action", gen_action, "action part")->required();
  gen->add_option("--reason", gen_reason, "reason part")->required();
  gen->add_option("--checkpoint", gen_ckpt, "adapter checkpoint");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("-T,--steps", gen_T, "denoising steps");
  gen->add_option("--out", gen_out, "output directory");

  auto* audit = app.add_subcommand("audit", "bias audits");
  audit->require_subcommand(1);
  auto* demo = audit->add_subcommand("demographics", "demographic distribution tables");
  std::string demo_faces, demo_topics, demo_out = "runs/demographics";
  demo->add_option("--faces", demo_faces, "face-analysis fixture JSONL")->required();
  demo->add_option("--topics", demo_topics, "image_id,topic CSV")->required();
  demo->add_option("--out", demo_out, "output directory");

  auto* pers = audit->add_subcommand("persuasion", "demographic-swap persuasion judging");
  std::string pers_bases, pers_judge = "uniform:0", pers_modality = "LLM",
              pers_out = "runs/persuasion";
  pers->add_option("--bases", pers_bases, "swap bases JSONL")->required();
  pers->add_option("--judge", pers_judge, "first|second|content|uniform[:seed]|fixture:<path>");
  pers->add_option("--modality", pers_modality, "LLM or MLLM");
  pers->add_option("--out", pers_out, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "alignment evaluation");
  eval_cmd->require_subcommand(1);
  auto* align = eval_cmd->add_subcommand("alignment", "score one variant");
  std::string al_db, al_ckpt, al_statements, al_variant = "culgen", al_out = "runs/alignment";
  int al_limit = -1;
  uint64_t al_seed = 0;
  bool al_seed_set = false;
  align->add_option("--db", al_db, "db index JSON");
  align->add_option("--checkpoint", al_ckpt, "adapter checkpoint");
  align->add_option("--statements", al_statements, "statements JSONL");
  align->add_option("--variant", al_variant, "ablation variant");
  align->add_option("--limit", al_limit, "cap statement count");
  align->add_option("--seed", al_seed, "protocol seed")
      ->each([&al_seed_set](const std::string&) { al_seed_set = true; });
  align->add_option("--out", al_out, "run directory");

  auto* ablation = eval_cmd->add_subcommand("ablation", "score several variants");
  std::string ab_db, ab_ckpt, ab_statements, ab_variants = "all", ab_out = "runs/ablation";
  int ab_limit = -1;
  ablation->add_option("--db", ab_db, "db index JSON");
  ablation->add_option("--checkpoint", ab_ckpt, "adapter checkpoint");
  ablation->add_option("--statements", ab_statements, "statements JSONL");
  ablation->add_option("--variants", ab_variants, "comma list or 'all'");
  ablation->add_option("--limit", ab_limit, "cap statement count");
  ablation->add_option("--out", ab_out, "run directory");

  auto* report_cmd = app.add_subcommand("report", "re-emit tables for a run directory");
  std::string report_run;
  report_cmd->add_option("--run", report_run, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    log_quiet() = quiet;
    RunConfig cfg = load_config(config_path);

    if (*ingest) return cmd_ingest(cfg, ingest_manifest, ingest_ve, ingest_out);
    if (*annotate_cmd)
      return cmd_annotate(cfg, ann_fixture, ann_images, ann_gold, ann_grouped, ann_out);
    if (*train_cmd) {
      if (train_steps >= 0) cfg.train.steps = train_steps;
      if (train_lr > 0) cfg.train.learning_rate = train_lr;
      if (train_seed_set) cfg.train.seed = train_seed;
      Session session(cfg);
      return cmd_train(session, train_db, train_manifest, train_ckpt, train_loss);
    }
    if (*gen) {
      if (gen_T > 0) cfg.schedule.total_steps = gen_T;
      Session session(cfg);
      session.load_checkpoint(gen_ckpt.empty() ? cfg.checkpoint : gen_ckpt);
      return cmd_generate(session, gen_db, gen_country, gen_action, gen_reason, gen_seed,
                          gen_out);
    }
    if (*demo) return cmd_audit_demographics(demo_faces, demo_topics, demo_out);
    if (*pers)
      return cmd_audit_persuasion(cfg, pers_bases, pers_judge, pers_modality, pers_out);
    if (*align) {
      if (al_limit >= 0) cfg.max_statements = al_limit;
      if (al_seed_set) cfg.eval_seed = al_seed;
      Session session(cfg);
      session.load_checkpoint(al_ckpt.empty() ? cfg.checkpoint : al_ckpt);
      return cmd_eval(session, al_db, al_statements, al_variant, al_out);
    }
    if (*ablation) {
      if (ab_limit >= 0) cfg.max_statements = ab_limit;
      Session session(cfg);
      session.load_checkpoint(ab_ckpt.empty() ? cfg.checkpoint : ab_ckpt);
      return cmd_eval(session, ab_db, ab_statements, ab_variants, ab_out);
    }
    if (*report_cmd) return cmd_report(cfg, report_run);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "client error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
