#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "culgen/annotator.hpp"
#include "culgen/backbone.hpp"
#include "culgen/cultural_db.hpp"
#include "culgen/embedding.hpp"
#include "culgen/errors.hpp"
#include "culgen/eval.hpp"
#include "culgen/image.hpp"
#include "culgen/projector.hpp"
#include "culgen/rng.hpp"
#include "culgen/scheduler.hpp"

namespace py = pybind11;
using namespace culgen;

PYBIND11_MODULE(_core, m) {
  m.doc() = "culture-aware ad generation core: encoders, adapters, condition "
            "scheduler, rectified-flow backbone, retrieval, and metrics";

  py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_KeyError);

  // --- embeddings ----------------------------------------------------

  py::class_<Embedding>(m, "Embedding")
      .def(py::init<Matrix, std::string>(), py::arg("rows"), py::arg("encoder_id") = "custom")
      .def_property_readonly("rows", &Embedding::rows)
      .def_property_readonly("length", &Embedding::length)
      .def_property_readonly("dim", &Embedding::dim)
      .def_property_readonly("encoder_id", &Embedding::encoder_id)
      .def("__repr__", [](const Embedding& e) {
        return "<Embedding L=" + std::to_string(e.length()) + " d=" + std::to_string(e.dim()) +
               " from " + e.encoder_id() + ">";
      });

  py::class_<ActionReason>(m, "ActionReason")
      .def(py::init<std::string, std::string>(), py::arg("action"), py::arg("reason"))
      .def_readwrite("action", &ActionReason::action)
      .def_readwrite("reason", &ActionReason::reason)
      .def("render", &ActionReason::render)
      .def_static("parse", &ActionReason::parse);

  py::class_<TextEncoder>(m, "TextEncoder");
  py::class_<ImageEncoder>(m, "ImageEncoder");
  py::class_<ToyHashTextEncoder, TextEncoder>(m, "ToyHashTextEncoder")
      .def(py::init<int, uint64_t>(), py::arg("dim"), py::arg("seed") = 0)
      .def_property_readonly("id", &ToyHashTextEncoder::id)
      .def_property_readonly("output_dim", &ToyHashTextEncoder::output_dim);
  py::class_<ToyImageEncoder, ImageEncoder>(m, "ToyImageEncoder")
      .def(py::init<int>(), py::arg("dim"))
      .def_property_readonly("id", &ToyImageEncoder::id)
      .def_property_readonly("output_dim", &ToyImageEncoder::output_dim);

  m.def("encode_text", &encode_text, py::arg("text"), py::arg("encoder"));
  m.def("encode_image", &encode_image, py::arg("image_path"), py::arg("encoder"));
  m.def("concat_sequences", &concat_sequences, py::arg("parts"));

  // --- projector -------------------------------------------------------

  py::class_<CrossAttentionParams>(m, "CrossAttentionParams")
      .def_readwrite("w_q", &CrossAttentionParams::w_q)
      .def_readwrite("w_k", &CrossAttentionParams::w_k)
      .def_readwrite("w_v", &CrossAttentionParams::w_v)
      .def_readwrite("w_o", &CrossAttentionParams::w_o)
      .def_readwrite("num_heads", &CrossAttentionParams::num_heads)
      .def_property_readonly("scale", &CrossAttentionParams::scale)
      .def_static(
          "random",
          [](int d_in, int d_attn, int d_out, uint64_t seed, double stddev, int num_heads) {
            SeededRng rng(seed);
            return CrossAttentionParams::random(d_in, d_attn, d_out, rng, stddev, num_heads);
          },
          py::arg("d_in"), py::arg("d_attn"), py::arg("d_out"), py::arg("seed") = 0,
          py::arg("stddev") = 1.0, py::arg("num_heads") = 1);

  py::class_<LinearProjector>(m, "LinearProjector")
      .def_readwrite("w", &LinearProjector::w)
      .def_readwrite("b", &LinearProjector::b)
      .def_static(
          "random",
          [](int d_img, int d_text, uint64_t seed, double stddev) {
            SeededRng rng(seed);
            return LinearProjector::random(d_img, d_text, rng, stddev);
          },
          py::arg("d_img"), py::arg("d_text"), py::arg("seed") = 0, py::arg("stddev") = 1.0);

  m.def("cross_attention", &cross_attention, py::arg("queries"), py::arg("context"),
        py::arg("params"));
  m.def("project_image", &project_image, py::arg("image"), py::arg("projector"));
  m.def("build_projected_image", &build_projected_image, py::arg("cultural"),
        py::arg("reason"), py::arg("image"), py::arg("ca1"), py::arg("ca2"),
        py::arg("projector"));
  m.def("softmax_rows", &softmax_rows, py::arg("scores"));

  py::class_<AdapterParams>(m, "AdapterParams")
      .def_readwrite("ca1", &AdapterParams::ca1)
      .def_readwrite("ca2", &AdapterParams::ca2)
      .def_readwrite("proj", &AdapterParams::proj)
      .def_static("random", &AdapterParams::random, py::arg("d_text"), py::arg("d_img"),
                  py::arg("d_attn"), py::arg("seed"), py::arg("stddev") = 1.0,
                  py::arg("num_heads") = 1)
      .def("save", &AdapterParams::save, py::arg("path"))
      .def_static("load", &AdapterParams::load, py::arg("path"))
      .def_property_readonly("checksum", &AdapterParams::checksum);

  // --- scheduler ---------------------------------------------------------

  py::enum_<Stage>(m, "Stage")
      .value("STAGE1", Stage::kStage1)
      .value("STAGE2", Stage::kStage2)
      .value("STAGE3", Stage::kStage3);

  py::class_<ScheduleConfig>(m, "ScheduleConfig")
      .def(py::init([](double b1, double b2, int total_steps) {
             ScheduleConfig cfg{b1, b2, total_steps};
             cfg.validate();
             return cfg;
           }),
           py::arg("b1") = 1.0 / 3.0, py::arg("b2") = 2.0 / 3.0, py::arg("total_steps") = 30)
      .def_readwrite("b1", &ScheduleConfig::b1)
      .def_readwrite("b2", &ScheduleConfig::b2)
      .def_readwrite("total_steps", &ScheduleConfig::total_steps);

  py::enum_<CulturalStart>(m, "CulturalStart")
      .value("EARLY", CulturalStart::kEarly)
      .value("MIDDLE", CulturalStart::kMiddle)
      .value("LATE", CulturalStart::kLate);

  py::class_<AblationFlags>(m, "AblationFlags")
      .def(py::init<>())
      .def_readwrite("include_cultural", &AblationFlags::include_cultural)
      .def_readwrite("cultural_start", &AblationFlags::cultural_start)
      .def_readwrite("include_style_image", &AblationFlags::include_style_image)
      .def_readwrite("num_style_images", &AblationFlags::num_style_images)
      .def_readwrite("include_reason_stage3", &AblationFlags::include_reason_stage3);

  py::class_<ConditionBundle>(m, "ConditionBundle")
      .def(py::init([](Embedding prompt, std::optional<Embedding> cultural,
                       std::optional<Embedding> reason, std::vector<Embedding> images) {
             return ConditionBundle{std::move(prompt), std::move(cultural), std::move(reason),
                                    std::move(images)};
           }),
           py::arg("prompt"), py::arg("cultural") = std::nullopt,
           py::arg("reason") = std::nullopt, py::arg("images") = std::vector<Embedding>{})
      .def_readwrite("prompt", &ConditionBundle::prompt)
      .def_readwrite("cultural", &ConditionBundle::cultural)
      .def_readwrite("reason", &ConditionBundle::reason)
      .def_readwrite("images", &ConditionBundle::images);

  m.def("stage_of", &stage_of, py::arg("step"), py::arg("config"));
  m.def(
      "build_condition",
      [](Stage stage, const ConditionBundle& bundle, const AdapterParams& adapters,
         const AblationFlags& flags) { return build_condition(stage, bundle, adapters, flags); },
      py::arg("stage"), py::arg("bundle"), py::arg("adapters"),
      py::arg("flags") = AblationFlags{});

  // --- backbone -------------------------------------------------------

  py::class_<LatentShape>(m, "LatentShape")
      .def(py::init([](int channels, int height, int width) {
             return LatentShape{channels, height, width};
           }),
           py::arg("channels") = 4, py::arg("height") = 8, py::arg("width") = 8)
      .def_readwrite("channels", &LatentShape::channels)
      .def_readwrite("height", &LatentShape::height)
      .def_readwrite("width", &LatentShape::width)
      .def_property_readonly("size", &LatentShape::size);

  py::class_<Latent>(m, "Latent")
      .def(py::init<LatentShape, Vector>(), py::arg("shape"), py::arg("values"))
      .def_readonly("shape", &Latent::shape)
      .def_readonly("values", &Latent::values);

  m.def("add_noise", &flow::add_noise, py::arg("x0"), py::arg("eps"), py::arg("tau"));
  m.def("velocity_target", &flow::velocity_target, py::arg("x0"), py::arg("eps"));
  m.def("flow_step", &flow::step, py::arg("x_t"), py::arg("prediction"), py::arg("tau"),
        py::arg("tau_next"));

  py::class_<DenoiserBase>(m, "DenoiserBase");
  py::class_<ToyDenoiser, DenoiserBase>(m, "ToyDenoiser")
      .def(py::init<LatentShape, int, int, uint64_t>(), py::arg("shape"),
           py::arg("model_dim"), py::arg("cond_dim"), py::arg("seed"))
      .def("forward", &ToyDenoiser::forward, py::arg("x"), py::arg("tau"),
           py::arg("condition"))
      .def_property_readonly("parameter_count", &ToyDenoiser::parameter_count)
      .def_property_readonly("checksum", &ToyDenoiser::checksum);

  py::class_<SampleTrace>(m, "SampleTrace")
      .def_readonly("stages", &SampleTrace::stages)
      .def_readonly("condition_lengths", &SampleTrace::condition_lengths);
  py::class_<SampleResult>(m, "SampleResult")
      .def_readonly("latent", &SampleResult::latent)
      .def_readonly("trace", &SampleResult::trace);

  m.def("sample", &sample, py::arg("denoiser"), py::arg("bundle"), py::arg("config"),
        py::arg("adapters"), py::arg("flags") = AblationFlags{}, py::arg("seed") = 0);
  m.def("latent_from_image", &latent_from_image, py::arg("path"), py::arg("shape"));
  m.def("save_latent", &save_latent, py::arg("path"), py::arg("latent"));
  m.def("load_latent", &load_latent, py::arg("path"));
  m.def(
      "visualize_latent_png",
      [](const Latent& latent, const std::string& path, int upscale) {
        write_png(path, visualize_latent(latent, upscale));
      },
      py::arg("latent"), py::arg("path"), py::arg("upscale") = 16);

  // --- cultural database ----------------------------------------------

  py::class_<CulturalRecord>(m, "CulturalRecord")
      .def_readonly("id", &CulturalRecord::id)
      .def_readonly("image_ref", &CulturalRecord::image_ref)
      .def_readonly("country", &CulturalRecord::country)
      .def_readonly("components", &CulturalRecord::components)
      .def_readonly("topic", &CulturalRecord::topic);

  py::class_<RetrievalResult>(m, "RetrievalResult")
      .def_readonly("selected", &RetrievalResult::selected)
      .def_readonly("components", &RetrievalResult::components)
      .def_readonly("reference", &RetrievalResult::reference)
      .def_readonly("seed", &RetrievalResult::seed);

  py::class_<VisualElementTable>(m, "VisualElementTable")
      .def(py::init<>())
      .def_static("load", &VisualElementTable::load, py::arg("path"))
      .def("set", &VisualElementTable::set, py::arg("country"), py::arg("element"))
      .def("lookup", [](const VisualElementTable& t, const std::string& country) {
        return t.lookup(country).element;
      });

  py::class_<CulturalDB>(m, "CulturalDB")
      .def_static(
          "ingest",
          [](const std::string& manifest) { return CulturalDB::ingest(manifest); },
          py::arg("manifest_path"))
      .def_static("load_index", &CulturalDB::load_index, py::arg("path"))
      .def("save_index", &CulturalDB::save_index, py::arg("path"))
      .def("attach_visual_elements", &CulturalDB::attach_visual_elements, py::arg("table"))
      .def("count", &CulturalDB::count, py::arg("country"))
      .def_property_readonly("total", &CulturalDB::total)
      .def_property_readonly("countries", &CulturalDB::countries)
      .def("retrieve", &CulturalDB::retrieve, py::arg("country"), py::arg("seed"));

  // --- metrics ---------------------------------------------------------

  py::class_<AlignmentScore>(m, "AlignmentScore")
      .def_static("of", &AlignmentScore::of, py::arg("ar_score"), py::arg("country_score"))
      .def_readonly("ar_score", &AlignmentScore::ar_score)
      .def_readonly("country_score", &AlignmentScore::country_score)
      .def_readonly("average", &AlignmentScore::average);

  m.def(
      "annotation_metrics",
      [](const std::vector<std::pair<std::string, std::vector<std::string>>>& predictions,
         const std::map<std::string, std::string>& gold) {
        std::vector<AnnotationResult> preds;
        for (const auto& [image_id, countries] : predictions) {
          AnnotationResult r;
          r.image_id = image_id;
          r.countries = countries;
          preds.push_back(std::move(r));
        }
        const AnnotationMetrics metrics = score_annotations(preds, gold, nullptr);
        return py::make_tuple(metrics.recall, metrics.p_at_1, metrics.n);
      },
      py::arg("predictions"), py::arg("gold"),
      "(recall, p_at_1, n) over (image_id, ranked countries) pairs");
}
