#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hwgen/ctc.hpp"
#include "hwgen/data.hpp"
#include "hwgen/error.hpp"
#include "hwgen/eval.hpp"
#include "hwgen/trainer.hpp"
#ifdef HWGEN_WITH_CLI
#include "cli.hpp"
#endif

namespace py = pybind11;
using namespace hwgen;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// [H,W] array <-> [1,H,W] image tensor.
Tensor image_from(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d image array [height, width]");
  Tensor t(Shape{1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

Array image_to(const Tensor& t) {
  Array a({static_cast<py::ssize_t>(t.dim(1)), static_cast<py::ssize_t>(t.dim(2))});
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

Tensor vector_from(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  Tensor t(Shape{static_cast<int>(a.shape(0))});
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

Array vector_to(const Tensor& t) {
  Array a(static_cast<py::ssize_t>(t.size()));
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

Tensor matrix_from(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array [frames, classes]");
  Tensor t(Shape{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

Tensor line_for(const Model& m, const Array& image) {
  return pad_width_to_multiple(normalize_height(image_from(image), m.config.height), m.config.px_per_pos);
}

Tensor style_for(const Model& m, const Array& style) {
  Tensor s = vector_from(style);
  if (static_cast<int>(s.size()) != m.config.style_dim) {
    throw ShapeError("style has " + std::to_string(s.size()) + " entries, model expects " +
                     std::to_string(m.config.style_dim));
  }
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the hwgen C++ core";

  auto base = py::register_exception<Error>(m, "HwgenError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<InfeasibleTarget>(m, "InfeasibleTarget", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());

  py::class_<Alphabet>(m, "Alphabet")
      .def(py::init(&Alphabet::from_utf8), py::arg("characters"))
      .def_static("standard", &Alphabet::standard)
      .def_property_readonly("num_classes", &Alphabet::num_classes)
      .def("__len__", &Alphabet::size)
      .def("encode", &Alphabet::encode, py::arg("text"))
      .def("decode", [](const Alphabet& a, const std::vector<int>& l) { return a.decode(l); }, py::arg("labels"))
      .def("__str__", &Alphabet::utf8);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def_static("desk", &ModelConfig::desk)
      .def_static("paper", &ModelConfig::paper)
      .def_static("from_dict", &ModelConfig::from_map, py::arg("values"))
      .def("to_dict", &ModelConfig::to_map)
      .def("validate", &ModelConfig::validate)
      .def_readwrite("preset", &ModelConfig::preset)
      .def_readwrite("style_dim", &ModelConfig::style_dim)
      .def_readwrite("height", &ModelConfig::height)
      .def_readwrite("px_per_pos", &ModelConfig::px_per_pos)
      .def_readwrite("alphabet", &ModelConfig::alphabet);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def_readonly("config", &Model::config)
      .def_readonly("alphabet", &Model::alphabet);

  m.def("save_model", [](const std::filesystem::path& p, Model& model) { save_model(p, model); }, py::arg("path"),
        py::arg("model"));
  m.def("load_model", [](const std::filesystem::path& p) { return std::shared_ptr<Model>(load_model(p).release()); },
        py::arg("path"));

  m.def("read_image", [](const std::filesystem::path& p) { return image_to(read_image(p)); }, py::arg("path"),
        "Grayscale image in [0, 1], 1 = background.");
  m.def("write_image", [](const std::filesystem::path& p, const Array& a) { write_image(p, image_from(a)); },
        py::arg("path"), py::arg("image"));

  m.def(
      "generate_line",
      [](Model& model, const std::string& text, const Array& style, std::uint64_t seed) {
        return image_to(generate_line(model, model.alphabet.encode(text), style_for(model, style), seed));
      },
      py::arg("model"), py::arg("text"), py::arg("style"), py::arg("seed") = 0);
  m.def(
      "extract_style",
      [](Model& model, const std::vector<Array>& images) {
        std::vector<Tensor> lines;
        for (const auto& a : images) lines.push_back(line_for(model, a));
        return vector_to(extract_style_from(model, lines));
      },
      py::arg("model"), py::arg("images"), "Style of one or more lines of the same writer.");
  m.def(
      "derive_spaced_text",
      [](Model& model, const Array& image, const std::string& text) {
        return dataset_spaced_text(*model.R, line_for(model, image), model.alphabet.encode(text)).tokens;
      },
      py::arg("model"), py::arg("image"), py::arg("text"), "Per-position labels (0 = blank) aligned to the image.");
  m.def(
      "render_spaced_line",
      [](Model& model, const std::vector<int>& tokens, const Array& style, std::uint64_t seed) {
        return image_to(render_spaced_line(model, SpacedText{tokens}, style_for(model, style), seed));
      },
      py::arg("model"), py::arg("tokens"), py::arg("style"), py::arg("seed") = 0);
  m.def(
      "reconstruct",
      [](Model& model, const Array& image, const std::string& text, std::uint64_t seed) {
        Tensor line = line_for(model, image);
        const std::vector<Tensor> one{line};
        Tensor style = extract_style_from(model, one);
        return image_to(
            render_spaced_line(model, dataset_spaced_text(*model.R, line, model.alphabet.encode(text)), style, seed));
      },
      py::arg("model"), py::arg("image"), py::arg("text"), py::arg("seed") = 0);

  m.def(
      "ctc_loss",
      [](const Array& log_probs, const std::vector<int>& target) {
        return ctc_loss(FramePosteriors{matrix_from(log_probs)}, target);
      },
      py::arg("log_probs"), py::arg("target"), "Negative log-likelihood; log_probs is [frames, classes].");
  m.def(
      "greedy_decode",
      [](const Array& log_probs) { return greedy_decode(FramePosteriors{matrix_from(log_probs)}).labels; },
      py::arg("log_probs"));
  m.def(
      "cer",
      [](const std::vector<std::vector<int>>& hyp, const std::vector<std::vector<int>>& ref) { return cer(hyp, ref); },
      py::arg("hypotheses"), py::arg("references"));
  m.def(
      "style_stats",
      [](const std::vector<Array>& styles, const std::vector<std::string>& authors) {
        std::vector<Tensor> s;
        for (const auto& a : styles) s.push_back(vector_from(a));
        StyleStats st = style_stats(s, authors);
        return py::dict(py::arg("intra_mean") = st.intra_mean, py::arg("intra_std") = st.intra_std,
                        py::arg("inter_mean") = st.inter_mean, py::arg("inter_std") = st.inter_std);
      },
      py::arg("styles"), py::arg("authors"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
#ifdef HWGEN_WITH_CLI
        std::ostringstream out, err;
        int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
#else
        (void)args;
        throw Error("built without the command-line tool");
        return py::make_tuple();
#endif
      },
      py::arg("args"), "Runs one hwgen command line; returns (exit_code, stdout, stderr).");
}
