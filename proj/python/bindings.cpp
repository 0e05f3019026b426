// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <variant>

#include "facevc/cli.hpp"
#include "facevc/eval.hpp"
#include "facevc/gradcheck.hpp"
#include "facevc/io.hpp"
#include "facevc/trainer.hpp"

namespace py = pybind11;

namespace facevc {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor<double>(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor<double>& t) {
  Array a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

// A trained model loaded from a checkpoint of either precision.
class Model {
 public:
  explicit Model(const std::string& path) {
    if (checkpoint_precision(path) == "float") {
      state_ = load_checkpoint<float>(path);
    } else {
      state_ = load_checkpoint<double>(path);
    }
    std::visit(
        [&](auto& st) {
          if (st.norm.empty()) throw FormatError(path + ": checkpoint carries no feature normalization statistics");
        },
        state_);
  }

  Array convert(const Array& features, const Array& face) {
    return std::visit([&](auto& st) { return to_array(convert_raw(st.params, st.norm, to_tensor(features), to_tensor(face))); },
                      state_);
  }
  Array generate_face(const Array& features) {
    return std::visit([&](auto& st) { return to_array(generate_face_raw(st.params, st.norm, to_tensor(features))); },
                      state_);
  }
  Array reconstruct_face(const Array& image) {
    return std::visit([&](auto& st) { return to_array(facevc::reconstruct_face(st.params, to_tensor(image))); }, state_);
  }
  std::size_t step() const {
    return std::visit([](const auto& st) { return st.step; }, state_);
  }
  std::string precision() const { return std::holds_alternative<TrainState<float>>(state_) ? "float" : "double"; }

 private:
  std::variant<TrainState<float>, TrainState<double>> state_;
};

}  // namespace
}  // namespace facevc

PYBIND11_MODULE(_facevc, m) {
  using namespace facevc;
  m.doc() = "Crossmodal voice conversion and face generation";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "facevc");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a facevc command line; returns (exit_code, stdout, stderr).");

  m.def(
      "kl_to_standard_normal",
      [](const Array& mean, const Array& var) { return kl_to_standard_normal(to_vector(mean), to_vector(var)); },
      py::arg("mean"), py::arg("var"), "KL(N(mean, diag var) || N(0, I)).");
  m.def(
      "log_density",
      [](const Array& mean, const Array& var, const Array& x) {
        return log_density(to_vector(mean), to_vector(var), to_vector(x));
      },
      py::arg("mean"), py::arg("var"), py::arg("x"), "Diagonal Gaussian log density.");

  m.def(
      "conv2d",
      [](const Array& x, const Array& k, std::array<std::size_t, 2> stride, std::array<std::size_t, 2> pad) {
        return to_array(conv2d(to_tensor(x), to_tensor(k), ConvGeometry{stride[0], stride[1], pad[0], pad[1]}));
      },
      py::arg("x"), py::arg("kernel"), py::arg("stride") = std::array<std::size_t, 2>{1, 1},
      py::arg("pad") = std::array<std::size_t, 2>{0, 0});
  m.def(
      "deconv2d",
      [](const Array& x, const Array& k, std::array<std::size_t, 2> stride, std::array<std::size_t, 2> pad) {
        return to_array(deconv2d(to_tensor(x), to_tensor(k), ConvGeometry{stride[0], stride[1], pad[0], pad[1]}));
      },
      py::arg("x"), py::arg("kernel"), py::arg("stride") = std::array<std::size_t, 2>{1, 1},
      py::arg("pad") = std::array<std::size_t, 2>{0, 0});

  m.def(
      "mcd", [](const Array& a, const Array& b) { return mcd(to_tensor(a), to_tensor(b)); }, py::arg("a"),
      py::arg("b"), "Mel-cepstral distortion in dB between [D, N] feature arrays, dimension 0 excluded.");

  m.def(
      "grad_check",
      [](std::uint64_t seed) {
        const GradCheckReport r = grad_check(seed);
        return py::make_tuple(r.passed(), r.max_error());
      },
      py::arg("seed"), "Finite-difference gradient check; returns (passed, max_relative_error).");

  m.def("load_features", [](const std::string& p) { return to_array(load_features(p)); }, py::arg("path"));
  m.def(
      "save_features", [](const std::string& p, const Array& a) { save_features(p, to_tensor(a)); }, py::arg("path"),
      py::arg("features"));
  m.def("load_image", [](const std::string& p) { return to_array(load_image(p)); }, py::arg("path"));
  m.def(
      "save_image", [](const std::string& p, const Array& a) { save_image(p, to_tensor(a)); }, py::arg("path"),
      py::arg("image"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("convert", &Model::convert, py::arg("features"), py::arg("face"),
           "Convert raw [D, N] features towards the voice implied by a [1, H, W] face.")
      .def("generate_face", &Model::generate_face, py::arg("features"))
      .def("reconstruct_face", &Model::reconstruct_face, py::arg("image"))
      .def_property_readonly("step", &Model::step)
      .def_property_readonly("precision", &Model::precision);
}
