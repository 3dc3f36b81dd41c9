// Copyright 2026 The progseq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings: corpus generation, metrics, the back-translation oracle and
// checkpoint inference. Training stays on the CLI.

#include "progseq/checkpoint.hpp"
#include "progseq/data.hpp"
#include "progseq/error.hpp"
#include "progseq/eval.hpp"
#include "progseq/gradcheck.hpp"
#include "progseq/pose_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace progseq;

namespace {

py::dict example_dict(const Example& e, const Vocabulary& vocab) {
  py::dict d;
  d["tokens"] = vocab.decode(e.tokens);
  d["frames"] = e.pose.frames;
  d["counters"] = e.pose.counters;
  return d;
}

py::dict generation_dict(const Generation& g) {
  py::dict d;
  d["frames"] = g.pose.frames;
  d["counters"] = g.pose.counters;
  d["predicted_counters"] = g.predicted_counters;
  d["truncated"] = g.truncated;
  return d;
}

// Holds a loaded checkpoint; the model owns its parameters.
struct PyCheckpoint {
  LoadedCheckpoint ck;

  py::dict generate(const std::vector<std::string>& words, Index teacher_frames) const {
    const std::vector<int> ids = ck.vocab.encode(words);
    GenerateOptions o;
    if (teacher_frames > 0) {
      o.mode = DecodeMode::teacher_timing;
      o.reference_length = teacher_frames;
    }
    return generation_dict(ck.model->generate(ids, o));
  }
};

}  // namespace

PYBIND11_MODULE(_progseq, m) {
  m.doc() = "progseq core bindings";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("seed", &Corpus::seed)
      .def_readonly("joints", &Corpus::joints)
      .def_property_readonly("vocabulary", [](const Corpus& c) { return c.vocab.content_tokens(); })
      .def_property_readonly("templates",
                             [](const Corpus& c) {
                               std::vector<Matrix> out;
                               for (const SymbolTemplate& t : c.templates) out.push_back(t.trajectory);
                               return out;
                             })
      .def("split",
           [](const Corpus& c, const std::string& name) {
             py::list out;
             for (const Example& e : c.split(name)) out.append(example_dict(e, c.vocab));
             return out;
           })
      .def("back_translate",
           [](const Corpus& c, const Matrix& frames, Index min_span, Index max_span) {
             BackTranslateOptions o;
             o.min_span = min_span;
             o.max_span = max_span;
             const std::vector<int> ids = back_translate(frames, c.templates, o);
             return c.vocab.decode(ids);
           },
           py::arg("frames"), py::arg("min_span") = 6, py::arg("max_span") = 20);

  m.def(
      "generate_corpus",
      [](std::uint64_t seed, int vocab, int sentences, int joints) {
        CorpusOptions o;
        o.seed = seed;
        o.vocab_size = vocab;
        o.sentence_count = sentences;
        o.joints = joints;
        return generate_corpus(o);
      },
      py::arg("seed") = 1, py::arg("vocab") = 12, py::arg("sentences") = 750, py::arg("joints") = 8);
  m.def("load_corpus", &load_corpus, py::arg("path"));

  m.def(
      "dtw",
      [](const Matrix& a, const Matrix& b) {
        const AlignmentPath p = dtw(a, b);
        return py::make_tuple(p.cost, p.steps);
      },
      py::arg("a"), py::arg("b"));
  m.def("bleu", &corpus_bleu, py::arg("candidates"), py::arg("references"), py::arg("n") = 4);
  m.def("rouge_l", &corpus_rouge_l, py::arg("candidates"), py::arg("references"));

  m.def("gradcheck", [](int seeds) {
    std::vector<py::tuple> rows;
    for (const GradCheckResult& r : run_gradcheck_suite(seeds)) rows.push_back(py::make_tuple(r.name, r.max_rel_error, r.passed()));
    return rows;
  }, py::arg("seeds") = 3);

  py::class_<PyCheckpoint>(m, "Checkpoint")
      .def(py::init([](const std::filesystem::path& dir) {
             auto p = std::make_unique<PyCheckpoint>();
             p->ck = load_checkpoint(dir);
             return p;
           }),
           py::arg("path"))
      .def_property_readonly("vocabulary", [](const PyCheckpoint& p) { return p.ck.vocab.content_tokens(); })
      .def_property_readonly("joints", [](const PyCheckpoint& p) { return p.ck.model->config().joints; })
      .def("generate", &PyCheckpoint::generate, py::arg("words"), py::arg("teacher_frames") = 0,
           "Feedback decoding by default; teacher_frames > 0 fixes the length.");
}
