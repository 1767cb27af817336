#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drnn/accel.hpp"
#include "drnn/corpus.hpp"
#include "drnn/cosim.hpp"
#include "drnn/error.hpp"
#include "drnn/fixed_point.hpp"
#include "drnn/lm.hpp"
#include "drnn/model_io.hpp"
#include "drnn/training.hpp"

namespace py = pybind11;
using namespace drnn;

PYBIND11_MODULE(_core, m) {
  m.doc() = "LSTM language model and MAC-array accelerator co-simulation";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  // corpus
  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>>(), py::arg("words"))
      .def("__len__", &Vocabulary::size)
      .def_property_readonly("words", &Vocabulary::words)
      .def_property_readonly("start_id", &Vocabulary::start_id)
      .def_property_readonly("end_id", &Vocabulary::end_id)
      .def_property_readonly("unknown_id", &Vocabulary::unknown_id)
      .def("__contains__", &Vocabulary::contains)
      .def("encode", py::overload_cast<const Sentence&>(&Vocabulary::encode, py::const_))
      .def("encode_word", py::overload_cast<std::string_view>(&Vocabulary::encode, py::const_))
      .def("decode", &Vocabulary::decode)
      .def("save", &Vocabulary::save)
      .def_static("load", &Vocabulary::load);

  py::class_<TrainingPair>(m, "TrainingPair")
      .def(py::init<>())
      .def_readwrite("input", &TrainingPair::input)
      .def_readwrite("label", &TrainingPair::label);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("build_vocab", &build_vocab, py::arg("sentences"), py::arg("max_words") = kDefaultVocabBudget);
  m.def("make_training_pairs", &make_training_pairs, py::arg("sentences"), py::arg("vocab"));

  // lm-core
  m.def("hard_sigmoid", &hard_sigmoid);
  m.def("softmax", &softmax);

  py::class_<LstmStackParams>(m, "LstmStackParams")
      .def_static("zeros", &LstmStackParams::zeros, py::arg("vocab"), py::arg("hidden"))
      .def_property_readonly("vocab", &LstmStackParams::vocab)
      .def_property_readonly("hidden", &LstmStackParams::hidden)
      .def_readwrite("output", &LstmStackParams::output)
      .def("arrays", [](const LstmStackParams& p) {
        py::dict out;
        p.for_each_array([&](const std::string& name, const auto& a) { out[py::str(name)] = a; });
        return out;
      })
      .def("set_array", [](LstmStackParams& p, const std::string& name, const Matrix& value) {
        bool found = false;
        p.for_each_array([&](const std::string& n, auto& a) {
          if (n != name) return;
          found = true;
          if constexpr (std::is_same_v<std::decay_t<decltype(a)>, Vector>) {
            if (value.size() != a.size()) throw UsageError("shape mismatch for " + name);
            a = Eigen::Map<const Vector>(value.data(), value.size());
          } else {
            if (value.rows() != a.rows() || value.cols() != a.cols()) throw UsageError("shape mismatch for " + name);
            a = value;
          }
        });
        if (!found) throw UsageError("no parameter array named " + name);
      });

  m.def("stack_forward", [](const LstmStackParams& p, const TokenSequence& input) {
    return stack_forward(p, input).outputs;
  }, py::arg("params"), py::arg("input"));

  // training
  m.def("cross_entropy", &cross_entropy);
  m.def("sequence_loss", &sequence_loss);
  m.def("perplexity", &perplexity, py::arg("total_loss"), py::arg("token_count"));
  m.def("score_sentence", &score_sentence, py::arg("params"), py::arg("sentence"));
  m.def("init_params", &init_params, py::arg("vocab"), py::arg("hidden"), py::arg("seed") = 0);
  m.def("bptt_gradients", [](const LstmStackParams& p, const TrainingPair& pair) {
    auto r = bptt_gradients(p, pair);
    return py::make_tuple(r.loss, static_cast<LstmStackParams>(r.grads));
  });
  m.def("sgd_step", [](LstmStackParams& p, const LstmStackParams& g, double lr) {
    sgd_step(p, Gradients(g), lr);
  });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("eval_interval", &TrainConfig::eval_interval)
      .def_readwrite("rng_seed", &TrainConfig::rng_seed)
      .def_readwrite("shuffle", &TrainConfig::shuffle);

  py::class_<LogRecord>(m, "LogRecord")
      .def_readonly("epoch", &LogRecord::epoch)
      .def_readonly("step", &LogRecord::step)
      .def_readonly("mean_loss", &LogRecord::mean_loss)
      .def_readonly("perplexity", &LogRecord::perplexity);

  py::class_<TrainingLog>(m, "TrainingLog")
      .def_readonly("epochs", &TrainingLog::epochs)
      .def_readonly("intervals", &TrainingLog::intervals);

  m.def("train", &train, py::arg("params"), py::arg("pairs"), py::arg("config"));
  m.def("evaluate", [](const LstmStackParams& p, const std::vector<TrainingPair>& pairs) {
    const auto r = evaluate(p, pairs);
    return py::make_tuple(r.total_loss, r.tokens, r.perplexity());
  });
  m.def("save_model", [](const LstmStackParams& p, const std::filesystem::path& path, bool f32) {
    save_model(p, path, f32 ? Dtype::kF32 : Dtype::kF64);
  }, py::arg("params"), py::arg("path"), py::arg("f32") = false);
  m.def("load_model", &load_model);

  // accel-sim
  py::class_<FixedPointFormat>(m, "FixedPointFormat")
      .def(py::init([](int m_bits, int n_bits) {
        FixedPointFormat f{m_bits, n_bits};
        f.validate();
        return f;
      }), py::arg("int_bits") = 8, py::arg("frac_bits") = 8)
      .def_readonly("int_bits", &FixedPointFormat::int_bits)
      .def_readonly("frac_bits", &FixedPointFormat::frac_bits)
      .def("__repr__", &FixedPointFormat::to_string);
  m.def("quantize", &quantize, py::arg("x"), py::arg("fmt") = FixedPointFormat{});
  m.def("dequantize", &dequantize, py::arg("raw"), py::arg("fmt") = FixedPointFormat{});

  py::class_<AcceleratorConfig>(m, "AcceleratorConfig")
      .def(py::init<>())
      .def_readwrite("num_pes", &AcceleratorConfig::num_pes)
      .def_readwrite("lanes_per_pe", &AcceleratorConfig::lanes_per_pe)
      .def_readwrite("chunk_len", &AcceleratorConfig::chunk_len)
      .def_readwrite("clock_mhz", &AcceleratorConfig::clock_mhz)
      .def_readwrite("pipeline_fill", &AcceleratorConfig::pipeline_fill);

  py::class_<BatchReport>(m, "BatchReport")
      .def_readonly("mult_ops", &BatchReport::mult_ops)
      .def_readonly("add_ops", &BatchReport::add_ops)
      .def_readonly("latency_cycles", &BatchReport::latency_cycles)
      .def_readonly("latency_ns", &BatchReport::latency_ns)
      .def_readonly("gops", &BatchReport::gops);

  py::class_<AcceleratorCore>(m, "AcceleratorCore")
      .def(py::init<AcceleratorConfig>(), py::arg("config") = AcceleratorConfig{})
      .def("load_weights", [](AcceleratorCore& core, const std::vector<std::vector<std::int16_t>>& w) {
        std::vector<std::int16_t> flat;
        const std::size_t cols = w.empty() ? 0 : w.front().size();
        for (const auto& row : w) {
          if (row.size() != cols) throw UsageError("load_weights: ragged weight rows");
          flat.insert(flat.end(), row.begin(), row.end());
        }
        core.load_weights(flat, w.size(), cols);
      })
      .def("run_batch", [](AcceleratorCore& core, const std::vector<std::int16_t>& x) {
        auto r = core.run_batch(x);
        return py::make_tuple(r.y, r.report);
      })
      .def("stream_roundtrip", [](AcceleratorCore& core, const std::vector<std::int16_t>& x) {
        return stream_roundtrip(core, x).y;
      })
      .def("matvec_fixed", [](AcceleratorCore& core, const Matrix& w, const Vector& x,
                              const FixedPointFormat& fmt) {
        auto r = matvec_fixed(core, w, x, fmt);
        return py::make_tuple(r.y, r.report);
      }, py::arg("w"), py::arg("x"), py::arg("fmt") = FixedPointFormat{});
  m.def("matvec_error_bound", &matvec_error_bound);

  // cosim
  m.def("golden_test", []() {
    const auto r = golden_test();
    return py::make_tuple(r.pass, r.hardware, r.software);
  });
  m.def("throughput_report", [](const AcceleratorConfig& cfg) {
    const auto t = throughput_report(cfg);
    py::list rows;
    for (const auto& r : t.rows) {
      rows.append(py::dict(py::arg("label") = r.label, py::arg("precision") = r.precision,
                           py::arg("throughput") = r.throughput, py::arg("unit") = r.unit,
                           py::arg("speedup") = r.speedup, py::arg("modeled") = r.modeled));
    }
    return py::make_tuple(t.modeled, rows);
  }, py::arg("config") = AcceleratorConfig{});
}
