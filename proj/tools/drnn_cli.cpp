// Command-line front end: corpus prep, training, evaluation, generation,
// accelerator bench and co-simulation checks.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "drnn/accel.hpp"
#include "drnn/corpus.hpp"
#include "drnn/cosim.hpp"
#include "drnn/error.hpp"
#include "drnn/model_io.hpp"
#include "drnn/training.hpp"

namespace fs = std::filesystem;
using namespace drnn;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Pairs from either a prep token file or raw text plus a vocabulary.
std::vector<TrainingPair> load_pairs(const std::string& tokens_path, const std::string& text_path,
                                     const Vocabulary& vocab) {
  std::vector<TrainingPair> pairs;
  if (!tokens_path.empty()) {
    for (const auto& s : load_token_file(tokens_path)) pairs.push_back(make_training_pair(s, vocab));
  } else {
    pairs = make_training_pairs(tokenize(read_text_file(text_path)), vocab);
  }
  return pairs;
}

struct AccelFlags {
  std::size_t pes = 5;
  std::size_t lanes = 10;
  std::size_t chunk = 50;
  double clock_mhz = 200.0;
  std::size_t fill = 0;
  std::string fmt = "8.8";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--pes", pes, "Processing elements")->capture_default_str();
    cmd->add_option("--lanes", lanes, "MAC lanes per PE")->capture_default_str();
    cmd->add_option("--chunk", chunk, "Dot-product length per batch")->capture_default_str();
    cmd->add_option("--clock-mhz", clock_mhz, "Core clock in MHz")->capture_default_str();
    cmd->add_option("--pipeline-fill", fill, "Extra cycles per batch")->capture_default_str();
    cmd->add_option("--fmt", fmt, "Fixed-point format m.n")->capture_default_str();
  }
  AcceleratorConfig config() const {
    AcceleratorConfig c{pes, lanes, chunk, clock_mhz, fill};
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep LSTM language model and MAC-array accelerator co-simulation"};
  app.require_subcommand(1);

  // prep
  std::string prep_input;
  std::string prep_vocab_out = "vocab.txt";
  std::string prep_tokens_out = "tokens.txt";
  std::size_t vocab_size = kDefaultVocabBudget;
  auto* prep = app.add_subcommand("prep", "Tokenize text, build the vocabulary and encode the corpus");
  prep->add_option("input", prep_input, "UTF-8 text file")->required();
  prep->add_option("--vocab-size", vocab_size, "Word budget (specials excluded)")->capture_default_str();
  prep->add_option("--vocab-out", prep_vocab_out)->capture_default_str();
  prep->add_option("--tokens-out", prep_tokens_out)->capture_default_str();

  // init / train shared model flags
  std::size_t hidden = kDefaultHidden;
  std::size_t layers = kNumLayers;
  std::uint64_t seed = 0;
  std::string vocab_path;
  std::string tokens_path;
  std::string text_path;
  std::string model_out = "model.drnn";
  bool store_f32 = false;

  auto* init = app.add_subcommand("init", "Write a seeded, untrained model");
  init->add_option("--vocab", vocab_path, "Vocabulary file from prep")->required();
  init->add_option("--hidden", hidden)->capture_default_str();
  init->add_option("--seed", seed)->capture_default_str();
  init->add_option("-o,--out", model_out)->capture_default_str();
  init->add_flag("--f32", store_f32, "Store arrays as 32-bit floats");

  TrainConfig train_cfg;
  std::string log_out = "train_log.csv";
  std::string step_log_out;
  std::string init_model;
  auto* train_cmd = app.add_subcommand("train", "Train with BPTT and per-sentence SGD");
  train_cmd->add_option("--vocab", vocab_path, "Vocabulary file from prep")->required();
  auto* tok_opt = train_cmd->add_option("--tokens", tokens_path, "Encoded corpus from prep");
  train_cmd->add_option("--text", text_path, "Raw text corpus")->excludes(tok_opt);
  train_cmd->add_option("--hidden", hidden)->capture_default_str();
  train_cmd->add_option("--layers", layers, "Stacked LSTM layers (fixed at 3)")->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--eval-interval", train_cfg.eval_interval)->capture_default_str();
  train_cmd->add_option("--seed", seed)->capture_default_str();
  train_cmd->add_option("--init-model", init_model, "Continue from this model instead of a fresh init");
  train_cmd->add_option("-o,--out", model_out)->capture_default_str();
  train_cmd->add_option("--log", log_out, "Per-epoch CSV")->capture_default_str();
  train_cmd->add_option("--step-log", step_log_out, "Per-interval perplexity CSV");
  train_cmd->add_flag("--f32", store_f32, "Store arrays as 32-bit floats");

  std::string model_path;
  std::string eval_csv;
  auto* eval = app.add_subcommand("eval", "Report perplexity of a model on a corpus");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--vocab", vocab_path)->required();
  auto* eval_tok = eval->add_option("--tokens", tokens_path);
  eval->add_option("--text", text_path)->excludes(eval_tok);
  eval->add_option("--csv", eval_csv, "Also write tokens,total_loss,mean_loss,perplexity");

  GenerateOptions gen_opts;
  auto* gen = app.add_subcommand("generate", "Sample a sentence from a model");
  gen->add_option("--model", model_path)->required();
  gen->add_option("--vocab", vocab_path)->required();
  gen->add_option("--max-len", gen_opts.max_len)->capture_default_str();
  gen->add_option("--seed", gen_opts.seed)->capture_default_str();
  gen->add_flag("--greedy", gen_opts.greedy, "Take the arg-max word at every step");

  AccelFlags accel;
  std::size_t bench_batches = 1;
  std::string trace_out;
  std::string table_csv;
  auto* bench = app.add_subcommand("accel-bench", "Run the MAC-array model and print throughput");
  accel.add_to(bench);
  bench->add_option("--batches", bench_batches)->capture_default_str();
  bench->add_option("--trace", trace_out, "Batch trace CSV");
  bench->add_option("--csv", table_csv, "Comparison table CSV");

  std::size_t offload_trials = 100;
  std::string golden_out;
  auto* verify = app.add_subcommand("cosim-verify", "Golden-vector test and gate offload check");
  accel.add_to(verify);
  verify->add_option("--seed", seed)->capture_default_str();
  verify->add_option("--trials", offload_trials, "Random gate offloads to check")->capture_default_str();
  verify->add_option("--golden-out", golden_out, "Write hardware output, one integer per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*prep) {
      const auto sentences = tokenize(read_text_file(prep_input));
      const auto vocab = build_vocab(sentences, vocab_size);
      vocab.save(prep_vocab_out);
      std::vector<TokenSequence> encoded;
      encoded.reserve(sentences.size());
      for (const auto& s : sentences) encoded.push_back(vocab.encode(s));
      save_token_file(encoded, prep_tokens_out);
      std::cout << "sentences " << sentences.size() << "\nvocab " << vocab.size() << '\n';
    } else if (*init) {
      const auto vocab = Vocabulary::load(vocab_path);
      save_model(init_params(vocab.size(), hidden, seed), model_out, store_f32 ? Dtype::kF32 : Dtype::kF64);
    } else if (*train_cmd) {
      if (layers != kNumLayers) throw UsageError("only 3 stacked layers are supported");
      if (tokens_path.empty() && text_path.empty()) throw UsageError("train needs --tokens or --text");
      train_cfg.rng_seed = seed;
      train_cfg.validate();
      const auto vocab = Vocabulary::load(vocab_path);
      const auto pairs = load_pairs(tokens_path, text_path, vocab);
      if (pairs.empty()) throw DataError("training corpus is empty");
      auto params = init_model.empty() ? init_params(vocab.size(), hidden, seed) : load_model(init_model);
      if (params.vocab() != vocab.size()) throw DataError("model vocabulary size does not match vocab file");
      const auto log = train(params, pairs, train_cfg);
      save_model(params, model_out, store_f32 ? Dtype::kF32 : Dtype::kF64);
      auto out = open_out(log_out);
      TrainingLog::write_csv(out, log.epochs);
      if (!step_log_out.empty()) {
        auto steps = open_out(step_log_out);
        TrainingLog::write_csv(steps, log.intervals);
      }
      TrainingLog::write_csv(std::cout, log.epochs);
    } else if (*eval) {
      if (tokens_path.empty() && text_path.empty()) throw UsageError("eval needs --tokens or --text");
      const auto vocab = Vocabulary::load(vocab_path);
      const auto params = load_model(model_path);
      if (params.vocab() != vocab.size()) throw DataError("model vocabulary size does not match vocab file");
      const auto pairs = load_pairs(tokens_path, text_path, vocab);
      if (pairs.empty()) throw DataError("evaluation set is empty");
      const auto r = evaluate(params, pairs);
      std::cout.precision(17);
      std::cout << "tokens " << r.tokens << "\nmean_loss " << r.mean_loss() << "\nperplexity "
                << r.perplexity() << '\n';
      if (!eval_csv.empty()) {
        auto out = open_out(eval_csv);
        out.precision(17);
        out << "tokens,total_loss,mean_loss,perplexity\n"
            << r.tokens << ',' << r.total_loss << ',' << r.mean_loss() << ',' << r.perplexity() << '\n';
      }
    } else if (*gen) {
      const auto vocab = Vocabulary::load(vocab_path);
      const auto params = load_model(model_path);
      if (params.vocab() != vocab.size()) throw DataError("model vocabulary size does not match vocab file");
      const auto ids = generate(params, gen_opts);
      std::string words;
      std::string id_list;
      for (TokenId id : ids) {
        if (!id_list.empty()) id_list += ' ';
        id_list += std::to_string(id);
        if (id == vocab.end_id()) continue;
        if (!words.empty()) words += ' ';
        words += vocab.decode(id);
      }
      std::cout << words << "\nids " << id_list << '\n';
    } else if (*bench) {
      const auto cfg = accel.config();
      const auto fmt = FixedPointFormat::parse(accel.fmt);
      if (bench_batches < 1) throw UsageError("--batches must be at least 1");
      AcceleratorCore core(cfg);
      std::vector<std::int16_t> w(cfg.rows() * cfg.chunk_len);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<std::int16_t>(i % 7);
      core.load_weights(w, cfg.rows(), cfg.chunk_len);
      std::vector<std::int16_t> x(cfg.chunk_len);
      for (std::size_t b = 0; b < bench_batches; ++b) {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<std::int16_t>(b + k);
        stream_roundtrip(core, x);
      }
      write_batch_trace(std::cout, core.trace());
      if (!trace_out.empty()) {
        auto out = open_out(trace_out);
        write_batch_trace(out, core.trace());
      }
      const auto table = throughput_report(cfg, fmt);
      std::cout << '\n';
      write_throughput_text(std::cout, table);
      if (!table_csv.empty()) {
        auto out = open_out(table_csv);
        write_throughput_csv(out, table);
      }
    } else if (*verify) {
      const auto cfg = accel.config();
      const auto fmt = FixedPointFormat::parse(accel.fmt);
      GoldenOptions opts;
      opts.config = cfg;
      const auto golden = golden_test(opts);
      std::cout << "sum_hardware=[";
      for (std::size_t i = 0; i < golden.hardware.size(); ++i) std::cout << (i ? "," : "") << golden.hardware[i];
      std::cout << "]\nsum_software=[";
      for (std::size_t i = 0; i < golden.software.size(); ++i) std::cout << (i ? "," : "") << golden.software[i];
      std::cout << "]\ngolden " << (golden.pass ? "PASS" : "FAIL") << '\n';
      for (const auto& m : golden.mismatches) {
        std::cout << "  mismatch at " << m.index << ": expected " << m.expected << ", got " << m.got << '\n';
      }
      if (!golden_out.empty()) {
        auto out = open_out(golden_out);
        for (auto v : golden.hardware) out << v << '\n';
      }

      bool offload_ok = true;
      if (cfg.rows() == cfg.chunk_len) {
        const std::size_t h = cfg.chunk_len;
        const std::size_t vocab = 200;
        double worst = 0.0;
        double worst_ratio = 0.0;
        AcceleratorCore core(cfg);
        std::mt19937_64 rng(seed);
        const auto uniform = [&rng]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
        for (std::size_t trial = 0; trial < offload_trials; ++trial) {
          // Weights, biases and state uniform in [-1, 1].
          auto layer = LstmLayerParams::zeros(h, vocab);
          for (std::size_t g = 0; g < kNumGates; ++g) {
            layer.recurrent[g] = Matrix::NullaryExpr(h, h, [&] { return uniform(); });
            layer.input[g] = Matrix::NullaryExpr(h, vocab, [&] { return uniform(); });
            layer.bias[g] = Vector::NullaryExpr(h, [&] { return uniform(); });
          }
          const Vector h_prev = Vector::NullaryExpr(h, [&] { return uniform(); });
          const auto gate = static_cast<Gate>(trial % kNumGates);
          const auto r = offload_gate_preactivation(core, layer, gate, h_prev,
                                                    static_cast<TokenId>(trial % vocab), fmt);
          worst = std::max(worst, r.max_abs_err);
          worst_ratio = std::max(worst_ratio, r.max_abs_err / r.error_bound);
          if (r.max_abs_err > r.error_bound) offload_ok = false;
        }
        std::cout << "offload trials " << offload_trials << " fmt " << fmt.to_string()
                  << " max_abs_err " << worst << " worst_err_over_bound " << worst_ratio << ' '
                  << (offload_ok ? "PASS" : "FAIL") << '\n';
      } else {
        std::cout << "offload skipped: rows != chunk_len\n";
      }
      if (!golden.pass || !offload_ok) return kData;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
