// SPDX-License-Identifier: Apache-2.0

#include "coral8/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "coral8/container.hpp"
#include "coral8/dataio.hpp"
#include "coral8/generator.hpp"
#include "coral8/metrics.hpp"
#include "coral8/trainer.hpp"

namespace coral8 {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSynopsis =
    "usage: coral8 <command> [options]\n"
    "  synth    --out DIR --samples N --images K --patterns P --seed S\n"
    "  train    --data DIR --out DIR --seed S [--epochs 30] [--lr 0.001]\n"
    "           [--lambda1 1 --lambda2 0.5 --lambda3 0.5 --delta 0.001]\n"
    "           [--no-notes] [--no-sal] [--no-tdvar] [--no-xu] [--no-reg] [--vanilla]\n"
    "  generate --checkpoint FILE --data DIR --split test --out DIR [--dump-attention]\n"
    "  evaluate --generated DIR --data DIR --split test --out FILE\n"
    "every option also accepts --config FILE with `key = value` lines\n";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw UsageError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

// Config entries go in front of the command-line arguments, which then win
// because every option keeps its last value.
std::vector<std::string> expand_config(CLI::App& sub, std::vector<std::string> args) {
  std::vector<std::string> out;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (path.empty()) return out;

  std::vector<std::string> prefix;
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    entries = read_config_file(path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& [key, value] : entries) {
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "help") throw UsageError("unknown config key '" + key + "' in " + path);
    if (opt->get_expected_min() == 0) {
      if (parse_bool(key, value)) prefix.push_back("--" + key);
    } else {
      prefix.push_back("--" + key);
      prefix.push_back(value);
    }
  }
  prefix.insert(prefix.end(), out.begin(), out.end());
  return prefix;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SynthSpec spec;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--out", a.out, "output dataset directory")->required();
  app.add_option("--samples", a.spec.train, "training samples")->required();
  app.add_option("--images", a.spec.images, "images per panel (K)")->required();
  app.add_option("--patterns", a.spec.patterns, "distinct planted patterns (P)")->required();
  app.add_option("--seed", a.spec.seed, "random seed")->required();
  app.add_option("--valid", a.spec.valid, "validation samples")->capture_default_str();
  app.add_option("--test", a.spec.test, "test samples")->capture_default_str();
  app.add_option("--positions", a.spec.positions, "grid positions per image")->capture_default_str();
  app.add_option("--channels", a.spec.channels, "channels per position")->capture_default_str();
  app.add_option("--contexts", a.spec.contexts, "distinct notes context tokens (1..4)")->capture_default_str();
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  synth_generate(a.spec, a.out);
  out << "wrote " << a.spec.train << " train, " << a.spec.valid << " valid, " << a.spec.test
      << " test samples to " << a.out << "\n";
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, out;
  TrainConfig cfg;
  int min_count = 2;
  bool per_report = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  TrainConfig& c = a.cfg;
  c.model.embed = c.model.hidden = c.model.attn = 512;
  app.add_option("--data", a.data, "dataset directory")->required();
  app.add_option("--out", a.out, "output directory")->required();
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--epochs", c.epochs, "training epochs")->capture_default_str();
  app.add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--lambda1", c.reg.lambda1, "weight of the doubly stochastic term")->capture_default_str();
  app.add_option("--lambda2", c.reg.lambda2, "weight of the salient-alpha term")->capture_default_str();
  app.add_option("--lambda3", c.reg.lambda3, "weight of the time-distributed variance term")->capture_default_str();
  app.add_option("--delta", c.reg.delta, "floor inside the reciprocal terms")->capture_default_str();
  app.add_option("--clip-norm", c.clip_norm, "global gradient norm threshold")->capture_default_str();
  app.add_option("--embed", c.model.embed, "word embedding width E")->capture_default_str();
  app.add_option("--hidden", c.model.hidden, "hidden width H (even)")->capture_default_str();
  app.add_option("--attn", c.model.attn, "attention scorer width")->capture_default_str();
  app.add_option("--min-count", a.min_count, "words seen fewer times become UNK")->capture_default_str();
  app.add_flag("--no-notes", c.ablations.no_notes, "F_0 = F_init, notes unused");
  app.add_flag("--no-sal", c.ablations.no_sal, "drop the salient-alpha term");
  app.add_flag("--no-tdvar", c.ablations.no_tdvar, "drop the time-distributed variance term");
  app.add_flag("--no-xu", c.ablations.no_xu, "drop the doubly stochastic term");
  app.add_flag("--no-reg", c.ablations.no_reg, "drop the whole attention regularizer");
  app.add_flag("--vanilla", c.ablations.vanilla, "LSTM conditioned on the word and F_init only");
  app.add_flag("--tanh-head", c.model.tanh_head, "squash head scores with tanh before the softmax");
  app.add_flag("--reg-kappa", c.reg_kappa, "also regularize the spatial attention weights");
  app.add_flag("--per-report-update", a.per_report, "one optimizer update per report instead of per sentence");
}

ModelConfig infer_dims(const std::vector<Sample>& train, ModelConfig m) {
  const Tensor first = read_tensor_file(train.front().features);
  const Shape& d = first.dims();
  if (d.size() == 4) {
    m.images = d[0];
    m.positions = d[1] * d[2];
    m.channels = d[3];
  } else if (d.size() == 3) {
    m.images = d[0];
    m.positions = d[1];
    m.channels = d[2];
  } else {
    throw ShapeError("feature file " + train.front().features.string() + " has unsupported shape " + to_string(d));
  }
  return m;
}

int run_train(TrainArgs& a, std::ostream& out) {
  const Splits splits = load_manifest(a.data);
  if (splits.train.empty()) throw std::runtime_error("training split is empty");
  const Vocabulary vocab = Vocabulary::build(vocabulary_corpus(splits.train), a.min_count);

  TrainConfig cfg = a.cfg;
  cfg.update_per_window = !a.per_report;
  cfg.model = infer_dims(splits.train, cfg.model);
  cfg.model.vocab = vocab.size();
  const auto train = encode_samples(splits.train, vocab, cfg.effective_model());

  fs::create_directories(a.out);
  vocab.save(fs::path(a.out) / "vocab.txt");
  std::ofstream log(fs::path(a.out) / "train.log", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (fs::path(a.out) / "train.log").string());
  const fs::path ckpt_path = fs::path(a.out) / "checkpoint.cr8c";

  const FitResult result = fit(train, cfg, [&](const EpochLog& e, const Checkpoint& ck) {
    log << e.line() << '\n' << std::flush;
    out << e.line() << '\n' << std::flush;
    save_checkpoint(ckpt_path, ck);
  });
  save_checkpoint(ckpt_path, result.checkpoint);
  out << "checkpoint: " << ckpt_path.string() << "\n";
  return kExitOk;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string checkpoint, data, split = "test", out, vocab;
  bool dump_attention = false;
};

void add_generate(CLI::App& app, GenerateArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "CR8C checkpoint")->required();
  app.add_option("--data", a.data, "dataset directory")->required();
  app.add_option("--split", a.split, "train, valid or test")->capture_default_str();
  app.add_option("--out", a.out, "directory for generated reports")->required();
  app.add_option("--vocab", a.vocab, "vocabulary file (default: next to the checkpoint)");
  app.add_flag("--dump-attention", a.dump_attention, "write kappa/alpha traces as CR8T tensors");
}

int run_generate(const GenerateArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const fs::path vocab_path = a.vocab.empty() ? fs::path(a.checkpoint).parent_path() / "vocab.txt" : fs::path(a.vocab);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const ModelConfig mc = ck.config.effective_model();
  if (vocab.size() != mc.vocab)
    throw std::runtime_error("vocabulary has " + std::to_string(vocab.size()) + " tokens, checkpoint expects " +
                             std::to_string(mc.vocab));

  const Splits splits = load_manifest(a.data);
  fs::create_directories(a.out);
  std::size_t n = 0;
  for (const Sample& s : splits.get(a.split)) {
    const PanelFeatures panel = encode_images(read_tensor_file(s.features), ck.params, mc);
    const GeneratedReport rep = generate_report(panel, encode_sentence(tokenize(s.notes), vocab), ck.params, mc);
    std::ofstream txt(fs::path(a.out) / (s.id + ".txt"), std::ios::trunc);
    if (!txt) throw IoError("cannot write report for " + s.id);
    for (const auto& sentence : rep.sentences) {
      if (sentence.is_pad()) continue;
      const auto words = decode(sentence, vocab);
      for (std::size_t i = 0; i < words.size(); ++i) txt << (i ? " " : "") << words[i];
      txt << '\n';
    }
    if (a.dump_attention) {
      for (std::size_t m = 0; m < kReportSentences; ++m) {
        if (rep.traces[m].alpha.empty()) continue;
        const std::string stem = s.id + ".s" + std::to_string(m);
        write_tensor_file(fs::path(a.out) / (stem + ".kappa.cr8t"), rep.traces[m].kappa);
        write_tensor_file(fs::path(a.out) / (stem + ".alpha.cr8t"), rep.traces[m].alpha);
      }
    }
    ++n;
  }
  out << "generated " << n << " reports into " << a.out << "\n";
  return kExitOk;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string generated, data, split = "test", out, vocab, label = "CORAL8";
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  app.add_option("--generated", a.generated, "directory of generated <id>.txt reports")->required();
  app.add_option("--data", a.data, "dataset directory")->required();
  app.add_option("--split", a.split, "train, valid or test")->capture_default_str();
  app.add_option("--out", a.out, "JSON metric report")->required();
  app.add_option("--vocab", a.vocab, "map reference words outside this vocabulary to UNK");
  app.add_option("--label", a.label, "row label in the printed table")->capture_default_str();
}

Tokens read_generated(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("missing generated report " + file.string());
  Tokens out;
  for (std::string line; std::getline(in, line);)
    for (auto& t : tokenize(line)) out.push_back(std::move(t));
  return out;
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Splits splits = load_manifest(a.data);
  const auto& samples = splits.get(a.split);
  std::optional<Vocabulary> vocab;
  if (!a.vocab.empty()) vocab = Vocabulary::load(a.vocab);
  std::vector<Tokens> generated, references;
  for (const Sample& s : samples) {
    generated.push_back(read_generated(fs::path(a.generated) / (s.id + ".txt")));
    references.push_back(reference_tokens(s, vocab ? &*vocab : nullptr));
  }
  const MetricReport report = evaluate_corpus(generated, references);
  std::ofstream json(a.out, std::ios::trunc);
  if (!json) throw IoError("cannot write " + a.out);
  json << report.to_json() << '\n';
  out << MetricReport::table_header() << '\n' << report.table_row(a.label) << '\n';
  return kExitOk;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected `key = value`");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ordered-set-to-sequence report generator", "coral8"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SynthArgs synth;
  TrainArgs train;
  GenerateArgs generate;
  EvaluateArgs evaluate;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  CLI::App* generate_cmd = app.add_subcommand("generate", "generate reports from a checkpoint");
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score generated reports");
  add_synth(*synth_cmd, synth);
  add_train(*train_cmd, train);
  add_generate(*generate_cmd, generate);
  add_evaluate(*evaluate_cmd, evaluate);

  try {
    std::vector<std::string> argv = args;
    if (!argv.empty()) {
      CLI::App* sub = nullptr;
      for (CLI::App* s : {synth_cmd, train_cmd, generate_cmd, evaluate_cmd})
        if (s->get_name() == argv[0]) sub = s;
      if (sub != nullptr) {
        auto rest = expand_config(*sub, {argv.begin() + 1, argv.end()});
        argv.resize(1);
        argv.insert(argv.end(), rest.begin(), rest.end());
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << kSynopsis;
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << kSynopsis;
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, out);
    if (train_cmd->parsed()) return run_train(train, out);
    if (generate_cmd->parsed()) return run_generate(generate, out);
    if (evaluate_cmd->parsed()) return run_evaluate(evaluate, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << kSynopsis;
  return kExitUsage;
}

}  // namespace coral8
