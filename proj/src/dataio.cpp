// SPDX-License-Identifier: Apache-2.0

#include "coral8/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "coral8/container.hpp"
#include "coral8/rng.hpp"

namespace coral8 {

namespace fs = std::filesystem;

const std::vector<Sample>& Splits::get(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, valid or test)");
}

std::vector<Sample> load_split(const fs::path& file, const fs::path& base) {
  std::ifstream in(file);
  if (!in) throw IoError("missing manifest " + file.string());
  std::vector<Sample> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.filename().string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.id = j.at("id").get<std::string>();
      s.features = base / j.at("features").get<std::string>();
      s.notes = j.at("notes").get<std::string>();
      s.report = j.at("report").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + ": malformed manifest line: " + e.what());
    }
  }
  return out;
}

Splits load_manifest(const fs::path& dir) {
  return {load_split(dir / "train.jsonl", dir), load_split(dir / "valid.jsonl", dir),
          load_split(dir / "test.jsonl", dir)};
}

std::vector<Tokens> vocabulary_corpus(const std::vector<Sample>& samples) {
  std::vector<Tokens> corpus;
  for (const auto& s : samples) {
    corpus.push_back(tokenize(s.notes));
    for (const auto& sentence : s.report) corpus.push_back(tokenize(sentence));
  }
  return corpus;
}

EncodedSample encode_sample(const Sample& s, const Vocabulary& vocab, const ModelConfig& cfg) {
  EncodedSample e;
  e.id = s.id;
  e.panel = flatten_panel(read_tensor_file(s.features), cfg);
  e.notes = encode_sentence(tokenize(s.notes), vocab);
  std::vector<TokenSequence> sentences;
  for (const auto& sentence : s.report) sentences.push_back(encode_sentence(tokenize(sentence), vocab));
  e.report = encode_report(sentences);
  return e;
}

std::vector<EncodedSample> encode_samples(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                          const ModelConfig& cfg) {
  std::vector<EncodedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_sample(s, vocab, cfg));
  return out;
}

Tokens flatten(const Report& report, const Vocabulary& vocab) {
  Tokens out;
  for (const auto& s : report) {
    if (s.is_pad()) continue;
    for (const auto& w : decode(s, vocab))
      for (auto& t : tokenize(w)) out.push_back(std::move(t));
  }
  return out;
}

Tokens reference_tokens(const Sample& s, const Vocabulary* vocab) {
  Tokens out;
  const std::size_t n = std::min(s.report.size(), kReportSentences);
  for (std::size_t m = 0; m < n; ++m) {
    Tokens words = tokenize(s.report[m]);
    if (words.size() > kSentenceLength - 2) words.resize(kSentenceLength - 2);
    for (const auto& w : words)
      for (auto& t : tokenize(vocab ? vocab->token(vocab->id(w)) : w)) out.push_back(std::move(t));
  }
  return out;
}

// ---- synthetic task --------------------------------------------------------

const std::vector<std::string>& synth_context_tokens() {
  static const std::vector<std::string> tokens{"diabetic", "hypertensive", "vasculitic", "nephritic"};
  return tokens;
}

const std::vector<std::string>& synth_impressions() {
  static const std::vector<std::string> words{"glomerulopathy", "nephrosclerosis", "vasculitis", "nephritis"};
  return words;
}

void validate(const SynthSpec& spec) {
  if (spec.images < 2) throw std::invalid_argument("synth: need at least 2 images");
  if (spec.patterns < 2) throw std::invalid_argument("synth: need at least 2 patterns");
  if (spec.channels < spec.patterns) throw std::invalid_argument("synth: channels must be >= patterns");
  if (spec.positions < 4) throw std::invalid_argument("synth: need at least 4 grid positions");
  if (spec.contexts < 1 || spec.contexts > synth_context_tokens().size())
    throw std::invalid_argument("synth: contexts must be in 1..4");
  if (spec.train == 0) throw std::invalid_argument("synth: need at least one training sample");
}

namespace {

struct SynthSample {
  nlohmann::json manifest_line;
  Tensor grid;
};

SynthSample make_sample(const SynthSpec& spec, const std::string& id, Rng& rng) {
  const std::size_t K = spec.images, a = spec.positions, d = spec.channels;
  const std::size_t block = d / spec.patterns;
  const std::size_t hot = std::max<std::size_t>(1, a / 4);

  Tensor grid({K, a, d});
  std::vector<std::size_t> planted(K);
  for (std::size_t k = 0; k < K; ++k) {
    planted[k] = rng.below(spec.patterns);
    for (std::size_t i = 0; i < a * d; ++i) grid[k * a * d + i] = rng.uniform(0.0, 0.1);
    std::vector<std::size_t> where(a);
    std::iota(where.begin(), where.end(), std::size_t{0});
    rng.shuffle(where);
    for (std::size_t h = 0; h < hot; ++h)
      for (std::size_t c = planted[k] * block; c < (planted[k] + 1) * block; ++c)
        grid[(k * a + where[h]) * d + c] = 1.0 + rng.uniform(0.0, 0.1);
  }
  const std::size_t ctx = rng.below(spec.contexts);

  std::vector<std::string> report;
  for (std::size_t k = 0; k < K; ++k)
    report.push_back("image" + std::to_string(k + 1) + " shows pattern" + std::to_string(planted[k]));
  const std::size_t grade = *std::max_element(planted.begin(), planted.end());
  report.push_back("impression " + synth_impressions()[ctx] + " grade" + std::to_string(grade));

  nlohmann::json line;
  line["id"] = id;
  line["features"] = "features/" + id + ".cr8t";
  line["notes"] = synth_context_tokens()[ctx];
  line["report"] = report;
  return {line, std::move(grid)};
}

}  // namespace

void synth_generate(const SynthSpec& spec, const fs::path& out_dir) {
  validate(spec);
  fs::create_directories(out_dir / "features");
  Rng root(spec.seed);
  const std::pair<const char*, std::size_t> splits[] = {{"train", spec.train}, {"valid", spec.valid}, {"test", spec.test}};
  std::uint64_t stream = 0;
  for (const auto& [name, count] : splits) {
    Rng rng = root.split(++stream);
    std::ofstream manifest(out_dir / (std::string(name) + ".jsonl"), std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest in " + out_dir.string());
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s-%04zu", name, i);
      SynthSample s = make_sample(spec, id, rng);
      write_tensor_file(out_dir / "features" / (std::string(id) + ".cr8t"), s.grid, DType::f32);
      manifest << s.manifest_line.dump() << '\n';
    }
    if (!manifest) throw IoError("write failed for manifest in " + out_dir.string());
  }
}

}  // namespace coral8
