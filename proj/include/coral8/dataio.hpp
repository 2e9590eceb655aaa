// SPDX-License-Identifier: Apache-2.0
//
// Dataset layout: a directory holding train.jsonl, valid.jsonl and
// test.jsonl. Each line is {"id", "features", "notes", "report": [...]}
// where "features" is a CR8T file path relative to the directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coral8/metrics.hpp"
#include "coral8/textpipe.hpp"
#include "coral8/trainer.hpp"

namespace coral8 {

struct Sample {
  std::string id;
  std::filesystem::path features;  // resolved against the dataset directory
  std::string notes;
  std::vector<std::string> report;  // raw sentences
};

struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;

  const std::vector<Sample>& get(const std::string& name) const;
};

std::vector<Sample> load_split(const std::filesystem::path& file, const std::filesystem::path& base);
Splits load_manifest(const std::filesystem::path& dir);

/// Token lists (notes and every report sentence) for vocabulary building.
std::vector<Tokens> vocabulary_corpus(const std::vector<Sample>& samples);

EncodedSample encode_sample(const Sample& s, const Vocabulary& vocab, const ModelConfig& cfg);
std::vector<EncodedSample> encode_samples(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                          const ModelConfig& cfg);

/// Reference tokens as the model sees them: at most seven sentences of at
/// most 38 tokens, out-of-vocabulary words mapped to UNK when a vocabulary is
/// given, flattened and normalised through tokenize().
Tokens reference_tokens(const Sample& s, const Vocabulary* vocab);

/// Content tokens of a report with padding sentences dropped, normalised
/// through tokenize() so they compare equal to re-read generated text.
Tokens flatten(const Report& report, const Vocabulary& vocab);

/// Desk-scale ordered-set-to-sequence task.
///
/// Every image carries one planted pattern p (a block of channels switched on
/// at a few grid positions). The report has one sentence per image,
/// "image<k> shows pattern<p_k>", followed by an impression whose wording
/// depends on the notes' context token and on the largest planted pattern.
struct SynthSpec {
  std::size_t train = 32;
  std::size_t valid = 0;
  std::size_t test = 0;
  std::size_t images = 3;     // K
  std::size_t patterns = 4;   // P
  std::size_t positions = 16; // a_s
  std::size_t channels = 32;  // d_s
  std::size_t contexts = 3;   // distinct notes tokens, at most 4
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

/// Context tokens used in the notes and the impression word each implies.
const std::vector<std::string>& synth_context_tokens();
const std::vector<std::string>& synth_impressions();

/// Writes features/ and the three manifests into out_dir.
void synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace coral8
