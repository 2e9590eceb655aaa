// SPDX-License-Identifier: Apache-2.0

#include "coral8/textpipe.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "coral8/container.hpp"

namespace coral8 {

namespace {

constexpr std::string_view kStrip = ".,;:()\"'";

const std::array<std::string, kReservedTokens> kReserved{"NULL", "UNK", "NEWLINE", "EOS"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream words{std::string(text)};
  std::string w;
  while (words >> w) {
    for (char& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const auto first = w.find_first_not_of(kStrip);
    if (first == std::string::npos) continue;
    const auto last = w.find_last_not_of(kStrip);
    out.push_back(w.substr(first, last - first + 1));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto dot = text.find('.', start);
    if (dot == std::string_view::npos) dot = text.size();
    std::string piece(text.substr(start, dot - start));
    if (!tokenize(piece).empty()) out.push_back(piece);
    start = dot + 1;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const auto& t : kReserved) push(t);
}

void Vocabulary::push(const std::string& token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, int> counts;
  std::vector<std::string> order;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence)
      if (counts[tok]++ == 0) order.push_back(tok);
  Vocabulary v;
  for (const auto& tok : order)
    if (counts[tok] >= min_count && !v.contains(tok)) v.push(tok);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < kReservedTokens)
    throw std::runtime_error(path.string() + ": vocabulary shorter than the reserved tokens");
  for (std::size_t i = 0; i < kReservedTokens; ++i)
    if (lines[i] != kReserved[i])
      throw std::runtime_error(path.string() + ": line " + std::to_string(i + 1) + " must be " + kReserved[i]);
  Vocabulary v;
  for (std::size_t i = kReservedTokens; i < lines.size(); ++i) {
    if (lines[i].empty() || v.contains(lines[i]))
      throw std::runtime_error(path.string() + ": empty or duplicate token on line " + std::to_string(i + 1));
    v.push(lines[i]);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> TokenSequence::payload() const {
  if (effective_length < 2) return {};
  return {ids.begin() + 1, ids.begin() + static_cast<std::ptrdiff_t>(effective_length - 1)};
}

TokenSequence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  TokenSequence seq;
  const std::size_t n = std::min(tokens.size(), kSentenceLength - 2);
  seq.ids[0] = kNewlineId;
  for (std::size_t i = 0; i < n; ++i) seq.ids[i + 1] = vocab.id(tokens[i]);
  seq.ids[n + 1] = kEosId;
  seq.effective_length = n + 2;
  return seq;
}

TokenSequence pad_sentence() { return encode_sentence({}, Vocabulary{}); }

void validate(const TokenSequence& seq) {
  const std::size_t n = seq.effective_length;
  if (n < 2 || n > kSentenceLength) throw std::invalid_argument("effective length out of range");
  if (seq.ids[0] != kNewlineId) throw std::invalid_argument("sentence must start with NEWLINE");
  if (seq.ids[n - 1] != kEosId) throw std::invalid_argument("EOS must close the effective prefix");
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (seq.ids[i] == kEosId || seq.ids[i] == kNullId || seq.ids[i] == kNewlineId)
      throw std::invalid_argument("reserved token inside sentence payload");
  for (std::size_t i = n; i < kSentenceLength; ++i)
    if (seq.ids[i] != kNullId) throw std::invalid_argument("non-NULL id after EOS");
}

Report encode_report(const std::vector<TokenSequence>& sentences) {
  Report r;
  for (std::size_t m = 0; m < kReportSentences; ++m)
    r[m] = m < sentences.size() ? sentences[m] : pad_sentence();
  return r;
}

std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : seq.payload()) out.push_back(vocab.token(id));
  return out;
}

Var embed(const TokenSequence& seq, Var table) {
  if (seq.effective_length == 0) throw std::invalid_argument("embed: empty sequence");
  return gather_rows(table, seq.prefix());
}

}  // namespace coral8
