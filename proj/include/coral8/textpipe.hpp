// SPDX-License-Identifier: Apache-2.0
//
// Tokenization, vocabulary and fixed-length sentence/report encoding.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coral8/autodiff.hpp"

namespace coral8 {

inline constexpr int kNullId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kNewlineId = 2;
inline constexpr int kEosId = 3;
inline constexpr std::size_t kReservedTokens = 4;

inline constexpr std::size_t kSentenceLength = 40;  // NEWLINE + payload + EOS + NULL padding
inline constexpr std::size_t kReportSentences = 7;

/// Lowercases, splits on whitespace and strips surrounding . , ; : ( ) " '
std::vector<std::string> tokenize(std::string_view text);

/// Splits raw report text into sentences on '.'; empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  /// Tokens with count >= min_count get ids from 4 in first-occurrence order.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_count = 2);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // UNK when absent
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  void push(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

struct TokenSequence {
  std::array<int, kSentenceLength> ids{};
  std::size_t effective_length = 0;  // up to and including EOS

  std::span<const int> prefix() const { return {ids.data(), effective_length}; }
  /// Only NEWLINE and EOS: an empty (padding) sentence.
  bool is_pad() const { return effective_length == 2; }
  /// Content ids between NEWLINE and EOS.
  std::vector<int> payload() const;
};

using Report = std::array<TokenSequence, kReportSentences>;

/// NEWLINE + ids + EOS, NULL padded. More than 38 tokens are truncated to 38.
TokenSequence encode_sentence(const std::vector<std::string>& tokens, const Vocabulary& vocab);
TokenSequence pad_sentence();
/// Checks the structural invariants; throws std::invalid_argument with the reason.
void validate(const TokenSequence& seq);

/// Pads with empty sentences or truncates to exactly seven.
Report encode_report(const std::vector<TokenSequence>& sentences);

/// Content words of a sentence (NEWLINE/EOS/NULL dropped).
std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab);

/// Rows of the embedding table for the effective prefix: (effective_length x E).
Var embed(const TokenSequence& seq, Var table);

}  // namespace coral8
