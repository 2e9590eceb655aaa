// SPDX-License-Identifier: Apache-2.0
//
// Corpus BLEU-1..4, ROUGE-L F1 and an exact-match METEOR.

#pragma once

#include <array>
#include <string>
#include <vector>

namespace coral8 {

using Tokens = std::vector<std::string>;

/// Corpus BLEU with pooled clipped n-gram counts, uniform weights over orders
/// 1..max_n and brevity penalty exp(1 - r/c) when c < r. Any order with no
/// match scores 0.
double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// LCS-based F1; 0 when there is no common subsequence.
double rouge_l(const Tokens& candidate, const Tokens& reference);

/// Exact-match METEOR: Fmean = 10PR / (R + 9P), penalty 0.5 (chunks / matches)^3.
double meteor_lite(const Tokens& candidate, const Tokens& reference);

struct MetricReport {
  std::array<double, 4> bleu{};  // BLEU-1..4
  double rouge_l = 0.0;          // mean over samples
  double meteor = 0.0;           // mean over samples

  std::string to_json() const;
  static std::string table_header();
  std::string table_row(const std::string& label) const;
};

/// Reports are given flattened to tokens, padding sentences already dropped.
MetricReport evaluate_corpus(const std::vector<Tokens>& generated, const std::vector<Tokens>& ground_truth);

}  // namespace coral8
