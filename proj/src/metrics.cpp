// SPDX-License-Identifier: Apache-2.0

#include "coral8/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace coral8 {

namespace {

std::map<Tokens, int> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, int> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

void require_aligned(std::size_t a, std::size_t b) {
  if (a == 0) throw std::invalid_argument("empty corpus");
  if (a != b)
    throw std::invalid_argument("misaligned corpora: " + std::to_string(a) + " candidates vs " +
                                std::to_string(b) + " references");
}

}  // namespace

double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int max_n) {
  require_aligned(candidates.size(), references.size());
  if (max_n < 1 || max_n > 4) throw std::invalid_argument("bleu: max_n must be in 1..4");

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long matched = 0, total = 0;
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const auto cand = ngram_counts(candidates[s], static_cast<std::size_t>(n));
      const auto ref = ngram_counts(references[s], static_cast<std::size_t>(n));
      for (const auto& [gram, count] : cand) {
        total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
      }
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }

  std::size_t c = 0, r = 0;
  for (const auto& t : candidates) c += t.size();
  for (const auto& t : references) r += t.size();
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(log_sum / max_n);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double meteor_lite(const Tokens& candidate, const Tokens& reference) {
  // The k-th occurrence of a word in the candidate aligns to its k-th
  // occurrence in the reference.
  std::map<std::string, std::vector<std::size_t>> positions;
  for (std::size_t j = 0; j < reference.size(); ++j) positions[reference[j]].push_back(j);
  std::map<std::string, std::size_t> used;
  std::vector<std::pair<std::size_t, std::size_t>> alignment;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    auto it = positions.find(candidate[i]);
    if (it == positions.end()) continue;
    std::size_t& k = used[candidate[i]];
    if (k < it->second.size()) alignment.emplace_back(i, it->second[k++]);
  }
  const std::size_t m = alignment.size();
  if (m == 0) return 0.0;

  std::size_t chunks = 1;
  for (std::size_t q = 1; q < m; ++q) {
    const bool adjacent = alignment[q].first == alignment[q - 1].first + 1 &&
                          alignment[q].second == alignment[q - 1].second + 1;
    if (!adjacent) ++chunks;
  }
  const double p = static_cast<double>(m) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(m) / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

MetricReport evaluate_corpus(const std::vector<Tokens>& generated, const std::vector<Tokens>& ground_truth) {
  require_aligned(generated.size(), ground_truth.size());
  MetricReport out;
  for (int n = 1; n <= 4; ++n) out.bleu[static_cast<std::size_t>(n - 1)] = bleu(generated, ground_truth, n);
  for (std::size_t s = 0; s < generated.size(); ++s) {
    out.rouge_l += rouge_l(generated[s], ground_truth[s]);
    out.meteor += meteor_lite(generated[s], ground_truth[s]);
  }
  out.rouge_l /= static_cast<double>(generated.size());
  out.meteor /= static_cast<double>(generated.size());
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu1"] = bleu[0];
  j["bleu2"] = bleu[1];
  j["bleu3"] = bleu[2];
  j["bleu4"] = bleu[3];
  j["rouge_l"] = rouge_l;
  j["meteor"] = meteor;
  return j.dump(2);
}

std::string MetricReport::table_header() {
  return "| Architecture | BLEU-1 | BLEU-2 | BLEU-3 | BLEU-4 | ROUGE | METEOR |";
}

std::string MetricReport::table_row(const std::string& label) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %.4f | %.4f | %.4f | %.4f |", label.c_str(), bleu[0],
                bleu[1], bleu[2], bleu[3], rouge_l, meteor);
  return buf;
}

}  // namespace coral8
