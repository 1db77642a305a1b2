#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "calibqa/metrics.h"

namespace calibqa {

namespace {

constexpr int kMaxOrder = 4;
constexpr double kZeroCountEpsilon = 1e-9;

std::vector<std::string> tokenize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens,
                                                     std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double sentence_bleu(std::string_view reference, std::string_view hypothesis) {
  const auto ref = tokenize(reference);
  const auto hyp = tokenize(hypothesis);
  if (hyp.empty() || ref.empty()) {
    spdlog::warn("sentence_bleu: empty {}; returning 0", hyp.empty() ? "hypothesis" : "reference");
    return 0.0;
  }

  double log_precision = 0.0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto hyp_counts = ngram_counts(hyp, static_cast<std::size_t>(n));
    const auto ref_counts = ngram_counts(ref, static_cast<std::size_t>(n));
    double clipped = 0.0;
    double total = 0.0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      if (auto it = ref_counts.find(gram); it != ref_counts.end()) {
        clipped += std::min(count, it->second);
      }
    }
    if (clipped == 0.0) clipped = kZeroCountEpsilon;
    log_precision += std::log(clipped / std::max(total, 1.0));
  }

  const double r = static_cast<double>(ref.size());
  const double h = static_cast<double>(hyp.size());
  const double brevity = h < r ? std::exp(1.0 - r / h) : 1.0;
  return brevity * std::exp(log_precision / kMaxOrder);
}

}  // namespace calibqa
