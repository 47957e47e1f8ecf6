#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "caug/bilm.hpp"
#include "caug/corpus.hpp"

namespace caug {

// Temperature for annealing p^(1/tau). The tau->infinity and tau->0 limits
// are distinguished settings so they are exact rather than approximated by
// extreme floats.
struct Temperature {
  enum class Mode { finite, uniform, greedy };
  Mode mode = Mode::finite;
  double tau = 1.0;

  static Temperature finite(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("temperature: tau must be positive");
    return {Mode::finite, t};
  }
  static Temperature uniform() { return {Mode::uniform, 0.0}; }
  static Temperature greedy() { return {Mode::greedy, 0.0}; }
};

struct AugmentPolicy {
  Temperature temperature;
  double replace_prob = 0.0;
  bool use_label = false;
};

// p_tau(.) proportional to p(.)^(1/tau), in log space. tau=1 is the identity,
// uniform flattens over the support of dist (zeros stay zero), greedy is a
// one-hot on the argmax with lowest-id tie-break.
template <typename T>
std::vector<T> anneal(const std::vector<T>& dist, const Temperature& temp) {
  if (dist.empty()) throw std::invalid_argument("anneal: empty distribution");
  std::vector<T> out(dist.size(), T(0));
  if (temp.mode == Temperature::Mode::uniform) {
    std::size_t support = 0;
    for (T p : dist)
      if (p > T(0)) ++support;
    if (support == 0) throw std::invalid_argument("anneal: zero distribution");
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (dist[i] > T(0)) out[i] = T(1) / static_cast<T>(support);
    return out;
  }
  if (temp.mode == Temperature::Mode::greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i)
      if (dist[i] > dist[best]) best = i;
    out[best] = T(1);
    return out;
  }
  const double inv_tau = 1.0 / temp.tau;
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(dist.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > T(0)) {
      logs[i] = inv_tau * std::log(static_cast<double>(dist[i]));
      max_log = std::max(max_log, logs[i]);
    }
  }
  if (!std::isfinite(max_log)) throw std::invalid_argument("anneal: zero distribution");
  double z = 0.0;
  for (double l : logs)
    if (std::isfinite(l)) z += std::exp(l - max_log);
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (std::isfinite(logs[i])) out[i] = static_cast<T>(std::exp(logs[i] - max_log) / z);
  return out;
}

// Inverse-CDF draw.
template <typename T>
std::size_t sample_index(const std::vector<T>& dist, std::mt19937& rng) {
  if (dist.empty()) throw std::invalid_argument("sample_index: empty distribution");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= T(0)) continue;
    cum += static_cast<double>(dist[i]);
    last_positive = i;
    if (r <= cum) return i;
  }
  return last_positive;  // rounding slack at the tail
}

// token -> substitute token ids; entries are never empty.
struct SynonymLexicon {
  std::unordered_map<int, std::vector<int>> entries;
};

SynonymLexicon load_synonym_lexicon(const std::string& path, const Vocabulary& vocab);

// One LM pass over the original sentence; each position is independently
// selected with replace_prob and all sampled replacements are applied
// simultaneously.
std::vector<int> contextual_augment(const LabeledExample& example,
                                    BiLmParams<float>& lm, const AugmentPolicy& policy,
                                    std::mt19937& rng);

// Synonym-lexicon baseline: selected positions with a lexicon entry get a
// uniformly sampled listed substitute.
std::vector<int> synonym_augment(const LabeledExample& example,
                                 const SynonymLexicon& lexicon, double replace_prob,
                                 std::mt19937& rng);

}  // namespace caug
