#include "caug/augment.hpp"

#include <fstream>
#include <sstream>

namespace caug {

SynonymLexicon load_synonym_lexicon(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_synonym_lexicon: cannot read " + path);
  SynonymLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw std::runtime_error("load_synonym_lexicon: " + path + ":" +
                               std::to_string(lineno) +
                               ": expected headword<TAB>syn1,syn2,...");
    }
    const std::string head = line.substr(0, tab);
    if (!vocab.contains(head)) continue;
    const int head_id = vocab.id(head);
    auto& slot = lex.entries[head_id];
    std::stringstream syns(line.substr(tab + 1));
    std::string syn;
    while (std::getline(syns, syn, ',')) {
      if (syn.empty() || !vocab.contains(syn)) continue;  // OOV substitutes dropped
      const int syn_id = vocab.id(syn);
      if (std::find(slot.begin(), slot.end(), syn_id) == slot.end()) slot.push_back(syn_id);
    }
    if (slot.empty()) lex.entries.erase(head_id);
  }
  return lex;
}

std::vector<int> contextual_augment(const LabeledExample& example,
                                    BiLmParams<float>& lm, const AugmentPolicy& policy,
                                    std::mt19937& rng) {
  if (example.tokens.empty())
    throw std::invalid_argument("contextual_augment: empty sentence");
  if (policy.use_label && !lm.conditional)
    throw std::logic_error("contextual_augment: policy needs a conditional model");
  if (policy.replace_prob < 0.0 || policy.replace_prob > 1.0)
    throw std::invalid_argument("contextual_augment: replace_prob must be in [0,1]");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> selected(example.tokens.size());
  bool any = false;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    selected[i] = u(rng) < policy.replace_prob;
    any = any || selected[i];
  }
  std::vector<int> out = example.tokens;
  if (!any) return out;

  // All distributions come from the original sentence; replacements are
  // applied simultaneously afterwards.
  ClozeContext ctx;
  ctx.sentence = example.tokens;
  if (policy.use_label) ctx.label = example.label;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!selected[i]) continue;
    ctx.position = i;
    auto dist = anneal(predict_distribution(lm, ctx), policy.temperature);
    out[i] = static_cast<int>(sample_index(dist, rng));
  }
  return out;
}

std::vector<int> synonym_augment(const LabeledExample& example,
                                 const SynonymLexicon& lexicon, double replace_prob,
                                 std::mt19937& rng) {
  if (example.tokens.empty())
    throw std::invalid_argument("synonym_augment: empty sentence");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> out = example.tokens;
  for (auto& tok : out) {
    if (u(rng) >= replace_prob) continue;
    auto it = lexicon.entries.find(tok);
    if (it == lexicon.entries.end()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
    tok = it->second[pick(rng)];
  }
  return out;
}

}  // namespace caug
