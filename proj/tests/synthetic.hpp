#pragma once

// Synthetic polarity task used by the LM, classifier, and acceptance tests:
// four-token template sentences "the <noun> <verb> <slot>" where the slot
// word comes from disjoint 10-word positive/negative lexicons and determines
// the sentence label.

#include <random>
#include <string>
#include <vector>

#include "caug/corpus.hpp"

namespace synth {

struct Template {
  std::vector<int> frame;       // token ids with a placeholder at slot_index
  std::size_t slot_index = 3;
};

struct Task {
  caug::Vocabulary vocab;
  std::vector<int> pos_ids, neg_ids;       // slot lexicons, disjoint
  std::vector<Template> train_templates;   // 40
  std::vector<Template> heldout_templates; // 10
  caug::DatasetMeta meta;                  // labels: pos=0, neg=1

  caug::LabeledExample fill(const Template& t, int word_id, int label) const {
    caug::LabeledExample ex;
    ex.tokens = t.frame;
    ex.tokens[t.slot_index] = word_id;
    ex.label = label;
    return ex;
  }

  // every (template, lexicon word) combination, labeled by the lexicon
  std::vector<caug::LabeledExample> all_examples(const std::vector<Template>& ts) const {
    std::vector<caug::LabeledExample> out;
    for (const auto& t : ts) {
      for (int w : pos_ids) out.push_back(fill(t, w, 0));
      for (int w : neg_ids) out.push_back(fill(t, w, 1));
    }
    return out;
  }

  // unlabeled sentences for LM pretraining
  std::vector<std::vector<int>> pretrain_corpus() const {
    std::vector<std::vector<int>> out;
    for (const auto& ex : all_examples(train_templates)) out.push_back(ex.tokens);
    return out;
  }
};

inline const std::vector<std::string>& positive_lexicon() {
  static const std::vector<std::string> words = {
      "great",  "good",   "wonderful", "excellent",  "amazing",
      "superb", "brilliant", "delightful", "charming", "enjoyable"};
  return words;
}

inline const std::vector<std::string>& negative_lexicon() {
  static const std::vector<std::string> words = {
      "bad",  "awful", "terrible", "horrible", "dreadful",
      "boring", "dull", "poor",    "weak",     "tedious"};
  return words;
}

inline Task make_task() {
  const std::vector<std::string> nouns = {"movie", "film",  "plot",  "story", "acting",
                                          "script", "cast", "scene", "ending", "music"};
  const std::vector<std::string> verbs = {"was", "is", "seemed", "looked", "felt"};

  std::vector<std::vector<std::string>> corpus;
  for (const auto& n : nouns)
    for (const auto& v : verbs)
      for (const auto& lex : {positive_lexicon(), negative_lexicon()})
        for (const auto& w : lex) corpus.push_back({"the", n, v, w});

  Task task;
  task.vocab = caug::build_vocab(corpus, 1, 1000);
  for (const auto& w : positive_lexicon()) task.pos_ids.push_back(task.vocab.id(w));
  for (const auto& w : negative_lexicon()) task.neg_ids.push_back(task.vocab.id(w));
  task.meta.name = "synthetic-polarity";
  task.meta.num_classes = 2;
  task.meta.label_names = {"pos", "neg"};

  // 50 noun x verb templates; the last verb column is held out
  for (const auto& n : nouns) {
    for (const auto& v : verbs) {
      Template t;
      t.frame = task.vocab.encode({"the", n, v, "<pad>"});
      t.frame[3] = -1;  // placeholder, always overwritten by fill()
      t.slot_index = 3;
      if (v == verbs.back()) {
        task.heldout_templates.push_back(t);
      } else {
        task.train_templates.push_back(t);
      }
    }
  }
  return task;
}

// A deterministic labeled sample of `count` examples over the given templates.
inline std::vector<caug::LabeledExample> sample_examples(const Task& task,
                                                         const std::vector<Template>& ts,
                                                         std::size_t count, unsigned seed) {
  auto all = task.all_examples(ts);
  std::mt19937 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > count) all.resize(count);
  return all;
}

}  // namespace synth
