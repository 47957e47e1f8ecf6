#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caug/vocab.hpp"

namespace caug {

// A sentence S as token ids plus its class label y.
struct LabeledExample {
  std::vector<int> tokens;
  int label = 0;
};

struct DatasetMeta {
  std::string name;
  int num_classes = 0;
  std::vector<std::string> label_names;
};

// TSV `label<TAB>text`, one example per line. Labels become contiguous ids in
// first-appearance order. Without a vocabulary the tokens are left unencoded
// in `raw_tokens`.
struct LabeledDataset {
  std::vector<LabeledExample> examples;
  std::vector<std::vector<std::string>> raw_tokens;  // parallel to examples
  DatasetMeta meta;
};

LabeledDataset load_labeled_tsv(const std::string& path,
                                const Vocabulary* vocab = nullptr);

// One sentence per line, blank lines skipped.
std::vector<std::vector<std::string>> load_plain_corpus_tokens(const std::string& path);
std::vector<std::vector<int>> load_plain_corpus(const std::string& path,
                                                const Vocabulary& vocab);

// Seeded shuffle, then the last ceil(fraction*N) examples form the validation
// half. Same seed, same split.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_train_valid(const std::vector<LabeledExample>& examples, double fraction,
                  unsigned seed);

void save_labeled_tsv(const std::string& path, const std::vector<LabeledExample>& examples,
                      const DatasetMeta& meta, const Vocabulary& vocab);

}  // namespace caug
