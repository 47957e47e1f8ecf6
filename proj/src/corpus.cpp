#include "caug/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace caug {

LabeledDataset load_labeled_tsv(const std::string& path, const Vocabulary* vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_labeled_tsv: cannot read " + path);
  LabeledDataset ds;
  ds.meta.name = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("load_labeled_tsv: " + path + ":" + std::to_string(lineno) +
                               ": expected label<TAB>text");
    }
    const std::string label_name = line.substr(0, tab);
    auto it = std::find(ds.meta.label_names.begin(), ds.meta.label_names.end(), label_name);
    int label;
    if (it == ds.meta.label_names.end()) {
      label = static_cast<int>(ds.meta.label_names.size());
      ds.meta.label_names.push_back(label_name);
    } else {
      label = static_cast<int>(it - ds.meta.label_names.begin());
    }
    auto toks = tokenize(line.substr(tab + 1));
    LabeledExample ex;
    ex.label = label;
    if (vocab) ex.tokens = vocab->encode(toks);
    ds.raw_tokens.push_back(std::move(toks));
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty())
    throw std::runtime_error("load_labeled_tsv: " + path + " contains no examples");
  ds.meta.num_classes = static_cast<int>(ds.meta.label_names.size());
  return ds;
}

std::vector<std::vector<std::string>> load_plain_corpus_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_plain_corpus: cannot read " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = tokenize(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

std::vector<std::vector<int>> load_plain_corpus(const std::string& path,
                                                const Vocabulary& vocab) {
  auto tokens = load_plain_corpus_tokens(path);
  std::vector<std::vector<int>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.encode(t));
  return out;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_train_valid(const std::vector<LabeledExample>& examples, double fraction,
                  unsigned seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_train_valid: fraction must be in (0,1)");
  if (examples.empty())
    throw std::invalid_argument("split_train_valid: empty example list");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_valid = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(examples.size())));
  const std::size_t n_train = examples.size() - n_valid;
  std::vector<LabeledExample> train, valid;
  train.reserve(n_train);
  valid.reserve(n_valid);
  for (std::size_t i = 0; i < n_train; ++i) train.push_back(examples[order[i]]);
  for (std::size_t i = n_train; i < examples.size(); ++i) valid.push_back(examples[order[i]]);
  return {std::move(train), std::move(valid)};
}

void save_labeled_tsv(const std::string& path, const std::vector<LabeledExample>& examples,
                      const DatasetMeta& meta, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_labeled_tsv: cannot write " + path);
  for (const auto& ex : examples) {
    out << meta.label_names.at(static_cast<std::size_t>(ex.label)) << '\t';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (i) out << ' ';
      out << vocab.token(ex.tokens[i]);
    }
    out << '\n';
  }
}

}  // namespace caug
