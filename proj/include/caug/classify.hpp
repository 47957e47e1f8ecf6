#pragma once

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "caug/adam.hpp"
#include "caug/augment.hpp"
#include "caug/corpus.hpp"
#include "caug/nn.hpp"

namespace caug {

struct CnnConfig {
  std::vector<std::size_t> filter_widths = {3, 4, 5};
  std::size_t filters_per_width = 8;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 16;
  double dropout = 0.3;
  std::size_t num_classes = 2;
};

struct RnnConfig {
  std::size_t lstm_dim = 24;
  std::size_t embed_dim = 16;
  double dropout = 0.3;
  std::size_t num_classes = 2;
};

// Common surface for the training loop and evaluation.
template <typename T>
class TextClassifier {
 public:
  virtual ~TextClassifier() = default;
  virtual typename Graph<T>::Id logits(Graph<T>& g, const std::vector<int>& tokens,
                                       std::mt19937* rng, bool train) = 0;
  virtual std::vector<Parameter<T>*> parameters() = 0;
  virtual std::size_t num_classes() const = 0;
};

namespace detail {

inline std::vector<int> strip_trailing_pad(const std::vector<int>& tokens) {
  std::size_t n = tokens.size();
  while (n > 0 && tokens[n - 1] == Vocabulary::kPad) --n;
  return std::vector<int>(tokens.begin(), tokens.begin() + static_cast<long>(n));
}

}  // namespace detail

// Kim-style CNN: per-width 1-D convolutions over time, ReLU, max-pool over
// time, concatenation, then a two-layer ReLU feed-forward with dropout.
template <typename T>
class CnnClassifier : public TextClassifier<T> {
 public:
  CnnClassifier(std::size_t vocab_size, CnnConfig cfg, unsigned seed)
      : vocab_size_(vocab_size), cfg_(std::move(cfg)) {
    std::mt19937 rng(seed);
    embed_ = Parameter<T>("embed", glorot_uniform<T>(vocab_size, cfg_.embed_dim, rng));
    std::size_t total = 0;
    for (std::size_t w : cfg_.filter_widths) {
      conv_w_.emplace_back("conv" + std::to_string(w) + ".w",
                           glorot_uniform<T>(w * cfg_.embed_dim, cfg_.filters_per_width, rng));
      conv_b_.emplace_back("conv" + std::to_string(w) + ".b",
                           Tensor<T>({1, cfg_.filters_per_width}));
      total += cfg_.filters_per_width;
    }
    ff1_w_ = Parameter<T>("ff1.w", glorot_uniform<T>(total, cfg_.hidden_dim, rng));
    ff1_b_ = Parameter<T>("ff1.b", Tensor<T>({1, cfg_.hidden_dim}));
    ff2_w_ = Parameter<T>("ff2.w", glorot_uniform<T>(cfg_.hidden_dim, cfg_.num_classes, rng));
    ff2_b_ = Parameter<T>("ff2.b", Tensor<T>({1, cfg_.num_classes}));
  }

  typename Graph<T>::Id logits(Graph<T>& g, const std::vector<int>& tokens,
                               std::mt19937* rng, bool train) override {
    auto sent = detail::strip_trailing_pad(tokens);
    if (sent.empty()) throw std::invalid_argument("cnn: empty sentence");
    auto embed = g.param(embed_);
    typename Graph<T>::Id pooled = 0;
    bool first = true;
    for (std::size_t wi = 0; wi < cfg_.filter_widths.size(); ++wi) {
      const std::size_t w = cfg_.filter_widths[wi];
      // Short sentences are PAD-extended to the filter width.
      std::vector<int> padded = sent;
      while (padded.size() < w) padded.push_back(Vocabulary::kPad);
      std::vector<typename Graph<T>::Id> windows;
      for (std::size_t t = 0; t + w <= padded.size(); ++t) {
        std::vector<int> ids(padded.begin() + static_cast<long>(t),
                             padded.begin() + static_cast<long>(t + w));
        windows.push_back(g.reshape(g.gather_rows(embed, ids), {1, w * cfg_.embed_dim}));
      }
      auto conv = g.relu(affine(g, g.stack_rows(windows), g.param(conv_w_[wi]),
                                g.param(conv_b_[wi])));
      auto mx = g.max_over_rows(conv);
      pooled = first ? mx : g.concat_cols(pooled, mx);
      first = false;
    }
    if (train && rng && cfg_.dropout > 0.0)
      pooled = g.dropout(pooled, static_cast<T>(cfg_.dropout), *rng, true);
    auto hidden = g.relu(affine(g, pooled, g.param(ff1_w_), g.param(ff1_b_)));
    if (train && rng && cfg_.dropout > 0.0)
      hidden = g.dropout(hidden, static_cast<T>(cfg_.dropout), *rng, true);
    return affine(g, hidden, g.param(ff2_w_), g.param(ff2_b_));
  }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> ps = {&embed_};
    for (auto& p : conv_w_) ps.push_back(&p);
    for (auto& p : conv_b_) ps.push_back(&p);
    ps.push_back(&ff1_w_);
    ps.push_back(&ff1_b_);
    ps.push_back(&ff2_w_);
    ps.push_back(&ff2_b_);
    return ps;
  }

  std::size_t num_classes() const override { return cfg_.num_classes; }
  const CnnConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  std::size_t vocab_size_;
  CnnConfig cfg_;
  Parameter<T> embed_;
  std::vector<Parameter<T>> conv_w_, conv_b_;
  Parameter<T> ff1_w_, ff1_b_, ff2_w_, ff2_b_;
};

// Single-layer LSTM; the final hidden state feeds an output affine.
template <typename T>
class RnnClassifier : public TextClassifier<T> {
 public:
  RnnClassifier(std::size_t vocab_size, RnnConfig cfg, unsigned seed)
      : vocab_size_(vocab_size), cfg_(cfg) {
    std::mt19937 rng(seed);
    embed_ = Parameter<T>("embed", glorot_uniform<T>(vocab_size, cfg_.embed_dim, rng));
    lstm_ = LstmParams<T>("lstm", cfg_.embed_dim, cfg_.lstm_dim, rng);
    out_w_ = Parameter<T>("out.w", glorot_uniform<T>(cfg_.lstm_dim, cfg_.num_classes, rng));
    out_b_ = Parameter<T>("out.b", Tensor<T>({1, cfg_.num_classes}));
  }

  typename Graph<T>::Id logits(Graph<T>& g, const std::vector<int>& tokens,
                               std::mt19937* rng, bool train) override {
    auto sent = detail::strip_trailing_pad(tokens);
    if (sent.empty()) throw std::invalid_argument("rnn: empty sentence");
    auto embed = g.param(embed_);
    auto st = lstm_initial_state(g, cfg_.lstm_dim);
    for (int id : sent) st = lstm_step(g, g.gather_rows(embed, {id}), st, lstm_);
    auto h = st.h;
    if (train && rng && cfg_.dropout > 0.0)
      h = g.dropout(h, static_cast<T>(cfg_.dropout), *rng, true);
    return affine(g, h, g.param(out_w_), g.param(out_b_));
  }

  std::vector<Parameter<T>*> parameters() override {
    return {&embed_, &lstm_.wx, &lstm_.wh, &lstm_.b, &out_w_, &out_b_};
  }

  std::size_t num_classes() const override { return cfg_.num_classes; }
  const RnnConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  std::size_t vocab_size_;
  RnnConfig cfg_;
  Parameter<T> embed_;
  LstmParams<T> lstm_;
  Parameter<T> out_w_, out_b_;
};

enum class AugmenterKind { none, synonym, contextual };

struct TrainConfig {
  int max_epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int patience = 5;
  unsigned seed = 0;
  AugmenterKind augmenter = AugmenterKind::none;
  AugmentPolicy policy;
};

struct EpochStats {
  double train_loss = 0.0;
  double valid_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

// Argmax of logits, lowest class id on exact ties.
int predict(TextClassifier<float>& model, const std::vector<int>& tokens);

double evaluate(TextClassifier<float>& model, const std::vector<LabeledExample>& test_set);

// Minibatch Adam training with fresh per-update augmentation and early
// stopping on validation accuracy; the model ends at the best-validation
// snapshot.
TrainHistory train_classifier(TextClassifier<float>& model,
                              const std::vector<LabeledExample>& train_set,
                              const std::vector<LabeledExample>& valid_set,
                              const TrainConfig& cfg,
                              BiLmParams<float>* lm = nullptr,
                              const SynonymLexicon* lexicon = nullptr);

}  // namespace caug
