#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "caug/adam.hpp"
#include "caug/corpus.hpp"
#include "caug/nn.hpp"

namespace caug {

// A cloze query: predict the word at `position` of `sentence` from its
// surrounding context (and, for a conditional model, the label).
struct ClozeContext {
  std::vector<int> sentence;
  std::size_t position = 0;
  std::optional<int> label;
};

struct BiLmDims {
  std::size_t embed_dim = 16;
  std::size_t lstm_dim = 24;
  std::size_t hidden_dim = 32;
};

struct LmTrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double dropout = 0.0;
  std::size_t max_len = 64;
  unsigned seed = 0;
  bool freeze_pretrained = false;  // fine-tune only the label pathway
};

// Bi-directional LSTM cloze LM. A forward LSTM reads BOS,w_1..w_{i-1} and a
// backward LSTM reads EOS,w_n..w_{i+1}; the two final states (plus the label
// embedding once retrofitted) feed a ReLU hidden layer and an output affine
// over the vocabulary.
template <typename T>
struct BiLmParams {
  std::size_t vocab_size = 0;
  BiLmDims dims;
  std::size_t num_labels = 0;
  std::size_t label_dim = 0;
  bool conditional = false;
  std::uint64_t vocab_hash = 0;

  Parameter<T> embed;        // V x d_e, shared by both directions
  LstmParams<T> fwd;
  LstmParams<T> bwd;
  Parameter<T> label_embed;  // K x d_y, present only when conditional
  Parameter<T> combiner_w;   // (2H [+ d_y]) x d_h
  Parameter<T> combiner_b;   // 1 x d_h
  Parameter<T> out_w;        // d_h x V
  Parameter<T> out_b;        // 1 x V

  std::vector<Parameter<T>*> all() {
    std::vector<Parameter<T>*> ps = {&embed,  &fwd.wx,      &fwd.wh,      &fwd.b,
                                     &bwd.wx, &bwd.wh,      &bwd.b,       &combiner_w,
                                     &combiner_b, &out_w,   &out_b};
    if (conditional) ps.push_back(&label_embed);
    return ps;
  }

  // Parameters introduced by the retrofit, for the freeze-pretrained mode.
  std::vector<Parameter<T>*> label_pathway() {
    if (!conditional) return {};
    return {&label_embed, &combiner_w};
  }

  template <typename U>
  BiLmParams<U> cast() const {
    BiLmParams<U> out;
    out.vocab_size = vocab_size;
    out.dims = dims;
    out.num_labels = num_labels;
    out.label_dim = label_dim;
    out.conditional = conditional;
    out.vocab_hash = vocab_hash;
    auto cv = [](const Parameter<T>& p) {
      return Parameter<U>(p.name, p.value.template cast<U>());
    };
    out.embed = cv(embed);
    out.fwd.input_dim = fwd.input_dim;
    out.fwd.hidden_dim = fwd.hidden_dim;
    out.fwd.wx = cv(fwd.wx);
    out.fwd.wh = cv(fwd.wh);
    out.fwd.b = cv(fwd.b);
    out.bwd.input_dim = bwd.input_dim;
    out.bwd.hidden_dim = bwd.hidden_dim;
    out.bwd.wx = cv(bwd.wx);
    out.bwd.wh = cv(bwd.wh);
    out.bwd.b = cv(bwd.b);
    if (conditional) out.label_embed = cv(label_embed);
    out.combiner_w = cv(combiner_w);
    out.combiner_b = cv(combiner_b);
    out.out_w = cv(out_w);
    out.out_b = cv(out_b);
    return out;
  }
};

template <typename T>
BiLmParams<T> init_bilm(std::size_t vocab_size, std::uint64_t vocab_hash,
                        const BiLmDims& dims, unsigned seed) {
  if (vocab_size < 4) throw std::invalid_argument("init_bilm: vocab too small");
  std::mt19937 rng(seed);
  BiLmParams<T> p;
  p.vocab_size = vocab_size;
  p.dims = dims;
  p.vocab_hash = vocab_hash;
  p.embed = Parameter<T>("embed", glorot_uniform<T>(vocab_size, dims.embed_dim, rng));
  p.fwd = LstmParams<T>("fwd", dims.embed_dim, dims.lstm_dim, rng);
  p.bwd = LstmParams<T>("bwd", dims.embed_dim, dims.lstm_dim, rng);
  p.combiner_w = Parameter<T>("combiner_w",
                              glorot_uniform<T>(2 * dims.lstm_dim, dims.hidden_dim, rng));
  p.combiner_b = Parameter<T>("combiner_b", Tensor<T>({1, dims.hidden_dim}));
  p.out_w = Parameter<T>("out_w", glorot_uniform<T>(dims.hidden_dim, vocab_size, rng));
  p.out_b = Parameter<T>("out_b", Tensor<T>({1, vocab_size}));
  return p;
}

// Adds the label embedding (small random init) and zero-initialized combiner
// rows for the label slice. Existing weights are copied unchanged, so the
// conditional model initially reproduces the unconditional distributions.
template <typename T>
void retrofit_conditional(BiLmParams<T>& p, std::size_t num_labels,
                          std::size_t label_dim, unsigned seed) {
  if (p.conditional) throw std::logic_error("retrofit_conditional: model is already conditional");
  if (num_labels < 2) throw std::invalid_argument("retrofit_conditional: need at least 2 labels");
  if (label_dim < 1) throw std::invalid_argument("retrofit_conditional: label_dim must be >= 1");
  std::mt19937 rng(seed);
  p.num_labels = num_labels;
  p.label_dim = label_dim;
  p.label_embed = Parameter<T>("label_embed",
                               small_uniform<T>(num_labels, label_dim, 0.1, rng));
  const std::size_t old_rows = p.combiner_w.value.rows();
  Tensor<T> extended({old_rows + label_dim, p.dims.hidden_dim});
  for (std::size_t i = 0; i < old_rows; ++i)
    for (std::size_t j = 0; j < p.dims.hidden_dim; ++j)
      extended.at(i, j) = p.combiner_w.value.at(i, j);
  p.combiner_w = Parameter<T>("combiner_w", std::move(extended));
  p.conditional = true;
}

template <typename T>
struct BiLmStates {
  std::vector<typename Graph<T>::Id> fwd;  // fwd[i] summarizes BOS,w_1..w_{i-1}
  std::vector<typename Graph<T>::Id> bwd;  // bwd[i] summarizes EOS,w_n..w_{i+1}
};

// Both LSTM passes over the sentence. The states for position i never read
// w_i itself.
template <typename T>
BiLmStates<T> contextual_states(Graph<T>& g, BiLmParams<T>& p,
                                const std::vector<int>& sentence) {
  if (sentence.empty()) throw std::invalid_argument("contextual_states: empty sentence");
  for (int id : sentence) {
    if (id < 0 || static_cast<std::size_t>(id) >= p.vocab_size)
      throw std::invalid_argument("contextual_states: token id out of range");
  }
  const std::size_t n = sentence.size();
  auto embed = g.param(p.embed);
  BiLmStates<T> states;
  states.fwd.resize(n);
  states.bwd.resize(n);

  auto st = lstm_initial_state(g, p.dims.lstm_dim);
  st = lstm_step(g, g.gather_rows(embed, {Vocabulary::kBos}), st, p.fwd);
  states.fwd[0] = st.h;
  for (std::size_t i = 1; i < n; ++i) {
    st = lstm_step(g, g.gather_rows(embed, {sentence[i - 1]}), st, p.fwd);
    states.fwd[i] = st.h;
  }

  st = lstm_initial_state(g, p.dims.lstm_dim);
  st = lstm_step(g, g.gather_rows(embed, {Vocabulary::kEos}), st, p.bwd);
  states.bwd[n - 1] = st.h;
  for (std::size_t i = n - 1; i-- > 0;) {
    st = lstm_step(g, g.gather_rows(embed, {sentence[i + 1]}), st, p.bwd);
    states.bwd[i] = st.h;
  }
  return states;
}

namespace detail {

template <typename T>
typename Graph<T>::Id combiner_input(Graph<T>& g, BiLmParams<T>& p,
                                     const BiLmStates<T>& states, std::size_t i,
                                     std::optional<int> label) {
  if (label.has_value()) {
    if (!p.conditional)
      throw std::logic_error("bilm: label given to an unconditional model");
    if (*label < 0 || static_cast<std::size_t>(*label) >= p.num_labels)
      throw std::invalid_argument("bilm: label id out of range");
  } else if (p.conditional) {
    throw std::logic_error("bilm: conditional model requires a label");
  }
  auto h = g.concat_cols(states.fwd[i], states.bwd[i]);
  if (label.has_value()) {
    auto lab = g.gather_rows(g.param(p.label_embed), {*label});
    h = g.concat_cols(h, lab);
  }
  return h;
}

// inputs: [n x (2H [+ d_y])] rows -> logits [n x V]
template <typename T>
typename Graph<T>::Id output_logits(Graph<T>& g, BiLmParams<T>& p,
                                    typename Graph<T>::Id inputs, double dropout_rate,
                                    std::mt19937* rng, bool train) {
  auto hidden = g.relu(affine(g, inputs, g.param(p.combiner_w), g.param(p.combiner_b)));
  if (train && rng && dropout_rate > 0.0)
    hidden = g.dropout(hidden, static_cast<T>(dropout_rate), *rng, true);
  return affine(g, hidden, g.param(p.out_w), g.param(p.out_b));
}

}  // namespace detail

// p(.|S\{w_i}) or p(.|y, S\{w_i}); sums to 1.
template <typename T>
std::vector<T> predict_distribution(BiLmParams<T>& p, const ClozeContext& ctx) {
  if (ctx.position >= ctx.sentence.size())
    throw std::invalid_argument("predict_distribution: position out of range");
  Graph<T> g;
  auto states = contextual_states(g, p, ctx.sentence);
  auto in = detail::combiner_input(g, p, states, ctx.position, ctx.label);
  auto logits = detail::output_logits(g, p, in, 0.0, nullptr, false);
  auto probs = g.softmax_rows(logits);
  const auto& v = g.value(probs);
  return std::vector<T>(v.data.begin(), v.data.end());
}

// Exact top-k of predict_distribution, ties broken by lower token id.
template <typename T>
std::vector<std::pair<int, T>> topk(BiLmParams<T>& p, const ClozeContext& ctx,
                                    std::size_t k) {
  if (k < 1 || k > p.vocab_size) throw std::invalid_argument("topk: k out of range");
  auto dist = predict_distribution(p, ctx);
  std::vector<int> order(dist.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                    [&dist](int a, int b) {
                      if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
                        return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
                      return a < b;
                    });
  std::vector<std::pair<int, T>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.emplace_back(order[i], dist[static_cast<std::size_t>(order[i])]);
  return out;
}

// Mean over every position i of -log p(w_i | [y,] S\{w_i}), as a graph node.
template <typename T>
typename Graph<T>::Id lm_loss_node(Graph<T>& g, BiLmParams<T>& p,
                                   const std::vector<int>& sentence,
                                   std::optional<int> label, double dropout_rate = 0.0,
                                   std::mt19937* rng = nullptr, bool train = false) {
  auto states = contextual_states(g, p, sentence);
  std::vector<typename Graph<T>::Id> rows;
  rows.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i)
    rows.push_back(detail::combiner_input(g, p, states, i, label));
  auto inputs = g.stack_rows(rows);
  auto logits = detail::output_logits(g, p, inputs, dropout_rate, rng, train);
  return g.cross_entropy_with_logits(logits, sentence);
}

template <typename T>
T lm_loss(BiLmParams<T>& p, const std::vector<int>& sentence,
          std::optional<int> label = std::nullopt) {
  Graph<T> g;
  return g.value(lm_loss_node(g, p, sentence, label))[0];
}

namespace detail {

inline std::vector<int> truncated(const std::vector<int>& s, std::size_t max_len) {
  if (s.size() <= max_len) return s;
  return std::vector<int>(s.begin(), s.begin() + static_cast<long>(max_len));
}

// Shared minibatch loop for pretraining and conditional fine-tuning.
template <typename T>
void train_lm(BiLmParams<T>& p, const std::vector<std::vector<int>>& sentences,
              const std::vector<std::optional<int>>& labels, const LmTrainConfig& cfg,
              const std::vector<Parameter<T>*>& trainable) {
  if (sentences.empty()) throw std::invalid_argument("train_lm: empty corpus");
  if (cfg.batch_size < 1 || cfg.epochs < 1)
    throw std::invalid_argument("train_lm: bad training config");
  std::mt19937 rng(cfg.seed);
  Adam<T> opt(trainable, AdamConfig<T>{static_cast<T>(cfg.learning_rate)});
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (auto* q : trainable) q->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        Graph<T> g;
        auto sent = truncated(sentences[order[k]], cfg.max_len);
        auto loss = lm_loss_node(g, p, sent, labels[order[k]], cfg.dropout, &rng, true);
        g.backward(g.scale(loss, T(1) / static_cast<T>(end - start)));
      }
      clip_global_norm(trainable, T(5));
      opt.step();
    }
  }
}

}  // namespace detail

// Unconditional pretraining on a plain corpus.
template <typename T>
BiLmParams<T> pretrain(const std::vector<std::vector<int>>& corpus, std::size_t vocab_size,
                       std::uint64_t vocab_hash, const BiLmDims& dims,
                       const LmTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  auto p = init_bilm<T>(vocab_size, vocab_hash, dims, cfg.seed);
  std::vector<std::optional<int>> labels(corpus.size(), std::nullopt);
  detail::train_lm(p, corpus, labels, cfg, p.all());
  return p;
}

// Label-conditional fine-tuning; every sentence trains with its gold label.
template <typename T>
void finetune_conditional(BiLmParams<T>& p, const std::vector<LabeledExample>& examples,
                          const LmTrainConfig& cfg) {
  if (!p.conditional)
    throw std::logic_error("finetune_conditional: model has no label pathway");
  if (examples.empty()) throw std::invalid_argument("finetune_conditional: no examples");
  std::vector<std::vector<int>> sentences;
  std::vector<std::optional<int>> labels;
  sentences.reserve(examples.size());
  labels.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= p.num_labels)
      throw std::invalid_argument("finetune_conditional: label id out of range");
    sentences.push_back(ex.tokens);
    labels.emplace_back(ex.label);
  }
  detail::train_lm(p, sentences, labels, cfg,
                   cfg.freeze_pretrained ? p.label_pathway() : p.all());
}

}  // namespace caug
