#include "caug/classify.hpp"

#include <numeric>

namespace caug {

int predict(TextClassifier<float>& model, const std::vector<int>& tokens) {
  Graph<float> g;
  auto out = model.logits(g, tokens, nullptr, false);
  const auto& v = g.value(out);
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.cols(); ++j)
    if (v.at(0, j) > v.at(0, best)) best = j;
  return static_cast<int>(best);
}

double evaluate(TextClassifier<float>& model, const std::vector<LabeledExample>& test_set) {
  if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::size_t correct = 0;
  for (const auto& ex : test_set)
    if (predict(model, ex.tokens) == ex.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

TrainHistory train_classifier(TextClassifier<float>& model,
                              const std::vector<LabeledExample>& train_set,
                              const std::vector<LabeledExample>& valid_set,
                              const TrainConfig& cfg, BiLmParams<float>* lm,
                              const SynonymLexicon* lexicon) {
  if (train_set.empty() || valid_set.empty())
    throw std::invalid_argument("train_classifier: empty train or valid set");
  if (cfg.max_epochs < 1 || cfg.patience < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train_classifier: bad training config");
  if (cfg.augmenter == AugmenterKind::contextual && lm == nullptr)
    throw std::invalid_argument("train_classifier: contextual augmentation needs a language model");
  if (cfg.augmenter == AugmenterKind::synonym && lexicon == nullptr)
    throw std::invalid_argument("train_classifier: synonym augmentation needs a lexicon");

  auto params = model.parameters();
  std::mt19937 rng(cfg.seed);
  Adam<float> opt(params, AdamConfig<float>{static_cast<float>(cfg.learning_rate)});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  std::vector<Tensor<float>> best_snapshot;
  double best_acc = -1.0;
  int wait = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (auto* p : params) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        // Fresh augmentation at every update; labels stay untouched.
        std::vector<int> tokens;
        switch (cfg.augmenter) {
          case AugmenterKind::none:
            tokens = ex.tokens;
            break;
          case AugmenterKind::synonym:
            tokens = synonym_augment(ex, *lexicon, cfg.policy.replace_prob, rng);
            break;
          case AugmenterKind::contextual:
            tokens = contextual_augment(ex, *lm, cfg.policy, rng);
            break;
        }
        Graph<float> g;
        auto logits = model.logits(g, tokens, &rng, true);
        auto loss = g.cross_entropy_with_logits(logits, {ex.label});
        loss_sum += g.value(loss)[0];
        g.backward(g.scale(loss, 1.0f / static_cast<float>(end - start)));
      }
      clip_global_norm(params, 5.0f);
      opt.step();
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.valid_accuracy = evaluate(model, valid_set);
    history.push_back(stats);

    if (stats.valid_accuracy > best_acc) {
      best_acc = stats.valid_accuracy;
      best_snapshot.clear();
      for (auto* p : params) best_snapshot.push_back(p->value);
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_snapshot[i];
  return history;
}

}  // namespace caug
