#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "caug/augment.hpp"
#include "caug/bilm.hpp"
#include "caug/classify.hpp"
#include "caug/corpus.hpp"

namespace caug {

// "0.5", "uniform", or "greedy".
Temperature parse_temperature(const std::string& s);

struct ExperimentConfig {
  std::string dataset_name = "dataset";
  std::string arch = "cnn";            // cnn | rnn
  std::string augmentation = "none";   // none | synonym | context | context+label
  std::string tau = "1";
  double replace_prob = 0.1;
  std::vector<std::string> tau_grid = {"0.5", "1", "2", "uniform"};
  std::vector<double> replace_prob_grid = {0.05, 0.1, 0.2, 0.3};
  std::vector<unsigned> seeds = {0, 1, 2, 3, 4, 5, 6, 7};
  double valid_fraction = 0.1;
  CnnConfig cnn;
  RnnConfig rnn;
  TrainConfig train;

  AugmentPolicy policy() const;
  AugmenterKind augmenter_kind() const;
};

struct ExperimentData {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::optional<std::vector<LabeledExample>> valid;  // split from train if absent
  DatasetMeta meta;
  std::size_t vocab_size = 0;
};

// One summary-table cell: per-seed accuracies for a (model, augmentation) pair.
struct RunReport {
  std::string model;
  std::string augmentation;
  std::string dataset;
  std::string tau = "1";
  double replace_prob = 0.0;
  std::vector<double> seed_test_accuracies;
  std::vector<double> seed_valid_accuracies;
  std::vector<TrainHistory> histories;  // parallel to seeds
  double mean = 0.0;
  double stddev = 0.0;
  double wall_seconds = 0.0;
};

RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                         BiLmParams<float>* lm = nullptr,
                         const SynonymLexicon* lexicon = nullptr);

struct GridCell {
  std::string tau;
  double replace_prob = 0.0;
  double valid_mean = 0.0;
};

struct GridResult {
  std::string best_tau;
  double best_replace_prob = 0.0;
  std::vector<GridCell> table;
  RunReport selected;  // test accuracy for the winning pair only
};

// Grid over (tau, replace_prob) selecting by mean validation accuracy; model
// hyperparameters are held fixed. Ties go to smaller replace_prob, then
// smaller tau.
GridResult grid_search(const ExperimentConfig& cfg, const ExperimentData& data,
                       BiLmParams<float>* lm = nullptr,
                       const SynonymLexicon* lexicon = nullptr);

// One JSON record per report to machine_out, plus an aligned table with a
// per-row average column to text_out.
void emit_table(const std::vector<RunReport>& reports, std::ostream& machine_out,
                std::ostream& text_out);

std::vector<RunReport> parse_machine_report(std::istream& in);

// Per-position, per-label top-k listing from a conditional LM.
std::string dump_predictions(const std::vector<std::string>& sentence_tokens,
                             BiLmParams<float>& lm, const Vocabulary& vocab,
                             const std::vector<std::string>& label_names,
                             std::size_t k = 10);

double mean_of(const std::vector<double>& xs);
double stddev_of(const std::vector<double>& xs);

}  // namespace caug
