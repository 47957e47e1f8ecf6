#include "caug/harness.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace caug {

Temperature parse_temperature(const std::string& s) {
  if (s == "uniform") return Temperature::uniform();
  if (s == "greedy") return Temperature::greedy();
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("temperature: cannot parse '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("temperature: cannot parse '" + s + "'");
  return Temperature::finite(v);
}

AugmentPolicy ExperimentConfig::policy() const {
  AugmentPolicy p;
  p.temperature = parse_temperature(tau);
  p.replace_prob = replace_prob;
  p.use_label = augmentation == "context+label";
  return p;
}

AugmenterKind ExperimentConfig::augmenter_kind() const {
  if (augmentation == "none") return AugmenterKind::none;
  if (augmentation == "synonym") return AugmenterKind::synonym;
  if (augmentation == "context" || augmentation == "context+label")
    return AugmenterKind::contextual;
  throw std::invalid_argument("harness: unknown augmentation '" + augmentation + "'");
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

namespace {

std::unique_ptr<TextClassifier<float>> make_model(const ExperimentConfig& cfg,
                                                  const ExperimentData& data,
                                                  unsigned seed) {
  if (cfg.arch == "cnn") {
    CnnConfig c = cfg.cnn;
    c.num_classes = static_cast<std::size_t>(data.meta.num_classes);
    return std::make_unique<CnnClassifier<float>>(data.vocab_size, c, seed);
  }
  if (cfg.arch == "rnn") {
    RnnConfig c = cfg.rnn;
    c.num_classes = static_cast<std::size_t>(data.meta.num_classes);
    return std::make_unique<RnnClassifier<float>>(data.vocab_size, c, seed);
  }
  throw std::invalid_argument("harness: unknown architecture '" + cfg.arch + "'");
}

void check_dependencies(const ExperimentConfig& cfg, BiLmParams<float>* lm,
                        const SynonymLexicon* lexicon) {
  const auto kind = cfg.augmenter_kind();
  if (kind == AugmenterKind::contextual) {
    if (lm == nullptr)
      throw std::invalid_argument("harness: contextual augmentation needs an LM checkpoint");
    if (cfg.augmentation == "context+label" && !lm->conditional)
      throw std::invalid_argument("harness: context+label needs a conditional LM");
  }
  if (kind == AugmenterKind::synonym && lexicon == nullptr)
    throw std::invalid_argument("harness: synonym augmentation needs a lexicon");
}

// Ordering value for tie-breaks: greedy is the tau->0 limit, uniform the
// tau->infinity limit.
double tau_order(const std::string& s) {
  auto t = parse_temperature(s);
  if (t.mode == Temperature::Mode::greedy) return 0.0;
  if (t.mode == Temperature::Mode::uniform) return std::numeric_limits<double>::infinity();
  return t.tau;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                         BiLmParams<float>* lm, const SynonymLexicon* lexicon) {
  if (cfg.seeds.empty()) throw std::invalid_argument("harness: seed list is empty");
  check_dependencies(cfg, lm, lexicon);
  const auto t0 = std::chrono::steady_clock::now();

  RunReport report;
  report.model = cfg.arch;
  report.augmentation = cfg.augmentation;
  report.dataset = cfg.dataset_name;
  report.tau = cfg.tau;
  report.replace_prob = cfg.replace_prob;

  for (unsigned seed : cfg.seeds) {
    std::vector<LabeledExample> train, valid;
    if (data.valid.has_value()) {
      train = data.train;
      valid = *data.valid;
    } else {
      std::tie(train, valid) = split_train_valid(data.train, cfg.valid_fraction, seed);
    }
    auto model = make_model(cfg, data, seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.augmenter = cfg.augmenter_kind();
    tc.policy = cfg.policy();
    auto history = train_classifier(*model, train, valid, tc, lm, lexicon);
    double best_valid = 0.0;
    for (const auto& e : history) best_valid = std::max(best_valid, e.valid_accuracy);
    report.seed_valid_accuracies.push_back(best_valid);
    report.seed_test_accuracies.push_back(evaluate(*model, data.test));
    report.histories.push_back(std::move(history));
  }
  report.mean = mean_of(report.seed_test_accuracies);
  report.stddev = stddev_of(report.seed_test_accuracies);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

GridResult grid_search(const ExperimentConfig& cfg, const ExperimentData& data,
                       BiLmParams<float>* lm, const SynonymLexicon* lexicon) {
  if (cfg.tau_grid.empty() || cfg.replace_prob_grid.empty())
    throw std::invalid_argument("grid_search: empty grid");
  GridResult result;
  double best = -1.0;
  // Test accuracy is computed only for the selected pair, after selection.
  for (const auto& tau : cfg.tau_grid) {
    for (double rp : cfg.replace_prob_grid) {
      ExperimentConfig cell_cfg = cfg;
      cell_cfg.tau = tau;
      cell_cfg.replace_prob = rp;
      ExperimentData valid_only = data;
      auto report = run_experiment(cell_cfg, valid_only, lm, lexicon);
      GridCell cell{tau, rp, mean_of(report.seed_valid_accuracies)};
      result.table.push_back(cell);
      const bool improves =
          cell.valid_mean > best ||
          (cell.valid_mean == best &&
           (rp < result.best_replace_prob ||
            (rp == result.best_replace_prob &&
             tau_order(tau) < tau_order(result.best_tau))));
      if (improves) {
        best = cell.valid_mean;
        result.best_tau = tau;
        result.best_replace_prob = rp;
      }
    }
  }
  ExperimentConfig final_cfg = cfg;
  final_cfg.tau = result.best_tau;
  final_cfg.replace_prob = result.best_replace_prob;
  result.selected = run_experiment(final_cfg, data, lm, lexicon);
  return result;
}

void emit_table(const std::vector<RunReport>& reports, std::ostream& machine_out,
                std::ostream& text_out) {
  if (reports.empty()) throw std::invalid_argument("emit_table: no reports");
  for (const auto& r : reports) {
    nlohmann::json rec{{"model", r.model},
                       {"augmentation", r.augmentation},
                       {"dataset", r.dataset},
                       {"tau", r.tau},
                       {"replace_prob", r.replace_prob},
                       {"seed_count", r.seed_test_accuracies.size()},
                       {"mean_accuracy", r.mean},
                       {"std_accuracy", r.stddev}};
    machine_out << rec.dump() << '\n';
  }

  // Rows are (model, augmentation) pairs, columns are datasets, as in a
  // benchmark summary table.
  std::vector<std::string> datasets;
  std::vector<std::pair<std::string, std::string>> rows;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cells;
  for (const auto& r : reports) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
      datasets.push_back(r.dataset);
    auto key = std::make_pair(r.model, r.augmentation);
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    cells[key][r.dataset] = r.mean * 100.0;
  }

  text_out << std::left << std::setw(24) << "model";
  for (const auto& d : datasets) text_out << std::right << std::setw(12) << d;
  text_out << std::right << std::setw(12) << "Avg." << '\n';
  for (const auto& row : rows) {
    text_out << std::left << std::setw(24) << (row.first + " w/ " + row.second);
    std::vector<double> row_values;
    for (const auto& d : datasets) {
      auto it = cells[row].find(d);
      if (it == cells[row].end()) {
        text_out << std::right << std::setw(12) << "-";
      } else {
        text_out << std::right << std::setw(12) << std::fixed << std::setprecision(2)
                 << it->second;
        row_values.push_back(it->second);
      }
    }
    text_out << std::right << std::setw(12) << std::fixed << std::setprecision(2)
             << (row_values.empty() ? 0.0 : mean_of(row_values)) << '\n';
  }
}

std::vector<RunReport> parse_machine_report(std::istream& in) {
  std::vector<RunReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = nlohmann::json::parse(line);
    RunReport r;
    r.model = rec.at("model").get<std::string>();
    r.augmentation = rec.at("augmentation").get<std::string>();
    r.dataset = rec.at("dataset").get<std::string>();
    r.tau = rec.at("tau").get<std::string>();
    r.replace_prob = rec.at("replace_prob").get<double>();
    r.seed_test_accuracies.resize(rec.at("seed_count").get<std::size_t>());
    r.mean = rec.at("mean_accuracy").get<double>();
    r.stddev = rec.at("std_accuracy").get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string dump_predictions(const std::vector<std::string>& sentence_tokens,
                             BiLmParams<float>& lm, const Vocabulary& vocab,
                             const std::vector<std::string>& label_names,
                             std::size_t k) {
  if (sentence_tokens.empty())
    throw std::invalid_argument("dump_predictions: empty sentence");
  if (!lm.conditional)
    throw std::logic_error("dump_predictions: needs a conditional LM checkpoint");
  if (label_names.size() != lm.num_labels)
    throw std::invalid_argument("dump_predictions: label count mismatch");

  ClozeContext ctx;
  ctx.sentence = vocab.encode(sentence_tokens);
  std::ostringstream out;
  for (std::size_t i = 0; i < ctx.sentence.size(); ++i) {
    ctx.position = i;
    out << "position " << i << " (" << sentence_tokens[i] << ")\n";
    for (std::size_t y = 0; y < label_names.size(); ++y) {
      ctx.label = static_cast<int>(y);
      out << "  " << std::left << std::setw(10) << label_names[y] << ":";
      for (const auto& [id, p] : topk(lm, ctx, k)) {
        out << ' ' << vocab.token(id) << " (" << std::fixed << std::setprecision(3) << p
            << ")";
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace caug
