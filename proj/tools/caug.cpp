// caug: contextual data augmentation toolkit.
//
// Subcommands cover the full pipeline: LM pretraining, label-conditional
// retrofit and fine-tuning, classifier training with on-the-fly augmentation,
// batch TSV augmentation, evaluation, grid search, prediction dumps, and
// report formatting. Every flag has a config-file equivalent (--config,
// key=value lines); command-line flags override file values.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "caug/augment.hpp"
#include "caug/bilm.hpp"
#include "caug/checkpoint.hpp"
#include "caug/classify.hpp"
#include "caug/corpus.hpp"
#include "caug/harness.hpp"
#include "caug/vocab.hpp"

namespace {

using namespace caug;

struct LmTrainOpts {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double dropout = 0.0;
  std::size_t max_len = 64;
  unsigned seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Minibatch size")->capture_default_str();
    cmd->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    cmd->add_option("--max-len", max_len, "Sentence truncation length")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
  }

  LmTrainConfig config() const {
    LmTrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.dropout = dropout;
    c.max_len = max_len;
    c.seed = seed;
    return c;
  }
};

// Shared classifier/experiment options for `train` and `gridsearch`.
struct ExperimentOpts {
  std::string train_path, test_path, valid_path, vocab_path;
  std::string lm_path, lexicon_path;
  std::string dataset_name = "dataset";
  std::string arch = "cnn";
  std::string augmentation = "none";
  std::string tau = "1";
  double replace_prob = 0.1;
  std::vector<unsigned> seeds = {0};
  double valid_fraction = 0.1;
  std::vector<std::size_t> filter_widths = {3, 4, 5};
  std::size_t filters_per_width = 8;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 16;
  std::size_t lstm_dim = 24;
  double dropout = 0.3;
  int max_epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int patience = 5;

  void attach(CLI::App* cmd, bool with_point_policy) {
    cmd->add_option("--train", train_path, "Training TSV (label<TAB>text)")->required();
    cmd->add_option("--test", test_path, "Test TSV");
    cmd->add_option("--valid", valid_path,
                    "Validation TSV (default: split from training data)");
    cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
    cmd->add_option("--lm", lm_path, "LM checkpoint for contextual augmentation");
    cmd->add_option("--lexicon", lexicon_path, "Synonym lexicon file");
    cmd->add_option("--dataset-name", dataset_name, "Dataset name used in reports")
        ->capture_default_str();
    cmd->add_option("--arch", arch, "Classifier architecture: cnn | rnn")
        ->capture_default_str();
    cmd->add_option("--augmentation", augmentation,
                    "none | synonym | context | context+label")
        ->capture_default_str();
    if (with_point_policy) {
      cmd->add_option("--tau", tau, "Sampling temperature: number, uniform, or greedy")
          ->capture_default_str();
      cmd->add_option("--replace-prob", replace_prob, "Per-position replacement probability")
          ->capture_default_str();
    }
    cmd->add_option("--seeds", seeds, "Seeds to train and average over")
        ->capture_default_str();
    cmd->add_option("--valid-fraction", valid_fraction,
                    "Validation fraction when --valid is absent")
        ->capture_default_str();
    cmd->add_option("--filter-widths", filter_widths, "CNN filter widths")
        ->capture_default_str();
    cmd->add_option("--filters-per-width", filters_per_width, "CNN filters per width")
        ->capture_default_str();
    cmd->add_option("--embed-dim", embed_dim, "Token embedding dimension")
        ->capture_default_str();
    cmd->add_option("--hidden-dim", hidden_dim, "CNN hidden layer dimension")
        ->capture_default_str();
    cmd->add_option("--lstm-dim", lstm_dim, "RNN state dimension")->capture_default_str();
    cmd->add_option("--dropout", dropout, "Classifier dropout rate")->capture_default_str();
    cmd->add_option("--epochs", max_epochs, "Maximum training epochs")
        ->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Minibatch size")->capture_default_str();
    cmd->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs")
        ->capture_default_str();
  }

  ExperimentConfig config() const {
    ExperimentConfig c;
    c.dataset_name = dataset_name;
    c.arch = arch;
    c.augmentation = augmentation;
    c.tau = tau;
    c.replace_prob = replace_prob;
    c.seeds = seeds;
    c.valid_fraction = valid_fraction;
    c.cnn.filter_widths = filter_widths;
    c.cnn.filters_per_width = filters_per_width;
    c.cnn.embed_dim = embed_dim;
    c.cnn.hidden_dim = hidden_dim;
    c.cnn.dropout = dropout;
    c.rnn.lstm_dim = lstm_dim;
    c.rnn.embed_dim = embed_dim;
    c.rnn.dropout = dropout;
    c.train.max_epochs = max_epochs;
    c.train.batch_size = batch_size;
    c.train.learning_rate = learning_rate;
    c.train.patience = patience;
    return c;
  }
};

// Relabels a dataset loaded from another file so label ids follow the
// reference label-name order.
std::vector<LabeledExample> remap_labels(const LabeledDataset& ds,
                                         const DatasetMeta& reference) {
  std::vector<int> mapping(ds.meta.label_names.size(), -1);
  for (std::size_t i = 0; i < ds.meta.label_names.size(); ++i) {
    const auto& name = ds.meta.label_names[i];
    for (std::size_t j = 0; j < reference.label_names.size(); ++j)
      if (reference.label_names[j] == name) mapping[i] = static_cast<int>(j);
    if (mapping[i] < 0)
      throw std::runtime_error("label '" + name + "' does not occur in the training data");
  }
  auto out = ds.examples;
  for (auto& ex : out) ex.label = mapping[static_cast<std::size_t>(ex.label)];
  return out;
}

struct LoadedExperiment {
  Vocabulary vocab;
  ExperimentData data;
  std::optional<BiLmParams<float>> lm;
  std::optional<SynonymLexicon> lexicon;
};

LoadedExperiment load_experiment_inputs(const ExperimentOpts& opts, bool need_test) {
  LoadedExperiment in;
  in.vocab = Vocabulary::load(opts.vocab_path);
  auto train_ds = load_labeled_tsv(opts.train_path, &in.vocab);
  in.data.train = train_ds.examples;
  in.data.meta = train_ds.meta;
  in.data.meta.name = opts.dataset_name;
  in.data.vocab_size = in.vocab.size();
  if (!opts.test_path.empty()) {
    in.data.test = remap_labels(load_labeled_tsv(opts.test_path, &in.vocab), train_ds.meta);
  } else if (need_test) {
    throw std::runtime_error("--test is required here");
  }
  if (!opts.valid_path.empty())
    in.data.valid = remap_labels(load_labeled_tsv(opts.valid_path, &in.vocab), train_ds.meta);
  if (!opts.lm_path.empty()) in.lm = load_bilm(opts.lm_path, in.vocab.hash());
  if (!opts.lexicon_path.empty())
    in.lexicon = load_synonym_lexicon(opts.lexicon_path, in.vocab);
  return in;
}

void append_machine_records(const std::string& path, const std::string& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open report file: " + path);
  out << records;
}

std::unique_ptr<TextClassifier<float>> make_classifier(const ExperimentConfig& cfg,
                                                       std::size_t vocab_size,
                                                       std::size_t num_classes,
                                                       unsigned seed) {
  if (cfg.arch == "cnn") {
    CnnConfig c = cfg.cnn;
    c.num_classes = num_classes;
    return std::make_unique<CnnClassifier<float>>(vocab_size, c, seed);
  }
  if (cfg.arch == "rnn") {
    RnnConfig c = cfg.rnn;
    c.num_classes = num_classes;
    return std::make_unique<RnnClassifier<float>>(vocab_size, c, seed);
  }
  throw std::runtime_error("unknown architecture '" + cfg.arch + "'");
}

int run_pretrain(const std::string& corpus_path, const std::string& vocab_out,
                 const std::string& out, int min_count, std::size_t max_vocab,
                 const BiLmDims& dims, const LmTrainOpts& topts) {
  auto tokens = load_plain_corpus_tokens(corpus_path);
  auto vocab = build_vocab(tokens, min_count, max_vocab);
  vocab.save(vocab_out);
  auto corpus = load_plain_corpus(corpus_path, vocab);
  auto lm = pretrain<float>(corpus, vocab.size(), vocab.hash(), dims, topts.config());
  save_bilm(lm, out);
  std::cout << "pretrained on " << corpus.size() << " sentences, vocab " << vocab.size()
            << " -> " << out << '\n';
  return 0;
}

int run_retrofit(const std::string& in, const std::string& vocab_path,
                 const std::string& out, std::size_t num_labels, std::size_t label_dim,
                 unsigned seed) {
  auto vocab = Vocabulary::load(vocab_path);
  auto lm = load_bilm(in, vocab.hash());
  retrofit_conditional(lm, num_labels, label_dim, seed);
  save_bilm(lm, out);
  std::cout << "retrofit with " << num_labels << " labels (dim " << label_dim << ") -> "
            << out << '\n';
  return 0;
}

int run_finetune(const std::string& in, const std::string& vocab_path,
                 const std::string& data_path, const std::string& out,
                 const LmTrainOpts& topts, bool freeze) {
  auto vocab = Vocabulary::load(vocab_path);
  auto lm = load_bilm(in, vocab.hash());
  auto ds = load_labeled_tsv(data_path, &vocab);
  auto cfg = topts.config();
  cfg.freeze_pretrained = freeze;
  finetune_conditional(lm, ds.examples, cfg);
  save_bilm(lm, out);
  std::cout << "fine-tuned on " << ds.examples.size() << " labeled sentences -> " << out
            << '\n';
  return 0;
}

int run_augment(const std::string& in, const std::string& out,
                const std::string& vocab_path, const std::string& lm_path,
                const std::string& lexicon_path, const std::string& tau,
                double replace_prob, bool use_label, unsigned seed) {
  auto vocab = Vocabulary::load(vocab_path);
  auto ds = load_labeled_tsv(in, &vocab);
  std::mt19937 rng(seed);
  auto augmented = ds.examples;

  if (!lm_path.empty()) {
    auto lm = load_bilm(lm_path, vocab.hash());
    AugmentPolicy policy{parse_temperature(tau), replace_prob, use_label};
    for (auto& ex : augmented) ex.tokens = contextual_augment(ex, lm, policy, rng);
  } else if (!lexicon_path.empty()) {
    auto lexicon = load_synonym_lexicon(lexicon_path, vocab);
    for (auto& ex : augmented)
      ex.tokens = synonym_augment(ex, lexicon, replace_prob, rng);
  } else {
    throw std::runtime_error("augment needs --lm or --lexicon");
  }
  save_labeled_tsv(out, augmented, ds.meta, vocab);
  std::cout << "augmented " << augmented.size() << " examples -> " << out << '\n';
  return 0;
}

int run_train(const ExperimentOpts& opts, const std::string& model_out,
              const std::string& report_path) {
  auto in = load_experiment_inputs(opts, /*need_test=*/!report_path.empty());
  auto cfg = opts.config();
  BiLmParams<float>* lm = in.lm ? &*in.lm : nullptr;
  const SynonymLexicon* lexicon = in.lexicon ? &*in.lexicon : nullptr;

  if (!in.data.test.empty()) {
    auto report = run_experiment(cfg, in.data, lm, lexicon);
    std::ostringstream machine;
    emit_table({report}, machine, std::cout);
    if (!report_path.empty()) append_machine_records(report_path, machine.str());
  }

  if (!model_out.empty()) {
    // The saved model is the first seed's run.
    const unsigned seed = cfg.seeds.front();
    std::vector<LabeledExample> train, valid;
    if (in.data.valid.has_value()) {
      train = in.data.train;
      valid = *in.data.valid;
    } else {
      std::tie(train, valid) = split_train_valid(in.data.train, cfg.valid_fraction, seed);
    }
    auto model = make_classifier(cfg, in.data.vocab_size,
                                 static_cast<std::size_t>(in.data.meta.num_classes), seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.augmenter = cfg.augmenter_kind();
    tc.policy = cfg.policy();
    auto history = train_classifier(*model, train, valid, tc, lm, lexicon);
    double best = 0.0;
    for (const auto& e : history) best = std::max(best, e.valid_accuracy);
    if (cfg.arch == "cnn")
      save_cnn(static_cast<CnnClassifier<float>&>(*model), in.vocab.hash(), model_out);
    else
      save_rnn(static_cast<RnnClassifier<float>&>(*model), in.vocab.hash(), model_out);
    std::cout << "saved model (seed " << seed << ", best valid accuracy " << best
              << ") -> " << model_out << '\n';
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& vocab_path,
             const std::string& data_path) {
  auto vocab = Vocabulary::load(vocab_path);
  auto model = load_classifier(model_path, vocab.hash());
  auto ds = load_labeled_tsv(data_path, &vocab);
  std::cout << "accuracy " << evaluate(*model, ds.examples) << " on " << ds.examples.size()
            << " examples\n";
  return 0;
}

int run_gridsearch(ExperimentOpts& opts, const std::vector<std::string>& tau_grid,
                   const std::vector<double>& replace_prob_grid,
                   const std::string& report_path) {
  auto in = load_experiment_inputs(opts, /*need_test=*/true);
  auto cfg = opts.config();
  cfg.tau_grid = tau_grid;
  cfg.replace_prob_grid = replace_prob_grid;
  BiLmParams<float>* lm = in.lm ? &*in.lm : nullptr;
  const SynonymLexicon* lexicon = in.lexicon ? &*in.lexicon : nullptr;

  auto result = grid_search(cfg, in.data, lm, lexicon);
  std::cout << "tau          replace_prob  valid_mean\n";
  for (const auto& cell : result.table)
    std::cout << std::left << std::setw(13) << cell.tau << std::setw(14)
              << cell.replace_prob << cell.valid_mean << '\n';
  std::cout << "selected: tau=" << result.best_tau
            << " replace_prob=" << result.best_replace_prob << '\n';
  std::ostringstream machine;
  emit_table({result.selected}, machine, std::cout);
  if (!report_path.empty()) append_machine_records(report_path, machine.str());
  return 0;
}

int run_dump_topk(const std::string& lm_path, const std::string& vocab_path,
                  const std::string& sentence, const std::vector<std::string>& labels,
                  std::size_t k) {
  auto vocab = Vocabulary::load(vocab_path);
  auto lm = load_bilm(lm_path, vocab.hash());
  std::cout << dump_predictions(tokenize(sentence), lm, vocab, labels, k);
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& machine_out) {
  std::vector<RunReport> reports;
  for (const auto& path : inputs) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open report file: " + path);
    auto part = parse_machine_report(f);
    reports.insert(reports.end(), part.begin(), part.end());
  }
  std::ostringstream machine;
  emit_table(reports, machine, std::cout);
  if (!machine_out.empty()) append_machine_records(machine_out, machine.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"caug: contextual data augmentation toolkit"};
  app.require_subcommand(1);
  // key=value lines under a [subcommand] section; given before the subcommand,
  // e.g. `caug --config run.cfg train`. Command-line flags override file values.
  app.set_config("--config", "", "Read options from a key=value config file");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pretrain the bi-directional cloze LM");
  std::string pre_corpus, pre_vocab_out, pre_out;
  int pre_min_count = 1;
  std::size_t pre_max_vocab = 20000;
  BiLmDims pre_dims;
  LmTrainOpts pre_topts;
  pre->add_option("--corpus", pre_corpus, "Plaintext corpus, one sentence per line")
      ->required();
  pre->add_option("--vocab-out", pre_vocab_out, "Where to write the vocabulary")
      ->required();
  pre->add_option("--out", pre_out, "Output LM checkpoint")->required();
  pre->add_option("--min-count", pre_min_count, "Minimum token frequency")
      ->capture_default_str();
  pre->add_option("--max-vocab", pre_max_vocab, "Maximum vocabulary size")
      ->capture_default_str();
  pre->add_option("--embed-dim", pre_dims.embed_dim, "Token embedding dimension")
      ->capture_default_str();
  pre->add_option("--lstm-dim", pre_dims.lstm_dim, "LSTM state dimension")
      ->capture_default_str();
  pre->add_option("--hidden-dim", pre_dims.hidden_dim, "Combiner hidden dimension")
      ->capture_default_str();
  pre_topts.attach(pre);

  // retrofit
  auto* retro = app.add_subcommand("retrofit", "Add a label pathway to a pretrained LM");
  std::string retro_in, retro_vocab, retro_out;
  std::size_t retro_labels = 2, retro_label_dim = 8;
  unsigned retro_seed = 0;
  retro->add_option("--in", retro_in, "Input LM checkpoint")->required();
  retro->add_option("--vocab", retro_vocab, "Vocabulary file")->required();
  retro->add_option("--out", retro_out, "Output LM checkpoint")->required();
  retro->add_option("--num-labels", retro_labels, "Number of class labels")->required();
  retro->add_option("--label-dim", retro_label_dim, "Label embedding dimension")
      ->capture_default_str();
  retro->add_option("--seed", retro_seed, "RNG seed for the label embedding")
      ->capture_default_str();

  // finetune-lm
  auto* ft = app.add_subcommand("finetune-lm", "Fine-tune a conditional LM on labeled data");
  std::string ft_in, ft_vocab, ft_data, ft_out;
  bool ft_freeze = false;
  LmTrainOpts ft_topts;
  ft->add_option("--in", ft_in, "Input LM checkpoint (retrofit)")->required();
  ft->add_option("--vocab", ft_vocab, "Vocabulary file")->required();
  ft->add_option("--data", ft_data, "Labeled TSV (label<TAB>text)")->required();
  ft->add_option("--out", ft_out, "Output LM checkpoint")->required();
  ft->add_flag("--freeze-pretrained", ft_freeze, "Train only the label pathway");
  ft_topts.attach(ft);

  // train
  auto* tr = app.add_subcommand("train", "Train a classifier, optionally with augmentation");
  ExperimentOpts tr_opts;
  std::string tr_model_out, tr_report;
  tr_opts.attach(tr, /*with_point_policy=*/true);
  tr->add_option("--out", tr_model_out, "Save the first seed's model checkpoint here");
  tr->add_option("--report", tr_report, "Append a machine-readable record here");

  // augment
  auto* aug = app.add_subcommand("augment", "Augment a labeled TSV into a new TSV");
  std::string aug_in, aug_out, aug_vocab, aug_lm, aug_lexicon, aug_tau = "1";
  double aug_rp = 0.1;
  bool aug_use_label = false;
  unsigned aug_seed = 0;
  aug->add_option("--in", aug_in, "Input TSV")->required();
  aug->add_option("--out", aug_out, "Output TSV")->required();
  aug->add_option("--vocab", aug_vocab, "Vocabulary file")->required();
  aug->add_option("--lm", aug_lm, "LM checkpoint for contextual augmentation");
  aug->add_option("--lexicon", aug_lexicon, "Synonym lexicon file");
  aug->add_option("--tau", aug_tau, "Sampling temperature: number, uniform, or greedy")
      ->capture_default_str();
  aug->add_option("--replace-prob", aug_rp, "Per-position replacement probability")
      ->capture_default_str();
  aug->add_flag("--use-label", aug_use_label, "Condition on each example's label");
  aug->add_option("--seed", aug_seed, "RNG seed")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a saved classifier on a labeled TSV");
  std::string ev_model, ev_vocab, ev_data;
  ev->add_option("--model", ev_model, "Classifier checkpoint")->required();
  ev->add_option("--vocab", ev_vocab, "Vocabulary file")->required();
  ev->add_option("--data", ev_data, "Labeled TSV")->required();

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch",
                                "Grid search over (tau, replace_prob) on validation data");
  ExperimentOpts gs_opts;
  gs_opts.seeds = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<std::string> gs_tau_grid = {"0.5", "1", "2", "uniform"};
  std::vector<double> gs_rp_grid = {0.05, 0.1, 0.2, 0.3};
  std::string gs_report;
  gs_opts.attach(gs, /*with_point_policy=*/false);
  gs->add_option("--tau-grid", gs_tau_grid, "Temperatures to search")
      ->capture_default_str();
  gs->add_option("--replace-prob-grid", gs_rp_grid, "Replacement probabilities to search")
      ->capture_default_str();
  gs->add_option("--report", gs_report, "Append the selected pair's record here");

  // dump-topk
  auto* dk = app.add_subcommand("dump-topk",
                                "Per-position, per-label top-k predictions for a sentence");
  std::string dk_lm, dk_vocab, dk_sentence;
  std::vector<std::string> dk_labels;
  std::size_t dk_k = 10;
  dk->add_option("--lm", dk_lm, "Conditional LM checkpoint")->required();
  dk->add_option("--vocab", dk_vocab, "Vocabulary file")->required();
  dk->add_option("--sentence", dk_sentence, "Sentence text")->required();
  dk->add_option("--labels", dk_labels, "Label names, one per class id")->required();
  dk->add_option("-k,--k", dk_k, "Candidates per position")->capture_default_str();

  // report
  auto* rp = app.add_subcommand("report", "Format machine-readable records as a table");
  std::vector<std::string> rp_in;
  std::string rp_out;
  rp->add_option("--in", rp_in, "Input record files (one JSON object per line)")
      ->required();
  rp->add_option("--out", rp_out, "Also append the merged records here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed())
      return run_pretrain(pre_corpus, pre_vocab_out, pre_out, pre_min_count, pre_max_vocab,
                          pre_dims, pre_topts);
    if (retro->parsed())
      return run_retrofit(retro_in, retro_vocab, retro_out, retro_labels, retro_label_dim,
                          retro_seed);
    if (ft->parsed()) return run_finetune(ft_in, ft_vocab, ft_data, ft_out, ft_topts, ft_freeze);
    if (tr->parsed()) return run_train(tr_opts, tr_model_out, tr_report);
    if (aug->parsed())
      return run_augment(aug_in, aug_out, aug_vocab, aug_lm, aug_lexicon, aug_tau, aug_rp,
                         aug_use_label, aug_seed);
    if (ev->parsed()) return run_eval(ev_model, ev_vocab, ev_data);
    if (gs->parsed()) return run_gridsearch(gs_opts, gs_tau_grid, gs_rp_grid, gs_report);
    if (dk->parsed()) return run_dump_topk(dk_lm, dk_vocab, dk_sentence, dk_labels, dk_k);
    if (rp->parsed()) return run_report(rp_in, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "caug: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
