#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <memory>

#include "caug/bilm.hpp"
#include "caug/classify.hpp"
#include "caug/tensor.hpp"

namespace caug {

// Versioned named-tensor container, little-endian float32 payloads.
// Layout: magic "CAUGTNS1", u32 version, u64 vocab hash, model-kind string,
// metadata (string -> i64), then tensor records (name, dims, data).
struct Checkpoint {
  std::uint64_t vocab_hash = 0;
  std::string model_kind;
  std::map<std::string, std::int64_t> meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
  std::int64_t meta_value(const std::string& key) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

void save_bilm(const BiLmParams<float>& params, const std::string& path);
BiLmParams<float> load_bilm(const std::string& path, std::uint64_t expected_vocab_hash);

void save_cnn(CnnClassifier<float>& model, std::uint64_t vocab_hash,
              const std::string& path);
void save_rnn(RnnClassifier<float>& model, std::uint64_t vocab_hash,
              const std::string& path);

// Reconstructs a CNN or RNN classifier from its checkpoint.
std::unique_ptr<TextClassifier<float>> load_classifier(const std::string& path,
                                                       std::uint64_t expected_vocab_hash);

}  // namespace caug
