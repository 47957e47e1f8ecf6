#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace caug {

// Bijective token<->id map. Ids 0..3 are the reserved specials.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  Vocabulary();

  // Appends a token; returns its id. Throws on duplicates.
  int add(const std::string& token);

  // Id for a token, kUnk if absent.
  int id(const std::string& token) const;

  bool contains(const std::string& token) const;

  const std::string& token(int id) const;

  std::size_t size() const { return id_to_token_.size(); }

  // FNV-1a over the token list; used to bind checkpoints to a vocabulary.
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Lowercase + split on Unicode whitespace (ASCII whitespace in practice;
// inputs are assumed pre-tokenized with spaces).
std::vector<std::string> tokenize(const std::string& text);

// Specials plus up to max_size-4 most frequent tokens with count >= min_count,
// frequency-descending, ties by lexicographic token order.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       int min_count, std::size_t max_size);

}  // namespace caug
