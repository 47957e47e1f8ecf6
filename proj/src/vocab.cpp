#include "caug/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace caug {

namespace {
const char* kSpecials[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecials) add(s);
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  if (!inserted) throw std::invalid_argument("vocabulary: duplicate token '" + token + "'");
  id_to_token_.push_back(token);
  return it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw std::out_of_range("vocabulary: id out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& tok : id_to_token_) {
    for (unsigned char c : tok) mix(c);
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
  Vocabulary v;
  std::string line;
  std::size_t idx = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (idx < 4) {
      if (line != kSpecials[idx])
        throw std::runtime_error("vocabulary: line " + std::to_string(idx + 1) +
                                 " must be " + kSpecials[idx]);
    } else {
      v.add(line);
    }
    ++idx;
  }
  if (idx < 4) throw std::runtime_error("vocabulary: file is missing special tokens");
  return v;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       int min_count, std::size_t max_size) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  if (max_size < 4) throw std::invalid_argument("build_vocab: max_size must be >= 4");
  std::map<std::string, long> counts;  // ordered map gives the lexicographic tie-break
  for (const auto& sent : corpus)
    for (const auto& tok : sent) ++counts[tok];

  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (const auto& [tok, count] : ranked) {
    if (count < min_count) continue;
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

}  // namespace caug
