#include "caug/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace caug {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'U', 'G', 'T', 'N', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::int64_t read_i64(std::istream& in) {
  std::int64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint32_t len = read_u32(in);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

std::int64_t Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("checkpoint: missing metadata " + key);
  return it->second;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u64(out, vocab_hash);
  write_string(out, model_kind);
  write_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(out, k);
    write_i64(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.vocab_hash = read_u64(in);
  c.model_kind = read_string(in);
  const std::uint32_t n_meta = read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = read_string(in);
    c.meta[key] = read_i64(in);
  }
  const std::uint32_t n_tensors = read_u32(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = read_string(in);
    const std::uint32_t ndim = read_u32(in);
    if (ndim > 8) throw std::runtime_error("checkpoint: corrupt rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(read_u64(in));
    Tensor<float> t(shape);
    if (t.size() > (std::size_t(1) << 30))
      throw std::runtime_error("checkpoint: corrupt tensor size");
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float))))
      throw std::runtime_error("checkpoint: truncated tensor data");
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  return c;
}

void save_bilm(const BiLmParams<float>& params, const std::string& path) {
  Checkpoint c;
  c.vocab_hash = params.vocab_hash;
  c.model_kind = "bilm";
  c.meta["vocab_size"] = static_cast<std::int64_t>(params.vocab_size);
  c.meta["embed_dim"] = static_cast<std::int64_t>(params.dims.embed_dim);
  c.meta["lstm_dim"] = static_cast<std::int64_t>(params.dims.lstm_dim);
  c.meta["hidden_dim"] = static_cast<std::int64_t>(params.dims.hidden_dim);
  c.meta["conditional"] = params.conditional ? 1 : 0;
  c.meta["num_labels"] = static_cast<std::int64_t>(params.num_labels);
  c.meta["label_dim"] = static_cast<std::int64_t>(params.label_dim);
  auto& mutable_params = const_cast<BiLmParams<float>&>(params);
  for (auto* p : mutable_params.all()) c.tensors.emplace_back(p->name, p->value);
  c.save(path);
}

BiLmParams<float> load_bilm(const std::string& path, std::uint64_t expected_vocab_hash) {
  Checkpoint c = Checkpoint::load(path);
  if (c.model_kind != "bilm")
    throw std::runtime_error("load_bilm: checkpoint holds a " + c.model_kind + " model");
  if (c.vocab_hash != expected_vocab_hash)
    throw std::runtime_error("load_bilm: vocabulary hash mismatch");
  BiLmParams<float> p;
  p.vocab_size = static_cast<std::size_t>(c.meta_value("vocab_size"));
  p.dims.embed_dim = static_cast<std::size_t>(c.meta_value("embed_dim"));
  p.dims.lstm_dim = static_cast<std::size_t>(c.meta_value("lstm_dim"));
  p.dims.hidden_dim = static_cast<std::size_t>(c.meta_value("hidden_dim"));
  p.conditional = c.meta_value("conditional") != 0;
  p.num_labels = static_cast<std::size_t>(c.meta_value("num_labels"));
  p.label_dim = static_cast<std::size_t>(c.meta_value("label_dim"));
  p.vocab_hash = c.vocab_hash;

  auto load_param = [&c](Parameter<float>& dst, const std::string& name,
                         std::vector<std::size_t> shape) {
    const auto& t = c.tensor(name);
    if (t.shape != shape)
      throw std::runtime_error("load_bilm: dimension mismatch for " + name);
    dst = Parameter<float>(name, t);
  };

  const auto& d = p.dims;
  load_param(p.embed, "embed", {p.vocab_size, d.embed_dim});
  p.fwd.input_dim = d.embed_dim;
  p.fwd.hidden_dim = d.lstm_dim;
  load_param(p.fwd.wx, "fwd.wx", {d.embed_dim, 4 * d.lstm_dim});
  load_param(p.fwd.wh, "fwd.wh", {d.lstm_dim, 4 * d.lstm_dim});
  load_param(p.fwd.b, "fwd.b", {1, 4 * d.lstm_dim});
  p.bwd.input_dim = d.embed_dim;
  p.bwd.hidden_dim = d.lstm_dim;
  load_param(p.bwd.wx, "bwd.wx", {d.embed_dim, 4 * d.lstm_dim});
  load_param(p.bwd.wh, "bwd.wh", {d.lstm_dim, 4 * d.lstm_dim});
  load_param(p.bwd.b, "bwd.b", {1, 4 * d.lstm_dim});
  const std::size_t combiner_rows = 2 * d.lstm_dim + (p.conditional ? p.label_dim : 0);
  load_param(p.combiner_w, "combiner_w", {combiner_rows, d.hidden_dim});
  load_param(p.combiner_b, "combiner_b", {1, d.hidden_dim});
  load_param(p.out_w, "out_w", {d.hidden_dim, p.vocab_size});
  load_param(p.out_b, "out_b", {1, p.vocab_size});
  if (p.conditional)
    load_param(p.label_embed, "label_embed", {p.num_labels, p.label_dim});
  return p;
}

namespace {

std::int64_t encode_rate(double r) { return static_cast<std::int64_t>(std::llround(r * 1e9)); }
double decode_rate(std::int64_t v) { return static_cast<double>(v) / 1e9; }

void copy_tensors_in(TextClassifier<float>& model, const Checkpoint& c) {
  for (auto* p : model.parameters()) {
    const auto& t = c.tensor(p->name);
    if (t.shape != p->value.shape)
      throw std::runtime_error("checkpoint: dimension mismatch for " + p->name);
    p->value = t;
  }
}

}  // namespace

void save_cnn(CnnClassifier<float>& model, std::uint64_t vocab_hash,
              const std::string& path) {
  Checkpoint c;
  c.vocab_hash = vocab_hash;
  c.model_kind = "cnn";
  const auto& cfg = model.config();
  c.meta["vocab_size"] = static_cast<std::int64_t>(model.vocab_size());
  c.meta["embed_dim"] = static_cast<std::int64_t>(cfg.embed_dim);
  c.meta["hidden_dim"] = static_cast<std::int64_t>(cfg.hidden_dim);
  c.meta["filters_per_width"] = static_cast<std::int64_t>(cfg.filters_per_width);
  c.meta["num_classes"] = static_cast<std::int64_t>(cfg.num_classes);
  c.meta["dropout_e9"] = encode_rate(cfg.dropout);
  c.meta["num_widths"] = static_cast<std::int64_t>(cfg.filter_widths.size());
  for (std::size_t i = 0; i < cfg.filter_widths.size(); ++i)
    c.meta["width" + std::to_string(i)] = static_cast<std::int64_t>(cfg.filter_widths[i]);
  for (auto* p : model.parameters()) c.tensors.emplace_back(p->name, p->value);
  c.save(path);
}

void save_rnn(RnnClassifier<float>& model, std::uint64_t vocab_hash,
              const std::string& path) {
  Checkpoint c;
  c.vocab_hash = vocab_hash;
  c.model_kind = "rnn";
  const auto& cfg = model.config();
  c.meta["vocab_size"] = static_cast<std::int64_t>(model.vocab_size());
  c.meta["embed_dim"] = static_cast<std::int64_t>(cfg.embed_dim);
  c.meta["lstm_dim"] = static_cast<std::int64_t>(cfg.lstm_dim);
  c.meta["num_classes"] = static_cast<std::int64_t>(cfg.num_classes);
  c.meta["dropout_e9"] = encode_rate(cfg.dropout);
  for (auto* p : model.parameters()) c.tensors.emplace_back(p->name, p->value);
  c.save(path);
}

std::unique_ptr<TextClassifier<float>> load_classifier(const std::string& path,
                                                       std::uint64_t expected_vocab_hash) {
  Checkpoint c = Checkpoint::load(path);
  if (c.vocab_hash != expected_vocab_hash)
    throw std::runtime_error("load_classifier: vocabulary hash mismatch");
  const auto vocab_size = static_cast<std::size_t>(c.meta_value("vocab_size"));
  if (c.model_kind == "cnn") {
    CnnConfig cfg;
    cfg.embed_dim = static_cast<std::size_t>(c.meta_value("embed_dim"));
    cfg.hidden_dim = static_cast<std::size_t>(c.meta_value("hidden_dim"));
    cfg.filters_per_width = static_cast<std::size_t>(c.meta_value("filters_per_width"));
    cfg.num_classes = static_cast<std::size_t>(c.meta_value("num_classes"));
    cfg.dropout = decode_rate(c.meta_value("dropout_e9"));
    cfg.filter_widths.clear();
    const auto n = static_cast<std::size_t>(c.meta_value("num_widths"));
    for (std::size_t i = 0; i < n; ++i)
      cfg.filter_widths.push_back(static_cast<std::size_t>(c.meta_value("width" + std::to_string(i))));
    auto model = std::make_unique<CnnClassifier<float>>(vocab_size, cfg, 0);
    copy_tensors_in(*model, c);
    return model;
  }
  if (c.model_kind == "rnn") {
    RnnConfig cfg;
    cfg.embed_dim = static_cast<std::size_t>(c.meta_value("embed_dim"));
    cfg.lstm_dim = static_cast<std::size_t>(c.meta_value("lstm_dim"));
    cfg.num_classes = static_cast<std::size_t>(c.meta_value("num_classes"));
    cfg.dropout = decode_rate(c.meta_value("dropout_e9"));
    auto model = std::make_unique<RnnClassifier<float>>(vocab_size, cfg, 0);
    copy_tensors_in(*model, c);
    return model;
  }
  throw std::runtime_error("load_classifier: checkpoint holds a " + c.model_kind + " model");
}

}  // namespace caug
