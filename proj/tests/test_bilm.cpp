#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <random>

#include "caug/bilm.hpp"
#include "caug/checkpoint.hpp"
#include "caug/gradcheck.hpp"
#include "synthetic.hpp"

using namespace caug;

namespace {

std::vector<int> random_sentence(std::size_t len, std::size_t vocab, std::mt19937& rng) {
  std::uniform_int_distribution<int> tok(4, static_cast<int>(vocab) - 1);
  std::vector<int> s(len);
  for (auto& t : s) t = tok(rng);
  return s;
}

BiLmDims tiny_dims() { return BiLmDims{4, 5, 6}; }

}  // namespace

TEST_CASE("contextual_states boundary and masking") {
  auto p = init_bilm<double>(12, 0, tiny_dims(), 1);

  SUBCASE("single-token sentence uses only BOS and EOS") {
    Graph<double> g;
    auto st = contextual_states(g, p, {7});
    CHECK(st.fwd.size() == 1);
    CHECK(st.bwd.size() == 1);
    // states must not depend on the token itself
    Graph<double> g2;
    auto st2 = contextual_states(g2, p, {9});
    CHECK(g.value(st.fwd[0]).data == g2.value(st2.fwd[0]).data);
    CHECK(g.value(st.bwd[0]).data == g2.value(st2.bwd[0]).data);
  }

  SUBCASE("changing w_i changes neither state at position i") {
    std::vector<int> s = {4, 5, 6, 7, 8};
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto mutated = s;
      mutated[i] = (s[i] == 4) ? 11 : 4;
      Graph<double> g1, g2;
      auto a = contextual_states(g1, p, s);
      auto b = contextual_states(g2, p, mutated);
      CHECK(g1.value(a.fwd[i]).data == g2.value(b.fwd[i]).data);
      CHECK(g1.value(a.bwd[i]).data == g2.value(b.bwd[i]).data);
    }
  }

  SUBCASE("changing w_{i-1} changes fwd state at i") {
    std::vector<int> s = {4, 5, 6};
    auto mutated = s;
    mutated[1] = 9;
    Graph<double> g1, g2;
    auto a = contextual_states(g1, p, s);
    auto b = contextual_states(g2, p, mutated);
    CHECK(g1.value(a.fwd[2]).data != g2.value(b.fwd[2]).data);
  }

  SUBCASE("empty sentence rejected") {
    Graph<double> g;
    CHECK_THROWS_AS(contextual_states(g, p, {}), std::invalid_argument);
  }
}

TEST_CASE("predict_distribution contracts") {
  auto p = init_bilm<double>(15, 0, tiny_dims(), 2);
  std::mt19937 rng(3);

  SUBCASE("sums to one for random params") {
    for (int trial = 0; trial < 10; ++trial) {
      ClozeContext ctx{random_sentence(5, 15, rng), 2, std::nullopt};
      auto d = predict_distribution(p, ctx);
      double sum = 0;
      for (double v : d) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("cloze independence: replacing w_i leaves the output unchanged") {
    for (int trial = 0; trial < 10; ++trial) {
      auto s = random_sentence(6, 15, rng);
      std::uniform_int_distribution<std::size_t> pos(0, 5);
      const std::size_t i = pos(rng);
      ClozeContext a{s, i, std::nullopt};
      auto mutated = s;
      mutated[i] = (s[i] + 1 - 4) % 11 + 4;
      ClozeContext b{mutated, i, std::nullopt};
      CHECK(predict_distribution(p, a) == predict_distribution(p, b));
    }
  }

  SUBCASE("label on unconditional model is a state error") {
    ClozeContext ctx{{4, 5}, 0, 1};
    CHECK_THROWS_AS(predict_distribution(p, ctx), std::logic_error);
  }

  SUBCASE("position out of range") {
    ClozeContext ctx{{4, 5}, 2, std::nullopt};
    CHECK_THROWS_AS(predict_distribution(p, ctx), std::invalid_argument);
  }
}

TEST_CASE("retrofit equivalence and contracts") {
  auto p = init_bilm<double>(15, 0, tiny_dims(), 4);
  auto before = p;
  retrofit_conditional(p, 3, 4, 9);

  SUBCASE("conditional equals unconditional for every label") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      auto s = random_sentence(5, 15, rng);
      for (std::size_t i = 0; i < s.size(); ++i) {
        auto base = predict_distribution(before, ClozeContext{s, i, std::nullopt});
        for (int y = 0; y < 3; ++y) {
          auto cond = predict_distribution(p, ClozeContext{s, i, y});
          for (std::size_t v = 0; v < base.size(); ++v)
            CHECK(std::abs(cond[v] - base[v]) < 1e-6);
        }
      }
    }
  }

  SUBCASE("original weights are bitwise unchanged") {
    CHECK(p.embed.value.data == before.embed.value.data);
    CHECK(p.fwd.wx.value.data == before.fwd.wx.value.data);
    CHECK(p.out_w.value.data == before.out_w.value.data);
    // old combiner rows are copied verbatim; new label rows are zero
    for (std::size_t i = 0; i < before.combiner_w.value.rows(); ++i)
      for (std::size_t j = 0; j < before.combiner_w.value.cols(); ++j)
        CHECK(p.combiner_w.value.at(i, j) == before.combiner_w.value.at(i, j));
    for (std::size_t i = before.combiner_w.value.rows(); i < p.combiner_w.value.rows(); ++i)
      for (std::size_t j = 0; j < p.combiner_w.value.cols(); ++j)
        CHECK(p.combiner_w.value.at(i, j) == 0.0);
  }

  SUBCASE("retrofit twice is a state error") {
    CHECK_THROWS_AS(retrofit_conditional(p, 3, 4, 9), std::logic_error);
  }

  SUBCASE("argument checks") {
    auto q = init_bilm<double>(15, 0, tiny_dims(), 4);
    CHECK_THROWS_AS(retrofit_conditional(q, 1, 4, 9), std::invalid_argument);
  }

  SUBCASE("missing label on conditional model is a state error") {
    CHECK_THROWS_AS(predict_distribution(p, ClozeContext{{4, 5}, 0, std::nullopt}),
                    std::logic_error);
    CHECK_THROWS_AS(predict_distribution(p, ClozeContext{{4, 5}, 0, 3}),
                    std::invalid_argument);
  }
}

TEST_CASE("lm_loss closed form and bounds") {
  const std::size_t vocab = 15;
  auto p = init_bilm<double>(vocab, 0, tiny_dims(), 6);

  SUBCASE("uniform-output model gives ln V") {
    auto q = p;
    q.out_w.value.fill(0);
    q.out_b.value.fill(0);
    CHECK(lm_loss(q, {4, 5, 6}) == doctest::Approx(std::log(double(vocab))));
  }

  SUBCASE("loss is nonnegative") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial)
      CHECK(lm_loss(p, random_sentence(4, vocab, rng)) >= 0.0);
  }
}

TEST_CASE("full lm_loss gradient passes finite differences") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    auto p = init_bilm<double>(8, 0, BiLmDims{3, 3, 4}, 100 + trial);
    retrofit_conditional(p, 2, 2, 50 + trial);
    std::vector<int> sentence = random_sentence(4, 8, rng);
    auto f = [&] {
      Graph<double> g;
      auto loss = lm_loss_node(g, p, sentence, trial % 2);
      g.backward(loss);
      return g.value(loss)[0];
    };
    CHECK(grad_check(f, p.all()) < 1e-4);
  }
}

TEST_CASE("pretrain reduces loss and is deterministic") {
  // 50-sentence toy corpus over a small vocabulary
  std::mt19937 rng(13);
  std::vector<std::vector<int>> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(random_sentence(5, 10, rng));

  LmTrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 1;
  auto initial = init_bilm<float>(10, 0, tiny_dims(), cfg.seed);
  double loss_before = 0, loss_after = 0;
  auto trained = pretrain<float>(corpus, 10, 0, tiny_dims(), cfg);
  for (const auto& s : corpus) {
    loss_before += lm_loss(initial, s);
    loss_after += lm_loss(trained, s);
  }
  CHECK(loss_after < loss_before);
  CHECK_FALSE(trained.conditional);

  auto trained2 = pretrain<float>(corpus, 10, 0, tiny_dims(), cfg);
  CHECK(trained.embed.value.data == trained2.embed.value.data);
  CHECK(trained.out_w.value.data == trained2.out_w.value.data);

  CHECK_THROWS_AS(pretrain<float>({}, 10, 0, tiny_dims(), cfg), std::invalid_argument);
}

TEST_CASE("pretrain memorizes a single repeated sentence") {
  std::vector<int> sentence = {4, 7, 5, 8};
  std::vector<std::vector<int>> corpus(20, sentence);
  LmTrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.learning_rate = 5e-3;
  cfg.seed = 2;
  auto p = pretrain<float>(corpus, 10, 0, tiny_dims(), cfg);
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    auto top = topk(p, ClozeContext{sentence, i, std::nullopt}, 1);
    CHECK(top[0].first == sentence[i]);
  }
}

TEST_CASE("finetune_conditional contracts") {
  auto p = init_bilm<float>(10, 0, tiny_dims(), 3);
  std::vector<LabeledExample> examples = {{{4, 5, 6}, 0}, {{5, 6, 7}, 1}};
  LmTrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 4;

  SUBCASE("unconditional params are a state error") {
    CHECK_THROWS_AS(finetune_conditional(p, examples, cfg), std::logic_error);
  }

  SUBCASE("loss decreases and training is deterministic") {
    retrofit_conditional(p, 2, 3, 5);
    double before = 0;
    for (const auto& ex : examples) before += lm_loss(p, ex.tokens, ex.label);
    auto q = p;
    cfg.epochs = 20;
    finetune_conditional(p, examples, cfg);
    double after = 0;
    for (const auto& ex : examples) after += lm_loss(p, ex.tokens, ex.label);
    CHECK(after < before);
    finetune_conditional(q, examples, cfg);
    CHECK(p.embed.value.data == q.embed.value.data);
    CHECK(p.label_embed.value.data == q.label_embed.value.data);
  }

  SUBCASE("label out of range") {
    retrofit_conditional(p, 2, 3, 5);
    std::vector<LabeledExample> bad = {{{4, 5}, 2}};
    CHECK_THROWS_AS(finetune_conditional(p, bad, cfg), std::invalid_argument);
  }
}

TEST_CASE("topk matches a full-sort oracle") {
  std::mt19937 rng(17);
  auto p = init_bilm<double>(20, 0, tiny_dims(), 19);
  for (int trial = 0; trial < 10; ++trial) {
    ClozeContext ctx{random_sentence(4, 20, rng), 1, std::nullopt};
    auto dist = predict_distribution(p, ctx);
    std::vector<int> order(dist.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist[size_t(a)] != dist[size_t(b)]) return dist[size_t(a)] > dist[size_t(b)];
      return a < b;
    });
    std::uniform_int_distribution<std::size_t> kk(1, 20);
    const std::size_t k = kk(rng);
    auto top = topk(p, ctx, k);
    CHECK(top.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(top[i].first == order[i]);
      CHECK(top[i].second == dist[static_cast<std::size_t>(order[i])]);
      if (i) CHECK(top[i].second <= top[i - 1].second);
    }
  }
  CHECK(topk(p, ClozeContext{{4}, 0, std::nullopt}, 1)[0].first ==
        topk(p, ClozeContext{{4}, 0, std::nullopt}, 20)[0].first);
  CHECK_THROWS_AS(topk(p, ClozeContext{{4}, 0, std::nullopt}, 0), std::invalid_argument);
  CHECK_THROWS_AS(topk(p, ClozeContext{{4}, 0, std::nullopt}, 21), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  auto p = init_bilm<float>(12, 777, tiny_dims(), 23);
  retrofit_conditional(p, 2, 3, 24);
  const std::string path = std::string(std::tmpnam(nullptr)) + ".ckpt";

  save_bilm(p, path);
  auto q = load_bilm(path, 777);
  CHECK(q.conditional);
  CHECK(q.num_labels == 2);
  for (std::size_t i = 0; i < p.all().size(); ++i) {
    CHECK(p.all()[i]->value.shape == q.all()[i]->value.shape);
    CHECK(p.all()[i]->value.data == q.all()[i]->value.data);
  }

  SUBCASE("vocab hash mismatch is rejected") {
    CHECK_THROWS_AS(load_bilm(path, 778), std::runtime_error);
  }

  SUBCASE("truncated file is a load error, not a crash") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const std::string trunc_path = path + ".trunc";
    std::ofstream out(trunc_path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_bilm(trunc_path, 777), std::runtime_error);
    std::remove(trunc_path.c_str());
  }

  SUBCASE("garbage file is a load error") {
    const std::string bad_path = path + ".bad";
    std::ofstream out(bad_path, std::ios::binary);
    out << "not a checkpoint at all";
    out.close();
    CHECK_THROWS_AS(load_bilm(bad_path, 777), std::runtime_error);
    std::remove(bad_path.c_str());
  }

  std::remove(path.c_str());
}
