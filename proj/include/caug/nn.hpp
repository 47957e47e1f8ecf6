#pragma once

#include <cmath>
#include <random>
#include <utility>

#include "caug/graph.hpp"

namespace caug {

// Glorot-uniform init for matrices: U(-a, a), a = sqrt(6/(fan_in+fan_out)).
template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor<T> t({fan_in, fan_out});
  for (auto& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
Tensor<T> small_uniform(std::size_t rows, std::size_t cols, double a, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-a, a);
  Tensor<T> t({rows, cols});
  for (auto& v : t.data) v = static_cast<T>(u(rng));
  return t;
}

// Standard LSTM cell. Gate layout along the 4H axis: input, forget,
// candidate, output. Forget-gate bias starts at +1.
template <typename T>
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter<T> wx;  // input_dim x 4H
  Parameter<T> wh;  // H x 4H
  Parameter<T> b;   // 1 x 4H

  LstmParams() = default;

  LstmParams(std::string prefix, std::size_t in_dim, std::size_t hid_dim, std::mt19937& rng)
      : input_dim(in_dim), hidden_dim(hid_dim) {
    wx = Parameter<T>(prefix + ".wx", glorot_uniform<T>(in_dim, 4 * hid_dim, rng));
    wh = Parameter<T>(prefix + ".wh", glorot_uniform<T>(hid_dim, 4 * hid_dim, rng));
    Tensor<T> bias({1, 4 * hid_dim});
    for (std::size_t j = hid_dim; j < 2 * hid_dim; ++j) bias.at(0, j) = T(1);
    b = Parameter<T>(prefix + ".b", std::move(bias));
  }
};

template <typename T>
struct LstmState {
  typename Graph<T>::Id h;
  typename Graph<T>::Id c;
};

template <typename T>
LstmState<T> lstm_initial_state(Graph<T>& g, std::size_t hidden_dim) {
  return {g.constant(Tensor<T>({1, hidden_dim})), g.constant(Tensor<T>({1, hidden_dim}))};
}

template <typename T>
LstmState<T> lstm_step(Graph<T>& g, typename Graph<T>::Id x_t, const LstmState<T>& state,
                       LstmParams<T>& p) {
  const std::size_t h = p.hidden_dim;
  auto wx = g.param(p.wx);
  auto wh = g.param(p.wh);
  auto b = g.param(p.b);
  auto gates = g.add_row(g.add(g.matmul(x_t, wx), g.matmul(state.h, wh)), b);
  auto i_gate = g.sigmoid(g.slice_cols(gates, 0, h));
  auto f_gate = g.sigmoid(g.slice_cols(gates, h, 2 * h));
  auto cand = g.tanh_(g.slice_cols(gates, 2 * h, 3 * h));
  auto o_gate = g.sigmoid(g.slice_cols(gates, 3 * h, 4 * h));
  auto c_next = g.add(g.mul(f_gate, state.c), g.mul(i_gate, cand));
  auto h_next = g.mul(o_gate, g.tanh_(c_next));
  return {h_next, c_next};
}

}  // namespace caug
