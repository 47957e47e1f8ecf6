#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "caug/tensor.hpp"

namespace caug {

// A trainable tensor together with its accumulated gradient. Gradients
// accumulate across backward calls until zero_grad(), so a minibatch is
// several backward passes followed by one optimizer step.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.fill(T(0)); }
};

// Tape-style reverse-mode autodiff. Operations append nodes in topological
// order; backward walks the tape in reverse. A Graph lives for one
// forward/backward pass.
template <typename T>
class Graph {
 public:
  using Id = std::size_t;

  Id constant(Tensor<T> v) {
    return push(std::move(v), nullptr, {});
  }

  Id param(Parameter<T>& p) {
    return push(p.value, &p, {});
  }

  const Tensor<T>& value(Id id) const { return nodes_[id].value; }
  const Tensor<T>& grad(Id id) const { return nodes_[id].grad; }

  // y = a @ b, [n x k] @ [k x m] -> [n x m]
  Id matmul(Id a, Id b) {
    const auto& av = nodes_[a].value;
    const auto& bv = nodes_[b].value;
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
      throw std::invalid_argument("matmul: shapes " + shape_string(av) + " and " +
                                  shape_string(bv) + " do not conform");
    }
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    Tensor<T> out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = av.at(i, p);
        if (aip == T(0)) continue;
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) += aip * bv.at(p, j);
      }
    }
    return push(std::move(out), [a, b, n, k, m](Graph& g, Node& self) {
      const auto& av = g.nodes_[a].value;
      const auto& bv = g.nodes_[b].value;
      auto& ga = g.nodes_[a].grad;
      auto& gb = g.nodes_[b].grad;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const T go = self.grad.at(i, j);
          if (go == T(0)) continue;
          for (std::size_t p = 0; p < k; ++p) {
            ga.at(i, p) += go * bv.at(p, j);
            gb.at(p, j) += go * av.at(i, p);
          }
        }
      }
    }, {a, b});
  }

  Id add(Id a, Id b) {
    const auto& av = nodes_[a].value;
    const auto& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return push(std::move(out), [a, b](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g.nodes_[a].grad[i] += self.grad[i];
        g.nodes_[b].grad[i] += self.grad[i];
      }
    }, {a, b});
  }

  // Broadcast a [1 x k] bias row over every row of x.
  Id add_row(Id x, Id b) {
    const auto& xv = nodes_[x].value;
    const auto& bv = nodes_[b].value;
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
      throw std::invalid_argument("add_row: bias shape mismatch");
    }
    Tensor<T> out(xv.shape);
    const std::size_t n = xv.rows(), k = xv.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = xv.at(i, j) + bv.at(0, j);
    return push(std::move(out), [x, b, n, k](Graph& g, Node& self) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          g.nodes_[x].grad.at(i, j) += self.grad.at(i, j);
          g.nodes_[b].grad.at(0, j) += self.grad.at(i, j);
        }
      }
    }, {x, b});
  }

  Id mul(Id a, Id b) {
    const auto& av = nodes_[a].value;
    const auto& bv = nodes_[b].value;
    if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return push(std::move(out), [a, b](Graph& g, Node& self) {
      const auto& av = g.nodes_[a].value;
      const auto& bv = g.nodes_[b].value;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g.nodes_[a].grad[i] += self.grad[i] * bv[i];
        g.nodes_[b].grad[i] += self.grad[i] * av[i];
      }
    }, {a, b});
  }

  Id scale(Id x, T c) {
    Tensor<T> out(nodes_[x].value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = nodes_[x].value[i] * c;
    return push(std::move(out), [x, c](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g.nodes_[x].grad[i] += self.grad[i] * c;
    }, {x});
  }

  Id sigmoid(Id x) {
    Tensor<T> out(nodes_[x].value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const T v = nodes_[x].value[i];
      out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
    }
    return push(std::move(out), [x](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T s = self.value[i];
        g.nodes_[x].grad[i] += self.grad[i] * s * (T(1) - s);
      }
    }, {x});
  }

  Id tanh_(Id x) {
    Tensor<T> out(nodes_[x].value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(nodes_[x].value[i]);
    return push(std::move(out), [x](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T t = self.value[i];
        g.nodes_[x].grad[i] += self.grad[i] * (T(1) - t * t);
      }
    }, {x});
  }

  Id relu(Id x) {
    Tensor<T> out(nodes_[x].value.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(T(0), nodes_[x].value[i]);
    return push(std::move(out), [x](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (g.nodes_[x].value[i] > T(0)) g.nodes_[x].grad[i] += self.grad[i];
      }
    }, {x});
  }

  // Row-wise softmax with max subtraction.
  Id softmax_rows(Id x) {
    const auto& xv = nodes_[x].value;
    Tensor<T> out(xv.shape);
    const std::size_t n = xv.rows(), k = xv.cols();
    for (std::size_t i = 0; i < n; ++i) {
      T mx = xv.at(i, 0);
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xv.at(i, j));
      T sum = T(0);
      for (std::size_t j = 0; j < k; ++j) {
        out.at(i, j) = std::exp(xv.at(i, j) - mx);
        sum += out.at(i, j);
      }
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) /= sum;
    }
    return push(std::move(out), [x, n, k](Graph& g, Node& self) {
      for (std::size_t i = 0; i < n; ++i) {
        T dot = T(0);
        for (std::size_t j = 0; j < k; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
        for (std::size_t j = 0; j < k; ++j) {
          g.nodes_[x].grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
        }
      }
    }, {x});
  }

  // Mean over rows of -log softmax(logits)[target]. Fused for stability.
  Id cross_entropy_with_logits(Id logits, std::vector<int> targets) {
    const auto& xv = nodes_[logits].value;
    const std::size_t n = xv.rows(), k = xv.cols();
    if (targets.size() != n) throw std::invalid_argument("cross_entropy: target count mismatch");
    for (int t : targets) {
      if (t < 0 || static_cast<std::size_t>(t) >= k)
        throw std::invalid_argument("cross_entropy: target id out of range");
    }
    // Cache softmax probabilities for the backward pass.
    auto probs = std::make_shared<Tensor<T>>(xv.shape);
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      T mx = xv.at(i, 0);
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xv.at(i, j));
      T sum = T(0);
      for (std::size_t j = 0; j < k; ++j) sum += std::exp(xv.at(i, j) - mx);
      const T logz = mx + std::log(sum);
      loss += logz - xv.at(i, static_cast<std::size_t>(targets[i]));
      for (std::size_t j = 0; j < k; ++j)
        probs->at(i, j) = std::exp(xv.at(i, j) - logz);
    }
    loss /= static_cast<T>(n);
    Tensor<T> out({1}, {loss});
    return push(std::move(out),
                [logits, targets = std::move(targets), probs, n, k](Graph& g, Node& self) {
      const T go = self.grad[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          T d = probs->at(i, j);
          if (j == static_cast<std::size_t>(targets[i])) d -= T(1);
          g.nodes_[logits].grad.at(i, j) += go * d;
        }
      }
    }, {logits});
  }

  Id concat_cols(Id a, Id b) {
    const auto& av = nodes_[a].value;
    const auto& bv = nodes_[b].value;
    if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    const std::size_t n = av.rows(), ka = av.cols(), kb = bv.cols();
    Tensor<T> out({n, ka + kb});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < ka; ++j) out.at(i, j) = av.at(i, j);
      for (std::size_t j = 0; j < kb; ++j) out.at(i, ka + j) = bv.at(i, j);
    }
    return push(std::move(out), [a, b, n, ka, kb](Graph& g, Node& self) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < ka; ++j) g.nodes_[a].grad.at(i, j) += self.grad.at(i, j);
        for (std::size_t j = 0; j < kb; ++j) g.nodes_[b].grad.at(i, j) += self.grad.at(i, ka + j);
      }
    }, {a, b});
  }

  Id slice_cols(Id x, std::size_t begin, std::size_t end) {
    const auto& xv = nodes_[x].value;
    if (begin >= end || end > xv.cols()) throw std::invalid_argument("slice_cols: bad range");
    const std::size_t n = xv.rows(), k = end - begin;
    Tensor<T> out({n, k});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = xv.at(i, begin + j);
    return push(std::move(out), [x, begin, n, k](Graph& g, Node& self) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          g.nodes_[x].grad.at(i, begin + j) += self.grad.at(i, j);
    }, {x});
  }

  // Embedding lookup: rows of x selected by id, with scatter-add backward.
  Id gather_rows(Id x, std::vector<int> ids) {
    const auto& xv = nodes_[x].value;
    const std::size_t k = xv.cols();
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= xv.rows())
        throw std::invalid_argument("gather_rows: row id out of range");
    }
    Tensor<T> out({ids.size(), k});
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < k; ++j)
        out.at(i, j) = xv.at(static_cast<std::size_t>(ids[i]), j);
    return push(std::move(out), [x, ids = std::move(ids), k](Graph& g, Node& self) {
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < k; ++j)
          g.nodes_[x].grad.at(static_cast<std::size_t>(ids[i]), j) += self.grad.at(i, j);
    }, {x});
  }

  // Stack [1 x k] rows into [n x k].
  Id stack_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("stack_rows: empty input");
    const std::size_t k = nodes_[parts[0]].value.cols();
    Tensor<T> out({parts.size(), k});
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto& pv = nodes_[parts[i]].value;
      if (pv.rows() != 1 || pv.cols() != k)
        throw std::invalid_argument("stack_rows: part shape mismatch");
      for (std::size_t j = 0; j < k; ++j) out.at(i, j) = pv.at(0, j);
    }
    return push(std::move(out), [parts, k](Graph& g, Node& self) {
      for (std::size_t i = 0; i < parts.size(); ++i)
        for (std::size_t j = 0; j < k; ++j)
          g.nodes_[parts[i]].grad.at(0, j) += self.grad.at(i, j);
    }, parts);
  }

  // Same data, new shape; gradient passes straight through.
  Id reshape(Id x, std::vector<std::size_t> shape) {
    const auto& xv = nodes_[x].value;
    if (Tensor<T>::count(shape) != xv.size())
      throw std::invalid_argument("reshape: element count mismatch");
    Tensor<T> out(shape, xv.data);
    return push(std::move(out), [x](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g.nodes_[x].grad[i] += self.grad[i];
    }, {x});
  }

  // Column-wise max over rows: [n x k] -> [1 x k]. Gradient flows to the
  // first maximal row of each column.
  Id max_over_rows(Id x) {
    const auto& xv = nodes_[x].value;
    const std::size_t n = xv.rows(), k = xv.cols();
    Tensor<T> out({1, k});
    auto argmax = std::make_shared<std::vector<std::size_t>>(k, 0);
    for (std::size_t j = 0; j < k; ++j) {
      T best = xv.at(0, j);
      for (std::size_t i = 1; i < n; ++i) {
        if (xv.at(i, j) > best) {
          best = xv.at(i, j);
          (*argmax)[j] = i;
        }
      }
      out.at(0, j) = best;
    }
    return push(std::move(out), [x, argmax, k](Graph& g, Node& self) {
      for (std::size_t j = 0; j < k; ++j)
        g.nodes_[x].grad.at((*argmax)[j], j) += self.grad.at(0, j);
    }, {x});
  }

  // Inverted dropout: kept values scaled by 1/(1-rate) in train mode,
  // identity in eval mode.
  Id dropout(Id x, T rate, std::mt19937& rng, bool train) {
    if (rate < T(0) || rate >= T(1)) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!train || rate == T(0)) return x;
    const auto& xv = nodes_[x].value;
    auto mask = std::make_shared<std::vector<T>>(xv.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const T keep_scale = T(1) / (T(1) - rate);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      (*mask)[i] = (u(rng) < static_cast<double>(rate)) ? T(0) : keep_scale;
      out[i] = xv[i] * (*mask)[i];
    }
    return push(std::move(out), [x, mask](Graph& g, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g.nodes_[x].grad[i] += self.grad[i] * (*mask)[i];
    }, {x});
  }

  // Backward from a scalar root. Accumulates into bound parameter grads.
  void backward(Id root) {
    if (nodes_[root].value.size() != 1)
      throw std::invalid_argument("backward: root must be scalar");
    for (auto& n : nodes_) {
      n.grad = Tensor<T>(n.value.shape);
    }
    nodes_[root].grad[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
    }
    for (auto& n : nodes_) {
      if (!n.bound) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Parameter<T>* bound = nullptr;
    std::function<void(Graph&, Node&)> back;
  };

  Id push(Tensor<T> value, Parameter<T>* bound, std::vector<Id>) {
    Node n;
    n.value = std::move(value);
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  Id push(Tensor<T> value, std::function<void(Graph&, Node&)> back, std::vector<Id> parents) {
    for (Id p : parents) {
      if (p >= nodes_.size()) throw std::logic_error("graph: parent id out of range");
    }
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

// y = x W + b
template <typename T>
typename Graph<T>::Id affine(Graph<T>& g, typename Graph<T>::Id x,
                             typename Graph<T>::Id w, typename Graph<T>::Id b) {
  return g.add_row(g.matmul(x, w), b);
}

}  // namespace caug
