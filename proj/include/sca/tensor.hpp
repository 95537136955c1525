#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sca {

// Dense row-major tensor. Everything the networks need is rank <= 2; scalars
// are {1,1}.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  TensorT(int rows, int cols, T fill = T(0))
      : shape{rows, cols}, data(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("TensorT: nonpositive dims");
  }

  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  std::size_t size() const { return data.size(); }

  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  T scalar() const {
    if (size() != 1) throw std::logic_error("TensorT: not a scalar");
    return data[0];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << rows() << "x" << cols();
    return os.str();
  }
};

// out += a * b (optionally transposed operands); the hot loop of the library.
template <typename T>
void matmul_acc(const TensorT<T>& a, const TensorT<T>& b, bool ta, bool tb, TensorT<T>& out) {
  int m = ta ? a.cols() : a.rows();
  int k = ta ? a.rows() : a.cols();
  int kb = tb ? b.cols() : b.rows();
  int n = tb ? b.rows() : b.cols();
  if (k != kb)
    throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  if (out.rows() != m || out.cols() != n) throw std::logic_error("matmul: bad output shape");

  if (!ta && !tb) {
    // ikj order keeps the inner loop contiguous for vectorization.
    for (int i = 0; i < m; ++i) {
      T* orow = &out.data[static_cast<std::size_t>(i) * n];
      for (int p = 0; p < k; ++p) {
        T av = a.at(i, p);
        const T* brow = &b.data[static_cast<std::size_t>(p) * n];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else if (ta && !tb) {
    for (int p = 0; p < k; ++p) {
      const T* arow = &a.data[static_cast<std::size_t>(p) * m];
      const T* brow = &b.data[static_cast<std::size_t>(p) * n];
      for (int i = 0; i < m; ++i) {
        T av = arow[i];
        T* orow = &out.data[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (int i = 0; i < m; ++i) {
      const T* arow = &a.data[static_cast<std::size_t>(i) * k];
      T* orow = &out.data[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) {
        const T* brow = &b.data[static_cast<std::size_t>(j) * k];
        T acc = T(0);
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        orow[j] += acc;
      }
    }
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T acc = T(0);
        for (int p = 0; p < k; ++p) acc += a.at(p, i) * b.at(j, p);
        out.at(i, j) += acc;
      }
  }
}

// Named parameter: value plus accumulated gradient.
template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;

  ParamT() = default;
  ParamT(std::string n, TensorT<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols(), T(0)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

// Reverse-mode tape. A fresh tape is built per forward pass; backward walks
// the nodes in reverse creation order (which is a topological order) and
// accumulates into node grads and bound ParamT grads.
template <typename T>
class TapeT {
 public:
  using Id = int;

  Id constant(TensorT<T> v) { return push(std::move(v), nullptr, {}); }

  Id param(ParamT<T>& p) {
    Id id = push(p.value, nullptr, {});
    nodes_[id].bound = &p;
    return id;
  }

  const TensorT<T>& value(Id id) const { return nodes_.at(id).value; }
  const TensorT<T>& grad(Id id) const { return nodes_.at(id).grad; }
  std::size_t node_count() const { return nodes_.size(); }

  Id matmul(Id a, Id b, bool ta = false, bool tb = false) {
    const auto& A = val(a);
    const auto& B = val(b);
    int m = ta ? A.cols() : A.rows();
    int n = tb ? B.rows() : B.cols();
    TensorT<T> out(m, n, T(0));
    matmul_acc(A, B, ta, tb, out);
    return push(std::move(out), [this, a, b, ta, tb](Node& node) {
      // dA and dB follow from the four transpose variants.
      if (!ta)
        matmul_acc(node.grad, val(b), false, !tb, nodes_[a].grad);
      else
        matmul_acc(val(b), node.grad, tb, true, nodes_[a].grad);
      if (!tb)
        matmul_acc(val(a), node.grad, !ta, false, nodes_[b].grad);
      else
        matmul_acc(node.grad, val(a), true, ta, nodes_[b].grad);
    }, {a, b});
  }

  // Elementwise add; b may also be a single row broadcast over a's rows.
  Id add(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.same_shape(B)) {
      TensorT<T> out = A;
      for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
      return push(std::move(out), [this, a, b](Node& node) {
        acc(a, node.grad.data);
        acc(b, node.grad.data);
      }, {a, b});
    }
    if (B.rows() == 1 && B.cols() == A.cols()) {
      TensorT<T> out = A;
      for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) out.at(i, j) += B.at(0, j);
      return push(std::move(out), [this, a, b](Node& node) {
        acc(a, node.grad.data);
        auto& gb = nodes_[b].grad;
        for (int i = 0; i < node.grad.rows(); ++i)
          for (int j = 0; j < node.grad.cols(); ++j) gb.at(0, j) += node.grad.at(i, j);
      }, {a, b});
    }
    throw std::invalid_argument("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  }

  Id sub(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require_same(A, B, "sub");
    TensorT<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
    return push(std::move(out), [this, a, b](Node& node) {
      acc(a, node.grad.data);
      auto& gb = nodes_[b].grad;
      for (std::size_t i = 0; i < node.grad.size(); ++i) gb.data[i] -= node.grad.data[i];
    }, {a, b});
  }

  Id mul(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require_same(A, B, "mul");
    TensorT<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
    return push(std::move(out), [this, a, b](Node& node) {
      auto& ga = nodes_[a].grad;
      auto& gb = nodes_[b].grad;
      const auto& A2 = val(a);
      const auto& B2 = val(b);
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        ga.data[i] += node.grad.data[i] * B2.data[i];
        gb.data[i] += node.grad.data[i] * A2.data[i];
      }
    }, {a, b});
  }

  Id scale(Id a, T c) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x *= c;
    return push(std::move(out), [this, a, c](Node& node) {
      auto& ga = nodes_[a].grad;
      for (std::size_t i = 0; i < node.grad.size(); ++i) ga.data[i] += node.grad.data[i] * c;
    }, {a});
  }

  Id add_const(Id a, T c) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x += c;
    return push(std::move(out), [this, a](Node& node) { acc(a, node.grad.data); }, {a});
  }

  Id tanh_op(Id a) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = std::tanh(x);
    return unary_from_output(a, std::move(out), [](T y) { return T(1) - y * y; });
  }

  Id sigmoid_op(Id a) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = T(1) / (T(1) + std::exp(-x));
    return unary_from_output(a, std::move(out), [](T y) { return y * (T(1) - y); });
  }

  Id relu(Id a) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = std::max(x, T(0));
    return unary_from_output(a, std::move(out), [](T y) { return y > T(0) ? T(1) : T(0); });
  }

  Id exp_op(Id a) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = std::exp(x);
    return unary_from_output(a, std::move(out), [](T y) { return y; });
  }

  Id log_op(Id a) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = std::log(x);
    Id id = push(std::move(out), nullptr, {a});
    nodes_[id].backward = [this, a, id](Node& node) {
      auto& ga = nodes_[a].grad;
      const auto& A = val(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i)
        ga.data[i] += node.grad.data[i] / A.data[i];
    };
    return id;
  }

  // Row-wise softmax (stable; -1e9 masking underflows to exactly zero weight).
  Id softmax_rows(Id a) {
    TensorT<T> out = val(a);
    for (int i = 0; i < out.rows(); ++i) {
      T mx = out.at(i, 0);
      for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, out.at(i, j));
      T sum = T(0);
      for (int j = 0; j < out.cols(); ++j) {
        out.at(i, j) = std::exp(out.at(i, j) - mx);
        sum += out.at(i, j);
      }
      for (int j = 0; j < out.cols(); ++j) out.at(i, j) /= sum;
    }
    Id id = push(std::move(out), nullptr, {a});
    nodes_[id].backward = [this, a, id](Node& node) {
      const auto& Y = node.value;
      auto& ga = nodes_[a].grad;
      for (int i = 0; i < Y.rows(); ++i) {
        T dot = T(0);
        for (int j = 0; j < Y.cols(); ++j) dot += node.grad.at(i, j) * Y.at(i, j);
        for (int j = 0; j < Y.cols(); ++j)
          ga.at(i, j) += Y.at(i, j) * (node.grad.at(i, j) - dot);
      }
    };
    return id;
  }

  Id concat_cols(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.rows() != B.rows())
      throw std::invalid_argument("concat_cols: row mismatch " + A.shape_str() + " vs " + B.shape_str());
    TensorT<T> out(A.rows(), A.cols() + B.cols(), T(0));
    for (int i = 0; i < A.rows(); ++i) {
      for (int j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j);
      for (int j = 0; j < B.cols(); ++j) out.at(i, A.cols() + j) = B.at(i, j);
    }
    return push(std::move(out), [this, a, b](Node& node) {
      auto& ga = nodes_[a].grad;
      auto& gb = nodes_[b].grad;
      for (int i = 0; i < ga.rows(); ++i) {
        for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += node.grad.at(i, j);
        for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += node.grad.at(i, ga.cols() + j);
      }
    }, {a, b});
  }

  Id concat_rows(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.cols() != B.cols())
      throw std::invalid_argument("concat_rows: col mismatch " + A.shape_str() + " vs " + B.shape_str());
    TensorT<T> out(A.rows() + B.rows(), A.cols(), T(0));
    std::copy(A.data.begin(), A.data.end(), out.data.begin());
    std::copy(B.data.begin(), B.data.end(), out.data.begin() + A.size());
    return push(std::move(out), [this, a, b](Node& node) {
      auto& ga = nodes_[a].grad;
      auto& gb = nodes_[b].grad;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += node.grad.data[i];
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += node.grad.data[ga.size() + i];
    }, {a, b});
  }

  Id slice_rows(Id a, int r0, int r1) {
    const auto& A = val(a);
    if (r0 < 0 || r1 > A.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    TensorT<T> out(r1 - r0, A.cols(), T(0));
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < A.cols(); ++j) out.at(i - r0, j) = A.at(i, j);
    return push(std::move(out), [this, a, r0](Node& node) {
      auto& ga = nodes_[a].grad;
      for (int i = 0; i < node.grad.rows(); ++i)
        for (int j = 0; j < node.grad.cols(); ++j) ga.at(r0 + i, j) += node.grad.at(i, j);
    }, {a});
  }

  Id slice_cols(Id a, int c0, int c1) {
    const auto& A = val(a);
    if (c0 < 0 || c1 > A.cols() || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    TensorT<T> out(A.rows(), c1 - c0, T(0));
    for (int i = 0; i < A.rows(); ++i)
      for (int j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
    return push(std::move(out), [this, a, c0](Node& node) {
      auto& ga = nodes_[a].grad;
      for (int i = 0; i < node.grad.rows(); ++i)
        for (int j = 0; j < node.grad.cols(); ++j) ga.at(i, c0 + j) += node.grad.at(i, j);
    }, {a});
  }

  // Flattens to a single row (view-like reshape).
  Id flatten_row(Id a) {
    const auto& A = val(a);
    TensorT<T> out(1, static_cast<int>(A.size()), T(0));
    out.data = A.data;
    return push(std::move(out), [this, a](Node& node) { acc(a, node.grad.data); }, {a});
  }

  Id sum_all(Id a) {
    const auto& A = val(a);
    TensorT<T> out(1, 1, std::accumulate(A.data.begin(), A.data.end(), T(0)));
    return push(std::move(out), [this, a](Node& node) {
      auto& ga = nodes_[a].grad;
      T g = node.grad.data[0];
      for (auto& x : ga.data) x += g;
    }, {a});
  }

  Id mean_all(Id a) {
    const auto& A = val(a);
    T inv = T(1) / static_cast<T>(A.size());
    TensorT<T> out(1, 1, std::accumulate(A.data.begin(), A.data.end(), T(0)) * inv);
    return push(std::move(out), [this, a, inv](Node& node) {
      auto& ga = nodes_[a].grad;
      T g = node.grad.data[0] * inv;
      for (auto& x : ga.data) x += g;
    }, {a});
  }

  Id mse(Id a, Id b) {
    Id d = sub(a, b);
    return mean_all(mul(d, d));
  }

  Id clamp_op(Id a, T lo, T hi) {
    TensorT<T> out = val(a);
    for (auto& x : out.data) x = std::clamp(x, lo, hi);
    Id id = push(std::move(out), nullptr, {a});
    nodes_[id].backward = [this, a, lo, hi, id](Node& node) {
      auto& ga = nodes_[a].grad;
      const auto& A = val(a);
      for (std::size_t i = 0; i < node.grad.size(); ++i)
        if (A.data[i] > lo && A.data[i] < hi) ga.data[i] += node.grad.data[i];
    };
    return id;
  }

  // Elementwise min; the gradient follows the selected branch (a on ties).
  Id minimum(Id a, Id b) {
    const auto& A = val(a);
    const auto& B = val(b);
    require_same(A, B, "minimum");
    TensorT<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(A.data[i], B.data[i]);
    return push(std::move(out), [this, a, b](Node& node) {
      const auto& A2 = val(a);
      const auto& B2 = val(b);
      auto& ga = nodes_[a].grad;
      auto& gb = nodes_[b].grad;
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        if (A2.data[i] <= B2.data[i]) ga.data[i] += node.grad.data[i];
        else gb.data[i] += node.grad.data[i];
      }
    }, {a, b});
  }

  void backward(Id root) {
    if (val(root).size() != 1) throw std::logic_error("backward: root must be scalar");
    nodes_[root].grad.data[0] = T(1);
    for (Id id = root; id >= 0; --id) {
      Node& node = nodes_[id];
      if (node.backward) node.backward(node);
      if (node.bound) {
        auto& g = node.bound->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += node.grad.data[i];
      }
    }
  }

 private:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;
    std::function<void(Node&)> backward;
    ParamT<T>* bound = nullptr;
  };

  const TensorT<T>& val(Id id) const { return nodes_.at(id).value; }

  void acc(Id id, const std::vector<T>& g) {
    auto& ga = nodes_[id].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g[i];
  }

  template <typename F>
  Id unary_from_output(Id a, TensorT<T> out, F dydx_of_y) {
    Id id = push(std::move(out), nullptr, {a});
    nodes_[id].backward = [this, a, dydx_of_y, id](Node& node) {
      auto& ga = nodes_[a].grad;
      for (std::size_t i = 0; i < node.grad.size(); ++i)
        ga.data[i] += node.grad.data[i] * dydx_of_y(node.value.data[i]);
    };
    return id;
  }

  static void require_same(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                  " vs " + b.shape_str());
  }

  Id push(TensorT<T> v, std::function<void(Node&)> bw, std::vector<Id>) {
    Node node;
    node.grad = TensorT<T>(v.rows(), v.cols(), T(0));
    node.value = std::move(v);
    node.backward = std::move(bw);
    nodes_.push_back(std::move(node));
    return static_cast<Id>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using Param = ParamT<float>;

}  // namespace sca
