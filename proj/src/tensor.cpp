// Copyright 2026 The longsv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "longsv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "longsv/common.hpp"

namespace longsv {

namespace {

size_t shape_size(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Var make_node(std::vector<int> shape, std::vector<Var> parents) {
  require(!shape.empty() && shape.size() <= 3, Err::ShapeMismatch,
          "rank must be 1..3");
  for (int d : shape)
    require(d > 0, Err::ShapeMismatch, "non-positive dim in " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value.assign(shape_size(n->shape), 0.0);
  n->grad.assign(n->value.size(), 0.0);
  n->parents = std::move(parents);
  return n;
}

bool same_shape(const Var& a, const Var& b) { return a->shape == b->shape; }

// Views a rank-2 tensor as independent 1-d slices along one axis:
// axis=1 gives R row slices of length C, axis=0 gives C column slices.
struct Slices {
  int count, len, stride, base_step;
};

Slices slices2(const std::vector<int>& shape, int axis) {
  require(shape.size() == 2, Err::ShapeMismatch, "rank-2 tensor expected");
  require(axis == 0 || axis == 1, Err::ShapeMismatch, "axis must be 0 or 1");
  int r = shape[0], c = shape[1];
  if (axis == 1) return {r, c, 1, c};
  return {c, r, c, 1};
}

}  // namespace

Var leaf(std::vector<int> shape, bool requires_grad) {
  Var v = make_node(std::move(shape), {});
  v->requires_grad = requires_grad;
  return v;
}

Var leaf(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  Var v = leaf(std::move(shape), requires_grad);
  require(data.size() == v->size(), Err::ShapeMismatch,
          "data length does not match shape");
  v->value = std::move(data);
  return v;
}

Var constant(std::vector<int> shape, std::vector<double> data) {
  return leaf(std::move(shape), std::move(data), false);
}

Var add(Var a, Var b) {
  if (same_shape(a, b)) {
    Var out = make_node(a->shape, {a, b});
    for (size_t i = 0; i < out->size(); ++i)
      out->value[i] = a->value[i] + b->value[i];
    Node* o = out.get();
    out->backprop = [o, a, b] {
      for (size_t i = 0; i < o->size(); ++i) {
        a->grad[i] += o->grad[i];
        b->grad[i] += o->grad[i];
      }
    };
    return out;
  }
  require(b->rank() == 1 && a->shape.back() == b->shape[0], Err::ShapeMismatch,
          "add: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  int c = b->shape[0];
  size_t rows = a->size() / static_cast<size_t>(c);
  Var out = make_node(a->shape, {a, b});
  for (size_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j)
      out->value[r * c + j] = a->value[r * c + j] + b->value[j];
  Node* o = out.get();
  out->backprop = [o, a, b, rows, c] {
    for (size_t r = 0; r < rows; ++r)
      for (int j = 0; j < c; ++j) {
        a->grad[r * c + j] += o->grad[r * c + j];
        b->grad[j] += o->grad[r * c + j];
      }
  };
  return out;
}

Var sub(Var a, Var b) {
  require(same_shape(a, b), Err::ShapeMismatch,
          "sub: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  Var out = make_node(a->shape, {a, b});
  for (size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] - b->value[i];
  Node* o = out.get();
  out->backprop = [o, a, b] {
    for (size_t i = 0; i < o->size(); ++i) {
      a->grad[i] += o->grad[i];
      b->grad[i] -= o->grad[i];
    }
  };
  return out;
}

Var mul(Var a, Var b) {
  require(same_shape(a, b), Err::ShapeMismatch,
          "mul: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  Var out = make_node(a->shape, {a, b});
  for (size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] * b->value[i];
  Node* o = out.get();
  out->backprop = [o, a, b] {
    for (size_t i = 0; i < o->size(); ++i) {
      a->grad[i] += o->grad[i] * b->value[i];
      b->grad[i] += o->grad[i] * a->value[i];
    }
  };
  return out;
}

Var mul_scalar(Var a, double s) {
  Var out = make_node(a->shape, {a});
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * s;
  Node* o = out.get();
  out->backprop = [o, a, s] {
    for (size_t i = 0; i < o->size(); ++i) a->grad[i] += o->grad[i] * s;
  };
  return out;
}

Var add_const(Var a, double c) {
  Var out = make_node(a->shape, {a});
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] + c;
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < o->size(); ++i) a->grad[i] += o->grad[i];
  };
  return out;
}

Var relu(Var a) {
  Var out = make_node(a->shape, {a});
  for (size_t i = 0; i < out->size(); ++i)
    out->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < o->size(); ++i)
      if (a->value[i] > 0.0) a->grad[i] += o->grad[i];
  };
  return out;
}

Var tanh(Var a) {
  Var out = make_node(a->shape, {a});
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = std::tanh(a->value[i]);
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < o->size(); ++i)
      a->grad[i] += o->grad[i] * (1.0 - o->value[i] * o->value[i]);
  };
  return out;
}

Var sqrt(Var a) {
  Var out = make_node(a->shape, {a});
  for (size_t i = 0; i < out->size(); ++i) {
    require(a->value[i] >= 0.0, Err::BadRange, "sqrt of negative value");
    out->value[i] = std::sqrt(a->value[i]);
  }
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < o->size(); ++i)
      if (o->value[i] > 0.0) a->grad[i] += o->grad[i] * 0.5 / o->value[i];
  };
  return out;
}

Var matmul(Var a, Var b) {
  if (a->rank() == 2 && b->rank() == 2) {
    int m = a->shape[0], k = a->shape[1];
    require(b->shape[0] == k, Err::ShapeMismatch,
            "matmul: " + shape_str(a->shape) + " x " + shape_str(b->shape));
    int n = b->shape[1];
    Var out = make_node({m, n}, {a, b});
    const double* av = a->value.data();
    const double* bv = b->value.data();
    double* cv = out->value.data();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double s = av[i * k + p];
        if (s == 0.0) continue;
        const double* brow = bv + p * n;
        double* crow = cv + i * n;
        for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    Node* o = out.get();
    out->backprop = [o, a, b, m, k, n] {
      const double* g = o->grad.data();
      const double* av2 = a->value.data();
      const double* bv2 = b->value.data();
      double* da = a->grad.data();
      double* db = b->grad.data();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double* grow = g + i * n;
          const double* brow = bv2 + p * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          da[i * k + p] += acc;
        }
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double s = av2[i * k + p];
          if (s == 0.0) continue;
          const double* grow = g + i * n;
          double* dbrow = db + p * n;
          for (int j = 0; j < n; ++j) dbrow[j] += s * grow[j];
        }
    };
    return out;
  }
  if (a->rank() == 2 && b->rank() == 1) {
    int m = a->shape[0], k = a->shape[1];
    require(b->shape[0] == k, Err::ShapeMismatch,
            "matmul: " + shape_str(a->shape) + " x " + shape_str(b->shape));
    Var out = make_node({m}, {a, b});
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a->value[i * k + p] * b->value[p];
      out->value[i] = acc;
    }
    Node* o = out.get();
    out->backprop = [o, a, b, m, k] {
      for (int i = 0; i < m; ++i) {
        double g = o->grad[i];
        if (g == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          a->grad[i * k + p] += g * b->value[p];
          b->grad[p] += g * a->value[i * k + p];
        }
      }
    };
    return out;
  }
  if (a->rank() == 1 && b->rank() == 2) {
    int k = a->shape[0];
    require(b->shape[0] == k, Err::ShapeMismatch,
            "matmul: " + shape_str(a->shape) + " x " + shape_str(b->shape));
    int n = b->shape[1];
    Var out = make_node({n}, {a, b});
    for (int p = 0; p < k; ++p) {
      double s = a->value[p];
      if (s == 0.0) continue;
      const double* brow = b->value.data() + p * n;
      for (int j = 0; j < n; ++j) out->value[j] += s * brow[j];
    }
    Node* o = out.get();
    out->backprop = [o, a, b, k, n] {
      for (int p = 0; p < k; ++p) {
        const double* brow = b->value.data() + p * n;
        double* dbrow = b->grad.data() + p * n;
        double acc = 0.0;
        double s = a->value[p];
        for (int j = 0; j < n; ++j) {
          acc += o->grad[j] * brow[j];
          dbrow[j] += s * o->grad[j];
        }
        a->grad[p] += acc;
      }
    };
    return out;
  }
  fail(Err::ShapeMismatch, "matmul: unsupported ranks " +
                               shape_str(a->shape) + " x " + shape_str(b->shape));
}

Var transpose(Var a) {
  require(a->rank() == 2, Err::ShapeMismatch, "transpose: rank-2 expected");
  int r = a->shape[0], c = a->shape[1];
  Var out = make_node({c, r}, {a});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->value[j * r + i] = a->value[i * c + j];
  Node* o = out.get();
  out->backprop = [o, a, r, c] {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) a->grad[i * c + j] += o->grad[j * r + i];
  };
  return out;
}

Var reshape(Var a, std::vector<int> shape) {
  require(shape_size(shape) == a->size(), Err::ShapeMismatch,
          "reshape: size mismatch " + shape_str(a->shape) + " -> " +
              shape_str(shape));
  Var out = make_node(std::move(shape), {a});
  out->value = a->value;
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < o->size(); ++i) a->grad[i] += o->grad[i];
  };
  return out;
}

Var concat(Var a, Var b, int axis) {
  if (a->rank() == 1 && b->rank() == 1) {
    require(axis == 0, Err::ShapeMismatch, "concat: axis 0 expected for rank-1");
    int n = a->shape[0], m = b->shape[0];
    Var out = make_node({n + m}, {a, b});
    std::copy(a->value.begin(), a->value.end(), out->value.begin());
    std::copy(b->value.begin(), b->value.end(), out->value.begin() + n);
    Node* o = out.get();
    out->backprop = [o, a, b, n, m] {
      for (int i = 0; i < n; ++i) a->grad[i] += o->grad[i];
      for (int i = 0; i < m; ++i) b->grad[i] += o->grad[n + i];
    };
    return out;
  }
  require(a->rank() == 2 && b->rank() == 2, Err::ShapeMismatch,
          "concat: matching ranks expected");
  if (axis == 0) {
    require(a->shape[1] == b->shape[1], Err::ShapeMismatch, "concat: col mismatch");
    int c = a->shape[1];
    Var out = make_node({a->shape[0] + b->shape[0], c}, {a, b});
    std::copy(a->value.begin(), a->value.end(), out->value.begin());
    std::copy(b->value.begin(), b->value.end(),
              out->value.begin() + a->value.size());
    Node* o = out.get();
    size_t na = a->size();
    out->backprop = [o, a, b, na] {
      for (size_t i = 0; i < na; ++i) a->grad[i] += o->grad[i];
      for (size_t i = 0; i < b->size(); ++i) b->grad[i] += o->grad[na + i];
    };
    return out;
  }
  require(axis == 1 && a->shape[0] == b->shape[0], Err::ShapeMismatch,
          "concat: row mismatch");
  int r = a->shape[0], ca = a->shape[1], cb = b->shape[1];
  Var out = make_node({r, ca + cb}, {a, b});
  for (int i = 0; i < r; ++i) {
    std::copy(a->value.begin() + i * ca, a->value.begin() + (i + 1) * ca,
              out->value.begin() + i * (ca + cb));
    std::copy(b->value.begin() + i * cb, b->value.begin() + (i + 1) * cb,
              out->value.begin() + i * (ca + cb) + ca);
  }
  Node* o = out.get();
  out->backprop = [o, a, b, r, ca, cb] {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < ca; ++j)
        a->grad[i * ca + j] += o->grad[i * (ca + cb) + j];
      for (int j = 0; j < cb; ++j)
        b->grad[i * cb + j] += o->grad[i * (ca + cb) + ca + j];
    }
  };
  return out;
}

Var sum(Var a) {
  Var out = make_node({1}, {a});
  double acc = 0.0;
  for (double v : a->value) acc += v;
  out->value[0] = acc;
  Node* o = out.get();
  out->backprop = [o, a] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += o->grad[0];
  };
  return out;
}

Var mean(Var a, int axis) {
  require(a->rank() == 2, Err::ShapeMismatch, "mean: rank-2 expected");
  require(axis == 0 || axis == 1, Err::ShapeMismatch, "mean: axis 0 or 1");
  int r = a->shape[0], c = a->shape[1];
  int kept = axis == 0 ? c : r;
  int reduced = axis == 0 ? r : c;
  Var out = make_node({kept}, {a});
  for (int i = 0; i < kept; ++i) {
    double acc = 0.0;
    for (int j = 0; j < reduced; ++j) {
      size_t idx = axis == 0 ? static_cast<size_t>(j) * c + i
                             : static_cast<size_t>(i) * c + j;
      acc += a->value[idx];
    }
    out->value[i] = acc / reduced;
  }
  Node* o = out.get();
  out->backprop = [o, a, axis, r, c, kept, reduced] {
    (void)r;
    for (int i = 0; i < kept; ++i) {
      double g = o->grad[i] / reduced;
      for (int j = 0; j < reduced; ++j) {
        size_t idx = axis == 0 ? static_cast<size_t>(j) * c + i
                               : static_cast<size_t>(i) * c + j;
        a->grad[idx] += g;
      }
    }
  };
  return out;
}

Var stddev(Var a, int axis, double eps) {
  require(a->rank() == 2, Err::ShapeMismatch, "stddev: rank-2 expected");
  require(axis == 0 || axis == 1, Err::ShapeMismatch, "stddev: axis 0 or 1");
  int c = a->shape[1];
  int kept = axis == 0 ? a->shape[1] : a->shape[0];
  int reduced = axis == 0 ? a->shape[0] : a->shape[1];
  Var out = make_node({kept}, {a});
  std::vector<double> means(kept);
  for (int i = 0; i < kept; ++i) {
    double m = 0.0, m2 = 0.0;
    for (int j = 0; j < reduced; ++j) {
      size_t idx = axis == 0 ? static_cast<size_t>(j) * c + i
                             : static_cast<size_t>(i) * c + j;
      double v = a->value[idx];
      m += v;
      m2 += v * v;
    }
    m /= reduced;
    m2 /= reduced;
    means[i] = m;
    out->value[i] = std::sqrt(std::max(m2 - m * m, 0.0) + eps);
  }
  Node* o = out.get();
  out->backprop = [o, a, axis, c, kept, reduced, means] {
    // d sigma / d x = (x - mean) / (n * sigma)
    for (int i = 0; i < kept; ++i) {
      double g = o->grad[i];
      if (g == 0.0) continue;
      double denom = reduced * o->value[i];
      for (int j = 0; j < reduced; ++j) {
        size_t idx = axis == 0 ? static_cast<size_t>(j) * c + i
                               : static_cast<size_t>(i) * c + j;
        a->grad[idx] += g * (a->value[idx] - means[i]) / denom;
      }
    }
  };
  return out;
}

Var softmax(Var a, int axis) {
  Slices s{};
  if (a->rank() == 1) {
    require(axis == 0, Err::ShapeMismatch, "softmax: axis 0 for rank-1");
    s = {1, a->shape[0], 1, 0};
  } else {
    s = slices2(a->shape, axis);
  }
  Var out = make_node(a->shape, {a});
  for (int sl = 0; sl < s.count; ++sl) {
    size_t base = static_cast<size_t>(sl) * s.base_step;
    double mx = a->value[base];
    for (int i = 1; i < s.len; ++i)
      mx = std::max(mx, a->value[base + static_cast<size_t>(i) * s.stride]);
    double z = 0.0;
    for (int i = 0; i < s.len; ++i) {
      size_t idx = base + static_cast<size_t>(i) * s.stride;
      out->value[idx] = std::exp(a->value[idx] - mx);
      z += out->value[idx];
    }
    for (int i = 0; i < s.len; ++i)
      out->value[base + static_cast<size_t>(i) * s.stride] /= z;
  }
  Node* o = out.get();
  out->backprop = [o, a, s] {
    for (int sl = 0; sl < s.count; ++sl) {
      size_t base = static_cast<size_t>(sl) * s.base_step;
      double dot = 0.0;
      for (int i = 0; i < s.len; ++i) {
        size_t idx = base + static_cast<size_t>(i) * s.stride;
        dot += o->grad[idx] * o->value[idx];
      }
      for (int i = 0; i < s.len; ++i) {
        size_t idx = base + static_cast<size_t>(i) * s.stride;
        a->grad[idx] += o->value[idx] * (o->grad[idx] - dot);
      }
    }
  };
  return out;
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  int c = x->shape.back();
  require(gain->rank() == 1 && gain->shape[0] == c, Err::ShapeMismatch,
          "layer_norm: gain dim mismatch");
  require(bias->rank() == 1 && bias->shape[0] == c, Err::ShapeMismatch,
          "layer_norm: bias dim mismatch");
  size_t rows = x->size() / static_cast<size_t>(c);
  Var out = make_node(x->shape, {x, gain, bias});
  std::vector<double> mus(rows), invs(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x->value.data() + r * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += xr[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    mus[r] = mu;
    invs[r] = inv;
    double* yr = out->value.data() + r * c;
    for (int j = 0; j < c; ++j)
      yr[j] = (xr[j] - mu) * inv * gain->value[j] + bias->value[j];
  }
  Node* o = out.get();
  out->backprop = [o, x, gain, bias, rows, c, mus, invs] {
    for (size_t r = 0; r < rows; ++r) {
      const double* xr = x->value.data() + r * c;
      const double* gr = o->grad.data() + r * c;
      double mu = mus[r], inv = invs[r];
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < c; ++j) {
        double xhat = (xr[j] - mu) * inv;
        double dxhat = gr[j] * gain->value[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        gain->grad[j] += gr[j] * xhat;
        bias->grad[j] += gr[j];
      }
      double* dx = x->grad.data() + r * c;
      for (int j = 0; j < c; ++j) {
        double xhat = (xr[j] - mu) * inv;
        double dxhat = gr[j] * gain->value[j];
        dx[j] += inv * (dxhat - sum_dxhat / c - xhat * sum_dxhat_xhat / c);
      }
    }
  };
  return out;
}

Var l2_normalize(Var x) {
  require(x->rank() <= 2, Err::ShapeMismatch, "l2_normalize: rank 1 or 2");
  int c = x->shape.back();
  size_t rows = x->size() / static_cast<size_t>(c);
  Var out = make_node(x->shape, {x});
  std::vector<double> norms(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x->value.data() + r * c;
    double nsq = 0.0;
    for (int j = 0; j < c; ++j) nsq += xr[j] * xr[j];
    require(nsq > 0.0, Err::ZeroVector, "l2_normalize of zero vector");
    norms[r] = std::sqrt(nsq);
    for (int j = 0; j < c; ++j) out->value[r * c + j] = xr[j] / norms[r];
  }
  Node* o = out.get();
  out->backprop = [o, x, rows, c, norms] {
    for (size_t r = 0; r < rows; ++r) {
      const double* yr = o->value.data() + r * c;
      const double* gr = o->grad.data() + r * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += yr[j] * gr[j];
      for (int j = 0; j < c; ++j)
        x->grad[r * c + j] += (gr[j] - yr[j] * dot) / norms[r];
    }
  };
  return out;
}

namespace {

// Shared conv1d core for one (Cin, L) block of input and (Cout, L) of output.
void conv_forward_block(const double* x, double* y, const double* w,
                        const double* b, int cin, int cout, int len, int k,
                        int dil) {
  for (int co = 0; co < cout; ++co) {
    double* yrow = y + static_cast<size_t>(co) * len;
    for (int t = 0; t < len; ++t) yrow[t] = b[co];
    for (int ci = 0; ci < cin; ++ci) {
      const double* xrow = x + static_cast<size_t>(ci) * len;
      const double* wrow = w + (static_cast<size_t>(co) * cin + ci) * k;
      for (int kk = 0; kk < k; ++kk) {
        double wv = wrow[kk];
        if (wv == 0.0) continue;
        int off = (kk - k / 2) * dil;
        int tlo = std::max(0, -off);
        int thi = std::min(len, len - off);
        const double* src = xrow + off;
        for (int t = tlo; t < thi; ++t) yrow[t] += wv * src[t];
      }
    }
  }
}

void conv_backward_block(const double* x, const double* dy, const double* w,
                         double* dx, double* dw, double* db, int cin, int cout,
                         int len, int k, int dil) {
  for (int co = 0; co < cout; ++co) {
    const double* dyrow = dy + static_cast<size_t>(co) * len;
    double acc = 0.0;
    for (int t = 0; t < len; ++t) acc += dyrow[t];
    db[co] += acc;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xrow = x + static_cast<size_t>(ci) * len;
      double* dxrow = dx + static_cast<size_t>(ci) * len;
      const double* wrow = w + (static_cast<size_t>(co) * cin + ci) * k;
      double* dwrow = dw + (static_cast<size_t>(co) * cin + ci) * k;
      for (int kk = 0; kk < k; ++kk) {
        int off = (kk - k / 2) * dil;
        int tlo = std::max(0, -off);
        int thi = std::min(len, len - off);
        double wv = wrow[kk];
        double wacc = 0.0;
        const double* src = xrow + off;
        double* dsrc = dxrow + off;
        for (int t = tlo; t < thi; ++t) {
          wacc += dyrow[t] * src[t];
          dsrc[t] += wv * dyrow[t];
        }
        dwrow[kk] += wacc;
      }
    }
  }
}

}  // namespace

Var conv1d(Var x, Var kernel, Var bias, int dilation) {
  require(dilation >= 1, Err::BadRange, "conv1d: dilation must be >= 1");
  require(kernel->rank() == 3, Err::ShapeMismatch,
          "conv1d: kernel must be (Cout,Cin,K)");
  int cout = kernel->shape[0], cin = kernel->shape[1], k = kernel->shape[2];
  require(bias->rank() == 1 && bias->shape[0] == cout, Err::ShapeMismatch,
          "conv1d: bias dim mismatch");
  int batch = 1, len = 0;
  std::vector<int> out_shape;
  if (x->rank() == 2) {
    require(x->shape[0] == cin, Err::ShapeMismatch,
            "conv1d: input channels " + std::to_string(x->shape[0]) +
                " vs kernel " + std::to_string(cin));
    len = x->shape[1];
    out_shape = {cout, len};
  } else if (x->rank() == 3) {
    require(x->shape[1] == cin, Err::ShapeMismatch,
            "conv1d: input channels " + std::to_string(x->shape[1]) +
                " vs kernel " + std::to_string(cin));
    batch = x->shape[0];
    len = x->shape[2];
    out_shape = {batch, cout, len};
  } else {
    fail(Err::ShapeMismatch, "conv1d: input must be rank 2 or 3");
  }
  Var out = make_node(out_shape, {x, kernel, bias});
  size_t in_block = static_cast<size_t>(cin) * len;
  size_t out_block = static_cast<size_t>(cout) * len;
  for (int bidx = 0; bidx < batch; ++bidx)
    conv_forward_block(x->value.data() + bidx * in_block,
                       out->value.data() + bidx * out_block,
                       kernel->value.data(), bias->value.data(), cin, cout, len,
                       k, dilation);
  Node* o = out.get();
  out->backprop = [o, x, kernel, bias, batch, cin, cout, len, k, dilation,
                   in_block, out_block] {
    for (int bidx = 0; bidx < batch; ++bidx)
      conv_backward_block(x->value.data() + bidx * in_block,
                          o->grad.data() + bidx * out_block,
                          kernel->value.data(), x->grad.data() + bidx * in_block,
                          kernel->grad.data(), bias->grad.data(), cin, cout, len,
                          k, dilation);
  };
  return out;
}

Var cross_entropy(Var logits, int label) {
  require(logits->rank() == 1, Err::ShapeMismatch,
          "cross_entropy: rank-1 logits expected");
  int s = logits->shape[0];
  require(label >= 0 && label < s, Err::BadLabel,
          "label " + std::to_string(label) + " outside [0," + std::to_string(s) +
              ")");
  double mx = *std::max_element(logits->value.begin(), logits->value.end());
  double z = 0.0;
  for (double v : logits->value) z += std::exp(v - mx);
  double lse = mx + std::log(z);
  Var out = make_node({1}, {logits});
  out->value[0] = lse - logits->value[label];
  std::vector<double> probs(s);
  for (int i = 0; i < s; ++i) probs[i] = std::exp(logits->value[i] - mx) / z;
  Node* o = out.get();
  out->backprop = [o, logits, label, probs, s] {
    double g = o->grad[0];
    for (int i = 0; i < s; ++i)
      logits->grad[i] += g * (probs[i] - (i == label ? 1.0 : 0.0));
  };
  return out;
}

Var cosine(Var u, Var v) {
  require(u->rank() == 1 && v->rank() == 1 && u->shape == v->shape,
          Err::ShapeMismatch, "cosine: matching rank-1 vectors expected");
  int n = u->shape[0];
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (int i = 0; i < n; ++i) {
    uu += u->value[i] * u->value[i];
    vv += v->value[i] * v->value[i];
    uv += u->value[i] * v->value[i];
  }
  require(uu > 0.0 && vv > 0.0, Err::ZeroVector, "cosine of zero vector");
  double nu = std::sqrt(uu), nv = std::sqrt(vv);
  double c = uv / (nu * nv);
  Var out = make_node({1}, {u, v});
  out->value[0] = c;
  Node* o = out.get();
  out->backprop = [o, u, v, n, nu, nv, c] {
    double g = o->grad[0];
    for (int i = 0; i < n; ++i) {
      u->grad[i] += g * (v->value[i] / (nu * nv) - c * u->value[i] / (nu * nu));
      v->grad[i] += g * (u->value[i] / (nu * nv) - c * v->value[i] / (nv * nv));
    }
  };
  return out;
}

void backward(Var loss) {
  require(loss->size() == 1, Err::NonScalarLoss,
          "backward requires a scalar loss");
  // Iterative topological order over the parent DAG.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Intermediates start from zero every pass; leaf grads accumulate.
  for (Node* n : order)
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

void zero_grad(const std::vector<Var>& params) {
  for (const Var& p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

double grad_check(const std::function<Var()>& f, const std::vector<Var>& params,
                  double h) {
  zero_grad(params);
  Var y = f();
  require(y->size() == 1, Err::NonScalarLoss, "grad_check needs a scalar");
  backward(y);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Var& p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Var p = params[pi];
    for (size_t i = 0; i < p->size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + h;
      double up = f()->value[0];
      p->value[i] = saved - h;
      double dn = f()->value[0];
      p->value[i] = saved;
      double numeric = (up - dn) / (2.0 * h);
      double a = analytic[pi][i];
      double rel = std::fabs(a - numeric) /
                   std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace longsv
