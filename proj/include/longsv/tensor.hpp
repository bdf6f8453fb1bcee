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

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace longsv {

// Minimal reverse-mode autodiff over dense f64 tensors of rank 1..3.
// Graphs are built per forward pass (define-by-run): each op returns a new
// node whose backprop closure scatters into its parents' grad buffers.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // same length as value
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void()> backprop;

  size_t size() const { return value.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_leaf() const { return parents.empty(); }
};

Var leaf(std::vector<int> shape, bool requires_grad = true);
Var leaf(std::vector<int> shape, std::vector<double> data,
         bool requires_grad = true);
Var constant(std::vector<int> shape, std::vector<double> data);

// Elementwise and scalar ops.
Var add(Var a, Var b);  // same shape, or b rank-1 broadcast over a's last dim
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var mul_scalar(Var a, double s);
Var add_const(Var a, double c);
Var relu(Var a);
Var tanh(Var a);
Var sqrt(Var a);  // backward at exactly 0 contributes 0 (subgradient choice)

// Linear algebra. matmul covers (m,k)x(k,n), (m,k)x(k) and (k)x(k,n).
Var matmul(Var a, Var b);
Var transpose(Var a);               // rank-2
Var reshape(Var a, std::vector<int> shape);
Var concat(Var a, Var b, int axis);  // rank-1, or rank-2 along either axis
Var sum(Var a);                      // scalar {1}

// Reductions over one axis of a rank-2 tensor.
Var mean(Var a, int axis);
Var stddev(Var a, int axis, double eps);  // sqrt(E[x^2] - E[x]^2 + eps)

// Nonlinear blocks.
Var softmax(Var a, int axis = 0);  // rank-1, or rank-2 along either axis
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);  // last axis
Var l2_normalize(Var x);  // rank-1 whole, rank-2 per row

// conv1d over the last axis. x is (Cin, L) or (B, Cin, L); kernel is
// (Cout, Cin, K); zero same-padding with tap offset (k - K/2) * dilation.
Var conv1d(Var x, Var kernel, Var bias, int dilation = 1);

// Losses and scoring.
Var cross_entropy(Var logits, int label);  // rank-1 logits -> scalar
Var cosine(Var u, Var v);                  // rank-1 pair -> scalar

// Populates grads of every requires_grad leaf reachable from loss.
// Leaf grads accumulate across calls; intermediate grads are reset per call.
void backward(Var loss);
void zero_grad(const std::vector<Var>& params);

// Central finite differences against the analytic gradient; returns the max
// relative error |a-n|/max(|a|,|n|,1e-12) over every element of every param.
double grad_check(const std::function<Var()>& f, const std::vector<Var>& params,
                  double h = 1e-6);

}  // namespace longsv
