/*
 * Copyright 2026 The WeightLeak Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "weightleak/optim.h"

#include <cmath>
#include <numeric>

#include "weightleak/errors.h"

namespace weightleak {
namespace {

constexpr double kCurvatureFloor = 1e-10;

std::vector<double> flat(const std::vector<Tensor>& ts) {
  std::vector<double> out;
  for (const Tensor& t : ts) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

void assign_flat(std::vector<Tensor>& ts, const std::vector<double>& v) {
  std::size_t pos = 0;
  for (Tensor& t : ts) {
    auto d = t.mutable_data();
    for (double& x : d) x = v[pos++];
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options.lr > 0.0)) throw ArgumentError("adam: learning rate must be > 0");
}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ContractError("adam: params/grads count differ");
  if (m_.empty()) {
    for (const Tensor& p : params) {
      m_.push_back(Tensor(p.shape()));
      v_.push_back(Tensor(p.shape()));
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) throw ContractError("adam: gradient shape differs");
    auto p = params[i].mutable_data();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      p[j] -= options_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + options_.eps);
    }
  }
}

Lbfgs::Lbfgs(LbfgsOptions options) : options_(options) {
  if (!(options.lr > 0.0)) throw ArgumentError("lbfgs: learning rate must be > 0");
  if (options.history < 1) throw ArgumentError("lbfgs: history must be >= 1");
  if (options.max_iter < 1) throw ArgumentError("lbfgs: max_iter must be >= 1");
}

void Lbfgs::push_pair(std::vector<double> s, std::vector<double> y) {
  const double sy = dot(s, y);
  // Relative to |s||y| so the test does not depend on the loss scale.
  if (!(sy > kCurvatureFloor * std::sqrt(dot(s, s) * dot(y, y)))) {
    ++skipped_;
    return;
  }
  if (s_.size() == options_.history) {
    s_.erase(s_.begin());
    y_.erase(y_.begin());
    rho_.erase(rho_.begin());
  }
  s_.push_back(std::move(s));
  y_.push_back(std::move(y));
  rho_.push_back(1.0 / sy);
}

std::vector<double> Lbfgs::direction(const std::vector<double>& grad) const {
  std::vector<double> q(grad.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = -grad[i];
  if (s_.empty()) return q;
  const std::size_t n = s_.size();
  std::vector<double> a(n);
  for (std::size_t i = n; i-- > 0;) {
    a[i] = rho_[i] * dot(s_[i], q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * y_[i][j];
  }
  const double gamma = dot(s_.back(), y_.back()) / dot(y_.back(), y_.back());
  for (double& v : q) v *= gamma;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = rho_[i] * dot(y_[i], q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += s_[i][j] * (a[i] - b);
  }
  return q;
}

Evaluation Lbfgs::step(std::vector<Tensor>& params, const Closure& closure) {
  Evaluation first = closure(params);
  double loss = first.loss;
  std::vector<double> x = flat(params);
  std::vector<double> g = flat(first.grads);
  if (!std::isfinite(loss) || !finite(g)) return first;

  for (std::size_t it = 0; it < options_.max_iter; ++it) {
    if (max_abs(g) == 0.0) break;
    std::vector<double> d = direction(g);
    if (!finite(d) || dot(d, g) >= 0.0) {
      s_.clear();
      y_.clear();
      rho_.clear();
      ++resets_;
      d.assign(g.size(), 0.0);
      for (std::size_t j = 0; j < g.size(); ++j) d[j] = -g[j];
    }
    const double slope = dot(d, g);
    double t = options_.lr;
    std::vector<double> x_new(x.size());
    Evaluation ev;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t j = 0; j < x.size(); ++j) x_new[j] = x[j] + t * d[j];
      assign_flat(params, x_new);
      ev = closure(params);
      if (!options_.backtracking || halvings >= 40) break;
      if (std::isfinite(ev.loss) && ev.loss <= loss + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    std::vector<double> g_new = flat(ev.grads);
    if (!std::isfinite(ev.loss) || !finite(g_new)) break;  // caller sees it next step
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      s[j] = x_new[j] - x[j];
      y[j] = g_new[j] - g[j];
    }
    push_pair(std::move(s), std::move(y));
    x.swap(x_new);
    g.swap(g_new);
    loss = ev.loss;
  }
  return first;
}

}  // namespace weightleak
