// Copyright 2026 The fairexpr Authors
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

#include "fairexpr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairexpr/errors.hpp"

namespace fairexpr {

std::string_view partition_name(Partition p) noexcept {
  switch (p) {
    case Partition::trunk: return "trunk";
    case Partition::final_fc: return "final_fc";
    case Partition::primary_head: return "primary_head";
    case Partition::attribute_heads: return "attribute_heads";
    case Partition::attribute_projection: return "attribute_projection";
  }
  return "unknown";
}

std::optional<Partition> parse_partition(std::string_view name) noexcept {
  for (auto p : kAllPartitions) {
    if (partition_name(p) == name) return p;
  }
  return std::nullopt;
}

std::size_t ParameterStore::add(std::string name, Partition partition, Tensor value, bool trainable) {
  if (find(name)) throw ValidationError("parameter store: duplicate name '" + name + "'");
  params_.push_back(Parameter{std::move(name), partition, trainable, std::move(value)});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterStore::trainable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

GradientSet::GradientSet(const ParameterStore& store) : grads_(store.size()) {
  shapes_.reserve(store.size());
  for (const auto& p : store) shapes_.push_back(p.value.shape());
}

Tensor& GradientSet::at(std::size_t i) {
  auto& g = grads_.at(i);
  if (g.empty()) g = Tensor(shapes_.at(i));
  return g;
}

void GradientSet::add_scaled(const GradientSet& other, double scale) {
  if (other.size() != size()) throw ValidationError("gradient set: size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (other.has(i)) at(i).add_scaled(other.get(i), scale);
  }
}

bool GradientSet::all_zero() const noexcept {
  for (const auto& g : grads_) {
    for (double v : g.values()) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

namespace nn {
namespace {

constexpr std::size_t kColumnBlock = 512;

// C[MxN] += A[MxK] * B[KxN]. Four rows of C share each pass over B.
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  for (std::size_t j0 = 0; j0 < N; j0 += kColumnBlock) {
    const std::size_t nb = std::min(kColumnBlock, N - j0);
    std::size_t i = 0;
    for (; i + 4 <= M; i += 4) {
      double* __restrict c0 = C + i * N + j0;
      double* __restrict c1 = c0 + N;
      double* __restrict c2 = c1 + N;
      double* __restrict c3 = c2 + N;
      for (std::size_t k = 0; k < K; ++k) {
        const double a0 = A[i * K + k], a1 = A[(i + 1) * K + k], a2 = A[(i + 2) * K + k], a3 = A[(i + 3) * K + k];
        if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
        const double* __restrict b = B + k * N + j0;
#pragma omp simd
        for (std::size_t j = 0; j < nb; ++j) {
          c0[j] += a0 * b[j];
          c1[j] += a1 * b[j];
          c2[j] += a2 * b[j];
          c3[j] += a3 * b[j];
        }
      }
    }
    for (; i < M; ++i) {
      double* __restrict c = C + i * N + j0;
      for (std::size_t k = 0; k < K; ++k) {
        const double a = A[i * K + k];
        if (a == 0.0) continue;
        const double* __restrict b = B + k * N + j0;
#pragma omp simd
        for (std::size_t j = 0; j < nb; ++j) c[j] += a * b[j];
      }
    }
  }
}

// C[MxN] += A[MxK] * B[NxK]^T, two rows of A against two rows of B at a time.
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  std::size_t i = 0;
  for (; i + 2 <= M; i += 2) {
    const double* __restrict a0 = A + i * K;
    const double* __restrict a1 = a0 + K;
    std::size_t j = 0;
    for (; j + 2 <= N; j += 2) {
      const double* __restrict b0 = B + j * K;
      const double* __restrict b1 = b0 + K;
      double s00 = 0, s01 = 0, s10 = 0, s11 = 0;
#pragma omp simd reduction(+ : s00, s01, s10, s11)
      for (std::size_t k = 0; k < K; ++k) {
        s00 += a0[k] * b0[k];
        s01 += a0[k] * b1[k];
        s10 += a1[k] * b0[k];
        s11 += a1[k] * b1[k];
      }
      C[i * N + j] += s00;
      C[i * N + j + 1] += s01;
      C[(i + 1) * N + j] += s10;
      C[(i + 1) * N + j + 1] += s11;
    }
    for (; j < N; ++j) {
      const double* __restrict b0 = B + j * K;
      double s0 = 0, s1 = 0;
#pragma omp simd reduction(+ : s0, s1)
      for (std::size_t k = 0; k < K; ++k) {
        s0 += a0[k] * b0[k];
        s1 += a1[k] * b0[k];
      }
      C[i * N + j] += s0;
      C[(i + 1) * N + j] += s1;
    }
  }
  for (; i < M; ++i) {
    const double* __restrict a = A + i * K;
    for (std::size_t j = 0; j < N; ++j) {
      const double* __restrict b = B + j * K;
      double s = 0;
#pragma omp simd reduction(+ : s)
      for (std::size_t k = 0; k < K; ++k) s += a[k] * b[k];
      C[i * N + j] += s;
    }
  }
}

// C[MxN] += A[KxM]^T * B[KxN]
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  for (std::size_t k = 0; k < K; ++k) {
    const double* __restrict b = B + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const double a = A[k * M + i];
      if (a == 0.0) continue;
      double* __restrict c = C + i * N;
#pragma omp simd
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
  if (x.rank() != rank) {
    throw ValidationError(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " +
                          to_string(x.shape()));
  }
}

std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t weight, std::optional<std::size_t> bias, int in, int out, int k, int stride, int pad)
      : weight_(weight), bias_(bias), in_(in), out_(out), k_(k), stride_(stride), pad_(pad) {}

  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    cache = x;
    return infer(params, x);
  }

  Tensor infer(const ParameterStore& params, const Tensor& x) const override {
    const auto g = geometry(x);
    Tensor y({g.n, static_cast<std::size_t>(out_), g.ho, g.wo});
    std::vector<double> cols(g.kdim * g.msp);
    const double* w = params[weight_].value.data();
    for (std::size_t n = 0; n < g.n; ++n) {
      double* yn = y.data() + n * out_ * g.msp;
      if (bias_) {
        const double* b = params[*bias_].value.data();
        for (int co = 0; co < out_; ++co) std::fill(yn + co * g.msp, yn + (co + 1) * g.msp, b[co]);
      }
      const double* src = im2col(x, n, g, cols);
      gemm_nn(static_cast<std::size_t>(out_), g.msp, g.kdim, w, src, yn);
    }
    return y;
  }

  Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy, GradientSet& grads,
                  bool need_input_grad) const override {
    const auto& x = std::any_cast<const Tensor&>(cache);
    const auto g = geometry(x);
    std::vector<double> cols(g.kdim * g.msp);
    std::vector<double> dcols(need_input_grad ? g.kdim * g.msp : 0);
    Tensor dx = need_input_grad ? Tensor(x.shape()) : Tensor();
    double* dw = grads.at(weight_).data();
    double* db = bias_ ? grads.at(*bias_).data() : nullptr;
    // W^T for the input gradient: {kdim, out}.
    std::vector<double> wt;
    if (need_input_grad) {
      const double* w = params[weight_].value.data();
      wt.resize(g.kdim * static_cast<std::size_t>(out_));
      for (int co = 0; co < out_; ++co) {
        for (std::size_t r = 0; r < g.kdim; ++r) wt[r * out_ + co] = w[co * g.kdim + r];
      }
    }
    for (std::size_t n = 0; n < g.n; ++n) {
      const double* dyn = dy.data() + n * out_ * g.msp;
      const double* src = im2col(x, n, g, cols);
      gemm_nt(static_cast<std::size_t>(out_), g.kdim, g.msp, dyn, src, dw);
      if (db) {
        for (int co = 0; co < out_; ++co) {
          double s = 0.0;
          for (std::size_t m = 0; m < g.msp; ++m) s += dyn[co * g.msp + m];
          db[co] += s;
        }
      }
      if (need_input_grad) {
        std::fill(dcols.begin(), dcols.end(), 0.0);
        gemm_nn(g.kdim, g.msp, static_cast<std::size_t>(out_), wt.data(), dyn, dcols.data());
        col2im(dcols, g, dx, n);
      }
    }
    return dx;
  }

 private:
  struct Geometry {
    std::size_t n, h, w, ho, wo, msp, kdim;
  };

  Geometry geometry(const Tensor& x) const {
    require_rank(x, 4, "conv2d");
    if (x.dim(1) != static_cast<std::size_t>(in_)) {
      throw ValidationError("conv2d: expected " + std::to_string(in_) + " channels, got " + to_string(x.shape()));
    }
    Geometry g{};
    g.n = x.dim(0);
    g.h = x.dim(2);
    g.w = x.dim(3);
    const int ho = window_output(static_cast<int>(g.h), k_, stride_, pad_);
    const int wo = window_output(static_cast<int>(g.w), k_, stride_, pad_);
    if (ho <= 0 || wo <= 0) throw ValidationError("conv2d: input too small " + to_string(x.shape()));
    g.ho = static_cast<std::size_t>(ho);
    g.wo = static_cast<std::size_t>(wo);
    g.msp = g.ho * g.wo;
    g.kdim = static_cast<std::size_t>(in_ * k_ * k_);
    return g;
  }

  bool is_pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  // Rows ordered (channel, ky, kx); columns (oy, ox).
  const double* im2col(const Tensor& x, std::size_t n, const Geometry& g, std::vector<double>& cols) const {
    const double* xn = x.data() + n * in_ * g.h * g.w;
    if (is_pointwise()) return xn;
    std::size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      const double* plane = xn + c * g.h * g.w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx, ++r) {
          double* row = cols.data() + r * g.msp;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * stride_ - pad_ + ky;
            double* out = row + oy * g.wo;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(out, out + g.wo, 0.0);
              continue;
            }
            const double* in_row = plane + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * stride_ - pad_ + kx;
              out[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : in_row[ix];
            }
          }
        }
      }
    }
    return cols.data();
  }

  void col2im(const std::vector<double>& dcols, const Geometry& g, Tensor& dx, std::size_t n) const {
    double* dxn = dx.data() + n * in_ * g.h * g.w;
    if (is_pointwise()) {
      for (std::size_t i = 0; i < g.kdim * g.msp; ++i) dxn[i] += dcols[i];
      return;
    }
    std::size_t r = 0;
    for (int c = 0; c < in_; ++c) {
      double* plane = dxn + c * g.h * g.w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx, ++r) {
          const double* row = dcols.data() + r * g.msp;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * stride_ - pad_ + ky;
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            double* out_row = plane + static_cast<std::size_t>(iy) * g.w;
            const double* in = row + oy * g.wo;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * stride_ - pad_ + kx;
              if (ix >= 0 && ix < static_cast<long>(g.w)) out_row[ix] += in[ox];
            }
          }
        }
      }
    }
  }

  std::size_t weight_;
  std::optional<std::size_t> bias_;
  int in_, out_, k_, stride_, pad_;
};

// ---------------------------------------------------------------------------

class Linear final : public Layer {
 public:
  Linear(std::size_t weight, std::size_t bias, int in, int out) : weight_(weight), bias_(bias), in_(in), out_(out) {}

  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    cache = x;
    return infer(params, x);
  }

  Tensor infer(const ParameterStore& params, const Tensor& x) const override {
    check(x);
    const std::size_t n = x.dim(0);
    Tensor y({n, static_cast<std::size_t>(out_)});
    const double* b = params[bias_].value.data();
    for (std::size_t i = 0; i < n; ++i) std::copy(b, b + out_, y.data() + i * out_);
    gemm_nn(n, static_cast<std::size_t>(out_), static_cast<std::size_t>(in_), x.data(),
            params[weight_].value.data(), y.data());
    return y;
  }

  Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy, GradientSet& grads,
                  bool need_input_grad) const override {
    const auto& x = std::any_cast<const Tensor&>(cache);
    const std::size_t n = x.dim(0);
    gemm_tn(static_cast<std::size_t>(in_), static_cast<std::size_t>(out_), n, x.data(), dy.data(),
            grads.at(weight_).data());
    double* db = grads.at(bias_).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (int o = 0; o < out_; ++o) db[o] += dy[i * out_ + o];
    }
    if (!need_input_grad) return {};
    Tensor dx(x.shape());
    gemm_nt(n, static_cast<std::size_t>(in_), static_cast<std::size_t>(out_), dy.data(),
            params[weight_].value.data(), dx.data());
    return dx;
  }

 private:
  void check(const Tensor& x) const {
    require_rank(x, 2, "linear");
    if (x.dim(1) != static_cast<std::size_t>(in_)) {
      throw ValidationError("linear: expected width " + std::to_string(in_) + ", got " + to_string(x.shape()));
    }
  }

  std::size_t weight_, bias_;
  int in_, out_;
};

// ---------------------------------------------------------------------------

class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(std::size_t gamma, std::size_t beta, std::size_t mean, std::size_t var, int channels)
      : gamma_(gamma), beta_(beta), mean_(mean), var_(var), channels_(channels) {}

  struct Cache {
    Tensor xhat;
    std::vector<double> inv_std;
  };

  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    require_rank(x, 4, "batch_norm2d");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    const double count = static_cast<double>(n * hw);
    Cache cc{Tensor(x.shape()), std::vector<double>(c)};
    Tensor y(x.shape());
    const double* gamma = params[gamma_].value.data();
    const double* beta = params[beta_].value.data();
    double* rmean = params[mean_].value.data();
    double* rvar = params[var_].value.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) sum += p[k];
      }
      const double mean = sum / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) sq += (p[k] - mean) * (p[k] - mean);
      }
      const double var = sq / count;
      const double inv = 1.0 / std::sqrt(var + kEps);
      cc.inv_std[ch] = inv;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) {
          const double xh = (x[off + k] - mean) * inv;
          cc.xhat[off + k] = xh;
          y[off + k] = gamma[ch] * xh + beta[ch];
        }
      }
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      rmean[ch] = (1 - kMomentum) * rmean[ch] + kMomentum * mean;
      rvar[ch] = (1 - kMomentum) * rvar[ch] + kMomentum * unbiased;
    }
    cache = std::move(cc);
    return y;
  }

  Tensor infer(const ParameterStore& params, const Tensor& x) const override {
    require_rank(x, 4, "batch_norm2d");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y(x.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double inv = 1.0 / std::sqrt(params[var_].value[ch] + kEps);
      const double scale = params[gamma_].value[ch] * inv;
      const double shift = params[beta_].value[ch] - params[mean_].value[ch] * scale;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) y[off + k] = x[off + k] * scale + shift;
      }
    }
    return y;
  }

  Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy, GradientSet& grads,
                  bool need_input_grad) const override {
    const auto& cc = std::any_cast<const Cache&>(cache);
    const std::size_t n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
    const double count = static_cast<double>(n * hw);
    double* dgamma = grads.at(gamma_).data();
    double* dbeta = grads.at(beta_).data();
    Tensor dx = need_input_grad ? Tensor(dy.shape()) : Tensor();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) {
          sum_dy += dy[off + k];
          sum_dy_xhat += dy[off + k] * cc.xhat[off + k];
        }
      }
      dgamma[ch] += sum_dy_xhat;
      dbeta[ch] += sum_dy;
      if (!need_input_grad) continue;
      const double g = params[gamma_].value[ch];
      const double k0 = g * cc.inv_std[ch] / count;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) {
          dx[off + k] = k0 * (count * dy[off + k] - sum_dy - cc.xhat[off + k] * sum_dy_xhat);
        }
      }
    }
    return dx;
  }

 private:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;
  std::size_t gamma_, beta_, mean_, var_;
  int channels_;
};

// ---------------------------------------------------------------------------

class Relu final : public Layer {
 public:
  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    Tensor y = infer(params, x);
    cache = y;
    return y;
  }
  Tensor infer(const ParameterStore&, const Tensor& x) const override {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
  }
  Tensor backward(const ParameterStore&, const std::any& cache, const Tensor& dy, GradientSet&,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& y = std::any_cast<const Tensor&>(cache);
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(y[i] > 0.0)) dx[i] = 0.0;
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int k, int stride, int pad) : k_(k), stride_(stride), pad_(pad) {}

  struct Cache {
    Shape input_shape;
    std::vector<std::size_t> argmax;
  };

  Tensor forward(ParameterStore&, const Tensor& x, std::any& cache) const override {
    Cache cc{x.shape(), {}};
    Tensor y = run(x, &cc.argmax);
    cache = std::move(cc);
    return y;
  }
  Tensor infer(const ParameterStore&, const Tensor& x) const override { return run(x, nullptr); }

  Tensor backward(const ParameterStore&, const std::any& cache, const Tensor& dy, GradientSet&,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& cc = std::any_cast<const Cache&>(cache);
    Tensor dx(cc.input_shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[cc.argmax[i]] += dy[i];
    return dx;
  }

 private:
  Tensor run(const Tensor& x, std::vector<std::size_t>* argmax) const {
    require_rank(x, 4, "max_pool2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = window_output(static_cast<int>(h), k_, stride_, pad_);
    const int wo = window_output(static_cast<int>(w), k_, stride_, pad_);
    if (ho <= 0 || wo <= 0) throw ValidationError("max_pool2d: input too small " + to_string(x.shape()));
    Tensor y({n, c, static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
    if (argmax) argmax->resize(y.size());
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
      const std::size_t base = plane * h * w;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = base;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= static_cast<int>(h)) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= static_cast<int>(w)) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
              if (x[idx] > best) {
                best = x[idx];
                best_i = idx;
              }
            }
          }
          y[o] = best;
          if (argmax) (*argmax)[o] = best_i;
        }
      }
    }
    return y;
  }

  int k_, stride_, pad_;
};

// ---------------------------------------------------------------------------

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    cache = x.shape();
    return infer(params, x);
  }
  Tensor infer(const ParameterStore&, const Tensor& x) const override {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < hw; ++k) s += x[i * hw + k];
      y[i] = s / static_cast<double>(hw);
    }
    return y;
  }
  Tensor backward(const ParameterStore&, const std::any& cache, const Tensor& dy, GradientSet&,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    const auto& shape = std::any_cast<const Shape&>(cache);
    Tensor dx(shape);
    const std::size_t hw = shape[2] * shape[3];
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const double g = dy[i] / static_cast<double>(hw);
      std::fill(dx.data() + i * hw, dx.data() + (i + 1) * hw, g);
    }
    return dx;
  }
};

class Flatten final : public Layer {
 public:
  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    cache = x.shape();
    return infer(params, x);
  }
  Tensor infer(const ParameterStore&, const Tensor& x) const override {
    if (x.rank() < 2) throw ValidationError("flatten: rank must be >= 2");
    return x.reshaped({x.dim(0), x.size() / std::max<std::size_t>(x.dim(0), 1)});
  }
  Tensor backward(const ParameterStore&, const std::any& cache, const Tensor& dy, GradientSet&,
                  bool need_input_grad) const override {
    if (!need_input_grad) return {};
    return dy.reshaped(std::any_cast<const Shape&>(cache));
  }
};

// ---------------------------------------------------------------------------

class Sequential final : public Layer {
 public:
  explicit Sequential(std::vector<LayerPtr> layers) : layers_(std::move(layers)) {}

  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    std::vector<std::any> caches(layers_.size());
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(params, h, caches[i]);
    cache = std::move(caches);
    return h;
  }
  Tensor infer(const ParameterStore& params, const Tensor& x) const override {
    Tensor h = x;
    for (const auto& l : layers_) h = l->infer(params, h);
    return h;
  }
  Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy, GradientSet& grads,
                  bool need_input_grad) const override {
    const auto& caches = std::any_cast<const std::vector<std::any>&>(cache);
    Tensor g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i]->backward(params, caches[i], g, grads, i > 0 || need_input_grad);
    }
    return g;
  }

 private:
  std::vector<LayerPtr> layers_;
};

class BasicBlock final : public Layer {
 public:
  BasicBlock(LayerPtr main, LayerPtr shortcut) : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

  struct Cache {
    std::any main, shortcut;
    Tensor out;
  };

  Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const override {
    Cache cc;
    Tensor y = main_->forward(params, x, cc.main);
    y += shortcut_ ? shortcut_->forward(params, x, cc.shortcut) : x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    cc.out = y;
    cache = std::move(cc);
    return y;
  }
  Tensor infer(const ParameterStore& params, const Tensor& x) const override {
    Tensor y = main_->infer(params, x);
    y += shortcut_ ? shortcut_->infer(params, x) : x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
  }
  Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy, GradientSet& grads,
                  bool need_input_grad) const override {
    const auto& cc = std::any_cast<const Cache&>(cache);
    Tensor g = dy;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(cc.out[i] > 0.0)) g[i] = 0.0;
    }
    Tensor dx = main_->backward(params, cc.main, g, grads, need_input_grad);
    if (shortcut_) {
      Tensor ds = shortcut_->backward(params, cc.shortcut, g, grads, need_input_grad);
      if (need_input_grad) dx += ds;
    } else if (need_input_grad) {
      dx += g;
    }
    return dx;
  }

 private:
  LayerPtr main_, shortcut_;
};

}  // namespace

int window_output(int input, int kernel, int stride, int padding) {
  return (input + 2 * padding - kernel) / stride + 1;
}

LayerPtr conv2d(InitContext& ctx, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
                int padding, bool bias) {
  const int fan_in = in_channels * kernel * kernel;
  const double stddev = std::sqrt(2.0 / fan_in);
  Tensor w({static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels),
            static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)});
  for (auto& v : w.values()) v = ctx.rng.normal(0.0, stddev);
  const auto wi = ctx.store.add(join_name(ctx.prefix, name + ".weight"), ctx.partition, std::move(w));
  std::optional<std::size_t> bi;
  if (bias) {
    bi = ctx.store.add(join_name(ctx.prefix, name + ".bias"), ctx.partition,
                       Tensor({static_cast<std::size_t>(out_channels)}));
  }
  return std::make_shared<Conv2d>(wi, bi, in_channels, out_channels, kernel, stride, padding);
}

LayerPtr linear(InitContext& ctx, const std::string& name, int in_features, int out_features, bool scaled_init) {
  Tensor w({static_cast<std::size_t>(in_features), static_cast<std::size_t>(out_features)});
  if (scaled_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    for (auto& v : w.values()) v = ctx.rng.uniform(-bound, bound);
  }
  const auto wi = ctx.store.add(join_name(ctx.prefix, name + ".weight"), ctx.partition, std::move(w));
  const auto bi = ctx.store.add(join_name(ctx.prefix, name + ".bias"), ctx.partition,
                                Tensor({static_cast<std::size_t>(out_features)}));
  return std::make_shared<Linear>(wi, bi, in_features, out_features);
}

LayerPtr batch_norm2d(InitContext& ctx, const std::string& name, int channels) {
  const auto c = static_cast<std::size_t>(channels);
  const auto g = ctx.store.add(join_name(ctx.prefix, name + ".gamma"), ctx.partition, Tensor({c}, 1.0));
  const auto b = ctx.store.add(join_name(ctx.prefix, name + ".beta"), ctx.partition, Tensor({c}));
  const auto m = ctx.store.add(join_name(ctx.prefix, name + ".running_mean"), ctx.partition, Tensor({c}), false);
  const auto v = ctx.store.add(join_name(ctx.prefix, name + ".running_var"), ctx.partition, Tensor({c}, 1.0), false);
  return std::make_shared<BatchNorm2d>(g, b, m, v, channels);
}

LayerPtr relu() { return std::make_shared<Relu>(); }
LayerPtr max_pool2d(int kernel, int stride, int padding) { return std::make_shared<MaxPool2d>(kernel, stride, padding); }
LayerPtr global_avg_pool() { return std::make_shared<GlobalAvgPool>(); }
LayerPtr flatten() { return std::make_shared<Flatten>(); }
LayerPtr sequential(std::vector<LayerPtr> layers) { return std::make_shared<Sequential>(std::move(layers)); }

LayerPtr basic_block(InitContext& ctx, const std::string& name, int in_channels, int out_channels, int stride) {
  auto main = sequential({
      conv2d(ctx, name + ".conv1", in_channels, out_channels, 3, stride, 1, false),
      batch_norm2d(ctx, name + ".bn1", out_channels),
      relu(),
      conv2d(ctx, name + ".conv2", out_channels, out_channels, 3, 1, 1, false),
      batch_norm2d(ctx, name + ".bn2", out_channels),
  });
  LayerPtr shortcut;
  if (stride != 1 || in_channels != out_channels) {
    shortcut = sequential({
        conv2d(ctx, name + ".downsample.conv", in_channels, out_channels, 1, stride, 0, false),
        batch_norm2d(ctx, name + ".downsample.bn", out_channels),
    });
  }
  return std::make_shared<BasicBlock>(std::move(main), std::move(shortcut));
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  Tensor p(logits.shape());
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.data() + i * c;
    double* out = p.data() + i * c;
    const double m = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      out[k] = std::exp(z[k] - m);
      s += out[k];
    }
    for (std::size_t k = 0; k < c; ++k) out[k] /= s;
  }
  return p;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs) {
  if (probs.shape() != dprobs.shape()) throw ValidationError("softmax_backward: shape mismatch");
  Tensor dz(probs.shape());
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = probs.data() + i * c;
    const double* g = dprobs.data() + i * c;
    double inner = 0.0;
    for (std::size_t k = 0; k < c; ++k) inner += p[k] * g[k];
    for (std::size_t k = 0; k < c; ++k) dz[i * c + k] = p[k] * (g[k] - inner);
  }
  return dz;
}

}  // namespace nn
}  // namespace fairexpr
