#pragma once

// Dense row-major matrices and the forward kernels shared by the autograd
// graph and the plain (non-recording) APIs.

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace tempgen {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

namespace kernels {

// Entries equal to -inf get probability exactly 0; a row with no finite
// entry becomes all zeros.
template <typename T>
void softmax_row_inplace(T* row, Eigen::Index n) {
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> r(row, n);
  const T mx = r.maxCoeff();
  if (!std::isfinite(mx)) {
    r.setZero();
    return;
  }
  constexpr T kNegInf = -std::numeric_limits<T>::infinity();
  r = (r == kNegInf).select(T(0), (r - mx).exp());
  r /= r.sum();
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& x) {
  Mat<T> y = x;
  for (Eigen::Index i = 0; i < y.rows(); ++i) softmax_row_inplace(y.row(i).data(), y.cols());
  return y;
}

// Scaled dot-product attention probabilities for every head, stacked as
// (heads * Tq) x Tk: rows [h*Tq, (h+1)*Tq) belong to head h. Keys with
// key_valid == 0 and, when causal, keys after the query position get
// probability exactly 0. A query with no admissible key yields a zero row.
template <typename T>
Mat<T> attention_probs(const Mat<T>& q, const Mat<T>& k, int heads, std::span<const char> key_valid,
                       bool causal, int query_offset = 0) {
  const Eigen::Index tq = q.rows(), tk = k.rows();
  const Eigen::Index dk = q.cols() / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  Mat<T> p(heads * tq, tk);
  for (int h = 0; h < heads; ++h) {
    auto block = p.middleRows(h * tq, tq);
    block.noalias() = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) * scale;
    for (Eigen::Index t = 0; t < tq; ++t) {
      T* row = block.row(t).data();
      for (Eigen::Index s = 0; s < tk; ++s) {
        const bool masked = (!key_valid.empty() && !key_valid[static_cast<std::size_t>(s)]) ||
                            (causal && s > t + query_offset);
        if (masked) row[s] = -std::numeric_limits<T>::infinity();
      }
      softmax_row_inplace(row, tk);
    }
  }
  return p;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

// Whole-matrix forms; vectorized for float.
template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  const auto a = x.array();
  return (T(0.5) * a * (T(1) + (a * T(M_SQRT1_2)).erf())).matrix();
}

template <typename T>
Mat<T> gelu_grad(const Mat<T>& x) {
  const auto a = x.array();
  const T inv_sqrt_2pi = T(0.5) * T(M_2_SQRTPI) * T(M_SQRT1_2);
  return (T(0.5) * (T(1) + (a * T(M_SQRT1_2)).erf()) + a * (T(-0.5) * a.square()).exp() * inv_sqrt_2pi).matrix();
}

template <typename T>
Mat<T> sinusoidal_positions(int offset, Eigen::Index rows, Eigen::Index d) {
  Mat<T> pe(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double pos = static_cast<double>(offset + i);
    for (Eigen::Index j = 0; j < d; j += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(d));
      pe(i, j) = static_cast<T>(std::sin(pos * freq));
      if (j + 1 < d) pe(i, j + 1) = static_cast<T>(std::cos(pos * freq));
    }
  }
  return pe;
}

// Mean over the given heads of stacked (heads * tq) x tk probabilities.
// Heads are summed in ascending index order so that selecting every head
// reproduces the all-head mean bit for bit.
template <typename T>
Mat<T> head_mean(const Mat<T>& probs, int heads, std::span<const int> selected) {
  const Eigen::Index tq = probs.rows() / heads;
  std::vector<int> order(selected.begin(), selected.end());
  std::sort(order.begin(), order.end());
  Mat<T> out = Mat<T>::Zero(tq, probs.cols());
  for (int h : order) out += probs.middleRows(h * tq, tq);
  out /= static_cast<T>(order.size());
  return out;
}

// Adds each source position's mass onto its token id.
template <typename T>
Mat<T> scatter_columns(const Mat<T>& by_position, std::span<const int> ids, Eigen::Index vocab) {
  Mat<T> out = Mat<T>::Zero(by_position.rows(), vocab);
  for (Eigen::Index t = 0; t < by_position.rows(); ++t)
    for (std::size_t s = 0; s < ids.size(); ++s) out(t, ids[s]) += by_position(t, static_cast<Eigen::Index>(s));
  return out;
}

template <typename T>
RowVec<T> masked_row_mean(const Mat<T>& x, std::span<const char> valid) {
  RowVec<T> out = RowVec<T>::Zero(x.cols());
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!valid.empty() && !valid[static_cast<std::size_t>(i)]) continue;
    out += x.row(i);
    ++n;
  }
  if (n > 0) out /= static_cast<T>(n);
  return out;
}

template <typename T>
T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

// p_gen for every step: sigmoid(s_t . mean_encoder_state), as a column.
template <typename T>
Mat<T> generation_probs(const Mat<T>& states, const RowVec<T>& mean_encoder) {
  Mat<T> out(states.rows(), 1);
  for (Eigen::Index t = 0; t < states.rows(); ++t) out(t, 0) = sigmoid<T>(states.row(t).dot(mean_encoder));
  return out;
}

// Row-wise p * a + (1 - p) * b.
template <typename T>
Mat<T> mixture(const Mat<T>& p, const Mat<T>& a, const Mat<T>& b) {
  Mat<T> out(a.rows(), a.cols());
  for (Eigen::Index t = 0; t < a.rows(); ++t) out.row(t) = p(t, 0) * a.row(t) + (T(1) - p(t, 0)) * b.row(t);
  return out;
}

}  // namespace kernels
}  // namespace tempgen
