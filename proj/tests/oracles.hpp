#pragma once

// Straight-loop reference implementations, written independently of the
// tape ops, used to cross-check the model code.

#include <cmath>
#include <string>
#include <vector>

#include "mdat/model/mdat.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const mdat::numerics::Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

inline std::vector<double> to_vec(const mdat::numerics::Tensor<double>& t) {
  return {t.data().begin(), t.data().end()};
}

inline Mat affine(const Mat& x, const Mat& w, const std::vector<double>& b) {
  Mat out(x.size(), std::vector<double>(w[0].size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w[0].size(); ++j) {
      double s = b.empty() ? 0.0 : b[j];
      for (std::size_t l = 0; l < w.size(); ++l) s += x[i][l] * w[l][j];
      out[i][j] = s;
    }
  return out;
}

inline void softmax_inplace(std::vector<double>& row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

struct CoAttentionOut {
  Mat speech;  // [in_s, attended_s]
  Mat text;
};

inline CoAttentionOut co_attention(const Mat& in_s, const Mat& in_t,
                                   const mdat::numerics::ParamSet<double>& p,
                                   mdat::model::CoAttentionMode mode) {
  const Mat hs = affine(in_s, to_mat(p.get("coatt.W_s")), to_vec(p.get("coatt.b_s")));
  const Mat ht = affine(in_t, to_mat(p.get("coatt.W_t")), to_vec(p.get("coatt.b_t")));
  const std::size_t ts = in_s.size(), tt = in_t.size(), d = in_s[0].size();
  // alpha_s[i][j]: speech step i over text steps j; alpha_t[j][i] the reverse.
  Mat alpha_s(ts, std::vector<double>(tt)), alpha_t(tt, std::vector<double>(ts));
  for (std::size_t i = 0; i < ts; ++i)
    for (std::size_t j = 0; j < tt; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < hs[i].size(); ++k) dot += hs[i][k] * ht[j][k];
      alpha_s[i][j] = dot;
      alpha_t[j][i] = dot;
    }
  for (auto& row : alpha_s) softmax_inplace(row);
  for (auto& row : alpha_t) softmax_inplace(row);

  Mat att_s(ts, std::vector<double>(d, 0.0)), att_t(tt, std::vector<double>(d, 0.0));
  if (mode == mdat::model::CoAttentionMode::context) {
    for (std::size_t i = 0; i < ts; ++i)
      for (std::size_t j = 0; j < tt; ++j)
        for (std::size_t k = 0; k < d; ++k) att_s[i][k] += alpha_s[i][j] * in_t[j][k];
    for (std::size_t j = 0; j < tt; ++j)
      for (std::size_t i = 0; i < ts; ++i)
        for (std::size_t k = 0; k < d; ++k) att_t[j][k] += alpha_t[j][i] * in_s[i][k];
  } else {
    for (std::size_t i = 0; i < ts; ++i) {
      double received = 0;
      for (std::size_t j = 0; j < tt; ++j) received += alpha_t[j][i];
      received /= double(tt);
      for (std::size_t k = 0; k < d; ++k) att_s[i][k] = in_s[i][k] * received;
    }
    for (std::size_t j = 0; j < tt; ++j) {
      double received = 0;
      for (std::size_t i = 0; i < ts; ++i) received += alpha_s[i][j];
      received /= double(ts);
      for (std::size_t k = 0; k < d; ++k) att_t[j][k] = in_t[j][k] * received;
    }
  }
  CoAttentionOut out;
  for (std::size_t i = 0; i < ts; ++i) {
    auto row = in_s[i];
    row.insert(row.end(), att_s[i].begin(), att_s[i].end());
    out.speech.push_back(row);
  }
  for (std::size_t j = 0; j < tt; ++j) {
    auto row = in_t[j];
    row.insert(row.end(), att_t[j].begin(), att_t[j].end());
    out.text.push_back(row);
  }
  return out;
}

inline Mat layer_norm(const Mat& x, const std::vector<double>& gamma,
                      const std::vector<double>& beta, double eps) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double(x[i].size());
    double mean = 0;
    for (double v : x[i]) mean += v;
    mean /= d;
    double var = 0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= d;
    for (std::size_t k = 0; k < x[i].size(); ++k)
      out[i][k] = (x[i][k] - mean) / std::sqrt(var + eps) * gamma[k] + beta[k];
  }
  return out;
}

/// One post-norm encoder layer with dropout off.
inline Mat transformer(const Mat& x, const mdat::numerics::ParamSet<double>& p,
                       const std::string& prefix, std::size_t heads, double eps) {
  auto w = [&](const char* n) { return to_mat(p.get(prefix + "." + n)); };
  auto v = [&](const char* n) { return to_vec(p.get(prefix + "." + n)); };
  const std::size_t t = x.size(), d = x[0].size(), dh = d / heads;
  const Mat q = affine(x, w("W_q"), v("b_q"));
  const Mat k = affine(x, w("W_k"), {});
  const Mat val = affine(x, w("W_v"), v("b_v"));
  Mat merged(t, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      std::vector<double> scores(t);
      for (std::size_t j = 0; j < t; ++j) {
        double dot = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i][c] * k[j][c];
        scores[j] = dot / std::sqrt(double(dh));
      }
      softmax_inplace(scores);
      for (std::size_t j = 0; j < t; ++j)
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) merged[i][c] += scores[j] * val[j][c];
    }
  }
  const Mat attn = affine(merged, w("W_o"), v("b_o"));
  Mat res1 = x;
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < d; ++c) res1[i][c] += attn[i][c];
  const Mat x1 = layer_norm(res1, v("ln1.gamma"), v("ln1.beta"), eps);
  Mat hidden = affine(x1, w("ff1.W"), v("ff1.b"));
  for (auto& row : hidden)
    for (double& e : row) e = std::max(0.0, e);
  const Mat ff = affine(hidden, w("ff2.W"), v("ff2.b"));
  Mat res2 = x1;
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < d; ++c) res2[i][c] += ff[i][c];
  return layer_norm(res2, v("ln2.gamma"), v("ln2.beta"), eps);
}

inline double max_abs_diff(const Mat& a, const mdat::numerics::Tensor<double>& b) {
  double m = 0;
  if (a.size() != b.rows() || a[0].size() != b.cols()) return INFINITY;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) m = std::max(m, std::abs(a[r][c] - b.at(r, c)));
  return m;
}

}  // namespace oracle
