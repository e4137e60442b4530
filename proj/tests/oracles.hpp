#pragma once

// Reference implementations written from the formulas with plain loops, used
// to check the tape operations and layers.

#include "rapnet/mcan.hpp"
#include "rapnet/metrics.hpp"
#include "rapnet/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using rapnet::Index;
using rapnet::MatrixXd;

inline MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline MatrixXd matmul(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline MatrixXd transpose(const MatrixXd& a) {
  MatrixXd out(a.cols(), a.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// exp(x_i) / sum_j exp(x_j), no max subtraction.
inline MatrixXd softmax_rows(const MatrixXd& a) {
  MatrixXd out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    double z = 0.0;
    for (Index c = 0; c < a.cols(); ++c) z += std::exp(a(r, c));
    for (Index c = 0; c < a.cols(); ++c) out(r, c) = std::exp(a(r, c)) / z;
  }
  return out;
}

/// sigmoid(W_g w) * relu(W_h w) + (1 - sigmoid(W_g w)) * w, row by row.
inline MatrixXd highway(const MatrixXd& wg, const MatrixXd& wh, const MatrixXd& x) {
  MatrixXd out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r)
    for (Index i = 0; i < x.cols(); ++i) {
      double g = 0.0, t = 0.0;
      for (Index k = 0; k < x.cols(); ++k) {
        g += wg(i, k) * x(r, k);
        t += wh(i, k) * x(r, k);
      }
      g = sigmoid(g);
      t = t > 0 ? t : 0.0;
      out(r, i) = g * t + (1.0 - g) * x(r, i);
    }
  return out;
}

struct LstmOut {
  MatrixXd h, c;
};

/// Gate blocks in order i, f, g, o of W_x [4h,in], W_h [4h,h], b [1,4h].
inline LstmOut lstm_step(const MatrixXd& wx, const MatrixXd& wh, const MatrixXd& b, const MatrixXd& x,
                         const MatrixXd& h_prev, const MatrixXd& c_prev) {
  const Index hd = wh.cols();
  LstmOut o{MatrixXd(x.rows(), hd), MatrixXd(x.rows(), hd)};
  for (Index r = 0; r < x.rows(); ++r) {
    auto pre = [&](Index row) {
      double s = b(0, row);
      for (Index k = 0; k < x.cols(); ++k) s += wx(row, k) * x(r, k);
      for (Index k = 0; k < hd; ++k) s += wh(row, k) * h_prev(r, k);
      return s;
    };
    for (Index j = 0; j < hd; ++j) {
      double i = sigmoid(pre(j)), f = sigmoid(pre(hd + j)), g = std::tanh(pre(2 * hd + j)), out = sigmoid(pre(3 * hd + j));
      o.c(r, j) = f * c_prev(r, j) + i * g;
      o.h(r, j) = out * std::tanh(o.c(r, j));
    }
  }
  return o;
}

inline double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

// MCAN casts and compression

inline double bilinear(const MatrixXd& a, Index i, const MatrixXd& m, const MatrixXd& b, Index j) {
  double s = 0.0;
  for (Index p = 0; p < a.cols(); ++p)
    for (Index q = 0; q < b.cols(); ++q) s += a(i, p) * m(p, q) * b(j, q);
  return s;
}

/// sum_i softmax_i(scores_i) rows_i
inline MatrixXd attend(const std::vector<double>& scores, const MatrixXd& rows) {
  double z = 0.0;
  for (double s : scores) z += std::exp(s);
  MatrixXd out = MatrixXd::Zero(1, rows.cols());
  for (std::size_t i = 0; i < scores.size(); ++i) out += std::exp(scores[i]) / z * rows.row(static_cast<Index>(i));
  return out;
}

inline MatrixXd intra_oracle(const MatrixXd& m, const MatrixXd& w) {
  MatrixXd out(w.rows(), w.cols());
  for (Index j = 0; j < w.rows(); ++j) {
    std::vector<double> s;
    for (Index i = 0; i < w.rows(); ++i) s.push_back(bilinear(w, i, m, w, j));
    out.row(j) = attend(s, w);
  }
  return out;
}

struct CastPair {
  MatrixXd for_d, for_q;
};

inline CastPair align_oracle(const MatrixXd& m, const MatrixXd& d, const MatrixXd& q) {
  CastPair c{MatrixXd(d.rows(), d.cols()), MatrixXd(q.rows(), q.cols())};
  for (Index i = 0; i < d.rows(); ++i) {
    std::vector<double> s;
    for (Index j = 0; j < q.rows(); ++j) s.push_back(bilinear(d, i, m, q, j));
    c.for_d.row(i) = attend(s, q);
  }
  for (Index j = 0; j < q.rows(); ++j) {
    std::vector<double> s;
    for (Index i = 0; i < d.rows(); ++i) s.push_back(bilinear(d, i, m, q, j));
    c.for_q.row(j) = attend(s, d);
  }
  return c;
}

/// q gets softmax over j of pool_i s_ij applied to q, d the mirror.
inline CastPair pooled_oracle(bool use_max, const MatrixXd& m, const MatrixXd& d, const MatrixXd& q) {
  auto pool = [&](const std::vector<double>& v) {
    double r = use_max ? -INFINITY : 0.0;
    for (double x : v) r = use_max ? std::max(r, x) : r + x / static_cast<double>(v.size());
    return r;
  };
  std::vector<double> sq, sd;
  for (Index j = 0; j < q.rows(); ++j) {
    std::vector<double> col;
    for (Index i = 0; i < d.rows(); ++i) col.push_back(bilinear(d, i, m, q, j));
    sq.push_back(pool(col));
  }
  for (Index i = 0; i < d.rows(); ++i) {
    std::vector<double> row;
    for (Index j = 0; j < q.rows(); ++j) row.push_back(bilinear(d, i, m, q, j));
    sd.push_back(pool(row));
  }
  return {attend(sd, d), attend(sq, q)};
}

inline MatrixXd compress_oracle(const rapnet::McanParams<double>& p, const MatrixXd& w, const std::array<MatrixXd, 4>& casts) {
  MatrixXd out(w.rows(), 12);
  const Index e = w.cols();
  for (Index r = 0; r < w.rows(); ++r)
    for (int k = 0; k < 4; ++k) {
      const auto& c = casts[static_cast<std::size_t>(k)];
      const auto& wc = p.compressors[static_cast<std::size_t>(3 * k)].value;
      const auto& ws = p.compressors[static_cast<std::size_t>(3 * k + 1)].value;
      const auto& wm = p.compressors[static_cast<std::size_t>(3 * k + 2)].value;
      double fc = 0, fs = 0, fm = 0;
      for (Index i = 0; i < e; ++i) {
        fc += wc(0, i) * w(r, i) + wc(0, e + i) * c(r, i);
        fs += ws(0, i) * (c(r, i) - w(r, i));
        fm += wm(0, i) * (c(r, i) * w(r, i));
      }
      out(r, 3 * k) = fc;
      out(r, 3 * k + 1) = fs;
      out(r, 3 * k + 2) = fm;
    }
  return out;
}

// Ranking metrics


/// 1 + number of candidates ahead of the best positive under stable descending order.
inline int rank_of(const std::vector<double>& s, const std::vector<int>& y) {
  int best = 0;
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (!y[p]) continue;
    int r = 1;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j] > s[p] || (s[j] == s[p] && j < p)) ++r;
    if (!best || r < best) best = r;
  }
  return best;
}

/// The pseudo-candidate sits above every candidate scored below tau.
inline int rank_with_no_answer(const std::vector<double>& s, const std::vector<int>& y, double tau) {
  int at_or_above = 0;
  for (double v : s) at_or_above += v >= tau;
  if (std::count(y.begin(), y.end(), 1) == 0) return 1 + at_or_above;
  int best = 0;
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (!y[p]) continue;
    int r = 1 + (s[p] < tau ? 1 : 0);
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j] > s[p] || (s[j] == s[p] && j < p)) ++r;
    if (!best || r < best) best = r;
  }
  return best;
}

struct EvalReference {
  std::vector<int> ranks;
  double r1, r2, r5, r10, mrr, avg, precision = 0, recall = 0;
};

inline EvalReference evaluate(const std::vector<rapnet::ScoredDialogue>& ds, int subtask, double tau) {
  EvalReference rep;
  int predicted = 0, actual = 0, correct = 0;
  for (const auto& d : ds) {
    if (subtask == 4) {
      const bool none_pred = *std::max_element(d.scores.begin(), d.scores.end()) < tau;
      const bool none_true = std::count(d.labels.begin(), d.labels.end(), 1) == 0;
      predicted += none_pred;
      actual += none_true;
      correct += none_pred && none_true;
      rep.ranks.push_back(rank_with_no_answer(d.scores, d.labels, tau));
    } else {
      rep.ranks.push_back(rank_of(d.scores, d.labels));
    }
  }
  int n = 0, h1 = 0, h2 = 0, h5 = 0, h10 = 0;
  double rr = 0;
  for (int r : rep.ranks) {
    if (!r) continue;
    ++n;
    h1 += r <= 1;
    h2 += r <= 2;
    h5 += r <= 5;
    h10 += r <= 10;
    rr += 1.0 / r;
  }
  rep.r1 = double(h1) / n;
  rep.r2 = double(h2) / n;
  rep.r5 = double(h5) / n;
  rep.r10 = double(h10) / n;
  rep.mrr = rr / n;
  rep.avg = (rep.r10 + rep.mrr) / 2;
  if (predicted) rep.precision = double(correct) / predicted;
  if (actual) rep.recall = double(correct) / actual;
  return rep;
}


}  // namespace oracle
