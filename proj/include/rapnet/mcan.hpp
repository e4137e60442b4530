#pragma once

// Multi-cast attention: a shared highway pre-transform, intra-attention per
// sequence, three inter-attention casts (max, mean and alignment pooling) and
// compression of every cast into twelve scalar features per word.

#include "rapnet/flags.hpp"
#include "rapnet/layers.hpp"
#include "rapnet/tensor.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace rapnet {

inline constexpr int kMcanFeatures = 12;

/// Feature names in output column order.
inline constexpr std::array<std::string_view, kMcanFeatures> kMcanFeatureNames = {
    "align_concat", "align_sub", "align_mul", "intra_concat", "intra_sub", "intra_mul",
    "mean_concat",  "mean_sub",  "mean_mul",  "max_concat",   "max_sub",   "max_mul"};

template <typename Scalar>
struct McanParams {
  HighwayParams<Scalar> highway;
  BasicParameter<Scalar> intra_context;
  BasicParameter<Scalar> intra_response;
  BasicParameter<Scalar> align;
  BasicParameter<Scalar> mean_pool;
  BasicParameter<Scalar> max_pool;
  /// Per cast: [w'; cast] of width 2e, then (cast - w') and (cast * w') of width e.
  std::array<BasicParameter<Scalar>, kMcanFeatures> compressors;

  McanParams() = default;
  McanParams(const std::string& prefix, Index dim)
      : highway(prefix + ".highway", dim),
        intra_context(prefix + ".m_intra_context", dim, dim),
        intra_response(prefix + ".m_intra_response", dim, dim),
        align(prefix + ".m_align", dim, dim),
        mean_pool(prefix + ".m_mean", dim, dim),
        max_pool(prefix + ".m_max", dim, dim) {
    for (int k = 0; k < kMcanFeatures; ++k) {
      Index width = k % 3 == 0 ? 2 * dim : dim;
      compressors[static_cast<std::size_t>(k)] =
          BasicParameter<Scalar>(prefix + ".w_compress" + std::to_string(k + 1), 1, width);
    }
  }

  Index dim() const { return align.value.rows(); }

  std::vector<BasicParameter<Scalar>*> parameters() {
    std::vector<BasicParameter<Scalar>*> out = highway.parameters();
    for (auto* p : {&intra_context, &intra_response, &align, &mean_pool, &max_pool}) out.push_back(p);
    for (auto& c : compressors) out.push_back(&c);
    return out;
  }

  template <typename Rng>
  void init(Rng& rng, Scalar range) {
    for (auto* p : parameters()) uniform_init(*p, rng, -range, range);
  }
};

template <typename Scalar>
struct IntraAttention {
  BasicVar<Scalar> output;   // [n,e]
  BasicVar<Scalar> weights;  // [n,n], row j = distribution over source positions i
};

/// s_ij = w'_i^T M w'_j; output j = sum_i softmax_i(s_.j) w'_i.
template <typename Scalar>
IntraAttention<Scalar> intra_attention(BasicTape<Scalar>& tape, const BasicParameter<Scalar>& m,
                                       const BasicVar<Scalar>& seq_prime) {
  if (seq_prime.rows() == 0) throw ShapeError("intra_attention: empty sequence");
  auto scores = matmul_nt(matmul(seq_prime, tape.parameter(m)), seq_prime);
  auto weights = softmax_rows(transpose(scores));
  return {matmul(weights, seq_prime), weights};
}

/// S = d' M q'^T, shape [|d|,|q|].
template <typename Scalar>
BasicVar<Scalar> inter_similarity(BasicTape<Scalar>& tape, const BasicParameter<Scalar>& m,
                                  const BasicVar<Scalar>& d_prime, const BasicVar<Scalar>& q_prime) {
  if (d_prime.rows() == 0 || q_prime.rows() == 0) throw ShapeError("inter_similarity: empty sequence");
  return matmul_nt(matmul(d_prime, tape.parameter(m)), q_prime);
}

enum class PoolKind { max, mean };

template <typename Scalar>
struct PooledCast {
  BasicVar<Scalar> for_d;      // [1,e], shared by every word of d
  BasicVar<Scalar> for_q;      // [1,e], shared by every word of q
  BasicVar<Scalar> weights_d;  // [1,|d|]
  BasicVar<Scalar> weights_q;  // [1,|q|]
};

/// Pools S over the opposite axis, normalises, and takes the weighted sum of
/// the sequence's own words: q gets softmax(pool_i S)^T q', d gets
/// softmax(pool_j S)^T d'.
template <typename Scalar>
PooledCast<Scalar> pooled_cast(PoolKind kind, const BasicVar<Scalar>& s, const BasicVar<Scalar>& d_prime,
                               const BasicVar<Scalar>& q_prime) {
  if (s.rows() != d_prime.rows() || s.cols() != q_prime.rows())
    throw ShapeError("pooled_cast: similarity " + shape_str(s.value()) + " does not match sequences " +
                     shape_str(d_prime.value()) + ", " + shape_str(q_prime.value()));
  auto pool = [kind](const BasicVar<Scalar>& x) {
    return kind == PoolKind::max ? max_over_positions(x) : mean_over_positions(x);
  };
  auto weights_q = softmax(pool(s));
  auto weights_d = softmax(pool(transpose(s)));
  return {matmul(weights_d, d_prime), matmul(weights_q, q_prime), weights_d, weights_q};
}

template <typename Scalar>
struct AlignmentCast {
  BasicVar<Scalar> for_d;      // [|d|,e]
  BasicVar<Scalar> for_q;      // [|q|,e]
  BasicVar<Scalar> weights_d;  // [|d|,|q|], row i = distribution over q words
  BasicVar<Scalar> weights_q;  // [|q|,|d|], row j = distribution over d words
};

/// q word j gets sum_i softmax_i(S[.][j]) d'_i; d word i gets
/// sum_j softmax_j(S[i][.]) q'_j.
template <typename Scalar>
AlignmentCast<Scalar> alignment_cast(const BasicVar<Scalar>& s, const BasicVar<Scalar>& d_prime,
                                     const BasicVar<Scalar>& q_prime) {
  if (s.rows() != d_prime.rows() || s.cols() != q_prime.rows())
    throw ShapeError("alignment_cast: similarity " + shape_str(s.value()) + " does not match sequences " +
                     shape_str(d_prime.value()) + ", " + shape_str(q_prime.value()));
  auto weights_d = softmax_rows(s);
  auto weights_q = softmax_rows(transpose(s));
  return {matmul(weights_d, q_prime), matmul(weights_q, d_prime), weights_d, weights_q};
}

/// Twelve features per word, [n,12], from w' and the four casts (each [n,e]).
template <typename Scalar>
BasicVar<Scalar> compress(BasicTape<Scalar>& tape, const McanParams<Scalar>& p, const BasicVar<Scalar>& w_prime,
                          const BasicVar<Scalar>& align, const BasicVar<Scalar>& intra, const BasicVar<Scalar>& mean,
                          const BasicVar<Scalar>& max) {
  const std::array<BasicVar<Scalar>, 4> casts = {align, intra, mean, max};
  for (const auto& c : casts)
    if (c.rows() != w_prime.rows() || c.cols() != w_prime.cols() || w_prime.cols() != p.dim())
      throw ShapeError("compress: cast " + shape_str(c.value()) + " does not match words " +
                       shape_str(w_prime.value()) + " of width " + std::to_string(p.dim()));
  std::vector<BasicVar<Scalar>> columns;
  columns.reserve(kMcanFeatures);
  for (std::size_t k = 0; k < casts.size(); ++k) {
    const auto& cast = casts[k];
    columns.push_back(matmul_nt(concat_cols({w_prime, cast}), tape.parameter(p.compressors[3 * k])));
    columns.push_back(matmul_nt(sub(cast, w_prime), tape.parameter(p.compressors[3 * k + 1])));
    columns.push_back(matmul_nt(mul(cast, w_prime), tape.parameter(p.compressors[3 * k + 2])));
  }
  return concat_cols(std::span<const BasicVar<Scalar>>(columns));
}

/// Candidate-independent work for one sequence: highway transform and
/// intra-attention. Disabled components are replaced per the flags.
template <typename Scalar>
struct McanSide {
  BasicVar<Scalar> words_prime;  // [n,e]
  BasicVar<Scalar> intra;        // [n,e], zeros when intra-attention is off
};

template <typename Scalar>
McanSide<Scalar> mcan_prepare(BasicTape<Scalar>& tape, const McanParams<Scalar>& p, const BasicParameter<Scalar>& intra_m,
                              const BasicVar<Scalar>& words, const AblationFlags& flags) {
  if (words.rows() == 0) throw ShapeError("mcan: empty sequence");
  auto prime = flags.highway_encoder ? highway_forward(tape, p.highway, words) : words;
  auto intra = flags.intra_attention ? intra_attention(tape, intra_m, prime).output : tape.zeros(words.rows(), words.cols());
  return {prime, intra};
}

template <typename Scalar>
struct McanFeatures {
  BasicVar<Scalar> context;   // [|d|,12]
  BasicVar<Scalar> response;  // [|q|,12]
};

template <typename Scalar>
McanFeatures<Scalar> mcan_cross(BasicTape<Scalar>& tape, const McanParams<Scalar>& p, const McanSide<Scalar>& d,
                                const McanSide<Scalar>& q, const AblationFlags& flags) {
  const Index nd = d.words_prime.rows(), nq = q.words_prime.rows(), e = d.words_prime.cols();
  if (!flags.inter_attention) {
    auto zd = tape.zeros(nd, e);
    auto zq = tape.zeros(nq, e);
    return {compress(tape, p, d.words_prime, zd, d.intra, zd, zd), compress(tape, p, q.words_prime, zq, q.intra, zq, zq)};
  }
  auto align = alignment_cast(inter_similarity(tape, p.align, d.words_prime, q.words_prime), d.words_prime, q.words_prime);
  auto mean = pooled_cast(PoolKind::mean, inter_similarity(tape, p.mean_pool, d.words_prime, q.words_prime),
                          d.words_prime, q.words_prime);
  auto max = pooled_cast(PoolKind::max, inter_similarity(tape, p.max_pool, d.words_prime, q.words_prime),
                         d.words_prime, q.words_prime);
  auto fd = compress(tape, p, d.words_prime, align.for_d, d.intra, repeat_rows(mean.for_d, nd),
                     repeat_rows(max.for_d, nd));
  auto fq = compress(tape, p, q.words_prime, align.for_q, q.intra, repeat_rows(mean.for_q, nq),
                     repeat_rows(max.for_q, nq));
  return {fd, fq};
}

/// Full extraction for a (context, candidate) pair of embedded sequences.
template <typename Scalar>
McanFeatures<Scalar> mcan_extract(BasicTape<Scalar>& tape, const McanParams<Scalar>& p, const BasicVar<Scalar>& d_words,
                                  const BasicVar<Scalar>& q_words, const AblationFlags& flags) {
  auto d = mcan_prepare(tape, p, p.intra_context, d_words, flags);
  auto q = mcan_prepare(tape, p, p.intra_response, q_words, flags);
  return mcan_cross(tape, p, d, q, flags);
}

}  // namespace rapnet
