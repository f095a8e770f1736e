// Span-extraction head. Word representations absorb the discourse-aware
// utterance vectors through attention, the question through an elementwise
// product, and a pair of learned vectors scores every token as a span start
// or end. Token row 0 is the answerability sentinel: its start+end score is
// the no-answer score s_NA, and a span is emitted only when the best span
// beats s_NA by more than the margin tau.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dmrc/corpus.hpp"
#include "dmrc/tensor.hpp"

namespace dmrc {

// For each word p: e_{ip} = h_i . w_p over utterances i, attention
// alpha = softmax over i, f_p = sum_i alpha_{ip} h_i. Rows of `utterances`
// and `words` share one feature dimension.
inline Tensor attention_fuse(const Tensor& utterances, const Tensor& words) {
    if (utterances.rank() != 2 || words.rank() != 2 || utterances.shape()[1] != words.shape()[1])
        throw std::invalid_argument("attention_fuse: feature dims differ: " + shape_str(utterances.shape()) +
                                    " vs " + shape_str(words.shape()));
    Tensor scores = matmul(utterances, transpose(words));  // N x T
    Tensor alpha = softmax(scores, 0);                     // each word's column sums to 1
    return matmul(transpose(alpha), utterances);           // T x d
}

// c_p = f_p ⊙ q, the question injected per word.
inline Tensor question_fuse(const Tensor& fused, const Tensor& q) {
    if (fused.rank() != 2 || q.rank() != 1 || fused.shape()[1] != q.shape()[0])
        throw std::invalid_argument("question_fuse: dims differ: " + shape_str(fused.shape()) + " vs " +
                                    shape_str(q.shape()));
    return mul(fused, repeat_rows(q, fused.shape()[0]));
}

// t_p = concat(w_p, c_p) rowwise.
inline Tensor fuse_concat(const Tensor& words, const Tensor& question_aware) {
    if (words.rank() != 2 || question_aware.rank() != 2 || words.shape()[0] != question_aware.shape()[0])
        throw std::invalid_argument("fuse_concat: row counts differ: " + shape_str(words.shape()) + " vs " +
                                    shape_str(question_aware.shape()));
    return concat(words, question_aware, 1);
}

// Full start/end logit vectors over all token rows, sentinel at index 0.
// s_NA = start[0] + end[0]; span candidates use indices >= 1.
struct SpanScores {
    Tensor start;
    Tensor end;
};

inline SpanScores score_spans(const Tensor& fused, const Tensor& start_vec, const Tensor& end_vec) {
    if (fused.rank() != 2 || fused.shape()[0] < 2)
        throw std::invalid_argument("score_spans: need the sentinel plus at least one token, got " +
                                    shape_str(fused.shape()));
    return {matvec(fused, start_vec), matvec(fused, end_vec)};
}

inline double na_score(const SpanScores& s) { return s.start.at(0) + s.end.at(0); }

struct DecodeParams {
    double tau = 0.0;
    int max_answer_len = 30;  // tokens
};

struct Prediction {
    std::string question_id;
    bool is_na = true;
    int start_token = 0, end_token = 0;  // decided span; 0 when NA
    int char_start = 0, char_end = 0;
    std::string text;
    // best candidate span irrespective of the NA decision; tau-independent,
    // recorded in the score sidecar so thresholds can be swept offline
    int best_start = 0, best_end = 0;
    double s_best = -std::numeric_limits<double>::infinity();
    double s_na = 0.0;
};

// Scans spans 1 <= i <= j, j - i < max_answer_len in ascending (i, j) order,
// keeping strictly better scores, so ties resolve to the smallest start then
// the smallest end. The best span is reported even when the decision is NA.
inline Prediction decode(const std::vector<double>& start_logits, const std::vector<double>& end_logits,
                         double s_na, const DecodeParams& p, const FlattenedContext& ctx) {
    if (start_logits.empty() || start_logits.size() != end_logits.size())
        throw std::invalid_argument("decode: start/end logits must be non-empty and equal length");
    if (start_logits.size() != ctx.tokens.size())
        throw std::invalid_argument("decode: logits cover " + std::to_string(start_logits.size()) +
                                    " tokens but context has " + std::to_string(ctx.tokens.size()));
    Prediction out;
    out.s_na = s_na;
    const int t = static_cast<int>(start_logits.size());
    int bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < t; ++i) {
        const int j_hi = std::min(t - 1, i + p.max_answer_len - 1);
        for (int j = i; j <= j_hi; ++j) {
            const double score = start_logits[i] + end_logits[j];
            if (score > best) {
                best = score;
                bi = i;
                bj = j;
            }
        }
    }
    out.s_best = best;
    if (bi >= 0) {
        out.best_start = bi;
        out.best_end = bj;
    }
    if (bi >= 0 && best > s_na + p.tau) {
        out.is_na = false;
        out.start_token = bi;
        out.end_token = bj;
        out.char_start = ctx.tokens[bi].char_start;
        out.char_end = ctx.tokens[bj].char_end;
        out.text = ctx.text.substr(out.char_start, out.char_end - out.char_start);
    }
    return out;
}

}  // namespace dmrc
