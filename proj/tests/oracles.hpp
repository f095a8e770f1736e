// Independent per-definition evaluators used to validate the implementation.
// Everything here is deliberately naive: plain loops over plain vectors,
// no tensors, no tape.
#pragma once

#include <cmath>
#include <set>
#include <vector>

#include "dmrc/encoder.hpp"
#include "dmrc/graph.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // row-major nested vectors

inline Mat from_tensor(const dmrc::Tensor& t) {
    Mat m(t.shape()[0], std::vector<double>(t.shape()[1]));
    for (int i = 0; i < t.shape()[0]; ++i)
        for (int j = 0; j < t.shape()[1]; ++j) m[i][j] = t.at(i, j);
    return m;
}

inline std::vector<double> matvec(const Mat& a, const std::vector<double>& x) {
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    return y;
}

inline double activate(dmrc::Activation act, double v) {
    switch (act) {
        case dmrc::Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
        case dmrc::Activation::Tanh: return std::tanh(v);
        case dmrc::Activation::Relu: return v > 0.0 ? v : 0.0;
    }
    return v;
}

// Two-layer relation-typed graph convolution straight from its definition.
inline Mat rgcn(const Mat& features, const dmrc::DialogueGraph& graph, const std::vector<Mat>& rel1,
                const Mat& self1, const Mat& rel2_shared, const Mat& self2, dmrc::Activation act) {
    const int n = graph.num_nodes;
    const int n_rel = static_cast<int>(graph.relation_vocab.size());
    auto in_neighbors = [&](int node, int r) {
        std::vector<int> out;
        for (const auto& e : graph.edges)
            if (e.dst == node && e.relation == r) out.push_back(e.src);
        return out;
    };

    Mat h1(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> acc = matvec(self1, features[i]);
        for (int r = 0; r < n_rel; ++r) {
            auto nb = in_neighbors(i, r);
            if (nb.empty()) continue;
            for (int j : nb) {
                auto term = matvec(rel1[r], features[j]);
                for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += term[k] / nb.size();
            }
        }
        for (double& v : acc) v = activate(act, v);
        h1[i] = std::move(acc);
    }

    Mat h2(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> acc = matvec(self2, h1[i]);
        std::set<int> uni;
        for (int r = 0; r < n_rel; ++r)
            for (int j : in_neighbors(i, r)) uni.insert(j);
        for (int j : uni) {
            auto term = matvec(rel2_shared, h1[j]);
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += term[k];
        }
        for (double& v : acc) v = activate(act, v);
        h2[i] = std::move(acc);
    }
    return h2;
}

// Exhaustive span search: best start(i)+end(j) over 1 <= i <= j,
// j - i < max_len; ties to the smallest i, then smallest j. Returns whether
// the best span beats the no-answer score by more than tau.
struct DecodeResult {
    bool is_span = false;
    int start = 0;
    int end = 0;
    double s_best = -std::numeric_limits<double>::infinity();
};

inline DecodeResult decode(const std::vector<double>& start_logits, const std::vector<double>& end_logits,
                           double s_na, double tau, int max_len) {
    DecodeResult r;
    const int t = static_cast<int>(start_logits.size());
    for (int i = 1; i < t; ++i)
        for (int j = i; j < t; ++j) {
            if (j - i >= max_len) continue;
            const double score = start_logits[i] + end_logits[j];
            if (score > r.s_best) {
                r.s_best = score;
                r.start = i;
                r.end = j;
            }
        }
    r.is_span = r.s_best > s_na + tau;
    return r;
}

// Per-definition attention fuse: for each word p, softmax over utterances of
// h_i . w_p, then mix the utterance vectors.
inline Mat attention_fuse(const Mat& utterances, const Mat& words) {
    const std::size_t n = utterances.size(), t = words.size(), d = utterances[0].size();
    Mat f(t, std::vector<double>(d, 0.0));
    for (std::size_t p = 0; p < t; ++p) {
        std::vector<double> e(n);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            e[i] = 0.0;
            for (std::size_t k = 0; k < d; ++k) e[i] += utterances[i][k] * words[p][k];
            mx = std::max(mx, e[i]);
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) denom += std::exp(e[i] - mx);
        for (std::size_t i = 0; i < n; ++i) {
            const double alpha = std::exp(e[i] - mx) / denom;
            for (std::size_t k = 0; k < d; ++k) f[p][k] += alpha * utterances[i][k];
        }
    }
    return f;
}

}  // namespace oracle
