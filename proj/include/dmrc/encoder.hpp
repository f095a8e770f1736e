// Utterance encoding and the two context encoders.
//
// Utterance features come from one of two pluggable sources: a frozen
// precomputed-embedding file (vectors enter the model as constants and never
// train) or a trainable bag-of-words table (the mean of the word embeddings
// of the utterance's tokens, speaker token included). A bidirectional GRU
// then produces context-dependent features, and a two-layer relation-typed
// graph convolution mixes them along discourse edges:
//
//   layer 1:  h_i = act( sum_r sum_{j in N_i^r} (1/|N_i^r|) W_r g_j + W_self g_i )
//   layer 2:  h_i = act( sum_{j in union_r N_i^r} W h_j + W_self h_i )
//
// Layer 2 uses one shared W by default; a per-relation variant (mirroring
// layer 1, normalization included) sits behind a config flag.
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmrc/corpus.hpp"
#include "dmrc/graph.hpp"
#include "dmrc/param_store.hpp"
#include "dmrc/tensor.hpp"

namespace dmrc {

enum class Activation { Sigmoid, Tanh, Relu };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation: " + s + " (expected sigmoid | tanh | relu)");
}

inline Tensor apply_activation(Activation a, const Tensor& x) {
    switch (a) {
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Tanh: return tanh(x);
        case Activation::Relu: return relu(x);
    }
    throw std::invalid_argument("unknown activation");
}

enum class UtteranceMode { BagOfWords, PrecomputedFile };

struct EncoderConfig {
    UtteranceMode utterance_mode = UtteranceMode::BagOfWords;
    std::string precomputed_path;  // PrecomputedFile only
    int embed_dim = 32;            // BagOfWords feature size (and question encoder size)
    int gru_hidden = 32;
    int rgcn_hidden = 32;
    Activation activation = Activation::Relu;
    bool layer2_per_relation = false;
};

// ---- vocabulary ----

// Sorted surface -> id table; id 0 is the shared <unk>. Built from the
// training split only: utterance tokens, speaker names, question tokens.
class Vocabulary {
  public:
    Vocabulary() { words_.push_back("<unk>"); }

    static Vocabulary build(const std::vector<Dialogue>& training) {
        std::set<std::string> surfaces;
        for (const Dialogue& d : training) {
            // flattened-context tokens cover utterance words, speaker
            // surfaces and the "speaker:" separator alike
            FlattenedContext ctx = flatten_dialogue(d);
            for (std::size_t t = 1; t < ctx.tokens.size(); ++t) surfaces.insert(ctx.tokens[t].surface);
            for (const Utterance& u : d.utterances) surfaces.insert(u.speaker);
            for (const Question& q : d.questions)
                for (const Token& t : tokenize(q.text)) surfaces.insert(t.surface);
        }
        Vocabulary v;
        for (const std::string& s : surfaces) {
            v.index_.emplace(s, static_cast<int>(v.words_.size()));
            v.words_.push_back(s);
        }
        return v;
    }

    int id(const std::string& surface) const {
        auto it = index_.find(surface);
        return it == index_.end() ? 0 : it->second;
    }
    int size() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const { return words_; }

    json to_json() const { return json(words_); }
    static Vocabulary from_json(const json& j) {
        if (!j.is_array() || j.empty() || j[0].get<std::string>() != "<unk>")
            throw std::invalid_argument("malformed vocabulary list");
        Vocabulary v;
        for (std::size_t i = 1; i < j.size(); ++i) {
            std::string w = j[i].get<std::string>();
            v.index_.emplace(w, static_cast<int>(v.words_.size()));
            v.words_.push_back(std::move(w));
        }
        return v;
    }

  private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

// ---- precomputed (frozen) utterance vectors ----

// JSON-lines file; each line is one record:
//   {"dialogue_id": "...", "utterance_index": 3, "vector": [..]}
//   {"question_id": "...", "vector": [..]}
// The first record fixes the dimension; every later record must match.
class PrecomputedEmbeddings {
  public:
    static PrecomputedEmbeddings load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open embedding file: " + path);
        PrecomputedEmbeddings pe;
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": " + e.what());
            }
            if (!j.contains("vector") || !j["vector"].is_array())
                throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": missing \"vector\"");
            std::vector<double> vec = j["vector"].get<std::vector<double>>();
            if (pe.dim_ == 0) pe.dim_ = static_cast<int>(vec.size());
            if (pe.dim_ == 0 || static_cast<int>(vec.size()) != pe.dim_)
                throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": dimension " +
                                         std::to_string(vec.size()) + " != declared " + std::to_string(pe.dim_));
            std::string key;
            if (j.contains("question_id")) {
                key = "q\t" + j["question_id"].get<std::string>();
            } else if (j.contains("dialogue_id") && j.contains("utterance_index")) {
                key = "u\t" + j["dialogue_id"].get<std::string>() + "\t" +
                      std::to_string(j["utterance_index"].get<long>());
            } else {
                throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                                         ": needs question_id or dialogue_id+utterance_index");
            }
            if (!pe.rows_.emplace(std::move(key), std::move(vec)).second)
                throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": duplicate key");
        }
        if (pe.rows_.empty()) throw std::runtime_error("embedding file is empty: " + path);
        return pe;
    }

    const std::vector<double>& utterance(const std::string& dialogue_id, int index) const {
        auto it = rows_.find("u\t" + dialogue_id + "\t" + std::to_string(index));
        if (it == rows_.end())
            throw std::runtime_error("no embedding for dialogue " + dialogue_id + " utterance " +
                                     std::to_string(index));
        return it->second;
    }
    const std::vector<double>& question(const std::string& question_id) const {
        auto it = rows_.find("q\t" + question_id);
        if (it == rows_.end()) throw std::runtime_error("no embedding for question " + question_id);
        return it->second;
    }
    int dim() const { return dim_; }

  private:
    int dim_ = 0;
    std::map<std::string, std::vector<double>> rows_;
};

// mean of the embedding rows selected by ids (repeats allowed); ids must be
// non-empty — callers substitute {unk} for empty token lists
inline Tensor embedding_mean(const Tensor& table, const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("embedding_mean: no token ids");
    Tensor acc = row(table, ids[0]);
    for (std::size_t i = 1; i < ids.size(); ++i) acc = add(acc, row(table, ids[i]));
    return scale(acc, 1.0 / static_cast<double>(ids.size()));
}

// ---- GRU ----

struct GruCellRefs {
    Tensor wz, uz, bz;  // update gate
    Tensor wr, ur, br;  // reset gate
    Tensor wh, uh, bh;  // candidate
};

struct BiGruRefs {
    GruCellRefs fwd, bwd;
};

namespace detail {
inline Tensor one_minus(const Tensor& x) { return add(Tensor::full(x.shape(), 1.0), scale(x, -1.0)); }
}  // namespace detail

inline Tensor gru_cell(const GruCellRefs& p, const Tensor& x, const Tensor& h_prev) {
    Tensor z = sigmoid(add(add(matvec(p.wz, x), matvec(p.uz, h_prev)), p.bz));
    Tensor r = sigmoid(add(add(matvec(p.wr, x), matvec(p.ur, h_prev)), p.br));
    Tensor cand = tanh(add(add(matvec(p.wh, x), matvec(p.uh, mul(r, h_prev))), p.bh));
    return add(mul(detail::one_minus(z), h_prev), mul(z, cand));
}

// Rows of `inputs` are the per-utterance features; output row i is the
// concatenation of the forward state after reading rows 0..i and the
// backward state after reading rows N-1..i. Initial states are zero.
inline Tensor bigru_forward(const Tensor& inputs, const BiGruRefs& p) {
    if (inputs.rank() != 2) throw std::invalid_argument("bigru_forward: expects a matrix of utterance features");
    const int n = inputs.shape()[0];
    const int hidden = p.fwd.bz.shape()[0];
    std::vector<Tensor> fwd_states, bwd_states(static_cast<std::size_t>(n));
    Tensor h = Tensor::zeros({hidden});
    for (int i = 0; i < n; ++i) {
        h = gru_cell(p.fwd, row(inputs, i), h);
        fwd_states.push_back(h);
    }
    h = Tensor::zeros({hidden});
    for (int i = n - 1; i >= 0; --i) {
        h = gru_cell(p.bwd, row(inputs, i), h);
        bwd_states[i] = h;
    }
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (int i = 0; i < n; ++i) rows.push_back(concat(fwd_states[i], bwd_states[i], 0));
    return stack_rows(rows);
}

// ---- relational graph convolution ----

struct RgcnRefs {
    std::vector<Tensor> rel1;  // one per relation in the graph's vocabulary
    Tensor self1;
    std::vector<Tensor> rel2;  // size 1 when layer 2 is shared
    Tensor self2;
    bool layer2_per_relation = false;
    Activation activation = Activation::Relu;
};

inline Tensor rgcn_forward(const Tensor& features, const DialogueGraph& graph, const NeighborIndex& nbrs,
                           const RgcnRefs& p) {
    if (features.rank() != 2 || features.shape()[0] != graph.num_nodes)
        throw std::invalid_argument("rgcn_forward: features " + shape_str(features.shape()) +
                                    " do not match graph with " + std::to_string(graph.num_nodes) + " nodes");
    const int n_rel = static_cast<int>(graph.relation_vocab.size());
    if (static_cast<int>(p.rel1.size()) != n_rel)
        throw std::invalid_argument("rgcn_forward: " + std::to_string(p.rel1.size()) +
                                    " relation matrices for vocabulary of " + std::to_string(n_rel));
    for (const GraphEdge& e : graph.edges)
        if (e.relation < 0 || e.relation >= n_rel)
            throw std::invalid_argument("rgcn_forward: edge relation id " + std::to_string(e.relation) +
                                        " outside parameter vocabulary");
    const int n = graph.num_nodes;

    std::vector<Tensor> g_rows, h1_rows;
    g_rows.reserve(n);
    for (int i = 0; i < n; ++i) g_rows.push_back(row(features, i));

    for (int i = 0; i < n; ++i) {
        Tensor acc = matvec(p.self1, g_rows[i]);
        for (int r = 0; r < n_rel; ++r) {
            const auto& sources = nbrs.of(i, r);
            if (sources.empty()) continue;
            const double norm = 1.0 / static_cast<double>(sources.size());
            for (int j : sources) acc = add(acc, scale(matvec(p.rel1[r], g_rows[j]), norm));
        }
        h1_rows.push_back(apply_activation(p.activation, acc));
    }

    std::vector<Tensor> h2_rows;
    h2_rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        Tensor acc = matvec(p.self2, h1_rows[i]);
        if (p.layer2_per_relation) {
            if (p.rel2.size() != static_cast<std::size_t>(n_rel))
                throw std::invalid_argument("rgcn_forward: layer-2 per-relation matrices missing");
            for (int r = 0; r < n_rel; ++r) {
                const auto& sources = nbrs.of(i, r);
                if (sources.empty()) continue;
                const double norm = 1.0 / static_cast<double>(sources.size());
                for (int j : sources) acc = add(acc, scale(matvec(p.rel2[r], h1_rows[j]), norm));
            }
        } else {
            if (p.rel2.size() != 1)
                throw std::invalid_argument("rgcn_forward: shared layer 2 expects exactly one matrix");
            // unnormalized sum over the union of in-neighbors, each node once
            std::set<int> uni;
            for (int r = 0; r < n_rel; ++r)
                for (int j : nbrs.of(i, r)) uni.insert(j);
            for (int j : uni) acc = add(acc, matvec(p.rel2[0], h1_rows[j]));
        }
        h2_rows.push_back(apply_activation(p.activation, acc));
    }
    return stack_rows(h2_rows);
}

}  // namespace dmrc
