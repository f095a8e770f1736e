// Full model assembly: utterance features -> BiGRU -> relation-typed graph
// convolution -> attention fuse into word space -> question fuse -> span
// scores. Parameters live in a ParamStore under fixed names so checkpoints
// are self-describing.
//
// Dimension contract: the attention fuse dots utterance vectors against word
// embeddings and the question fuse multiplies elementwise with the question
// vector, so the word embedding size, the convolution output size and the
// utterance feature size must all be equal. validate() enforces this up
// front rather than letting a deep shape error surface mid-forward.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmrc/corpus.hpp"
#include "dmrc/encoder.hpp"
#include "dmrc/graph.hpp"
#include "dmrc/mrc.hpp"
#include "dmrc/param_store.hpp"
#include "dmrc/tensor.hpp"

namespace dmrc {

struct ModelConfig {
    EncoderConfig encoder;
    GraphMode graph_mode = GraphMode::gold();
    int word_dim = 32;  // trainable word embeddings feeding the span scorer
    DecodeParams decode;
};

inline void validate(const ModelConfig& cfg) {
    if (cfg.encoder.gru_hidden < 1 || cfg.encoder.rgcn_hidden < 1 || cfg.word_dim < 1)
        throw std::invalid_argument("model config: hidden sizes must be >= 1");
    if (cfg.decode.max_answer_len < 1)
        throw std::invalid_argument("model config: max_answer_len must be >= 1");
    if (cfg.encoder.utterance_mode == UtteranceMode::BagOfWords && cfg.encoder.embed_dim < 1)
        throw std::invalid_argument("model config: embed_dim must be >= 1");
    if (cfg.word_dim != cfg.encoder.rgcn_hidden)
        throw std::invalid_argument(
            "model config: word_dim (" + std::to_string(cfg.word_dim) + ") must equal rgcn_hidden (" +
            std::to_string(cfg.encoder.rgcn_hidden) + "); the attention fuse dots words against utterance vectors");
    if (cfg.encoder.utterance_mode == UtteranceMode::BagOfWords && cfg.encoder.embed_dim != cfg.encoder.rgcn_hidden)
        throw std::invalid_argument(
            "model config: embed_dim (" + std::to_string(cfg.encoder.embed_dim) + ") must equal rgcn_hidden (" +
            std::to_string(cfg.encoder.rgcn_hidden) + "); the question vector multiplies fused word features");
    if (cfg.encoder.utterance_mode == UtteranceMode::PrecomputedFile && cfg.encoder.precomputed_path.empty())
        throw std::invalid_argument("model config: precomputed utterance mode needs a file path");
}

inline std::vector<std::string> relation_vocab_for(const GraphMode& mode) {
    switch (mode.kind) {
        case GraphMode::Kind::GoldDiscourse:
            return {relation_names().begin(), relation_names().end()};
        case GraphMode::Kind::LinksOnly:
            return {"same-speaker", "different-speaker"};
        case GraphMode::Kind::FullyConnected:
            return {"connected"};
    }
    return {};
}

// Everything derivable from a dialogue once, reused across epochs.
struct PreparedQuestion {
    std::string id;
    std::string text;
    std::vector<std::string> gold_texts;
    std::vector<int> token_ids;           // bag-of-words ids for the question text
    std::vector<double> frozen_vector;    // precomputed mode
    bool gold_na = true;
    int gold_start = 0, gold_end = 0;     // token indices; sentinel (0,0) for NA
};

struct PreparedDialogue {
    std::string id;
    FlattenedContext ctx;
    DialogueGraph graph;
    NeighborIndex neighbors;
    std::vector<std::vector<int>> utterance_token_ids;  // speaker token + text tokens
    std::vector<int> context_token_ids;                 // per non-sentinel context token
    std::vector<std::vector<double>> frozen_utterances;  // precomputed mode
    std::vector<PreparedQuestion> questions;
};

class Model {
  public:
    // fresh parameters from the seed
    Model(ModelConfig cfg, Vocabulary vocab, std::uint64_t seed,
          std::optional<PrecomputedEmbeddings> frozen = std::nullopt)
        : cfg_(std::move(cfg)),
          vocab_(std::move(vocab)),
          relation_vocab_(relation_vocab_for(cfg_.graph_mode)),
          frozen_(std::move(frozen)),
          params_(seed) {
        validate(cfg_);
        check_frozen_dim();
        for (const auto& [name, shape] : param_spec())
            params_.create(name, shape, is_bias(name) ? Init::Zeros : Init::Glorot);
    }

    static bool is_bias(const std::string& name) {
        const auto pos = name.rfind('.');
        const std::string last = pos == std::string::npos ? name : name.substr(pos + 1);
        return last == "bz" || last == "br" || last == "bh";
    }

    // adopt parameters loaded from a checkpoint
    Model(ModelConfig cfg, Vocabulary vocab, ParamStore params,
          std::optional<PrecomputedEmbeddings> frozen = std::nullopt)
        : cfg_(std::move(cfg)),
          vocab_(std::move(vocab)),
          relation_vocab_(relation_vocab_for(cfg_.graph_mode)),
          frozen_(std::move(frozen)),
          params_(std::move(params)) {
        validate(cfg_);
        check_frozen_dim();
        const auto spec = param_spec();
        if (params_.num_params() != spec.size())
            throw std::runtime_error("checkpoint carries " + std::to_string(params_.num_params()) +
                                     " parameters but the configuration defines " + std::to_string(spec.size()));
        for (const auto& [name, shape] : spec) {
            if (!params_.has(name)) throw std::runtime_error("checkpoint is missing parameter: " + name);
            const Shape& got = params_.get(name).shape();
            if (got != shape) {
                if (name == "enc.embed" || name == "mrc.word_embed")
                    throw std::runtime_error("vocabulary mismatch: checkpoint " + name + " has " +
                                             std::to_string(got[0]) + " rows but the vocabulary has " +
                                             std::to_string(shape[0]) + " entries");
                throw std::runtime_error("checkpoint parameter " + name + " has shape " + shape_str(got) +
                                         ", expected " + shape_str(shape));
            }
        }
    }

    const ModelConfig& config() const { return cfg_; }
    const Vocabulary& vocab() const { return vocab_; }
    const std::vector<std::string>& relation_vocab() const { return relation_vocab_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    int relation_matrix_count() const {
        int n = 0;
        for (const auto& [name, t] : params_.entries())
            if (name.rfind("rgcn.l1.rel.", 0) == 0) n += 1;
        return n;
    }

    // (name, shape) of every trainable tensor this configuration defines
    std::vector<std::pair<std::string, Shape>> param_spec() const {
        std::vector<std::pair<std::string, Shape>> spec;
        const int du = utterance_dim();
        const int gh = cfg_.encoder.gru_hidden;
        const int rh = cfg_.encoder.rgcn_hidden;
        const int wd = cfg_.word_dim;
        const int fused = wd + rh;
        if (cfg_.encoder.utterance_mode == UtteranceMode::BagOfWords)
            spec.emplace_back("enc.embed", Shape{vocab_.size(), du});
        for (const char* dir : {"f", "b"})
            for (const char* gate : {"z", "r", "h"}) {
                spec.emplace_back("gru." + std::string(dir) + ".w" + gate, Shape{gh, du});
                spec.emplace_back("gru." + std::string(dir) + ".u" + gate, Shape{gh, gh});
                spec.emplace_back("gru." + std::string(dir) + ".b" + gate, Shape{gh});
            }
        for (const std::string& rel : relation_vocab_)
            spec.emplace_back("rgcn.l1.rel." + rel, Shape{rh, 2 * gh});
        spec.emplace_back("rgcn.l1.self", Shape{rh, 2 * gh});
        if (cfg_.encoder.layer2_per_relation)
            for (const std::string& rel : relation_vocab_) spec.emplace_back("rgcn.l2.rel." + rel, Shape{rh, rh});
        else
            spec.emplace_back("rgcn.l2.shared", Shape{rh, rh});
        spec.emplace_back("rgcn.l2.self", Shape{rh, rh});
        spec.emplace_back("mrc.word_embed", Shape{vocab_.size(), wd});
        spec.emplace_back("mrc.sentinel", Shape{wd});
        spec.emplace_back("mrc.start", Shape{fused});
        spec.emplace_back("mrc.end", Shape{fused});
        return spec;
    }

    PreparedDialogue prepare(const Dialogue& d) const {
        PreparedDialogue p;
        p.id = d.id;
        p.ctx = flatten_dialogue(d);
        p.graph = build_graph(d, cfg_.graph_mode);
        p.neighbors = neighbor_index(p.graph);
        for (const Utterance& u : d.utterances) {
            std::vector<int> ids{vocab_.id(u.speaker)};
            for (const Token& t : tokenize(u.text)) ids.push_back(vocab_.id(t.surface));
            p.utterance_token_ids.push_back(std::move(ids));
            if (frozen_) p.frozen_utterances.push_back(frozen_->utterance(d.id, u.index));
        }
        for (std::size_t t = 1; t < p.ctx.tokens.size(); ++t)
            p.context_token_ids.push_back(vocab_.id(p.ctx.tokens[t].surface));
        for (const Question& q : d.questions) {
            PreparedQuestion pq;
            pq.id = q.id;
            pq.text = q.text;
            for (const Token& t : tokenize(q.text)) pq.token_ids.push_back(vocab_.id(t.surface));
            if (pq.token_ids.empty()) pq.token_ids.push_back(0);
            if (frozen_) pq.frozen_vector = frozen_->question(q.id);
            pq.gold_na = q.unanswerable();
            for (const AnswerSpan& a : q.answers) pq.gold_texts.push_back(a.text);
            if (!q.unanswerable()) {
                try {
                    auto [s, e] = align_answer_span(p.ctx, q.answers[0].char_start, q.answers[0].text);
                    pq.gold_start = s;
                    pq.gold_end = e;
                } catch (const CorpusError& err) {
                    throw CorpusError("question " + q.id + ": " + err.what());
                }
            }
            p.questions.push_back(std::move(pq));
        }
        return p;
    }

    // tape == nullptr runs the pure numeric inference path
    SpanScores forward(Tape* tape, const PreparedDialogue& d, const PreparedQuestion& q) const {
        // each parameter becomes exactly one tape leaf, however often it is used
        std::map<std::string, Tensor> fetched;
        auto P = [&](const std::string& name) -> Tensor {
            if (!tape) return params_.get(name);
            auto it = fetched.find(name);
            if (it == fetched.end()) it = fetched.emplace(name, tape->leaf(params_.get(name), name)).first;
            return it->second;
        };

        Tensor features = utterance_features(tape, d, P);
        Tensor context = bigru_forward(features, fetch_gru(P));
        Tensor mixed = rgcn_forward(context, d.graph, d.neighbors, fetch_rgcn(P));

        Tensor word_table = P("mrc.word_embed");
        std::vector<Tensor> word_rows;
        word_rows.reserve(d.context_token_ids.size() + 1);
        word_rows.push_back(P("mrc.sentinel"));
        for (int id : d.context_token_ids) word_rows.push_back(row(word_table, id));
        Tensor words = stack_rows(word_rows);

        Tensor fused = attention_fuse(mixed, words);
        Tensor question = question_vector(tape, q, P);
        Tensor aware = question_fuse(fused, question);
        Tensor final_words = fuse_concat(words, aware);
        return score_spans(final_words, P("mrc.start"), P("mrc.end"));
    }

    // cross-entropy over the start and end distributions; NA targets the
    // sentinel position on both sides
    Tensor loss(const SpanScores& scores, const PreparedQuestion& q) const {
        return add(cross_entropy_with_index(scores.start, q.gold_start),
                   cross_entropy_with_index(scores.end, q.gold_end));
    }

  private:
    int utterance_dim() const {
        if (cfg_.encoder.utterance_mode == UtteranceMode::BagOfWords) return cfg_.encoder.embed_dim;
        return frozen_ ? frozen_->dim() : cfg_.encoder.rgcn_hidden;
    }

    void check_frozen_dim() const {
        if (cfg_.encoder.utterance_mode != UtteranceMode::PrecomputedFile) return;
        if (!frozen_) throw std::invalid_argument("precomputed utterance mode needs the embedding table loaded");
        if (frozen_->dim() != cfg_.encoder.rgcn_hidden)
            throw std::invalid_argument("precomputed vectors have dimension " + std::to_string(frozen_->dim()) +
                                        " but rgcn_hidden is " + std::to_string(cfg_.encoder.rgcn_hidden) +
                                        "; the question fuse requires them equal");
    }

    template <typename Fetch>
    Tensor utterance_features(Tape*, const PreparedDialogue& d, Fetch& P) const {
        if (cfg_.encoder.utterance_mode == UtteranceMode::BagOfWords) {
            Tensor table = P("enc.embed");
            std::vector<Tensor> rows;
            rows.reserve(d.utterance_token_ids.size());
            for (const auto& ids : d.utterance_token_ids) rows.push_back(embedding_mean(table, ids));
            return stack_rows(rows);
        }
        std::vector<double> flat;
        for (const auto& v : d.frozen_utterances) flat.insert(flat.end(), v.begin(), v.end());
        return Tensor(Shape{static_cast<int>(d.frozen_utterances.size()), frozen_->dim()}, std::move(flat));
    }

    template <typename Fetch>
    Tensor question_vector(Tape*, const PreparedQuestion& q, Fetch& P) const {
        if (cfg_.encoder.utterance_mode == UtteranceMode::BagOfWords)
            return embedding_mean(P("enc.embed"), q.token_ids);
        return Tensor::vec(q.frozen_vector);
    }

    template <typename Fetch>
    BiGruRefs fetch_gru(Fetch& P) const {
        BiGruRefs refs;
        refs.fwd = {P("gru.f.wz"), P("gru.f.uz"), P("gru.f.bz"), P("gru.f.wr"), P("gru.f.ur"),
                    P("gru.f.br"), P("gru.f.wh"), P("gru.f.uh"), P("gru.f.bh")};
        refs.bwd = {P("gru.b.wz"), P("gru.b.uz"), P("gru.b.bz"), P("gru.b.wr"), P("gru.b.ur"),
                    P("gru.b.br"), P("gru.b.wh"), P("gru.b.uh"), P("gru.b.bh")};
        return refs;
    }

    template <typename Fetch>
    RgcnRefs fetch_rgcn(Fetch& P) const {
        RgcnRefs refs;
        for (const std::string& rel : relation_vocab_) refs.rel1.push_back(P("rgcn.l1.rel." + rel));
        refs.self1 = P("rgcn.l1.self");
        if (cfg_.encoder.layer2_per_relation)
            for (const std::string& rel : relation_vocab_) refs.rel2.push_back(P("rgcn.l2.rel." + rel));
        else
            refs.rel2 = {P("rgcn.l2.shared")};
        refs.self2 = P("rgcn.l2.self");
        refs.layer2_per_relation = cfg_.encoder.layer2_per_relation;
        refs.activation = cfg_.encoder.activation;
        return refs;
    }

    ModelConfig cfg_;
    Vocabulary vocab_;
    std::vector<std::string> relation_vocab_;
    std::optional<PrecomputedEmbeddings> frozen_;
    ParamStore params_;
};

}  // namespace dmrc
