// Training and evaluation harness. A run is a pure function of
// (config, data): parameter init, epoch shuffling and the update sequence
// are all derived from the config seed through portable generators, so one
// seed always reproduces the same checkpoint bit for bit.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmrc/checkpoint.hpp"
#include "dmrc/corpus.hpp"
#include "dmrc/metrics.hpp"
#include "dmrc/model.hpp"
#include "dmrc/optimizer.hpp"

namespace dmrc {

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 50;
    double learning_rate = 1e-3;
    OptAlgo optimizer = OptAlgo::Adam;
    ModelConfig model;
    std::string train_path;
    std::string dev_path;  // defaults to train_path when empty
    std::string test_path;
};

inline json to_json(const TrainConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["epochs"] = cfg.epochs;
    j["learning_rate"] = cfg.learning_rate;
    j["optimizer"] = to_string(cfg.optimizer);
    j["graph_mode"] = to_string(cfg.model.graph_mode);
    if (cfg.model.graph_mode.window)
        j["fc_window"] = *cfg.model.graph_mode.window;
    else
        j["fc_window"] = nullptr;
    j["encoder"] = {
        {"utterance_mode",
         cfg.model.encoder.utterance_mode == UtteranceMode::BagOfWords ? "bag-of-words" : "precomputed-file"},
        {"precomputed_path", cfg.model.encoder.precomputed_path},
        {"embed_dim", cfg.model.encoder.embed_dim},
        {"gru_hidden", cfg.model.encoder.gru_hidden},
        {"rgcn_hidden", cfg.model.encoder.rgcn_hidden},
        {"activation", to_string(cfg.model.encoder.activation)},
        {"layer2_per_relation", cfg.model.encoder.layer2_per_relation}};
    j["mrc"] = {{"word_dim", cfg.model.word_dim},
                {"tau", cfg.model.decode.tau},
                {"max_answer_len", cfg.model.decode.max_answer_len}};
    j["data"] = {{"train", cfg.train_path}, {"dev", cfg.dev_path}, {"test", cfg.test_path}};
    return j;
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    try {
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
        if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("optimizer")) cfg.optimizer = parse_opt_algo(j.at("optimizer").get<std::string>());
        std::optional<int> window;
        if (j.contains("fc_window") && !j.at("fc_window").is_null()) window = j.at("fc_window").get<int>();
        if (j.contains("graph_mode"))
            cfg.model.graph_mode = parse_graph_mode(j.at("graph_mode").get<std::string>(), window);
        if (j.contains("encoder")) {
            const json& e = j.at("encoder");
            if (e.contains("utterance_mode")) {
                const std::string m = e.at("utterance_mode").get<std::string>();
                if (m == "bag-of-words")
                    cfg.model.encoder.utterance_mode = UtteranceMode::BagOfWords;
                else if (m == "precomputed-file")
                    cfg.model.encoder.utterance_mode = UtteranceMode::PrecomputedFile;
                else
                    throw std::invalid_argument("unknown utterance_mode: " + m);
            }
            if (e.contains("precomputed_path")) cfg.model.encoder.precomputed_path = e.at("precomputed_path");
            if (e.contains("embed_dim")) cfg.model.encoder.embed_dim = e.at("embed_dim").get<int>();
            if (e.contains("gru_hidden")) cfg.model.encoder.gru_hidden = e.at("gru_hidden").get<int>();
            if (e.contains("rgcn_hidden")) cfg.model.encoder.rgcn_hidden = e.at("rgcn_hidden").get<int>();
            if (e.contains("activation"))
                cfg.model.encoder.activation = parse_activation(e.at("activation").get<std::string>());
            if (e.contains("layer2_per_relation"))
                cfg.model.encoder.layer2_per_relation = e.at("layer2_per_relation").get<bool>();
        }
        if (j.contains("mrc")) {
            const json& m = j.at("mrc");
            if (m.contains("word_dim")) cfg.model.word_dim = m.at("word_dim").get<int>();
            if (m.contains("tau")) cfg.model.decode.tau = m.at("tau").get<double>();
            if (m.contains("max_answer_len")) cfg.model.decode.max_answer_len = m.at("max_answer_len").get<int>();
        }
        if (j.contains("data")) {
            const json& d = j.at("data");
            if (d.contains("train")) cfg.train_path = d.at("train");
            if (d.contains("dev")) cfg.dev_path = d.at("dev");
            if (d.contains("test")) cfg.test_path = d.at("test");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    return cfg;
}

// ---- evaluation ----

struct EvalOutput {
    MetricsReport report;
    json predictions;  // question id -> answer string ("" for NA)
    json sidecar;      // question id -> {s_best, s_na, start, end}
};

inline EvalOutput evaluate(const Model& model, const std::vector<PreparedDialogue>& data, double tau) {
    DecodeParams dp = model.config().decode;
    dp.tau = tau;
    std::vector<QuestionRecord> records;
    EvalOutput out;
    out.predictions = json::object();
    out.sidecar = json::object();
    for (const PreparedDialogue& d : data) {
        for (const PreparedQuestion& q : d.questions) {
            SpanScores scores = model.forward(nullptr, d, q);
            Prediction pred = decode(scores.start.values(), scores.end.values(), na_score(scores), dp, d.ctx);
            pred.question_id = q.id;
            EmF1 s = compute_em_f1(pred.is_na ? std::nullopt : std::optional<std::string>(pred.text),
                                   q.gold_texts);
            records.push_back({q.id, s.em, s.f1, q.gold_na, pred.is_na, pred.is_na ? "" : pred.text});
            out.predictions[q.id] = pred.is_na ? "" : pred.text;
            out.sidecar[q.id] = {{"s_best", pred.s_best},
                                 {"s_na", pred.s_na},
                                 {"start", pred.best_start},
                                 {"end", pred.best_end}};
        }
    }
    out.report = make_report(std::move(records));
    return out;
}

inline std::vector<PreparedDialogue> prepare_all(const Model& model, const std::vector<Dialogue>& dialogues) {
    std::vector<PreparedDialogue> out;
    out.reserve(dialogues.size());
    for (const Dialogue& d : dialogues) out.push_back(model.prepare(d));
    return out;
}

// Re-decides answer/NA from recorded scores at a new tau without running the
// model; scores are tau-independent, only the decision changes.
inline MetricsReport sweep_from_sidecar(const json& sidecar, const std::vector<PreparedDialogue>& data,
                                        double tau) {
    std::vector<QuestionRecord> records;
    for (const PreparedDialogue& d : data)
        for (const PreparedQuestion& q : d.questions) {
            if (!sidecar.contains(q.id)) throw std::runtime_error("sidecar has no scores for question " + q.id);
            const json& e = sidecar.at(q.id);
            const double s_best = e.at("s_best").get<double>();
            const double s_na = e.at("s_na").get<double>();
            const bool is_span = s_best > s_na + tau;
            std::optional<std::string> pred;
            if (is_span) {
                const int start = e.at("start").get<int>();
                const int end = e.at("end").get<int>();
                if (start < 1 || end < start || end >= static_cast<int>(d.ctx.tokens.size()))
                    throw std::runtime_error("sidecar span out of range for question " + q.id);
                const int cs = d.ctx.tokens[start].char_start;
                const int ce = d.ctx.tokens[end].char_end;
                pred = d.ctx.text.substr(cs, ce - cs);
            }
            EmF1 s = compute_em_f1(pred, q.gold_texts);
            records.push_back({q.id, s.em, s.f1, q.gold_na, !is_span, pred ? *pred : ""});
        }
    return make_report(std::move(records));
}

// ---- training ----

struct EpochMetrics {
    int epoch = 0;  // 0 is the untrained model
    double mean_train_loss = 0.0;
    double dev_em = 0.0;
    double dev_f1 = 0.0;
};

struct TrainResult {
    ParamStore best_params{0};
    int best_epoch = 0;
    double best_dev_f1 = 0.0;
    std::vector<EpochMetrics> history;
    Vocabulary vocab;
    ModelConfig model_config;
};

inline std::optional<PrecomputedEmbeddings> load_frozen(const ModelConfig& cfg) {
    if (cfg.encoder.utterance_mode != UtteranceMode::PrecomputedFile) return std::nullopt;
    return PrecomputedEmbeddings::load(cfg.encoder.precomputed_path);
}

inline TrainResult train_on(const TrainConfig& cfg, const std::vector<Dialogue>& train_dialogues,
                            const std::vector<Dialogue>& dev_dialogues) {
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (train_dialogues.empty()) throw std::invalid_argument("training corpus is empty");

    Vocabulary vocab = Vocabulary::build(train_dialogues);
    Model model(cfg.model, vocab, cfg.seed, load_frozen(cfg.model));
    std::vector<PreparedDialogue> train_prep = prepare_all(model, train_dialogues);
    std::vector<PreparedDialogue> dev_prep = prepare_all(model, dev_dialogues);

    std::vector<std::pair<int, int>> pairs;  // (dialogue, question)
    for (std::size_t di = 0; di < train_prep.size(); ++di)
        for (std::size_t qi = 0; qi < train_prep[di].questions.size(); ++qi)
            pairs.emplace_back(static_cast<int>(di), static_cast<int>(qi));
    if (pairs.empty()) throw std::invalid_argument("training corpus has no questions");

    OptimizerState opt;
    opt.algo = cfg.optimizer;
    opt.lr = cfg.learning_rate;
    std::mt19937_64 shuffle_rng(detail::mix_seed(cfg.seed, "epoch-shuffle"));

    TrainResult result;
    result.vocab = vocab;
    result.model_config = cfg.model;
    result.best_params = model.params();
    result.best_epoch = 0;
    result.best_dev_f1 = -1.0;

    auto eval_dev = [&](int epoch, double mean_loss) {
        EvalOutput ev = evaluate(model, dev_prep, cfg.model.decode.tau);
        result.history.push_back({epoch, mean_loss, ev.report.em, ev.report.f1});
        if (ev.report.f1 > result.best_dev_f1) {
            result.best_dev_f1 = ev.report.f1;
            result.best_epoch = epoch;
            result.best_params = model.params();
        }
    };

    if (cfg.epochs == 0) {
        eval_dev(0, 0.0);  // initialization checkpoint, metrics reported once
        return result;
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        detail::fisher_yates_shuffle(pairs, shuffle_rng);
        double loss_sum = 0.0;
        for (const auto& [di, qi] : pairs) {
            Tape tape;
            const PreparedDialogue& d = train_prep[di];
            const PreparedQuestion& q = d.questions[qi];
            SpanScores scores = model.forward(&tape, d, q);
            Tensor loss = model.loss(scores, q);
            loss_sum += loss.value();
            auto grads = tape.backward(loss);
            optimizer_step(opt, model.params(), grads);
        }
        eval_dev(epoch, loss_sum / static_cast<double>(pairs.size()));
    }
    return result;
}

inline TrainResult train(const TrainConfig& cfg) {
    if (cfg.train_path.empty()) throw std::invalid_argument("config has no training data path");
    Corpus train_corpus = parse_corpus(cfg.train_path);
    Corpus dev_corpus = cfg.dev_path.empty() || cfg.dev_path == cfg.train_path
                            ? train_corpus
                            : parse_corpus(cfg.dev_path);
    return train_on(cfg, train_corpus.dialogues, dev_corpus.dialogues);
}

// ---- ablation ----

struct AblationResult {
    std::string mode;
    int relation_matrices = 0;
    std::size_t parameter_values = 0;
    MetricsReport report;  // on test data when configured, dev otherwise
};

// Trains the three graph variants with identical seeds and budgets.
inline std::vector<AblationResult> run_ablation(const TrainConfig& base) {
    std::vector<AblationResult> results;
    for (const GraphMode& mode :
         {GraphMode::gold(), GraphMode::links_only(), GraphMode::fully_connected(base.model.graph_mode.window)}) {
        TrainConfig cfg = base;
        cfg.model.graph_mode = mode;
        TrainResult tr = train(cfg);
        Model best(tr.model_config, tr.vocab, tr.best_params, load_frozen(tr.model_config));
        const std::string eval_path = cfg.test_path.empty() ? (cfg.dev_path.empty() ? cfg.train_path : cfg.dev_path)
                                                            : cfg.test_path;
        Corpus eval_corpus = parse_corpus(eval_path);
        EvalOutput ev = evaluate(best, prepare_all(best, eval_corpus.dialogues), cfg.model.decode.tau);
        results.push_back(
            {to_string(mode), best.relation_matrix_count(), best.params().total_values(), ev.report});
    }
    return results;
}

}  // namespace dmrc
