// Acceptance suite. Runs every release criterion at its stated tolerance and
// prints one pass/fail line per criterion; exits nonzero if any fail.
//
//   1 gradient checks: every op at 1e-6, the full model end to end at 1e-4
//   2 span decoding equals exhaustive enumeration, tie-breaks included
//   3 graph convolution equals a per-definition evaluator; edge-order proof
//   4 hand-computed EM/F1 table
//   5 overfit sanity on the bundled synthetic corpus, bit-exact replay
//   6 tau monotonicity and sidecar sweep consistency
//   7 ablation parameter-count law across the three graph modes
//   8 corpus round-trip and graph statistics on the bundled fixtures
//   9 checkpoint integrity and corruption handling
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "dmrc/checkpoint.hpp"
#include "dmrc/grad_check.hpp"
#include "dmrc/train.hpp"
#include "op_checks.hpp"
#include "oracles.hpp"

using namespace dmrc;

namespace {

const char* kDataDir = DMRC_DATA_DIR;
std::string data_path(const char* name) { return std::string(kDataDir) + "/" + name; }

std::string temp_path(const char* stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(bool cond, const std::string& what) {
    if (!cond) throw Failure(what);
}

template <typename T>
void check_eq(const T& got, const T& want, const std::string& what) {
    if (!(got == want)) {
        std::ostringstream os;
        os << what << ": got " << got << ", want " << want;
        throw Failure(os.str());
    }
}

std::vector<double> random_values(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * detail::uniform01(rng);
    return v;
}

TrainConfig synthetic_config(std::uint64_t seed, int epochs, GraphMode mode = GraphMode::gold()) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = epochs;
    cfg.learning_rate = 0.01;
    cfg.optimizer = OptAlgo::Adam;
    cfg.model.graph_mode = mode;
    cfg.model.encoder.embed_dim = 16;
    cfg.model.encoder.gru_hidden = 16;
    cfg.model.encoder.rgcn_hidden = 16;
    cfg.model.encoder.activation = Activation::Tanh;
    cfg.model.word_dim = 16;
    cfg.train_path = data_path("synthetic_train.json");
    cfg.dev_path = cfg.train_path;
    return cfg;
}

// ---- criterion 1 ----

void criterion_gradients() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240811);
    for (const auto& c : op_checks::all_cases()) {
        const double err = op_checks::run_case(c, rng, 100);
        check(err <= 1e-6, "op " + c.name + " gradient rel err " + std::to_string(err) + " > 1e-6");
    }

    // full model on a 3-utterance dialogue, hidden dims 8
    Dialogue d;
    d.id = "grad";
    d.utterances = {{0, "ana", "red wire on port2"}, {1, "ben", "blue wire on port5"}, {2, "ana", "green is spare"}};
    d.links = {{0, 1, RelationType::QAP}, {1, 2, RelationType::Elaboration}};
    d.questions = {{"grad-q0", "which wire goes on port5", {}}};
    FlattenedContext ctx = flatten_dialogue(d);
    d.questions[0].answers.push_back({"blue wire", static_cast<int>(ctx.text.find("blue wire"))});

    ModelConfig mc;
    mc.graph_mode = GraphMode::gold();
    mc.encoder.embed_dim = 8;
    mc.encoder.gru_hidden = 8;
    mc.encoder.rgcn_hidden = 8;
    mc.encoder.activation = Activation::Tanh;
    mc.word_dim = 8;
    Vocabulary vocab = Vocabulary::build({d});
    Model model(mc, vocab, 5);
    PreparedDialogue prep = model.prepare(d);
    const PreparedQuestion& q = prep.questions[0];

    Tape tape;
    Tensor loss = model.loss(model.forward(&tape, prep, q), q);
    auto analytic = tape.backward(loss);
    auto numeric = finite_difference_gradient(
        [&](const ParamStore& p) {
            Model probe(mc, vocab, p);
            Tape t;
            return probe.loss(probe.forward(&t, prep, q), q).value();
        },
        model.params(), 1e-5);
    const double err = max_grad_rel_err(analytic, numeric);
    check(err <= 1e-4, "end-to-end gradient rel err " + std::to_string(err) + " > 1e-4");

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    check(secs < 120.0, "gradient suite took " + std::to_string(secs) + "s, budget is 120s");
}

// ---- criterion 2 ----

void criterion_decode_oracle() {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 500; ++trial) {
        const int real_tokens = 1 + static_cast<int>(detail::uniform_below(rng, 11));
        Dialogue d;
        d.id = "dec";
        std::string text;
        for (int i = 0; i < real_tokens; ++i) {
            if (i) text += ' ';
            text += static_cast<char>('a' + (i % 26));
        }
        d.utterances = {{0, "A", text}};
        FlattenedContext full = flatten_dialogue(d);
        FlattenedContext ctx;  // keep only the bare words so T <= 12
        ctx.text = full.text;
        ctx.tokens.push_back(full.tokens[0]);
        for (const Token& t : full.tokens)
            if (t.utterance_index == 0 && t.surface != "A" && t.surface != ":") ctx.tokens.push_back(t);
        const int t = static_cast<int>(ctx.tokens.size());

        std::vector<double> st(t), en(t);
        for (auto& v : st) v = static_cast<double>(detail::uniform_below(rng, 5)) - 2.0;
        for (auto& v : en) v = static_cast<double>(detail::uniform_below(rng, 5)) - 2.0;
        const double s_na = static_cast<double>(detail::uniform_below(rng, 9)) - 4.0;
        const double tau = static_cast<double>(detail::uniform_below(rng, 5)) - 2.0;
        const int max_len = 1 + static_cast<int>(detail::uniform_below(rng, t + 2));

        Prediction got = decode(st, en, s_na, {tau, max_len}, ctx);
        oracle::DecodeResult want = oracle::decode(st, en, s_na, tau, max_len);
        check_eq(got.is_na, !want.is_span, "decode NA decision (trial " + std::to_string(trial) + ")");
        check_eq(got.s_best, want.s_best, "decode s_best (trial " + std::to_string(trial) + ")");
        if (want.is_span) {
            check_eq(got.start_token, want.start, "decode start (trial " + std::to_string(trial) + ")");
            check_eq(got.end_token, want.end, "decode end (trial " + std::to_string(trial) + ")");
        }
    }
}

// ---- criterion 3 ----

void criterion_rgcn_oracle() {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(detail::uniform_below(rng, 7));  // <= 8 nodes
        const int n_rel = 1 + static_cast<int>(detail::uniform_below(rng, 4));
        const int dim = 3;
        Dialogue d;
        d.id = "rg";
        for (int i = 0; i < n; ++i) d.utterances.push_back({i, "s" + std::to_string(i % 3), "w"});
        std::set<std::tuple<int, int, int>> used;
        const int target_edges = static_cast<int>(detail::uniform_below(rng, 17));
        for (int e = 0; e < target_edges; ++e) {
            int a = static_cast<int>(detail::uniform_below(rng, n));
            int b = static_cast<int>(detail::uniform_below(rng, n));
            int r = static_cast<int>(detail::uniform_below(rng, n_rel));
            if (a == b || !used.insert({a, b, r}).second) continue;
            d.links.push_back({a, b, static_cast<RelationType>(r)});
        }
        DialogueGraph g = build_graph(d, GraphMode::gold());
        g.relation_vocab.resize(n_rel);
        NeighborIndex nbrs = neighbor_index(g);

        RgcnRefs refs;
        std::vector<oracle::Mat> rel1;
        for (int r = 0; r < n_rel; ++r) {
            refs.rel1.push_back(Tensor::matrix(dim, dim, random_values(rng, dim * dim)));
            rel1.push_back(oracle::from_tensor(refs.rel1.back()));
        }
        refs.self1 = Tensor::matrix(dim, dim, random_values(rng, dim * dim));
        refs.rel2 = {Tensor::matrix(dim, dim, random_values(rng, dim * dim))};
        refs.self2 = Tensor::matrix(dim, dim, random_values(rng, dim * dim));
        refs.activation = Activation::Tanh;
        Tensor features = Tensor::matrix(n, dim, random_values(rng, n * dim));

        Tensor h = rgcn_forward(features, g, nbrs, refs);
        oracle::Mat want = oracle::rgcn(oracle::from_tensor(features), g, rel1, oracle::from_tensor(refs.self1),
                                        oracle::from_tensor(refs.rel2[0]), oracle::from_tensor(refs.self2),
                                        Activation::Tanh);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < dim; ++k)
                check(std::abs(h.at(i, k) - want[i][k]) <= 1e-12,
                      "rgcn differs from brute force at node " + std::to_string(i));

        // permuting the stored link order must not change a single bit
        Dialogue shuffled = d;
        detail::fisher_yates_shuffle(shuffled.links, rng);
        DialogueGraph g2 = build_graph(shuffled, GraphMode::gold());
        g2.relation_vocab.resize(n_rel);
        Tensor h2 = rgcn_forward(features, g2, neighbor_index(g2), refs);
        check(h.values() == h2.values(), "rgcn output changed under edge permutation");
    }
}

// ---- criterion 4 ----

void criterion_metrics() {
    const std::vector<std::tuple<std::optional<std::string>, std::vector<std::string>, double, double>> table = {
        {std::optional<std::string>("acceleration architecture"), {"new acceleration architecture"}, 0.0, 0.8},
        {std::nullopt, {}, 1.0, 1.0},
        {std::optional<std::string>("verbatim answer"), {"verbatim answer"}, 1.0, 1.0},
        {std::nullopt, {"something"}, 0.0, 0.0},
        {std::optional<std::string>("something"), {}, 0.0, 0.0},
        {std::optional<std::string>("The Router!"), {"router"}, 1.0, 1.0},
        {std::optional<std::string>("red blue"), {"blue red"}, 0.0, 1.0},
        {std::optional<std::string>("alpha beta gamma delta"), {"alpha"}, 0.0, 0.4},
        {std::optional<std::string>("x y"), {"a b"}, 0.0, 0.0},
        {std::optional<std::string>("upper tray"), {"the upper tray", "upper"}, 1.0, 1.0},
        {std::optional<std::string>("b b"), {"b"}, 0.0, 2.0 * 0.5 / 1.5},
        {std::optional<std::string>("a wireless accesspoint"), {"wireless accesspoint"}, 1.0, 1.0},
    };
    int i = 0;
    for (const auto& [pred, golds, em, f1] : table) {
        EmF1 r = compute_em_f1(pred, golds);
        check(r.em == em, "EM case " + std::to_string(i) + ": got " + std::to_string(r.em));
        check(std::abs(r.f1 - f1) <= 1e-12, "F1 case " + std::to_string(i) + ": got " + std::to_string(r.f1));
        ++i;
    }
    check(i >= 10, "metric table has fewer than 10 cases");
}

// ---- criteria 5 and 6 share the trained model ----

struct OverfitArtifacts {
    TrainResult result;
    TrainConfig cfg;
};

OverfitArtifacts overfit;  // populated by criterion 5

void criterion_overfit() {
    const auto started = std::chrono::steady_clock::now();
    overfit.cfg = synthetic_config(7, 150);
    Corpus corpus = parse_corpus(overfit.cfg.train_path);
    check_eq(static_cast<int>(corpus.dialogues.size()), 16, "synthetic corpus dialogue count");
    int questions = 0, na = 0;
    std::set<std::string> vocab_probe;
    for (const Dialogue& d : corpus.dialogues) {
        check(d.utterances.size() <= 6, "synthetic dialogue too long");
        for (const Question& q : d.questions) {
            questions += 1;
            if (q.unanswerable()) na += 1;
        }
        for (const Utterance& u : d.utterances) {
            vocab_probe.insert(u.speaker);
            for (const Token& t : tokenize(u.text)) vocab_probe.insert(t.surface);
        }
    }
    check_eq(na * 4, questions, "NA fraction is not 25%");
    check(vocab_probe.size() <= 200, "synthetic vocabulary exceeds 200 surfaces");

    overfit.result = train(overfit.cfg);
    check(overfit.cfg.epochs <= 300, "epoch budget exceeded");
    double best_em = 0.0;
    for (const EpochMetrics& e : overfit.result.history) best_em = std::max(best_em, e.dev_em);
    check(best_em >= 95.0, "best training-set EM " + std::to_string(best_em) + " < 95");

    // the retained best checkpoint reproduces that EM on its own training set
    Model best(overfit.result.model_config, overfit.result.vocab, overfit.result.best_params);
    EvalOutput ev = evaluate(best, prepare_all(best, corpus.dialogues), overfit.cfg.model.decode.tau);
    check(ev.report.em >= 95.0, "best checkpoint EM " + std::to_string(ev.report.em) + " < 95");

    // bit-exact replay under the same seed
    TrainResult replay = train(overfit.cfg);
    check_eq(replay.history.size(), overfit.result.history.size(), "replay history length");
    for (std::size_t i = 0; i < replay.history.size(); ++i) {
        check(replay.history[i].mean_train_loss == overfit.result.history[i].mean_train_loss,
              "replay loss differs at epoch " + std::to_string(i + 1));
        check(replay.history[i].dev_em == overfit.result.history[i].dev_em &&
                  replay.history[i].dev_f1 == overfit.result.history[i].dev_f1,
              "replay metrics differ at epoch " + std::to_string(i + 1));
    }
    for (const auto& [name, t] : overfit.result.best_params.entries())
        check(t.values() == replay.best_params.get(name).values(), "replay parameters differ: " + name);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    check(secs < 300.0, "overfit run took " + std::to_string(secs) + "s, budget is 300s");
}

void criterion_tau_sweep() {
    check(!overfit.result.history.empty(), "overfit run did not populate artifacts");
    Model best(overfit.result.model_config, overfit.result.vocab, overfit.result.best_params);
    Corpus corpus = parse_corpus(overfit.cfg.train_path);
    auto prep = prepare_all(best, corpus.dialogues);
    EvalOutput base = evaluate(best, prep, 0.0);
    int prev_na = -1;
    for (double tau : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        EvalOutput re = evaluate(best, prep, tau);
        const int na_count = re.report.correct_na + re.report.false_na;
        check(na_count >= prev_na, "NA count decreased as tau grew");
        prev_na = na_count;
        MetricsReport swept = sweep_from_sidecar(base.sidecar, prep, tau);
        check(swept.em == re.report.em && swept.f1 == re.report.f1,
              "sidecar sweep disagrees with re-evaluation at tau " + std::to_string(tau));
        check(swept.correct_na + swept.false_na == na_count, "sidecar NA count disagrees");
    }
}

// ---- criterion 7 ----

void criterion_ablation() {
    TrainConfig cfg = synthetic_config(7, 10);
    const auto started = std::chrono::steady_clock::now();
    std::vector<AblationResult> results = run_ablation(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    check_eq(results.size(), std::size_t{3}, "ablation run count");
    check_eq(results[0].mode, std::string("gold"), "ablation order");
    check_eq(results[0].relation_matrices, 16, "gold relation matrices");
    check_eq(results[1].relation_matrices, 2, "links-only relation matrices");
    check_eq(results[2].relation_matrices, 1, "fully-connected relation matrices");
    for (const AblationResult& r : results)
        check(r.report.questions == 64, "ablation evaluated " + std::to_string(r.report.questions) + " questions");
    check(secs < 300.0, "ablation took " + std::to_string(secs) + "s, budget is 300s");
}

// ---- criterion 8 ----

void criterion_corpus() {
    for (const char* name :
         {"sample_corpus.json", "five_node_graph.json", "radial_corpus.json", "synthetic_train.json"}) {
        Corpus first = parse_corpus(data_path(name));
        Corpus second = parse_corpus_text(serialize_corpus(first));
        check_eq(second.dialogues.size(), first.dialogues.size(), std::string(name) + " round-trip count");
        check(serialize_corpus(second) == serialize_corpus(first),
              std::string(name) + " round-trip is not structurally identical");
    }

    Corpus five = parse_corpus(data_path("five_node_graph.json"));
    GraphStats st = graph_stats(build_graph(five.dialogues[0], GraphMode::gold()));
    check_eq(st.edges, 5, "five-node fixture edges");
    check(st.mean_in_degree == 1.0, "five-node fixture mean degree");
    check_eq(st.weak_components, 1, "five-node fixture components");

    // 100 utterances carrying 106 links in total
    std::vector<Dialogue> chain;
    int links_left = 106;
    for (int di = 0; di < 10; ++di) {
        Dialogue d;
        d.id = "chain-" + std::to_string(di);
        for (int u = 0; u < 10; ++u) d.utterances.push_back({u, "s" + std::to_string(u % 3), "word"});
        for (int l = 0; l < 9 && links_left > 0; ++l, --links_left)
            d.links.push_back({l, l + 1, RelationType::Continuation});
        for (int l = 0; links_left > 0 && l < 8; l += 2, --links_left)
            d.links.push_back({l, l + 2, RelationType::Comment});
        chain.push_back(std::move(d));
    }
    check_eq(links_left, 0, "fixture link budget");
    CorpusStats cs = corpus_stats(chain);
    check_eq(cs.utterances, 100, "fixture utterance count");
    check(std::abs(cs.mean_links_per_utterance - 1.06) <= 1e-12,
          "links per utterance " + std::to_string(cs.mean_links_per_utterance) + " != 1.06");
}

// ---- criterion 9 ----

void criterion_checkpoint() {
    check(!overfit.result.history.empty(), "overfit run did not populate artifacts");
    Corpus corpus = parse_corpus(overfit.cfg.train_path);
    Model best(overfit.result.model_config, overfit.result.vocab, overfit.result.best_params);
    auto prep = prepare_all(best, corpus.dialogues);
    EvalOutput before = evaluate(best, prep, 0.0);

    const std::string path = temp_path("acceptance.ckpt");
    save_checkpoint(path, overfit.result.best_params);
    Model loaded(overfit.result.model_config, overfit.result.vocab, load_checkpoint(path));
    EvalOutput after = evaluate(loaded, prepare_all(loaded, corpus.dialogues), 0.0);
    check(before.report.em == after.report.em && before.report.f1 == after.report.f1,
          "reloaded checkpoint changed metrics");
    check(before.predictions == after.predictions, "reloaded checkpoint changed predictions");
    check(before.sidecar == after.sidecar, "reloaded checkpoint changed scores");

    // wrong version byte
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put(42);
    }
    bool threw = false;
    try {
        load_checkpoint(path);
    } catch (const std::runtime_error& e) {
        threw = std::string(e.what()).find("version") != std::string::npos;
    }
    check(threw, "wrong-version checkpoint loaded without a version error");

    // truncated file
    save_checkpoint(path, overfit.result.best_params);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    std::filesystem::resize_file(path, size - 11, ec);
    threw = false;
    try {
        load_checkpoint(path);
    } catch (const std::runtime_error&) {
        threw = true;
    }
    check(threw, "truncated checkpoint loaded without error");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<void()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient suite (per-op 1e-6, end-to-end 1e-4)", criterion_gradients},
        {2, "decode equals exhaustive enumeration (500 instances)", criterion_decode_oracle},
        {3, "graph convolution equals brute force (100 graphs, 1e-12)", criterion_rgcn_oracle},
        {4, "hand-computed EM/F1 table", criterion_metrics},
        {5, "overfit sanity: >=95% EM on the synthetic corpus, bit-exact replay", criterion_overfit},
        {6, "tau monotonicity and sidecar sweep consistency", criterion_tau_sweep},
        {7, "ablation law: 16/2/1 relation matrices, all modes train", criterion_ablation},
        {8, "corpus round-trip and graph statistics", criterion_corpus},
        {9, "checkpoint integrity", criterion_checkpoint},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto started = std::chrono::steady_clock::now();
        try {
            c.body();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::printf("[PASS] criterion %d: %s (%.1fs)\n", c.id, c.title, secs);
        } catch (const std::exception& e) {
            failures += 1;
            std::printf("[FAIL] criterion %d: %s: %s\n", c.id, c.title, e.what());
        }
        std::fflush(stdout);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
