#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "dmrc/encoder.hpp"
#include "dmrc/grad_check.hpp"
#include "oracles.hpp"

using namespace dmrc;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * detail::uniform01(rng);
    return v;
}

// creates one store entry per GRU weight and returns tape-attached refs
ParamStore gru_store(std::mt19937_64& rng, int in_dim, int hidden, bool zero_bias = false) {
    ParamStore s(1);
    auto mat = [&](const char* name, int r, int c) { s.insert(name, Tensor::matrix(r, c, random_values(rng, r * c))); };
    for (const char* dir : {"f", "b"}) {
        for (const char* gate : {"z", "r", "h"}) {
            mat((std::string(dir) + ".w" + gate).c_str(), hidden, in_dim);
            mat((std::string(dir) + ".u" + gate).c_str(), hidden, hidden);
            if (zero_bias)
                s.insert(std::string(dir) + ".b" + gate, Tensor::zeros({hidden}));
            else
                s.insert(std::string(dir) + ".b" + gate, Tensor::vec(random_values(rng, hidden, -0.5, 0.5)));
        }
    }
    return s;
}

BiGruRefs fetch_gru(Tape* tape, const ParamStore& s) {
    auto get = [&](const std::string& name) {
        return tape ? tape->leaf(s.get(name), name) : s.get(name);
    };
    BiGruRefs refs;
    refs.fwd = {get("f.wz"), get("f.uz"), get("f.bz"), get("f.wr"), get("f.ur"),
                get("f.br"), get("f.wh"), get("f.uh"), get("f.bh")};
    refs.bwd = {get("b.wz"), get("b.uz"), get("b.bz"), get("b.wr"), get("b.ur"),
                get("b.br"), get("b.wh"), get("b.uh"), get("b.bh")};
    return refs;
}

Dialogue graph_dialogue(int n, const std::vector<DiscourseLink>& links) {
    Dialogue d;
    d.id = "enc";
    for (int i = 0; i < n; ++i) d.utterances.push_back({i, "s" + std::to_string(i % 2), "w"});
    d.links = links;
    return d;
}

}  // namespace

// ---- bag-of-words utterance features ----

TEST(EmbeddingMean, MeanOfWordAndSpeakerToken) {
    Tensor table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    // utterance of one word (id 2) plus a speaker token (id 1)
    Tensor u = embedding_mean(table, {1, 2});
    EXPECT_EQ(u.values(), (std::vector<double>{4, 5}));
    // repeated ids count twice
    Tensor r = embedding_mean(table, {2, 2});
    EXPECT_EQ(r.values(), (std::vector<double>{5, 6}));
    EXPECT_THROW(embedding_mean(table, {}), std::invalid_argument);
}

TEST(EmbeddingMean, DeterministicForIdenticalUtterances) {
    Tensor table = Tensor::matrix(4, 3, std::vector<double>(12, 0.25));
    Tensor a = embedding_mean(table, {0, 3, 1});
    Tensor b = embedding_mean(table, {0, 3, 1});
    EXPECT_EQ(a.values(), b.values());
}

// ---- vocabulary ----

TEST(Vocab, UnknownMapsToZeroAndBuildIsSorted) {
    Dialogue d;
    d.id = "v";
    d.utterances = {{0, "zed", "beta alpha"}, {1, "amy", "gamma"}};
    d.questions = {{"v-q1", "delta?", {}}};
    Vocabulary v = Vocabulary::build({d});
    EXPECT_EQ(v.id("<unk>"), 0);
    EXPECT_EQ(v.id("never-seen"), 0);
    EXPECT_GT(v.id("alpha"), 0);
    EXPECT_GT(v.id("zed"), 0);     // speaker names enter the vocabulary
    EXPECT_GT(v.id("delta"), 0);   // question tokens too
    EXPECT_GT(v.id("?"), 0);
    // ids follow sorted surface order, so rebuilds are stable
    Vocabulary v2 = Vocabulary::build({d});
    EXPECT_EQ(v.words(), v2.words());
    Vocabulary rt = Vocabulary::from_json(v.to_json());
    EXPECT_EQ(rt.words(), v.words());
    EXPECT_EQ(rt.id("alpha"), v.id("alpha"));
}

// ---- precomputed embeddings ----

TEST(Precomputed, LoadLookupAndErrors) {
    std::string path = std::string(::testing::TempDir()) + "/emb.jsonl";
    {
        std::ofstream os(path);
        os << R"({"dialogue_id":"d1","utterance_index":0,"vector":[1.0,2.0]})" << "\n";
        os << R"({"dialogue_id":"d1","utterance_index":1,"vector":[0.0,0.0]})" << "\n";
        os << R"({"question_id":"d1-q1","vector":[3.0,4.0]})" << "\n";
    }
    PrecomputedEmbeddings pe = PrecomputedEmbeddings::load(path);
    EXPECT_EQ(pe.dim(), 2);
    EXPECT_EQ(pe.utterance("d1", 0), (std::vector<double>{1, 2}));
    EXPECT_EQ(pe.question("d1-q1"), (std::vector<double>{3, 4}));
    EXPECT_THROW(pe.utterance("d1", 7), std::runtime_error);
    EXPECT_THROW(pe.question("nope"), std::runtime_error);

    std::string bad = std::string(::testing::TempDir()) + "/emb_bad.jsonl";
    {
        std::ofstream os(bad);
        os << R"({"dialogue_id":"d1","utterance_index":0,"vector":[1.0,2.0]})" << "\n";
        os << R"({"dialogue_id":"d1","utterance_index":1,"vector":[1.0]})" << "\n";
    }
    try {
        PrecomputedEmbeddings::load(bad);
        FAIL() << "expected dimension error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

// ---- BiGRU ----

TEST(BiGru, SingleStepBoundary) {
    std::mt19937_64 rng(5);
    ParamStore s = gru_store(rng, 3, 4);
    // same parameters for both directions: on one utterance the two halves agree
    for (const char* gate : {"wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"})
        s.get(std::string("b.") + (gate + 0)).mutable_values() = s.get(std::string("f.") + gate).values();
    Tensor u = Tensor::matrix(1, 3, random_values(rng, 3));
    Tensor g = bigru_forward(u, fetch_gru(nullptr, s));
    ASSERT_EQ(g.shape(), (Shape{1, 8}));
    for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(g.at(0, k), g.at(0, 4 + k));
    // and it equals one explicit cell step from the zero state
    Tensor h1 = gru_cell(fetch_gru(nullptr, s).fwd, row(u, 0), Tensor::zeros({4}));
    for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(g.at(0, k), h1.at(k));
}

TEST(BiGru, ZeroInputZeroBiasFixedPoint) {
    std::mt19937_64 rng(6);
    ParamStore s = gru_store(rng, 3, 4, /*zero_bias=*/true);
    Tensor u = Tensor::zeros({5, 3});
    Tensor g = bigru_forward(u, fetch_gru(nullptr, s));
    for (double v : g.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(BiGru, GradientsThroughFourSteps) {
    std::mt19937_64 rng(7);
    ParamStore s = gru_store(rng, 3, 3);
    s.insert("u", Tensor::matrix(4, 3, random_values(rng, 12)));
    auto build = [](Tape& tape, const ParamStore& p) {
        Tensor u = tape.leaf(p.get("u"), "u");
        Tensor g = bigru_forward(u, fetch_gru(&tape, p));
        return sum(mul(g, Tensor::full(g.shape(), 0.5)));
    };
    Tape tape;
    Tensor loss = build(tape, s);
    auto analytic = tape.backward(loss);
    auto numeric = finite_difference_gradient(
        [&](const ParamStore& p) {
            Tape t;
            return build(t, p).value();
        },
        s, 1e-5);
    EXPECT_LE(max_grad_rel_err(analytic, numeric), 1e-4);
}

// ---- RGCN ----

namespace {

ParamStore rgcn_store(std::mt19937_64& rng, int n_rel, int in_dim, int hidden) {
    ParamStore s(1);
    for (int r = 0; r < n_rel; ++r)
        s.insert("rel1." + std::to_string(r), Tensor::matrix(hidden, in_dim, random_values(rng, hidden * in_dim)));
    s.insert("self1", Tensor::matrix(hidden, in_dim, random_values(rng, hidden * in_dim)));
    s.insert("rel2", Tensor::matrix(hidden, hidden, random_values(rng, hidden * hidden)));
    s.insert("self2", Tensor::matrix(hidden, hidden, random_values(rng, hidden * hidden)));
    return s;
}

RgcnRefs fetch_rgcn(Tape* tape, const ParamStore& s, int n_rel, Activation act = Activation::Relu) {
    auto get = [&](const std::string& name) {
        return tape ? tape->leaf(s.get(name), name) : s.get(name);
    };
    RgcnRefs refs;
    for (int r = 0; r < n_rel; ++r) refs.rel1.push_back(get("rel1." + std::to_string(r)));
    refs.self1 = get("self1");
    refs.rel2 = {get("rel2")};
    refs.self2 = get("self2");
    refs.activation = act;
    return refs;
}

}  // namespace

TEST(Rgcn, IsolatedNodeUsesOnlySelfTransforms) {
    std::mt19937_64 rng(8);
    Dialogue d = graph_dialogue(3, {{0, 1, RelationType::QAP}});
    DialogueGraph g = build_graph(d, GraphMode::gold());
    NeighborIndex nbrs = neighbor_index(g);
    ParamStore s = rgcn_store(rng, 16, 4, 4);
    Tensor features = Tensor::matrix(3, 4, random_values(rng, 12));
    RgcnRefs refs = fetch_rgcn(nullptr, s, 16);
    Tensor h = rgcn_forward(features, g, nbrs, refs);
    // node 2 has no in-edges in either layer: expect act(self2 act(self1 g_2))
    Tensor inner = relu(matvec(refs.self1, row(features, 2)));
    Tensor expect = relu(matvec(refs.self2, inner));
    for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(h.at(2, k), expect.at(k));
}

TEST(Rgcn, SingleEdgeIdentityWeights) {
    Dialogue d = graph_dialogue(2, {{0, 1, RelationType::Comment}});
    DialogueGraph g = build_graph(d, GraphMode::gold());
    NeighborIndex nbrs = neighbor_index(g);
    ParamStore s(1);
    std::vector<double> eye = {1, 0, 0, 1};
    for (int r = 0; r < 16; ++r) s.insert("rel1." + std::to_string(r), Tensor::matrix(2, 2, eye));
    s.insert("self1", Tensor::matrix(2, 2, eye));
    s.insert("rel2", Tensor::matrix(2, 2, std::vector<double>{0, 0, 0, 0}));
    s.insert("self2", Tensor::matrix(2, 2, eye));
    RgcnRefs refs = fetch_rgcn(nullptr, s, 16);
    Tensor features = Tensor::matrix(2, 2, {1, 2, 3, 4});  // nonnegative, relu transparent
    Tensor h = rgcn_forward(features, g, nbrs, refs);
    // layer 1 at node 1: g_0 + g_1 = [4, 6]; layer 2 self-only keeps it
    EXPECT_DOUBLE_EQ(h.at(1, 0), 4.0);
    EXPECT_DOUBLE_EQ(h.at(1, 1), 6.0);
}

TEST(Rgcn, MatchesBruteForceAndGradients) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 6, n_rel = 3, dim = 3;
        Dialogue d;
        d.id = "r";
        for (int i = 0; i < n; ++i) d.utterances.push_back({i, "s" + std::to_string(i % 2), "w"});
        std::set<std::tuple<int, int, int>> used;
        for (int e = 0; e < 10; ++e) {
            int a = static_cast<int>(detail::uniform_below(rng, n));
            int b = static_cast<int>(detail::uniform_below(rng, n));
            int r = static_cast<int>(detail::uniform_below(rng, n_rel));
            if (a == b || !used.insert({a, b, r}).second) continue;
            d.links.push_back({a, b, static_cast<RelationType>(r)});
        }
        DialogueGraph g = build_graph(d, GraphMode::gold());
        g.relation_vocab = {"a", "b", "c"};  // shrink vocabulary to 3 for the trial
        NeighborIndex nbrs = neighbor_index(g);
        ParamStore s = rgcn_store(rng, n_rel, dim, dim);
        s.insert("x", Tensor::matrix(n, dim, random_values(rng, n * dim)));

        Tensor h = rgcn_forward(s.get("x"), g, nbrs, fetch_rgcn(nullptr, s, n_rel, Activation::Tanh));
        std::vector<oracle::Mat> rel1;
        for (int r = 0; r < n_rel; ++r) rel1.push_back(oracle::from_tensor(s.get("rel1." + std::to_string(r))));
        oracle::Mat expect = oracle::rgcn(oracle::from_tensor(s.get("x")), g, rel1,
                                          oracle::from_tensor(s.get("self1")), oracle::from_tensor(s.get("rel2")),
                                          oracle::from_tensor(s.get("self2")), Activation::Tanh);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < dim; ++k) EXPECT_NEAR(h.at(i, k), expect[i][k], 1e-12);

        if (trial < 3) {
            auto build = [&](Tape& tape, const ParamStore& p) {
                Tensor x = tape.leaf(p.get("x"), "x");
                Tensor out = rgcn_forward(x, g, nbrs, fetch_rgcn(&tape, p, n_rel, Activation::Tanh));
                return sum(mul(out, Tensor::full(out.shape(), 0.3)));
            };
            Tape tape;
            auto analytic = tape.backward(build(tape, s));
            auto numeric = finite_difference_gradient(
                [&](const ParamStore& p) {
                    Tape t;
                    return build(t, p).value();
                },
                s, 1e-5);
            EXPECT_LE(max_grad_rel_err(analytic, numeric), 1e-4);
        }
    }
}

TEST(Rgcn, EdgePermutationBitIdentical) {
    std::mt19937_64 rng(10);
    Dialogue d = graph_dialogue(5, {{0, 1, RelationType::QAP},
                                    {0, 2, RelationType::QAP},
                                    {1, 2, RelationType::Comment},
                                    {3, 2, RelationType::QAP},
                                    {2, 4, RelationType::Elaboration}});
    ParamStore s = rgcn_store(rng, 16, 3, 3);
    Tensor features = Tensor::matrix(5, 3, random_values(rng, 15));
    auto run = [&](const Dialogue& dd) {
        DialogueGraph g = build_graph(dd, GraphMode::gold());
        return rgcn_forward(features, g, neighbor_index(g), fetch_rgcn(nullptr, s, 16)).values();
    };
    auto base = run(d);
    for (int trial = 0; trial < 10; ++trial) {
        Dialogue shuffled = d;
        detail::fisher_yates_shuffle(shuffled.links, rng);
        EXPECT_EQ(run(shuffled), base);
    }
}

TEST(Rgcn, VocabularySizeMismatchRejected) {
    std::mt19937_64 rng(11);
    Dialogue d = graph_dialogue(2, {{0, 1, RelationType::QAP}});
    DialogueGraph g = build_graph(d, GraphMode::gold());
    ParamStore s = rgcn_store(rng, 2, 3, 3);  // only 2 relation matrices for a 16-name vocabulary
    Tensor features = Tensor::matrix(2, 3, random_values(rng, 6));
    EXPECT_THROW(rgcn_forward(features, g, neighbor_index(g), fetch_rgcn(nullptr, s, 2)), std::invalid_argument);
}

TEST(Activation, ParsePrintDispatch) {
    EXPECT_EQ(parse_activation("relu"), Activation::Relu);
    EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
    EXPECT_EQ(parse_activation("sigmoid"), Activation::Sigmoid);
    EXPECT_THROW(parse_activation("gelu"), std::invalid_argument);
    Tensor x = Tensor::vec({-1.0, 1.0});
    EXPECT_EQ(apply_activation(Activation::Relu, x).values(), (std::vector<double>{0, 1}));
    EXPECT_DOUBLE_EQ(apply_activation(Activation::Sigmoid, Tensor::scalar(0)).value(), 0.5);
}
