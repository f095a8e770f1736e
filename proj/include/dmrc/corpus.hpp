// Data model and ingestion for multiparty dialogues: speaker-tagged
// utterances, typed discourse links between them, and extractive questions
// that are answered by a character span or marked unanswerable.
//
// Coordinate system: every answer's char_start indexes into the flattened
// context produced by flatten_dialogue, i.e. "speaker: text" lines joined by
// single newlines, speaker prefixes included. The on-disk JSON schema is
// data/corpus.schema.json.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dmrc {

using json = nlohmann::ordered_json;

// The 16 discourse relation senses; parsing accepts any capitalization of
// these exact names and rejects everything else.
enum class RelationType : int {
    Comment = 0,
    ClarificationQuestion,
    Elaboration,
    Acknowledgement,
    Continuation,
    Explanation,
    Conditional,
    QAP,
    Alternation,
    QElab,
    Result,
    Background,
    Narration,
    Correction,
    Parallel,
    Contrast,
};

inline constexpr int kNumRelationTypes = 16;

inline const std::array<std::string, kNumRelationTypes>& relation_names() {
    static const std::array<std::string, kNumRelationTypes> names = {
        "Comment",     "Clarification_question", "Elaboration", "Acknowledgement",
        "Continuation", "Explanation",           "Conditional", "QAP",
        "Alternation", "Q-Elab",                 "Result",      "Background",
        "Narration",   "Correction",             "Parallel",    "Contrast"};
    return names;
}

inline const std::string& to_string(RelationType r) { return relation_names()[static_cast<int>(r)]; }

inline std::optional<RelationType> parse_relation(std::string_view name) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    };
    const std::string needle = lower(name);
    for (int i = 0; i < kNumRelationTypes; ++i)
        if (lower(relation_names()[i]) == needle) return static_cast<RelationType>(i);
    return std::nullopt;
}

struct Utterance {
    int index = 0;  // 0-based position within the dialogue
    std::string speaker;
    std::string text;
};

// Directed dependency: `dependent` relates back to `head`.
struct DiscourseLink {
    int head = 0;
    int dependent = 0;
    RelationType relation = RelationType::Comment;
};

struct AnswerSpan {
    std::string text;
    int char_start = 0;  // into the flattened context
};

struct Question {
    std::string id;
    std::string text;
    std::vector<AnswerSpan> answers;  // empty means unanswerable
    bool unanswerable() const { return answers.empty(); }
};

struct Dialogue {
    std::string id;
    std::vector<Utterance> utterances;
    std::vector<DiscourseLink> links;
    std::vector<Question> questions;
};

struct Corpus {
    std::vector<Dialogue> dialogues;
    std::vector<std::string> warnings;  // soft validator findings, e.g. size bounds
};

class CorpusError : public std::runtime_error {
  public:
    explicit CorpusError(const std::vector<std::string>& messages)
        : std::runtime_error(join(messages)), messages_(messages) {}
    explicit CorpusError(std::string message) : CorpusError(std::vector<std::string>{std::move(message)}) {}
    const std::vector<std::string>& messages() const { return messages_; }

  private:
    static std::string join(const std::vector<std::string>& ms) {
        std::ostringstream os;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            if (i) os << "; ";
            os << ms[i];
        }
        return os.str();
    }
    std::vector<std::string> messages_;
};

// ---- tokenization ----

struct Token {
    std::string surface;
    int char_start = 0;
    int char_end = 0;        // exclusive
    int utterance_index = -1;  // -1 for the sentinel and for bare tokenize() output
};

namespace detail {
inline bool ascii_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') || (u >= '[' && u <= '`') ||
           (u >= '{' && u <= '~');
}
inline bool ascii_space(char c) {
    auto u = static_cast<unsigned char>(c);
    return u == ' ' || u == '\t' || u == '\n' || u == '\r' || u == '\f' || u == '\v';
}
}  // namespace detail

// Whitespace split, then leading/trailing ASCII punctuation peeled off as
// single-character tokens; interior punctuation stays attached ("doesn't").
// Offsets are exact, so the token stream is lossless against the input.
inline std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && detail::ascii_space(text[i])) ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        while (j < text.size() && !detail::ascii_space(text[j])) ++j;
        std::size_t lo = i, hi = j;  // [lo,hi) is one whitespace-delimited chunk
        while (lo < hi && detail::ascii_punct(text[lo])) {
            out.push_back({std::string(1, text[lo]), static_cast<int>(lo), static_cast<int>(lo + 1), -1});
            ++lo;
        }
        std::size_t core_hi = hi;
        while (core_hi > lo && detail::ascii_punct(text[core_hi - 1])) --core_hi;
        if (core_hi > lo)
            out.push_back({std::string(text.substr(lo, core_hi - lo)), static_cast<int>(lo),
                           static_cast<int>(core_hi), -1});
        for (std::size_t k = core_hi; k < hi; ++k)
            out.push_back({std::string(1, text[k]), static_cast<int>(k), static_cast<int>(k + 1), -1});
        i = j;
    }
    return out;
}

// ---- flattening ----

struct FlattenedContext {
    std::string text;           // "speaker: text" lines joined by '\n'
    std::vector<Token> tokens;  // tokens[0] is the zero-width NA sentinel
};

inline FlattenedContext flatten_dialogue(const Dialogue& d) {
    if (d.utterances.empty()) throw CorpusError("dialogue " + d.id + ": no utterances");
    FlattenedContext ctx;
    ctx.tokens.push_back(Token{"", 0, 0, -1});  // sentinel covers no characters
    for (std::size_t u = 0; u < d.utterances.size(); ++u) {
        if (u) ctx.text += '\n';
        const int base = static_cast<int>(ctx.text.size());
        const std::string line = d.utterances[u].speaker + ": " + d.utterances[u].text;
        ctx.text += line;
        for (Token t : tokenize(line)) {
            t.char_start += base;
            t.char_end += base;
            t.utterance_index = static_cast<int>(u);
            ctx.tokens.push_back(std::move(t));
        }
    }
    return ctx;
}

// Smallest token interval covering [char_start, char_start + text size);
// inclusive indices into ctx.tokens, never the sentinel. A span that starts
// mid-token expands left to that token's start.
inline std::pair<int, int> align_answer_span(const FlattenedContext& ctx, int char_start,
                                             const std::string& text) {
    const int span_end = char_start + static_cast<int>(text.size());
    if (char_start < 0 || span_end > static_cast<int>(ctx.text.size()) ||
        ctx.text.compare(char_start, text.size(), text) != 0)
        throw CorpusError("answer text does not match context at char " + std::to_string(char_start));
    int start_tok = -1, end_tok = -1;
    for (std::size_t t = 1; t < ctx.tokens.size(); ++t) {
        if (start_tok < 0 && ctx.tokens[t].char_end > char_start) start_tok = static_cast<int>(t);
        if (ctx.tokens[t].char_start < span_end) end_tok = static_cast<int>(t);
    }
    if (start_tok < 0 || end_tok < 0 || start_tok > end_tok)
        throw CorpusError("answer span at char " + std::to_string(char_start) + " covers no token");
    return {start_tok, end_tok};
}

// ---- parsing ----

namespace detail {

inline std::string require_string(const json& j, const std::string& path, const char* key,
                                  std::vector<std::string>& errors) {
    if (!j.contains(key) || !j[key].is_string()) {
        errors.push_back("schema violation at " + path + "." + key + ": expected string");
        return {};
    }
    return j[key].get<std::string>();
}

inline long require_int(const json& j, const std::string& path, const char* key,
                        std::vector<std::string>& errors) {
    if (!j.contains(key) || !j[key].is_number_integer()) {
        errors.push_back("schema violation at " + path + "." + key + ": expected integer");
        return 0;
    }
    return j[key].get<long>();
}

}  // namespace detail

inline Corpus parse_corpus_json(const json& root) {
    std::vector<std::string> errors;
    Corpus corpus;
    if (!root.is_object() || !root.contains("dialogues") || !root["dialogues"].is_array())
        throw CorpusError("schema violation at $: expected object with \"dialogues\" array");

    std::set<std::string> seen_qids;
    for (std::size_t di = 0; di < root["dialogues"].size(); ++di) {
        const json& jd = root["dialogues"][di];
        const std::string dpath = "dialogues[" + std::to_string(di) + "]";
        if (!jd.is_object()) {
            errors.push_back("schema violation at " + dpath + ": expected object");
            continue;
        }
        Dialogue d;
        const std::size_t errors_before = errors.size();
        d.id = detail::require_string(jd, dpath, "id", errors);
        const std::string label = d.id.empty() ? dpath : "dialogue " + d.id;

        if (!jd.contains("utterances") || !jd["utterances"].is_array() || jd["utterances"].empty()) {
            errors.push_back(label + ": needs a non-empty \"utterances\" array");
            continue;
        }
        std::set<std::string> speakers;
        for (std::size_t ui = 0; ui < jd["utterances"].size(); ++ui) {
            const std::string upath = dpath + ".utterances[" + std::to_string(ui) + "]";
            Utterance u;
            u.index = static_cast<int>(ui);
            u.speaker = detail::require_string(jd["utterances"][ui], upath, "speaker", errors);
            u.text = detail::require_string(jd["utterances"][ui], upath, "text", errors);
            if (u.speaker.empty()) errors.push_back(label + ": empty speaker at utterance " + std::to_string(ui));
            speakers.insert(u.speaker);
            d.utterances.push_back(std::move(u));
        }
        const int n = static_cast<int>(d.utterances.size());

        std::set<std::tuple<int, int, int>> seen_links;
        for (std::size_t li = 0; jd.contains("links") && li < jd["links"].size(); ++li) {
            const std::string lpath = dpath + ".links[" + std::to_string(li) + "]";
            const json& jl = jd["links"][li];
            DiscourseLink link;
            link.head = static_cast<int>(detail::require_int(jl, lpath, "head", errors));
            link.dependent = static_cast<int>(detail::require_int(jl, lpath, "dependent", errors));
            const std::string rel = detail::require_string(jl, lpath, "relation", errors);
            auto parsed = parse_relation(rel);
            if (!parsed) {
                errors.push_back(label + ": unknown relation \"" + rel + "\" at link " + std::to_string(li));
                continue;
            }
            link.relation = *parsed;
            if (link.head < 0 || link.head >= n || link.dependent < 0 || link.dependent >= n) {
                errors.push_back(label + ": link " + std::to_string(li) + " references utterance out of range");
                continue;
            }
            if (link.head == link.dependent) {
                errors.push_back(label + ": self-loop link at utterance " + std::to_string(link.head));
                continue;
            }
            auto key = std::make_tuple(link.head, link.dependent, static_cast<int>(link.relation));
            if (!seen_links.insert(key).second) {
                errors.push_back(label + ": duplicate link " + std::to_string(link.head) + "->" +
                                 std::to_string(link.dependent) + " " + to_string(link.relation));
                continue;
            }
            d.links.push_back(link);
        }

        FlattenedContext ctx;
        bool have_ctx = false;
        if (errors.size() == errors_before) {  // this dialogue is structurally sound
            ctx = flatten_dialogue(d);
            have_ctx = true;
        }
        for (std::size_t qi = 0; jd.contains("questions") && qi < jd["questions"].size(); ++qi) {
            const std::string qpath = dpath + ".questions[" + std::to_string(qi) + "]";
            const json& jq = jd["questions"][qi];
            Question q;
            q.id = detail::require_string(jq, qpath, "id", errors);
            q.text = detail::require_string(jq, qpath, "text", errors);
            if (!q.id.empty() && !seen_qids.insert(q.id).second)
                errors.push_back(label + ": duplicate question id \"" + q.id + "\"");
            for (std::size_t ai = 0; jq.contains("answers") && ai < jq["answers"].size(); ++ai) {
                const std::string apath = qpath + ".answers[" + std::to_string(ai) + "]";
                AnswerSpan a;
                a.text = detail::require_string(jq["answers"][ai], apath, "text", errors);
                a.char_start = static_cast<int>(detail::require_int(jq["answers"][ai], apath, "char_start", errors));
                if (have_ctx) {
                    const bool in_range = a.char_start >= 0 && a.char_start + static_cast<int>(a.text.size()) <=
                                                                   static_cast<int>(ctx.text.size());
                    if (!in_range || ctx.text.compare(a.char_start, a.text.size(), a.text) != 0)
                        errors.push_back(label + ": span-mismatch for question " + q.id + ": answer \"" + a.text +
                                         "\" not found at char " + std::to_string(a.char_start));
                }
                q.answers.push_back(std::move(a));
            }
            d.questions.push_back(std::move(q));
        }

        if (n < 8 || n > 15)
            corpus.warnings.push_back(label + ": utterance count " + std::to_string(n) +
                                      " outside the usual 8-15 range");
        const int ns = static_cast<int>(speakers.size());
        if (ns < 2 || ns > 9)
            corpus.warnings.push_back(label + ": speaker count " + std::to_string(ns) +
                                      " outside the usual 2-9 range");
        corpus.dialogues.push_back(std::move(d));
    }
    if (!errors.empty()) throw CorpusError(errors);
    return corpus;
}

inline Corpus parse_corpus_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError("syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    return parse_corpus_json(root);
}

inline Corpus parse_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CorpusError("cannot open corpus file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_corpus_text(buf.str());
}

// ---- serialization ----

inline json corpus_to_json(const Corpus& corpus) {
    json root;
    root["dialogues"] = json::array();
    for (const Dialogue& d : corpus.dialogues) {
        json jd;
        jd["id"] = d.id;
        jd["utterances"] = json::array();
        for (const Utterance& u : d.utterances) jd["utterances"].push_back({{"speaker", u.speaker}, {"text", u.text}});
        jd["links"] = json::array();
        for (const DiscourseLink& l : d.links)
            jd["links"].push_back({{"head", l.head}, {"dependent", l.dependent}, {"relation", to_string(l.relation)}});
        jd["questions"] = json::array();
        for (const Question& q : d.questions) {
            json jq;
            jq["id"] = q.id;
            jq["text"] = q.text;
            jq["answers"] = json::array();
            for (const AnswerSpan& a : q.answers)
                jq["answers"].push_back({{"text", a.text}, {"char_start", a.char_start}});
            jd["questions"].push_back(std::move(jq));
        }
        root["dialogues"].push_back(std::move(jd));
    }
    return root;
}

inline std::string serialize_corpus(const Corpus& corpus) { return corpus_to_json(corpus).dump(2) + "\n"; }

// ---- statistics ----

struct CorpusStats {
    int dialogues = 0;
    int utterances = 0;
    int questions = 0;
    int answerable = 0;
    double answerable_fraction = 0.0;
    double mean_links_per_utterance = 0.0;
    std::vector<std::pair<std::string, int>> relation_histogram;  // ordered by relation id
};

inline CorpusStats corpus_stats(const std::vector<Dialogue>& dialogues) {
    CorpusStats st;
    std::array<int, kNumRelationTypes> hist{};
    int links = 0;
    for (const Dialogue& d : dialogues) {
        st.dialogues += 1;
        st.utterances += static_cast<int>(d.utterances.size());
        st.questions += static_cast<int>(d.questions.size());
        for (const Question& q : d.questions)
            if (!q.unanswerable()) st.answerable += 1;
        for (const DiscourseLink& l : d.links) {
            hist[static_cast<int>(l.relation)] += 1;
            links += 1;
        }
    }
    if (st.questions > 0) st.answerable_fraction = static_cast<double>(st.answerable) / st.questions;
    if (st.utterances > 0) st.mean_links_per_utterance = static_cast<double>(links) / st.utterances;
    for (int r = 0; r < kNumRelationTypes; ++r)
        if (hist[r] > 0) st.relation_histogram.emplace_back(relation_names()[r], hist[r]);
    return st;
}

inline json to_json(const CorpusStats& st) {
    json j;
    j["dialogues"] = st.dialogues;
    j["utterances"] = st.utterances;
    j["questions"] = st.questions;
    j["answerable"] = st.answerable;
    j["answerable_fraction"] = st.answerable_fraction;
    j["mean_links_per_utterance"] = st.mean_links_per_utterance;
    j["relation_histogram"] = json::object();
    for (const auto& [name, count] : st.relation_histogram) j["relation_histogram"][name] = count;
    return j;
}

}  // namespace dmrc
