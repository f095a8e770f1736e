// Exact-match and token-overlap F1 with the usual answer normalization:
// lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
// whitespace. An unanswerable gold is an empty gold list; predicting NA is
// passing an empty optional.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmrc/corpus.hpp"

namespace dmrc {

inline std::string normalize_answer(std::string_view s) {
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char c : s) {
        if (detail::ascii_punct(c)) continue;
        no_punct += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::istringstream words(no_punct);
    std::string w, out;
    while (words >> w) {
        if (w == "a" || w == "an" || w == "the") continue;
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

struct EmF1 {
    double em = 0.0;  // 0 or 1
    double f1 = 0.0;  // [0, 1]
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

inline double token_f1(const std::string& norm_pred, const std::string& norm_gold) {
    auto pred = split_ws(norm_pred);
    auto gold = split_ws(norm_gold);
    if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& w : gold) counts[w] += 1;
    int overlap = 0;
    for (const auto& w : pred) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            it->second -= 1;
            overlap += 1;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / pred.size();
    const double recall = static_cast<double>(overlap) / gold.size();
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

// pred: the answer string, or nullopt for NA. golds: gold answer strings,
// empty when the gold is NA. Scores are the max over golds.
inline EmF1 compute_em_f1(const std::optional<std::string>& pred, const std::vector<std::string>& golds) {
    const bool gold_na = golds.empty();
    const bool pred_na = !pred.has_value();
    if (gold_na || pred_na) {
        const double v = (gold_na && pred_na) ? 1.0 : 0.0;
        return {v, v};
    }
    const std::string np = normalize_answer(*pred);
    EmF1 best;
    for (const std::string& g : golds) {
        const std::string ng = normalize_answer(g);
        best.em = std::max(best.em, np == ng ? 1.0 : 0.0);
        best.f1 = std::max(best.f1, detail::token_f1(np, ng));
    }
    return best;
}

struct QuestionRecord {
    std::string id;
    double em = 0.0;
    double f1 = 0.0;
    bool gold_na = false;
    bool pred_na = false;
    std::string prediction;  // empty string when NA
};

struct MetricsReport {
    double em = 0.0;  // percentages over all questions
    double f1 = 0.0;
    int questions = 0;
    int answerable = 0;
    int unanswerable = 0;
    int correct_na = 0;  // gold NA predicted NA
    int false_na = 0;    // gold answerable predicted NA
    std::vector<QuestionRecord> records;
};

inline MetricsReport make_report(std::vector<QuestionRecord> records) {
    MetricsReport r;
    r.records = std::move(records);
    r.questions = static_cast<int>(r.records.size());
    double em_sum = 0.0, f1_sum = 0.0;
    for (const QuestionRecord& q : r.records) {
        em_sum += q.em;
        f1_sum += q.f1;
        if (q.gold_na) {
            r.unanswerable += 1;
            if (q.pred_na) r.correct_na += 1;
        } else {
            r.answerable += 1;
            if (q.pred_na) r.false_na += 1;
        }
    }
    if (r.questions > 0) {
        r.em = 100.0 * em_sum / r.questions;
        r.f1 = 100.0 * f1_sum / r.questions;
    }
    if (r.f1 + 1e-9 < r.em)
        throw std::logic_error("aggregate F1 below aggregate EM; per-question scoring is broken");
    return r;
}

inline json to_json(const MetricsReport& r, bool include_records = false) {
    json j;
    j["em"] = r.em;
    j["f1"] = r.f1;
    j["questions"] = r.questions;
    j["answerable"] = r.answerable;
    j["unanswerable"] = r.unanswerable;
    j["correct_na"] = r.correct_na;
    j["false_na"] = r.false_na;
    if (include_records) {
        j["records"] = json::array();
        for (const QuestionRecord& q : r.records)
            j["records"].push_back({{"id", q.id},
                                    {"em", q.em},
                                    {"f1", q.f1},
                                    {"gold_na", q.gold_na},
                                    {"pred_na", q.pred_na},
                                    {"prediction", q.prediction}});
    }
    return j;
}

}  // namespace dmrc
