// Emits the bundled synthetic training corpus: 16 small dialogues whose
// questions ask for door codes stated in the dialogue ("what is the code for
// door7" -> "key7"), plus one unanswerable question per dialogue that asks
// about a door mentioned only in a different dialogue. Deterministic by
// construction so the committed fixture is reproducible.
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "dmrc/corpus.hpp"
#include "dmrc/param_store.hpp"

using namespace dmrc;

namespace {

constexpr int kDialogues = 16;
constexpr int kFactsPerDialogue = 4;

const std::vector<std::string> kSpeakers = {"ana", "ben", "cai", "dee", "eli", "fay"};
const std::vector<std::string> kGreetings = {"hello team quick sync", "morning all short update",
                                             "hey folks status check", "hi again new readings"};
const std::vector<RelationType> kChainRelations = {
    RelationType::Continuation, RelationType::QAP,        RelationType::Elaboration,
    RelationType::Comment,      RelationType::Background, RelationType::Result,
};

}  // namespace

int main(int argc, char** argv) {
    const std::string out_path = argc > 1 ? argv[1] : "data/synthetic_train.json";
    std::mt19937_64 rng(detail::mix_seed(20240801, "synthetic-corpus"));

    Corpus corpus;
    for (int di = 0; di < kDialogues; ++di) {
        Dialogue d;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "synth-%03d", di);
        d.id = idbuf;

        const int n_speakers = 2 + static_cast<int>(detail::uniform_below(rng, 2));
        std::vector<std::string> cast;
        for (int s = 0; s < n_speakers; ++s)
            cast.push_back(kSpeakers[(di + s * 2) % kSpeakers.size()]);

        d.utterances.push_back({0, cast[0], kGreetings[di % kGreetings.size()]});
        for (int f = 0; f < kFactsPerDialogue; ++f) {
            const int door = di * kFactsPerDialogue + f;
            const std::string text = "door" + std::to_string(door) + " takes key" + std::to_string(door);
            d.utterances.push_back({f + 1, cast[(f + 1) % cast.size()], text});
        }

        for (int u = 0; u + 1 < static_cast<int>(d.utterances.size()); ++u)
            d.links.push_back({u, u + 1, kChainRelations[(di + u) % kChainRelations.size()]});
        d.links.push_back({0, 2, RelationType::QElab});

        FlattenedContext ctx = flatten_dialogue(d);
        for (int f = 0; f < kFactsPerDialogue - 1; ++f) {
            const int door = di * kFactsPerDialogue + f;
            Question q;
            q.id = d.id + "-q" + std::to_string(f);
            q.text = "which key fits door" + std::to_string(door);
            const std::string answer = "key" + std::to_string(door);
            const auto pos = ctx.text.find(answer);
            q.answers.push_back({answer, static_cast<int>(pos)});
            d.questions.push_back(std::move(q));
        }
        // the unanswerable question names a door from the next dialogue
        const int foreign_door = ((di + 1) % kDialogues) * kFactsPerDialogue + 1;
        Question na;
        na.id = d.id + "-q" + std::to_string(kFactsPerDialogue - 1);
        na.text = "which key fits door" + std::to_string(foreign_door);
        d.questions.push_back(std::move(na));

        corpus.dialogues.push_back(std::move(d));
    }

    std::ofstream os(out_path);
    if (!os) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
    }
    os << serialize_corpus(corpus);
    std::cout << "wrote " << corpus.dialogues.size() << " dialogues to " << out_path << "\n";
    return 0;
}
