// Command-line front end: train, eval, predict, graph-stats, ablate.
// Errors print one machine-parseable JSON line to stderr and exit nonzero.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "dmrc/checkpoint.hpp"
#include "dmrc/train.hpp"

using namespace dmrc;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open file: " + path);
    json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    os << text;
}

// The checkpoint file holds only tensors; the sidecar meta file carries the
// configuration and vocabulary needed to rebuild the model around them.
std::string meta_path_for(const std::string& checkpoint_path) { return checkpoint_path + ".meta.json"; }

void save_meta(const std::string& checkpoint_path, const TrainConfig& cfg, const Vocabulary& vocab) {
    json meta;
    meta["train_config"] = to_json(cfg);
    meta["vocab"] = vocab.to_json();
    write_text_file(meta_path_for(checkpoint_path), meta.dump(2) + "\n");
}

Model load_model(const std::string& checkpoint_path) {
    ParamStore params = load_checkpoint(checkpoint_path);
    const std::string meta_path = meta_path_for(checkpoint_path);
    std::ifstream probe(meta_path);
    if (!probe)
        throw std::runtime_error("missing model metadata " + meta_path +
                                 " (written alongside the checkpoint by `dmrc train`)");
    json meta = read_json_file(meta_path);
    TrainConfig cfg = train_config_from_json(meta.at("train_config"));
    Vocabulary vocab = Vocabulary::from_json(meta.at("vocab"));
    return Model(cfg.model, std::move(vocab), std::move(params), load_frozen(cfg.model));
}

int cmd_train(const std::string& config_path, const std::string& out_path) {
    TrainConfig cfg = train_config_from_json(read_json_file(config_path));
    TrainResult result = train(cfg);
    save_checkpoint(out_path, result.best_params);
    save_meta(out_path, cfg, result.vocab);

    json report;
    report["checkpoint"] = out_path;
    report["best_epoch"] = result.best_epoch;
    report["best_dev_f1"] = result.best_dev_f1;
    report["epochs"] = json::array();
    for (const EpochMetrics& e : result.history)
        report["epochs"].push_back({{"epoch", e.epoch},
                                    {"mean_train_loss", e.mean_train_loss},
                                    {"dev_em", e.dev_em},
                                    {"dev_f1", e.dev_f1}});
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path, std::optional<double> tau,
             const std::string& out_path, const std::string& scores_path, bool with_records) {
    Model model = load_model(checkpoint_path);
    Corpus corpus = parse_corpus(data_path);
    const double tau_used = tau.value_or(model.config().decode.tau);
    EvalOutput ev = evaluate(model, prepare_all(model, corpus.dialogues), tau_used);
    write_text_file(out_path, ev.predictions.dump(2) + "\n");
    write_text_file(scores_path, ev.sidecar.dump(2) + "\n");
    json report = to_json(ev.report, with_records);
    report["tau"] = tau_used;
    report["predictions_file"] = out_path;
    report["scores_file"] = scores_path;
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& data_path, std::optional<double> tau,
                const std::string& out_path, const std::string& scores_path) {
    Model model = load_model(checkpoint_path);
    Corpus corpus = parse_corpus(data_path);
    const double tau_used = tau.value_or(model.config().decode.tau);
    EvalOutput ev = evaluate(model, prepare_all(model, corpus.dialogues), tau_used);
    write_text_file(out_path, ev.predictions.dump(2) + "\n");
    write_text_file(scores_path, ev.sidecar.dump(2) + "\n");
    json summary;
    summary["questions"] = ev.report.questions;
    summary["tau"] = tau_used;
    summary["predictions_file"] = out_path;
    summary["scores_file"] = scores_path;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_graph_stats(const std::string& data_path, const std::string& mode_name, std::optional<int> window,
                    const std::string& edges_path) {
    GraphMode mode = parse_graph_mode(mode_name, window);
    Corpus corpus = parse_corpus(data_path);
    json out;
    out["mode"] = to_string(mode);
    out["dialogues"] = json::array();
    int total_edges = 0, total_nodes = 0, total_components = 0;
    std::string edge_text;
    for (const Dialogue& d : corpus.dialogues) {
        DialogueGraph g = build_graph(d, mode);
        GraphStats st = graph_stats(g);
        json jd = to_json(st);
        jd["id"] = d.id;
        out["dialogues"].push_back(std::move(jd));
        total_edges += st.edges;
        total_nodes += st.nodes;
        total_components += st.weak_components;
        if (!edges_path.empty()) edge_text += "# dialogue " + d.id + "\n" + edge_list_text(g);
    }
    out["aggregate"] = {{"dialogues", corpus.dialogues.size()},
                        {"nodes", total_nodes},
                        {"edges", total_edges},
                        {"mean_in_degree", total_nodes ? static_cast<double>(total_edges) / total_nodes : 0.0},
                        {"weak_components", total_components}};
    if (!edges_path.empty()) {
        write_text_file(edges_path, edge_text);
        out["edge_list_file"] = edges_path;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path) {
    TrainConfig cfg = train_config_from_json(read_json_file(config_path));
    std::vector<AblationResult> results = run_ablation(cfg);
    json out = json::array();
    for (const AblationResult& r : results) {
        json j = to_json(r.report);
        j["mode"] = r.mode;
        j["relation_matrices"] = r.relation_matrices;
        j["parameter_values"] = r.parameter_values;
        out.push_back(std::move(j));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discourse-graph dialogue reading comprehension"};
    app.require_subcommand(0, 1);

    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the default training config as JSON and exit");

    std::string config_path, checkpoint_path, data_path, edges_path;
    std::string train_out = "model.ckpt";
    std::string eval_out = "predictions.json", eval_scores = "scores.json";
    std::string predict_out, predict_scores;
    std::string mode_name = "gold";
    std::optional<double> tau;
    std::optional<int> window;
    bool with_records = false;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    train_cmd->add_option("--config", config_path, "training config JSON")->required();
    train_cmd->add_option("--out", train_out, "checkpoint output path");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and report EM/F1");
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--data", data_path)->required();
    eval_cmd->add_option("--tau", tau, "answerability margin override");
    eval_cmd->add_option("--out", eval_out, "prediction file");
    eval_cmd->add_option("--scores", eval_scores, "per-question score sidecar");
    eval_cmd->add_flag("--records", with_records, "include per-question records in the report");

    CLI::App* predict_cmd = app.add_subcommand("predict", "write predictions without scoring");
    predict_cmd->add_option("--checkpoint", checkpoint_path)->required();
    predict_cmd->add_option("--data", data_path)->required();
    predict_cmd->add_option("--out", predict_out, "prediction file")->required();
    predict_cmd->add_option("--scores", predict_scores, "per-question score sidecar");
    predict_cmd->add_option("--tau", tau, "answerability margin override");

    CLI::App* stats_cmd = app.add_subcommand("graph-stats", "dialogue graph statistics as JSON");
    stats_cmd->add_option("--data", data_path)->required();
    stats_cmd->add_option("--mode", mode_name, "gold | links-only | fully-connected")->default_val("gold");
    stats_cmd->add_option("--window", window, "fully-connected window");
    stats_cmd->add_option("--export-edges", edges_path, "write 'src dst relation' lines here");

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "train and compare the three graph modes");
    ablate_cmd->add_option("--config", config_path, "training config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_config) {
            std::cout << to_json(TrainConfig{}).dump(2) << "\n";
            return 0;
        }
        if (train_cmd->parsed()) return cmd_train(config_path, train_out);
        if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, data_path, tau, eval_out, eval_scores, with_records);
        if (predict_cmd->parsed()) {
            if (predict_scores.empty()) predict_scores = predict_out + ".scores.json";
            return cmd_predict(checkpoint_path, data_path, tau, predict_out, predict_scores);
        }
        if (stats_cmd->parsed()) return cmd_graph_stats(data_path, mode_name, window, edges_path);
        if (ablate_cmd->parsed()) return cmd_ablate(config_path);
        std::cout << app.help() << "\n";
        return 0;
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
