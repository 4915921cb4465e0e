// mohr command-line tool: train / eval / synth / recommend / ablate.

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mohr/ablation.hpp"
#include "mohr/checkpoint.hpp"
#include "mohr/config.hpp"
#include "mohr/kernels.hpp"
#include "mohr/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mohr;

namespace {

struct LoadedData {
    InteractionDataset dataset;
    RelationGraph graph;
    DatasetSplit split;
};

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.interactions.empty()) {
        throw ConfigError("missing required config field: interactions");
    }
    LoadedData d;
    d.dataset = load_interactions(cfg.interactions, cfg.filter_mode);
    if (!cfg.relations.empty()) {
        d.graph = load_relations(cfg.relations, d.dataset, cfg.relation_schema);
    } else {
        d.graph = RelationGraph::empty(d.dataset.num_items());
    }
    d.split = split_leave_one_out(d.dataset);
    return d;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    if (cfg.out.empty()) {
        throw ConfigError("missing required config field: out");
    }
    fs::create_directories(cfg.out);
    return cfg.out;
}

void write_report_files(const fs::path& dir, const EvalReport& report, const ModelParams& params,
                        const RunConfig& cfg) {
    const CostReport cost = cost_report(params);
    {
        std::ofstream txt(dir / "report.txt");
        txt << "variant=" << to_string(report.variant) << '\n';
        txt << "auc=" << report.auc << '\n';
        txt << "hr10=" << report.hr10 << '\n';
        txt << "ndcg10=" << report.ndcg10 << '\n';
        for (const auto& [policy, value] : report.layout_ndcg) {
            txt << "layout_ndcg_" << to_string(policy) << '=' << value << '\n';
        }
        txt << "users_evaluated=" << report.users_evaluated << '\n';
        txt << "users_excluded=" << report.users_excluded << '\n';
        txt << "parameter_count=" << cost.parameters << '\n';
        txt << "score_flops=" << cost.score_flops << '\n';
        txt << "simd=" << kern::isa_name(kern::active_isa()) << '\n';
        txt << "seed=" << cfg.hyper.rng_seed << '\n';
    }
    {
        std::ofstream tsv(dir / "report.tsv");
        tsv << "variant\tauc\thr10\tndcg10";
        for (const auto& [policy, value] : report.layout_ndcg) {
            tsv << "\tlayout_" << to_string(policy);
        }
        tsv << "\tusers_evaluated\tusers_excluded\n";
        tsv << to_string(report.variant) << '\t' << report.auc << '\t' << report.hr10 << '\t'
            << report.ndcg10;
        for (const auto& [policy, value] : report.layout_ndcg) {
            tsv << '\t' << value;
        }
        tsv << '\t' << report.users_evaluated << '\t' << report.users_excluded << '\n';
    }
    if (report.per_user) {
        std::ofstream tsv(dir / "per_user.tsv");
        tsv << "user\trank\tauc\thr10\tndcg10\n";
        for (const auto& m : *report.per_user) {
            tsv << m.user << '\t' << m.rank << '\t' << m.auc << '\t' << m.hr10 << '\t' << m.ndcg10
                << '\n';
        }
    }
}

void print_report(const EvalReport& report, const ModelParams& params) {
    const CostReport cost = cost_report(params);
    std::cout << "variant=" << to_string(report.variant) << " auc=" << report.auc
              << " hr10=" << report.hr10 << " ndcg10=" << report.ndcg10;
    for (const auto& [policy, value] : report.layout_ndcg) {
        std::cout << " layout_" << to_string(policy) << '=' << value;
    }
    std::cout << " users=" << report.users_evaluated << " excluded=" << report.users_excluded
              << " params=" << cost.parameters << " simd=" << kern::isa_name(kern::active_isa())
              << '\n';
}

EvalOptions eval_options_from(const RunConfig& cfg, EvalTarget target) {
    EvalOptions e;
    e.negatives = cfg.hyper.eval_negatives;
    e.target = target;
    e.auc_mode = cfg.auc_mode;
    e.seed = cfg.hyper.rng_seed;
    e.threads = cfg.threads;
    e.score = cfg.score_options();
    return e;
}

int cmd_train(const RunConfig& cfg) {
    const fs::path out = ensure_out_dir(cfg);
    const LoadedData data = load_data(cfg);

    const Hyperparams hyper = variant_hyperparams(cfg.hyper, cfg.variant);
    const TrainOptions opts = cfg.train_options();

    std::ofstream log(out / "train_log.tsv");
    log << "step\tloss_seq\tloss_item\tloss_rel\ttotal\tval_auc\tval_hr10\tval_ndcg10\n";
    TrainCallbacks callbacks;
    callbacks.on_eval = [&](const TrainLogRow& row) {
        log << row.step << '\t' << row.loss_seq << '\t' << row.loss_item << '\t' << row.loss_rel
            << '\t' << row.total << '\t' << row.val_auc << '\t' << row.val_hr10 << '\t'
            << row.val_ndcg10 << '\n';
        log.flush();
    };

    TrainResult result = train(data.split, data.graph, hyper, opts, callbacks);
    save_checkpoint(out / "model.mohr", result.params);

    EvalOptions eval_opts = eval_options_from(cfg, EvalTarget::test);
    EvalReport report = eval_setting1(result.params, data.split, eval_opts);
    report.variant = cfg.variant;
    write_report_files(out, report, result.params, cfg);
    std::cout << "trained " << result.steps_run << " steps"
              << (result.early_stopped ? " (early stop)" : "") << '\n';
    print_report(report, result.params);
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, bool layout, bool per_user) {
    const LoadedData data = load_data(cfg);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.num_users() != data.dataset.num_users() ||
        params.num_items() != data.dataset.num_items() ||
        params.num_explicit_relations() != data.graph.num_relations()) {
        throw DataError("checkpoint dimensions do not match the dataset: " + checkpoint);
    }

    EvalOptions eval_opts = eval_options_from(cfg, EvalTarget::test);
    eval_opts.keep_per_user = per_user;
    EvalReport report = eval_setting1(params, data.split, eval_opts);
    report.variant = cfg.variant;
    if (layout) {
        for (const LayoutPolicy policy :
             {LayoutPolicy::random, LayoutPolicy::model, LayoutPolicy::ground_truth}) {
            report.layout_ndcg[policy] = eval_setting2(params, data.split, data.graph, policy, eval_opts);
        }
    }
    if (!cfg.out.empty()) {
        write_report_files(ensure_out_dir(cfg), report, params, cfg);
    }
    print_report(report, params);
    return 0;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
    if (out_dir.empty()) {
        throw ConfigError("missing required config field: out");
    }
    fs::create_directories(out_dir);
    const SyntheticData data = generate_synthetic(spec);
    write_interactions(data.dataset, fs::path(out_dir) / "interactions.tsv");
    write_relations(data.graph, data.dataset, fs::path(out_dir) / "relations.tsv");
    save_checkpoint(fs::path(out_dir) / "planted.mohr", data.planted);
    std::cout << "synthetic: users=" << data.dataset.num_users()
              << " items=" << data.dataset.num_items() << " actions=" << data.dataset.num_actions()
              << " relations=" << data.graph.num_relations() << " edges=" << data.graph.num_edges()
              << '\n';
    return 0;
}

int cmd_recommend(const RunConfig& cfg, const std::string& checkpoint, const std::string& user_arg,
                  const std::string& item_arg, uint32_t top_n, bool dense_ids) {
    const LoadedData data = load_data(cfg);
    const ModelParams params = load_checkpoint(checkpoint);
    if (params.num_users() != data.dataset.num_users() ||
        params.num_items() != data.dataset.num_items()) {
        throw DataError("checkpoint dimensions do not match the dataset: " + checkpoint);
    }

    UserId u = 0;
    ItemId i = 0;
    if (dense_ids) {
        u = static_cast<UserId>(std::stoul(user_arg));
        i = static_cast<ItemId>(std::stoul(item_arg));
        if (u >= data.dataset.num_users() || i >= data.dataset.num_items()) {
            throw DataError("dense id out of range");
        }
    } else {
        const auto uit = data.dataset.user_ids.find(user_arg);
        const auto iit = data.dataset.item_ids.find(item_arg);
        if (uit == data.dataset.user_ids.end()) {
            throw DataError("unknown user id: " + user_arg);
        }
        if (iit == data.dataset.item_ids.end()) {
            throw DataError("unknown item id: " + item_arg);
        }
        u = uit->second;
        i = iit->second;
    }

    // Relations ordered by P(r|u,i), top items from each related-item list,
    // the latent slot ranked by the mixture score over unseen items.
    const auto probs = relation_probabilities(params, u, i);
    std::vector<uint32_t> order(probs.size());
    for (uint32_t r = 0; r < order.size(); ++r) {
        order[r] = r;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](uint32_t a, uint32_t b) { return probs[a] > probs[b]; });

    const auto owned = data.split.user_items(u);
    std::cout << "user=" << data.dataset.user_raw[u] << " item=" << data.dataset.item_raw[i] << '\n';
    for (const uint32_t row : order) {
        if (row == params.latent_row()) {
            std::cout << "relation latent p=" << probs[row] << '\n';
            const NextItemScorer scorer(params, u, i, cfg.score_options());
            std::vector<std::pair<double, ItemId>> scored;
            for (ItemId j = 0; j < params.num_items(); ++j) {
                if (j != i && !std::binary_search(owned.begin(), owned.end(), j)) {
                    scored.emplace_back(scorer.score(j), j);
                }
            }
            const size_t take = std::min<size_t>(top_n, scored.size());
            std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                              });
            for (size_t n = 0; n < take; ++n) {
                std::cout << "  " << data.dataset.item_raw[scored[n].second] << '\t' << scored[n].first
                          << '\n';
            }
        } else {
            std::cout << "relation " << data.graph.relation_names[row] << " p=" << probs[row] << '\n';
            const auto related = data.graph.related(i, row);
            std::vector<std::pair<double, ItemId>> scored;
            for (const ItemId j : related) {
                scored.emplace_back(
                    score_item_given_relation(params, i, RelationId::explicit_rel(row), j), j);
            }
            const size_t take = std::min<size_t>(top_n, scored.size());
            std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                              });
            for (size_t n = 0; n < take; ++n) {
                std::cout << "  " << data.dataset.item_raw[scored[n].second] << '\t' << scored[n].first
                          << '\n';
            }
        }
    }
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& variants_arg) {
    const LoadedData data = load_data(cfg);
    std::vector<ModelVariant> variants;
    {
        size_t start = 0;
        while (start <= variants_arg.size()) {
            const size_t comma = variants_arg.find(',', start);
            const std::string name = comma == std::string::npos
                                         ? variants_arg.substr(start)
                                         : variants_arg.substr(start, comma - start);
            if (!name.empty()) {
                variants.push_back(parse_variant(name));
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
    }
    if (variants.empty()) {
        variants = {ModelVariant::full, ModelVariant::single_task, ModelVariant::no_mixture,
                    ModelVariant::single_task_no_mixture};
    }

    const auto outcomes = run_ablations(data.split, data.graph, cfg.hyper, cfg.train_options(),
                                        variants, eval_options_from(cfg, EvalTarget::test));
    std::cout << "variant\tauc\thr10\tndcg10\n";
    for (const auto& o : outcomes) {
        std::cout << to_string(o.variant) << '\t' << o.report.auc << '\t' << o.report.hr10 << '\t'
                  << o.report.ndcg10 << '\n';
    }
    if (!cfg.out.empty()) {
        const fs::path out = ensure_out_dir(cfg);
        std::ofstream tsv(out / "ablation.tsv");
        tsv << "variant\tauc\thr10\tndcg10\n";
        for (const auto& o : outcomes) {
            tsv << to_string(o.variant) << '\t' << o.report.auc << '\t' << o.report.hr10 << '\t'
                << o.report.ndcg10 << '\n';
        }
    }
    return 0;
}

// Shared flag plumbing: every value flag is captured as text and pushed
// through apply_config_key so file keys and CLI flags validate identically.
struct ConfigFlags {
    CLI::App* cmd = nullptr;
    std::string config_path;
    std::deque<std::string> storage;
    std::vector<std::pair<std::string, std::string*>> bindings;

    static std::string flag_name(const std::string& key) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        return flag;
    }

    void add(CLI::App* app, const std::vector<std::string>& keys) {
        cmd = app;
        app->add_option("--config", config_path, "flat key = value config file");
        for (const auto& key : keys) {
            storage.emplace_back();
            bindings.emplace_back(key, &storage.back());
            app->add_option(flag_name(key), storage.back(), "override config key '" + key + "'");
        }
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            merge_config_file(cfg, config_path);
        }
        for (const auto& [key, value] : bindings) {
            if (cmd->count(flag_name(key)) > 0) {
                apply_config_key(cfg, key, *value);
            }
        }
        return cfg;
    }
};

const std::vector<std::string> kDataKeys = {"interactions", "relations", "out", "seed", "threads"};
const std::vector<std::string> kTrainKeys = {
    "interactions",     "relations",          "out",
    "seed",             "threads",            "k",
    "alpha",            "beta",               "lambda",
    "learning_rate",    "batch_size",         "iterations",
    "eval_negatives",   "eval_every",         "patience",
    "variant",          "bias_in_mixture",    "rel_loss_on_scores",
    "filter_mode",      "auc_mode",           "position_sampling",
    "skip_unweighted_batches"};
const std::vector<std::string> kEvalKeys = {
    "interactions", "relations",       "out",      "seed",    "threads", "eval_negatives",
    "auc_mode",     "bias_in_mixture", "variant",  "filter_mode"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoHR: sequential recommendation over mixtures of item relationships"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + reports");
    train_flags.add(train_cmd, kTrainKeys);

    ConfigFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_flags.add(eval_cmd, kEvalKeys);
    std::string eval_checkpoint;
    bool eval_layout = false, eval_per_user = false;
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint path")->required();
    eval_cmd->add_flag("--layout", eval_layout, "also compute Setting-2 layout NDCG per policy");
    eval_cmd->add_flag("--per-user", eval_per_user, "write per-user metrics TSV");

    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-model synthetic dataset");
    SyntheticSpec spec;
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--users", spec.num_users, "number of users");
    synth_cmd->add_option("--items", spec.num_items, "number of items");
    synth_cmd->add_option("--relations", spec.num_relations, "number of explicit relations");
    synth_cmd->add_option("--k", spec.k, "planted embedding dimension");
    synth_cmd->add_option("--seq-len", spec.sequence_length, "actions per user");
    synth_cmd->add_option("--temperature", spec.temperature, "sampling temperature");
    synth_cmd->add_option("--neighbors", spec.neighbors_per_item, "graph degree per relation");
    synth_cmd->add_option("--seed", spec.rng_seed, "rng seed");

    ConfigFlags rec_flags;
    auto* rec_cmd = app.add_subcommand("recommend", "print a relation-grouped recommendation layout");
    rec_flags.add(rec_cmd, kDataKeys);
    std::string rec_checkpoint, rec_user, rec_item;
    uint32_t rec_top = 5;
    bool rec_dense = false;
    rec_cmd->add_option("--checkpoint", rec_checkpoint, "model checkpoint path")->required();
    rec_cmd->add_option("--user", rec_user, "user id")->required();
    rec_cmd->add_option("--item", rec_item, "context item id")->required();
    rec_cmd->add_option("--top", rec_top, "items per relation");
    rec_cmd->add_flag("--dense", rec_dense, "treat ids as dense indices");

    ConfigFlags ablate_flags;
    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare model variants");
    ablate_flags.add(ablate_cmd, kTrainKeys);
    std::string ablate_variants;
    ablate_cmd->add_option("--variants", ablate_variants, "comma-separated variant list");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            return cmd_train(train_flags.resolve());
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(eval_flags.resolve(), eval_checkpoint, eval_layout, eval_per_user);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(spec, synth_out);
        }
        if (rec_cmd->parsed()) {
            return cmd_recommend(rec_flags.resolve(), rec_checkpoint, rec_user, rec_item, rec_top,
                                 rec_dense);
        }
        if (ablate_cmd->parsed()) {
            return cmd_ablate(ablate_flags.resolve(), ablate_variants);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
