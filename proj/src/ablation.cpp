#include "mohr/ablation.hpp"

namespace mohr {

Hyperparams variant_hyperparams(const Hyperparams& base, ModelVariant variant) {
    Hyperparams h = base;
    if (variant == ModelVariant::single_task || variant == ModelVariant::single_task_no_mixture) {
        h.alpha = 0.0;
        h.beta = 0.0;
    }
    return h;
}

TrainOptions variant_train_options(const TrainOptions& base, ModelVariant variant) {
    TrainOptions o = base;
    if (variant == ModelVariant::no_mixture || variant == ModelVariant::single_task_no_mixture) {
        // Drop the short-term transition mixture, leaving the long-term
        // preference recommender.
        o.score.transition_mixture = false;
    }
    return o;
}

std::vector<AblationOutcome> run_ablations(const DatasetSplit& split, const RelationGraph& graph,
                                           const Hyperparams& hyper, const TrainOptions& opts,
                                           std::span<const ModelVariant> variants,
                                           const EvalOptions& eval_opts) {
    std::vector<AblationOutcome> outcomes;
    outcomes.reserve(variants.size());
    for (const ModelVariant variant : variants) {
        const Hyperparams h = variant_hyperparams(hyper, variant);
        const TrainOptions o = variant_train_options(opts, variant);
        TrainResult trained = train(split, graph, h, o);

        EvalOptions e = eval_opts;
        e.score = o.score;
        AblationOutcome outcome;
        outcome.variant = variant;
        outcome.report = eval_setting1(trained.params, split, e);
        outcome.report.variant = variant;
        outcome.params = std::move(trained.params);
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

}  // namespace mohr
