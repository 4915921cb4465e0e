// Ablation harness: trains each requested model variant under identical seeds
// and reports Setting-1 metrics.

#pragma once

#include <span>

#include "mohr/evaluation.hpp"
#include "mohr/training.hpp"

namespace mohr {

struct AblationOutcome {
    ModelVariant variant = ModelVariant::full;
    EvalReport report;
    ModelParams params;
};

// single-task variants zero alpha and beta; no-mixture variants drop the
// short-term transition mixture from the predictor (training and evaluation
// alike), leaving the long-term preference recommender.
Hyperparams variant_hyperparams(const Hyperparams& base, ModelVariant variant);
TrainOptions variant_train_options(const TrainOptions& base, ModelVariant variant);

std::vector<AblationOutcome> run_ablations(const DatasetSplit& split, const RelationGraph& graph,
                                           const Hyperparams& hyper, const TrainOptions& opts,
                                           std::span<const ModelVariant> variants,
                                           const EvalOptions& eval_opts);

}  // namespace mohr
