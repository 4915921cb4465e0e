// Run configuration: flat `key = value` files plus programmatic overrides.
// Precedence is CLI flags > config file > defaults; unknown keys are
// rejected.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mohr/data.hpp"
#include "mohr/evaluation.hpp"
#include "mohr/training.hpp"

namespace mohr {

struct RunConfig {
    std::string interactions;
    std::string relations;
    std::string out;

    uint32_t k = 10;
    Hyperparams hyper;
    int threads = 1;

    bool bias_in_mixture = true;
    bool rel_loss_on_scores = false;
    FilterMode filter_mode = FilterMode::fixpoint;
    AucMode auc_mode = AucMode::sampled;
    bool per_action_positions = false;
    bool skip_unweighted_batches = false;
    ModelVariant variant = ModelVariant::full;
    uint32_t eval_every = 1000;
    uint32_t patience = 20;
    // Optional fixed relation schema; when set, unknown relation names in the
    // relations file are an error.
    std::vector<std::string> relation_schema;

    TrainOptions train_options() const;
    ScoreOptions score_options() const;
};

// Applies one key=value pair; throws ConfigError on unknown keys or
// unparsable values.
void apply_config_key(RunConfig& config, const std::string& key, const std::string& value);

// Parses a flat key = value file ('#' starts a comment).
RunConfig parse_config_file(const std::filesystem::path& path);
void merge_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace mohr
