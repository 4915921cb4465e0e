// Setting-1 ranking metrics (AUC, HR@10, NDCG@10 against sampled negatives),
// Setting-2 relation-grouped layout NDCG under three ordering policies, and a
// nearest-neighbor dump for qualitative inspection.
//
// Evaluation parallelizes over users against an immutable parameter snapshot;
// per-user RNG streams are derived from (seed, target, user), so the thread
// count never changes results.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "mohr/data.hpp"
#include "mohr/model.hpp"

namespace mohr {

enum class EvalTarget {
    validation,  // rank the validation item given the last training item
    test,        // rank the test item given the validation item
};

enum class AucMode {
    sampled,    // AUC over the sampled negatives
    full_scan,  // all metrics over every admissible item
};

enum class LayoutPolicy {
    random,        // shuffled relation order
    model,         // descending P(r|u,i)
    ground_truth,  // relations containing the ground truth first
};

enum class ModelVariant {
    full,
    single_task,
    no_mixture,
    single_task_no_mixture,
};

std::string_view to_string(LayoutPolicy policy);
std::string_view to_string(ModelVariant variant);
ModelVariant parse_variant(std::string_view name);
LayoutPolicy parse_policy(std::string_view name);

struct PerUserMetrics {
    UserId user = 0;
    uint32_t rank = 0;  // 1-based, ground truth after equal-scored negatives
    double auc = 0.0;
    double hr10 = 0.0;
    double ndcg10 = 0.0;
};

struct EvalReport {
    double auc = 0.0;
    double hr10 = 0.0;
    double ndcg10 = 0.0;
    std::map<LayoutPolicy, double> layout_ndcg;
    uint32_t users_evaluated = 0;
    uint32_t users_excluded = 0;  // no admissible negatives or no held-out item
    ModelVariant variant = ModelVariant::full;
    std::optional<std::vector<PerUserMetrics>> per_user;

    // Metric bounds plus hr10 >= ndcg10 (single relevant item).
    void validate() const;
};

struct EvalOptions {
    uint32_t negatives = 100;
    EvalTarget target = EvalTarget::test;
    AucMode auc_mode = AucMode::sampled;
    uint64_t seed = 0;
    int threads = 1;
    bool keep_per_user = false;
    ScoreOptions score;
};

EvalReport eval_setting1(const ModelParams& p, const DatasetSplit& split, const EvalOptions& opts);

// Mean layout NDCG: per user the candidate pool (ground truth + sampled
// negatives) is displayed relation list by relation list in the policy's
// order, at most 10 per list, duplicates keeping their first position; the
// ground truth contributes 1/log2(position+1), or 0 when it is never shown.
// per_user, when given, receives one value per evaluated user in user order
// (exclusions are pool-driven, so the vectors align across policies).
double eval_setting2(const ModelParams& p, const DatasetSplit& split, const RelationGraph& graph,
                     LayoutPolicy policy, const EvalOptions& opts,
                     std::vector<double>* per_user = nullptr);

// Top-N items by score_item_given_relation(query, r, .), the query itself
// excluded; ties broken towards the lower item id. without_bias drops the
// candidate bias from the score.
std::vector<std::pair<ItemId, double>> neighbor_dump(const ModelParams& p, ItemId query, RelationId r,
                                                     uint32_t top_n, bool without_bias = false);

}  // namespace mohr
