// Planted-model synthetic generator. Draws ground-truth parameters inside the
// unit ball, derives a relation graph from their item-to-item scores, and
// samples user sequences from the planted next-item distribution at a given
// temperature. Deterministic given the seed.

#pragma once

#include <cstdint>

#include "mohr/data.hpp"
#include "mohr/model.hpp"
#include "mohr/rng.hpp"

namespace mohr {

struct SyntheticSpec {
    uint32_t num_users = 100;
    uint32_t num_items = 200;
    uint32_t num_relations = 2;
    uint32_t k = 8;
    uint32_t sequence_length = 20;
    double temperature = 1.0;
    uint64_t rng_seed = 0;
    // Graph degree: each item links to its top-m scored items per relation.
    uint32_t neighbors_per_item = 8;

    void validate() const;
};

struct SyntheticData {
    InteractionDataset dataset;
    RelationGraph graph;
    ModelParams planted;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// One draw from the planted transition distribution: next item sampled with
// probability proportional to exp(score_next_item / temperature). Exposed so
// the distribution itself can be tested.
ItemId sample_next_item(const ModelParams& planted, UserId u, ItemId current, double temperature,
                        Rng& rng);

}  // namespace mohr
