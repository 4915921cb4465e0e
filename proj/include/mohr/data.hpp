// Interaction-log and relation-list ingestion, 5-core filtering, the
// leave-one-out split, and relevant-relation lookup.
//
// File formats:
//   interactions: TSV, one action per line: user_raw<TAB>item_raw<TAB>timestamp_int
//   relations:    TSV: head_item_raw<TAB>relation_name<TAB>tail_item_raw
//
// Loading is single threaded; the loaded structures are immutable afterwards
// and freely shared across threads.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mohr/model.hpp"

namespace mohr {

enum class FilterMode {
    fixpoint,     // iterate the 5-core rule until stable
    single_pass,  // apply the threshold once against the raw counts
};

struct InteractionDataset {
    // Per dense user id, item ids ordered by timestamp ascending; ties keep
    // raw input order.
    std::vector<std::vector<ItemId>> sequences;
    std::vector<std::string> user_raw;  // dense -> raw
    std::vector<std::string> item_raw;
    std::unordered_map<std::string, UserId> user_ids;  // raw -> dense
    std::unordered_map<std::string, ItemId> item_ids;

    uint32_t num_users() const { return static_cast<uint32_t>(sequences.size()); }
    uint32_t num_items() const { return static_cast<uint32_t>(item_raw.size()); }
    uint64_t num_actions() const;
};

struct RelationGraph {
    std::vector<std::string> relation_names;
    uint32_t num_items = 0;

    // One CSR adjacency per explicit relation; target lists sorted ascending
    // and deduplicated. Edges are directed as stored.
    struct Adjacency {
        std::vector<uint64_t> offsets;  // num_items + 1
        std::vector<ItemId> targets;
    };
    std::vector<Adjacency> adj;

    uint64_t dropped_edges = 0;    // endpoints absent from the dataset
    uint64_t duplicate_edges = 0;  // repeated (head, relation, tail) lines

    uint32_t num_relations() const { return static_cast<uint32_t>(relation_names.size()); }
    std::span<const ItemId> related(ItemId i, uint32_t rel) const;
    bool contains(ItemId i, uint32_t rel, ItemId j) const;
    uint64_t num_edges() const;

    static RelationGraph empty(uint32_t num_items);
};

struct DatasetSplit {
    const InteractionDataset* dataset = nullptr;
    // Per user: length of the training prefix. Users with |S^u| >= 3 hold out
    // the last two actions (validation then test); shorter users train on the
    // whole sequence and are excluded from evaluation.
    std::vector<uint32_t> train_len;
    std::vector<uint8_t> evaluable;
    // Sorted distinct items of the full sequence, for negative-sample
    // exclusion checks.
    std::vector<std::vector<ItemId>> item_sets;

    std::span<const ItemId> train_seq(UserId u) const;
    ItemId val_item(UserId u) const;
    ItemId test_item(UserId u) const;
    bool user_evaluable(UserId u) const { return evaluable[u] != 0; }
    std::span<const ItemId> user_items(UserId u) const { return item_sets[u]; }
    uint32_t num_users() const { return static_cast<uint32_t>(train_len.size()); }
};

// Parses and 5-core-filters an interaction log. Users need >= 5 actions and
// items >= 5 occurrences; in fixpoint mode removals cascade until stable.
// Throws DataError with the line number on malformed input and when nothing
// survives filtering.
InteractionDataset load_interactions(const std::filesystem::path& path,
                                     FilterMode mode = FilterMode::fixpoint);

// Loads item relations against an already-loaded dataset. Edges touching
// items absent from the dataset are dropped (counted in dropped_edges);
// duplicate lines collapse; a self-loop is an error. When expected_names is
// non-empty any other relation name is an error.
RelationGraph load_relations(const std::filesystem::path& path, const InteractionDataset& dataset,
                             std::span<const std::string> expected_names = {});

DatasetSplit split_leave_one_out(const InteractionDataset& dataset);

// Relations explaining the transition seq[k] -> seq[k+1] (k zero-based):
// every explicit relation whose related-item list for seq[k] contains
// seq[k+1], or the latent relation when none does. Never empty, and never
// mixes the latent relation with explicit ones.
std::vector<RelationId> relevant_relations(const RelationGraph& graph, ItemId from, ItemId to);
std::vector<RelationId> relevant_relations(const RelationGraph& graph, const InteractionDataset& dataset,
                                           UserId u, uint32_t k);

// Re-serialization in the load formats (timestamps become positions).
void write_interactions(const InteractionDataset& dataset, const std::filesystem::path& path);
void write_relations(const RelationGraph& graph, const InteractionDataset& dataset,
                     const std::filesystem::path& path);

}  // namespace mohr
