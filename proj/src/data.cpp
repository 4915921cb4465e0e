#include "mohr/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>

namespace mohr {

uint64_t InteractionDataset::num_actions() const {
    uint64_t total = 0;
    for (const auto& seq : sequences) {
        total += seq.size();
    }
    return total;
}

std::span<const ItemId> RelationGraph::related(ItemId i, uint32_t rel) const {
    const Adjacency& a = adj[rel];
    return {a.targets.data() + a.offsets[i], a.targets.data() + a.offsets[i + 1]};
}

bool RelationGraph::contains(ItemId i, uint32_t rel, ItemId j) const {
    const auto list = related(i, rel);
    return std::binary_search(list.begin(), list.end(), j);
}

uint64_t RelationGraph::num_edges() const {
    uint64_t total = 0;
    for (const auto& a : adj) {
        total += a.targets.size();
    }
    return total;
}

RelationGraph RelationGraph::empty(uint32_t num_items) {
    RelationGraph g;
    g.num_items = num_items;
    return g;
}

namespace {

struct RawAction {
    std::string user;
    std::string item;
    int64_t timestamp;
};

constexpr uint32_t kCoreThreshold = 5;

std::vector<std::string_view> split_tsv(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::vector<RawAction> parse_interactions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open interactions file: " + path.string());
    }
    std::vector<RawAction> actions;
    std::string line;
    uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tsv(line);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            throw DataError("malformed interactions line " + std::to_string(line_no) + ": " + line);
        }
        int64_t ts = 0;
        const auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), ts);
        if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
            throw DataError("bad timestamp on interactions line " + std::to_string(line_no) + ": " + line);
        }
        actions.push_back({std::string(fields[0]), std::string(fields[1]), ts});
    }
    return actions;
}

}  // namespace

InteractionDataset load_interactions(const std::filesystem::path& path, FilterMode mode) {
    const std::vector<RawAction> actions = parse_interactions(path);

    std::unordered_map<std::string, uint32_t> user_count;
    std::unordered_map<std::string, uint32_t> item_count;
    for (const auto& a : actions) {
        ++user_count[a.user];
        ++item_count[a.item];
    }
    auto count_of = [](const std::unordered_map<std::string, uint32_t>& counts,
                       const std::string& key) {
        const auto it = counts.find(key);
        return it == counts.end() ? 0u : it->second;
    };
    auto alive = [&](const RawAction& a) {
        return count_of(user_count, a.user) >= kCoreThreshold &&
               count_of(item_count, a.item) >= kCoreThreshold;
    };

    if (mode == FilterMode::fixpoint) {
        for (;;) {
            std::unordered_map<std::string, uint32_t> next_user;
            std::unordered_map<std::string, uint32_t> next_item;
            for (const auto& a : actions) {
                if (alive(a)) {
                    ++next_user[a.user];
                    ++next_item[a.item];
                }
            }
            if (next_user == user_count && next_item == item_count) {
                break;
            }
            user_count = std::move(next_user);
            item_count = std::move(next_item);
        }
    }
    // In single-pass mode the raw counts decide directly.

    InteractionDataset ds;
    for (const auto& a : actions) {
        if (alive(a) &&
            ds.user_ids.try_emplace(a.user, static_cast<UserId>(ds.user_raw.size())).second) {
            ds.user_raw.push_back(a.user);
        }
    }
    if (ds.user_raw.empty()) {
        throw DataError("dataset degenerate: nothing survives 5-core filtering of " + path.string());
    }
    ds.sequences.resize(ds.user_raw.size());

    // Group per user preserving input order, then stable-sort by timestamp.
    std::vector<std::vector<const RawAction*>> per_user(ds.num_users());
    for (const auto& a : actions) {
        if (alive(a)) {
            per_user[ds.user_ids.at(a.user)].push_back(&a);
        }
    }
    // Dense item ids follow the traversal order of the final dataset, so a
    // reloaded dump reproduces the numbering exactly.
    for (UserId u = 0; u < ds.num_users(); ++u) {
        auto& list = per_user[u];
        std::stable_sort(list.begin(), list.end(),
                         [](const RawAction* a, const RawAction* b) { return a->timestamp < b->timestamp; });
        ds.sequences[u].reserve(list.size());
        for (const RawAction* a : list) {
            const auto [it, inserted] =
                ds.item_ids.try_emplace(a->item, static_cast<ItemId>(ds.item_raw.size()));
            if (inserted) {
                ds.item_raw.push_back(a->item);
            }
            ds.sequences[u].push_back(it->second);
        }
    }
    return ds;
}

RelationGraph load_relations(const std::filesystem::path& path, const InteractionDataset& dataset,
                             std::span<const std::string> expected_names) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open relations file: " + path.string());
    }

    RelationGraph g;
    g.num_items = dataset.num_items();
    std::unordered_map<std::string, uint32_t> rel_ids;
    if (!expected_names.empty()) {
        for (const auto& name : expected_names) {
            rel_ids.emplace(name, g.num_relations());
            g.relation_names.push_back(name);
        }
    }

    // edges[rel][head] -> tails
    std::vector<std::map<ItemId, std::vector<ItemId>>> edges(g.relation_names.size());
    uint64_t kept_lines = 0;

    std::string line;
    uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_tsv(line);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw DataError("malformed relations line " + std::to_string(line_no) + ": " + line);
        }
        if (fields[0] == fields[2]) {
            throw DataError("self-loop on relations line " + std::to_string(line_no) + ": " + line);
        }
        const std::string name(fields[1]);
        auto rel_it = rel_ids.find(name);
        if (rel_it == rel_ids.end()) {
            if (!expected_names.empty()) {
                throw DataError("unknown relation name '" + name + "' on line " + std::to_string(line_no));
            }
            rel_it = rel_ids.emplace(name, g.num_relations()).first;
            g.relation_names.push_back(name);
            edges.emplace_back();
        }
        const auto head = dataset.item_ids.find(std::string(fields[0]));
        const auto tail = dataset.item_ids.find(std::string(fields[2]));
        if (head == dataset.item_ids.end() || tail == dataset.item_ids.end()) {
            ++g.dropped_edges;
            continue;
        }
        edges[rel_it->second][head->second].push_back(tail->second);
        ++kept_lines;
    }

    uint64_t unique_edges = 0;
    g.adj.resize(g.num_relations());
    for (uint32_t rel = 0; rel < g.num_relations(); ++rel) {
        auto& a = g.adj[rel];
        a.offsets.assign(size_t(g.num_items) + 1, 0);
        for (auto& [head, tails] : edges[rel]) {
            std::sort(tails.begin(), tails.end());
            tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
            a.offsets[head + 1] = tails.size();
            unique_edges += tails.size();
        }
        std::partial_sum(a.offsets.begin(), a.offsets.end(), a.offsets.begin());
        a.targets.resize(a.offsets.back());
        for (const auto& [head, tails] : edges[rel]) {
            std::copy(tails.begin(), tails.end(), a.targets.begin() + a.offsets[head]);
        }
    }
    g.duplicate_edges = kept_lines - unique_edges;
    return g;
}

DatasetSplit split_leave_one_out(const InteractionDataset& dataset) {
    DatasetSplit s;
    s.dataset = &dataset;
    const uint32_t n = dataset.num_users();
    s.train_len.resize(n);
    s.evaluable.resize(n);
    s.item_sets.resize(n);
    for (UserId u = 0; u < n; ++u) {
        const auto& seq = dataset.sequences[u];
        const bool can_eval = seq.size() >= 3;
        s.train_len[u] = can_eval ? static_cast<uint32_t>(seq.size()) - 2 : static_cast<uint32_t>(seq.size());
        s.evaluable[u] = can_eval ? 1 : 0;
        s.item_sets[u] = seq;
        std::sort(s.item_sets[u].begin(), s.item_sets[u].end());
        s.item_sets[u].erase(std::unique(s.item_sets[u].begin(), s.item_sets[u].end()),
                             s.item_sets[u].end());
    }
    return s;
}

std::span<const ItemId> DatasetSplit::train_seq(UserId u) const {
    const auto& seq = dataset->sequences[u];
    return {seq.data(), train_len[u]};
}

ItemId DatasetSplit::val_item(UserId u) const { return dataset->sequences[u][train_len[u]]; }

ItemId DatasetSplit::test_item(UserId u) const { return dataset->sequences[u][train_len[u] + 1]; }

std::vector<RelationId> relevant_relations(const RelationGraph& graph, ItemId from, ItemId to) {
    std::vector<RelationId> out;
    for (uint32_t rel = 0; rel < graph.num_relations(); ++rel) {
        if (graph.contains(from, rel, to)) {
            out.push_back(RelationId::explicit_rel(rel));
        }
    }
    if (out.empty()) {
        out.push_back(RelationId::latent());
    }
    return out;
}

std::vector<RelationId> relevant_relations(const RelationGraph& graph, const InteractionDataset& dataset,
                                           UserId u, uint32_t k) {
    if (u >= dataset.num_users()) {
        throw ContractError("relevant_relations: user id out of range");
    }
    const auto& seq = dataset.sequences[u];
    if (k + 1 >= seq.size()) {
        throw ContractError("relevant_relations: position " + std::to_string(k) +
                            " out of range for sequence of length " + std::to_string(seq.size()));
    }
    return relevant_relations(graph, seq[k], seq[k + 1]);
}

void write_interactions(const InteractionDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write interactions file: " + path.string());
    }
    for (UserId u = 0; u < dataset.num_users(); ++u) {
        const auto& seq = dataset.sequences[u];
        for (size_t pos = 0; pos < seq.size(); ++pos) {
            out << dataset.user_raw[u] << '\t' << dataset.item_raw[seq[pos]] << '\t' << pos << '\n';
        }
    }
}

void write_relations(const RelationGraph& graph, const InteractionDataset& dataset,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write relations file: " + path.string());
    }
    for (uint32_t rel = 0; rel < graph.num_relations(); ++rel) {
        for (ItemId i = 0; i < graph.num_items; ++i) {
            for (const ItemId j : graph.related(i, rel)) {
                out << dataset.item_raw[i] << '\t' << graph.relation_names[rel] << '\t'
                    << dataset.item_raw[j] << '\n';
            }
        }
    }
}

}  // namespace mohr
