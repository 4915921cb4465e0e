#include "mohr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mohr {

void SyntheticSpec::validate() const {
    if (num_users == 0 || num_items == 0 || k == 0 || sequence_length == 0 || neighbors_per_item == 0) {
        throw ConfigError("synthetic spec fields must be positive");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("synthetic temperature must be finite and > 0");
    }
    if (num_items < 2) {
        throw ConfigError("synthetic generation needs at least two items");
    }
}

namespace {

double draw_normal(Rng& rng) {
    const double u1 = 1.0 - rng.uniform();  // (0, 1]
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Random direction scaled to the requested norm.
void fill_row(std::span<float> row, double norm, Rng& rng) {
    double sq = 0.0;
    std::vector<double> g(row.size());
    for (double& v : g) {
        v = draw_normal(rng);
        sq += v * v;
    }
    const double scale = norm / std::sqrt(std::max(sq, 1e-12));
    for (size_t d = 0; d < row.size(); ++d) {
        row[d] = static_cast<float>(g[d] * scale);
    }
}

ModelParams draw_planted(const SyntheticSpec& spec) {
    ModelParams p;
    p.k = spec.k;
    p.user_vecs = Matrix(spec.num_users, spec.k);
    p.item_vecs = Matrix(spec.num_items, spec.k);
    p.rel_vecs = Matrix(spec.num_relations + 1, spec.k);
    p.item_bias.assign(spec.num_items, 0.0f);
    p.rel_bias.assign(spec.num_relations + 1, 0.0f);

    // A compressed item cloud keeps planted score gaps between near
    // neighbors on the order of the usual sampling temperatures, so the
    // generated walks stay stochastic over the relation graph instead of
    // collapsing onto a couple of attractor items.
    for (uint32_t u = 0; u < spec.num_users; ++u) {
        Rng rng(mix_seed(spec.rng_seed, stream::synth_planted, stream::init_user, u));
        fill_row(p.user_vecs.row_span(u), rng.uniform(0.1, 0.25), rng);
    }
    for (uint32_t i = 0; i < spec.num_items; ++i) {
        Rng rng(mix_seed(spec.rng_seed, stream::synth_planted, stream::init_item, i));
        // Uniform over a ball interior.
        const double radius = 0.55 * std::pow(rng.uniform(), 1.0 / spec.k);
        fill_row(p.item_vecs.row_span(i), radius, rng);
        p.item_bias[i] = rng.uniform_f32(-0.03f, 0.03f);
    }
    // Relation vectors get larger norms than users and items: distinct
    // translation directions give each relation its own neighborhood, which
    // is what makes the relation identity informative.
    for (uint32_t r = 0; r < p.num_relations_total(); ++r) {
        const uint64_t key = r == p.latent_row() ? kLatentRowKey : r;
        Rng rng(mix_seed(spec.rng_seed, stream::synth_planted, stream::init_rel, key));
        fill_row(p.rel_vecs.row_span(r), rng.uniform(0.4, 0.6), rng);
        p.rel_bias[r] = rng.uniform_f32(-0.05f, 0.05f);
    }
    return p;
}

RelationGraph build_graph(const SyntheticSpec& spec, const ModelParams& planted) {
    RelationGraph g;
    g.num_items = spec.num_items;
    const uint32_t m = std::min(spec.neighbors_per_item, spec.num_items - 1);
    std::vector<std::pair<double, ItemId>> scored(spec.num_items);
    for (uint32_t rel = 0; rel < spec.num_relations; ++rel) {
        g.relation_names.push_back("rel" + std::to_string(rel));
        RelationGraph::Adjacency adj;
        adj.offsets.assign(size_t(spec.num_items) + 1, 0);
        std::vector<std::vector<ItemId>> lists(spec.num_items);
        const RelationId rid = RelationId::explicit_rel(rel);
        for (ItemId i = 0; i < spec.num_items; ++i) {
            scored.clear();
            for (ItemId j = 0; j < spec.num_items; ++j) {
                if (j != i) {
                    scored.emplace_back(score_item_given_relation(planted, i, rid, j), j);
                }
            }
            std::partial_sort(scored.begin(), scored.begin() + m, scored.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                              });
            auto& list = lists[i];
            list.reserve(m);
            for (uint32_t n = 0; n < m; ++n) {
                list.push_back(scored[n].second);
            }
            std::sort(list.begin(), list.end());
            adj.offsets[i + 1] = adj.offsets[i] + list.size();
        }
        adj.targets.reserve(adj.offsets.back());
        for (const auto& list : lists) {
            adj.targets.insert(adj.targets.end(), list.begin(), list.end());
        }
        g.adj.push_back(std::move(adj));
    }
    return g;
}

}  // namespace

ItemId sample_next_item(const ModelParams& planted, UserId u, ItemId current, double temperature,
                        Rng& rng) {
    const NextItemScorer scorer(planted, u, current);
    const uint32_t n = planted.num_items();
    std::vector<double> weights(n);
    double max_s = -1e300;
    for (ItemId j = 0; j < n; ++j) {
        if (j == current) {
            continue;  // no immediate repeats
        }
        weights[j] = scorer.score(j) / temperature;
        max_s = std::max(max_s, weights[j]);
    }
    double total = 0.0;
    for (ItemId j = 0; j < n; ++j) {
        weights[j] = j == current ? 0.0 : std::exp(weights[j] - max_s);
        total += weights[j];
    }
    const double pick = rng.uniform() * total;
    double acc = 0.0;
    for (ItemId j = 0; j < n; ++j) {
        acc += weights[j];
        if (pick < acc) {
            return j;
        }
    }
    return current == n - 1 ? n - 2 : n - 1;  // rounding fell off the end
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticData out;
    out.planted = draw_planted(spec);
    out.graph = build_graph(spec, out.planted);

    InteractionDataset& ds = out.dataset;
    ds.sequences.resize(spec.num_users);
    ds.user_raw.reserve(spec.num_users);
    for (uint32_t u = 0; u < spec.num_users; ++u) {
        ds.user_raw.push_back("u" + std::to_string(u));
        ds.user_ids.emplace(ds.user_raw.back(), u);
    }
    ds.item_raw.reserve(spec.num_items);
    for (uint32_t i = 0; i < spec.num_items; ++i) {
        ds.item_raw.push_back("i" + std::to_string(i));
        ds.item_ids.emplace(ds.item_raw.back(), i);
    }

    for (UserId u = 0; u < spec.num_users; ++u) {
        Rng rng(mix_seed(spec.rng_seed, stream::synth_sequence, u));
        auto& seq = ds.sequences[u];
        seq.reserve(spec.sequence_length);
        seq.push_back(static_cast<ItemId>(rng.bounded(spec.num_items)));
        while (seq.size() < spec.sequence_length) {
            seq.push_back(sample_next_item(out.planted, u, seq.back(), spec.temperature, rng));
        }
    }
    return out;
}

}  // namespace mohr
