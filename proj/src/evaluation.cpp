#include "mohr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_set>

#include "mohr/rng.hpp"

namespace mohr {

std::string_view to_string(LayoutPolicy policy) {
    switch (policy) {
        case LayoutPolicy::random: return "random";
        case LayoutPolicy::model: return "model";
        case LayoutPolicy::ground_truth: return "ground_truth";
    }
    return "unknown";
}

std::string_view to_string(ModelVariant variant) {
    switch (variant) {
        case ModelVariant::full: return "full";
        case ModelVariant::single_task: return "single-task";
        case ModelVariant::no_mixture: return "no-mixture";
        case ModelVariant::single_task_no_mixture: return "single-task-no-mixture";
    }
    return "unknown";
}

ModelVariant parse_variant(std::string_view name) {
    if (name == "full") return ModelVariant::full;
    if (name == "single-task") return ModelVariant::single_task;
    if (name == "no-mixture") return ModelVariant::no_mixture;
    if (name == "single-task-no-mixture") return ModelVariant::single_task_no_mixture;
    throw ConfigError("unknown model variant: " + std::string(name));
}

LayoutPolicy parse_policy(std::string_view name) {
    if (name == "random") return LayoutPolicy::random;
    if (name == "model") return LayoutPolicy::model;
    if (name == "ground_truth" || name == "groundtruth") return LayoutPolicy::ground_truth;
    throw ConfigError("unknown layout policy: " + std::string(name));
}

void EvalReport::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0 + 1e-12; };
    if (!in_unit(auc) || !in_unit(hr10) || !in_unit(ndcg10)) {
        throw ContractError("evaluation metrics out of [0, 1]");
    }
    if (ndcg10 > hr10 + 1e-12) {
        throw ContractError("ndcg10 exceeds hr10");
    }
    for (const auto& [policy, value] : layout_ndcg) {
        if (!in_unit(value)) {
            throw ContractError("layout ndcg out of [0, 1]");
        }
    }
}

namespace {

struct EvalContext {
    ItemId context_item;
    ItemId ground_truth;
};

EvalContext user_context(const DatasetSplit& split, UserId u, EvalTarget target) {
    if (target == EvalTarget::test) {
        return {split.val_item(u), split.test_item(u)};
    }
    const auto train = split.train_seq(u);
    return {train.back(), split.val_item(u)};
}

// Distinct negatives drawn uniformly from I minus S^u. Returns false when the
// user admits none at all.
bool sample_negatives(const DatasetSplit& split, UserId u, uint32_t num_items, uint32_t want,
                      Rng& rng, std::vector<ItemId>& out) {
    const auto owned = split.user_items(u);
    const uint32_t admissible = num_items - static_cast<uint32_t>(owned.size());
    if (admissible == 0) {
        return false;
    }
    const uint32_t take = std::min(want, admissible);
    out.clear();
    out.reserve(take);
    std::unordered_set<ItemId> chosen;
    chosen.reserve(take * 2);
    while (out.size() < take) {
        const ItemId j = static_cast<ItemId>(rng.bounded(num_items));
        if (std::binary_search(owned.begin(), owned.end(), j) || !chosen.insert(j).second) {
            continue;
        }
        out.push_back(j);
    }
    return true;
}

double ndcg_at_10(uint32_t rank) { return rank <= 10 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0; }

std::optional<PerUserMetrics> eval_user_setting1(const ModelParams& p, const DatasetSplit& split,
                                                 const EvalOptions& opts, UserId u,
                                                 std::vector<ItemId>& negatives) {
    const EvalContext ctx = user_context(split, u, opts.target);
    const NextItemScorer scorer(p, u, ctx.context_item, opts.score);
    const double gt_score = scorer.score(ctx.ground_truth);

    uint64_t greater = 0, equal = 0, less = 0;
    auto tally = [&](double s) {
        if (s > gt_score) {
            ++greater;
        } else if (s == gt_score) {
            ++equal;
        } else {
            ++less;
        }
    };

    if (opts.auc_mode == AucMode::full_scan) {
        const auto owned = split.user_items(u);
        if (owned.size() == p.num_items()) {
            return std::nullopt;
        }
        for (ItemId j = 0; j < p.num_items(); ++j) {
            if (!std::binary_search(owned.begin(), owned.end(), j)) {
                tally(scorer.score(j));
            }
        }
    } else {
        Rng rng(mix_seed(opts.seed, stream::eval_negatives, static_cast<uint64_t>(opts.target), u));
        if (!sample_negatives(split, u, p.num_items(), opts.negatives, rng, negatives)) {
            return std::nullopt;
        }
        for (const ItemId j : negatives) {
            tally(scorer.score(j));
        }
    }

    PerUserMetrics m;
    m.user = u;
    // Ground truth placed after equal-scored negatives.
    m.rank = static_cast<uint32_t>(1 + greater + equal);
    m.auc = (static_cast<double>(less) + 0.5 * static_cast<double>(equal)) /
            static_cast<double>(greater + equal + less);
    m.hr10 = m.rank <= 10 ? 1.0 : 0.0;
    m.ndcg10 = ndcg_at_10(m.rank);
    return m;
}

// Runs fn(u) for every evaluable user, optionally across threads. Results are
// deposited per user slot, so the schedule never affects the outcome.
template <typename Fn>
void for_each_evaluable(const DatasetSplit& split, int threads, const Fn& fn) {
    std::vector<UserId> users;
    for (UserId u = 0; u < split.num_users(); ++u) {
        if (split.user_evaluable(u)) {
            users.push_back(u);
        }
    }
    const int n_threads = std::max(1, threads);
    if (n_threads == 1 || users.size() < 64) {
        for (size_t slot = 0; slot < users.size(); ++slot) {
            fn(slot, users[slot]);
        }
        return;
    }
    std::vector<std::thread> pool;
    const size_t chunk = (users.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
        const size_t lo = std::min(users.size(), t * chunk);
        const size_t hi = std::min(users.size(), lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([&, lo, hi] {
            for (size_t slot = lo; slot < hi; ++slot) {
                fn(slot, users[slot]);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

}  // namespace

EvalReport eval_setting1(const ModelParams& p, const DatasetSplit& split, const EvalOptions& opts) {
    if (p.num_users() != split.num_users() || split.num_users() == 0) {
        throw ContractError("eval_setting1: split and parameters disagree on the user count");
    }
    std::vector<std::optional<PerUserMetrics>> slots;
    size_t total_evaluable = 0;
    for (UserId u = 0; u < split.num_users(); ++u) {
        total_evaluable += split.user_evaluable(u) ? 1 : 0;
    }
    slots.resize(total_evaluable);

    for_each_evaluable(split, opts.threads, [&](size_t slot, UserId u) {
        thread_local std::vector<ItemId> negatives;
        slots[slot] = eval_user_setting1(p, split, opts, u, negatives);
    });

    EvalReport report;
    if (opts.keep_per_user) {
        report.per_user.emplace();
    }
    for (const auto& m : slots) {
        if (!m) {
            ++report.users_excluded;
            continue;
        }
        ++report.users_evaluated;
        report.auc += m->auc;
        report.hr10 += m->hr10;
        report.ndcg10 += m->ndcg10;
        if (report.per_user) {
            report.per_user->push_back(*m);
        }
    }
    if (report.users_evaluated > 0) {
        report.auc /= report.users_evaluated;
        report.hr10 /= report.users_evaluated;
        report.ndcg10 /= report.users_evaluated;
    }
    report.validate();
    return report;
}

namespace {

std::vector<uint32_t> relation_order(const ModelParams& p, const RelationGraph& graph,
                                     LayoutPolicy policy, UserId u, ItemId context, ItemId gt,
                                     uint64_t seed) {
    const uint32_t latent = p.latent_row();
    std::vector<uint32_t> order;
    switch (policy) {
        case LayoutPolicy::random: {
            order.resize(p.num_relations_total());
            for (uint32_t r = 0; r < order.size(); ++r) {
                order[r] = r;
            }
            Rng rng(mix_seed(seed, stream::eval_layout, u));
            for (size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[rng.bounded(i)]);
            }
            break;
        }
        case LayoutPolicy::model: {
            const auto probs = relation_probabilities(p, u, context);
            order.resize(probs.size());
            for (uint32_t r = 0; r < order.size(); ++r) {
                order[r] = r;
            }
            std::stable_sort(order.begin(), order.end(),
                             [&](uint32_t a, uint32_t b) { return probs[a] > probs[b]; });
            break;
        }
        case LayoutPolicy::ground_truth: {
            std::vector<uint32_t> holding, rest;
            for (uint32_t rel = 0; rel < graph.num_relations(); ++rel) {
                (graph.contains(context, rel, gt) ? holding : rest).push_back(rel);
            }
            if (holding.empty()) {
                // Only the latent relation explains the transition.
                order.push_back(latent);
                order.insert(order.end(), rest.begin(), rest.end());
            } else {
                order = holding;
                order.insert(order.end(), rest.begin(), rest.end());
                order.push_back(latent);
            }
            break;
        }
    }
    return order;
}

std::optional<double> layout_user(const ModelParams& p, const DatasetSplit& split,
                                  const RelationGraph& graph, LayoutPolicy policy,
                                  const EvalOptions& opts, UserId u) {
    const EvalContext ctx = user_context(split, u, opts.target);
    Rng rng(mix_seed(opts.seed, stream::eval_negatives, static_cast<uint64_t>(opts.target), u));
    std::vector<ItemId> pool;
    if (!sample_negatives(split, u, p.num_items(), opts.negatives, rng, pool)) {
        return std::nullopt;
    }
    pool.push_back(ctx.ground_truth);

    const NextItemScorer scorer(p, u, ctx.context_item, opts.score);
    const auto order =
        relation_order(p, graph, policy, u, ctx.context_item, ctx.ground_truth, opts.seed);

    std::unordered_set<ItemId> shown;
    shown.reserve(pool.size() * 2);
    uint32_t position = 0;
    std::vector<std::pair<double, ItemId>> list;
    for (const uint32_t row : order) {
        list.clear();
        if (row == p.latent_row()) {
            for (const ItemId c : pool) {
                if (!shown.contains(c)) {
                    list.emplace_back(scorer.score(c), c);
                }
            }
        } else {
            const RelationId rel = RelationId::explicit_rel(row);
            for (const ItemId c : pool) {
                if (graph.contains(ctx.context_item, row, c)) {
                    list.emplace_back(score_item_given_relation(p, ctx.context_item, rel, c), c);
                }
            }
        }
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
        });
        if (list.size() > 10) {
            list.resize(10);
        }
        for (const auto& [score, item] : list) {
            if (!shown.insert(item).second) {
                continue;  // first display position kept
            }
            ++position;
            if (item == ctx.ground_truth) {
                return 1.0 / std::log2(static_cast<double>(position) + 1.0);
            }
        }
    }
    return 0.0;  // ground truth never displayed
}

}  // namespace

double eval_setting2(const ModelParams& p, const DatasetSplit& split, const RelationGraph& graph,
                     LayoutPolicy policy, const EvalOptions& opts, std::vector<double>* per_user) {
    std::vector<std::optional<double>> slots;
    size_t total_evaluable = 0;
    for (UserId u = 0; u < split.num_users(); ++u) {
        total_evaluable += split.user_evaluable(u) ? 1 : 0;
    }
    slots.resize(total_evaluable);
    for_each_evaluable(split, opts.threads, [&](size_t slot, UserId u) {
        slots[slot] = layout_user(p, split, graph, policy, opts, u);
    });
    if (per_user) {
        per_user->clear();
    }
    double total = 0.0;
    uint64_t n = 0;
    for (const auto& v : slots) {
        if (v) {
            total += *v;
            ++n;
            if (per_user) {
                per_user->push_back(*v);
            }
        }
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
}

std::vector<std::pair<ItemId, double>> neighbor_dump(const ModelParams& p, ItemId query, RelationId r,
                                                     uint32_t top_n, bool without_bias) {
    detail::check_item(p, query);
    detail::check_relation(p, r);
    std::vector<std::pair<ItemId, double>> scored;
    scored.reserve(p.num_items());
    for (ItemId j = 0; j < p.num_items(); ++j) {
        if (j == query) {
            continue;
        }
        double s = score_item_given_relation(p, query, r, j);
        if (without_bias) {
            s -= static_cast<double>(p.item_bias[j]);
        }
        scored.emplace_back(j, s);
    }
    const size_t take = std::min<size_t>(top_n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                          return a.second > b.second || (a.second == b.second && a.first < b.first);
                      });
    scored.resize(take);
    return scored;
}

}  // namespace mohr
