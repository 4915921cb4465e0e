#include "mohr/model.hpp"

#include <cmath>
#include <string>

#include "mohr/kernels.hpp"
#include "mohr/rng.hpp"

namespace mohr {

namespace detail {

void check_user(const ModelParams& p, UserId u) {
    if (u >= p.num_users()) {
        throw ContractError("user id " + std::to_string(u) + " out of range (|U|=" +
                            std::to_string(p.num_users()) + ")");
    }
}

void check_item(const ModelParams& p, ItemId i) {
    if (i >= p.num_items()) {
        throw ContractError("item id " + std::to_string(i) + " out of range (|I|=" +
                            std::to_string(p.num_items()) + ")");
    }
}

void check_relation(const ModelParams& p, RelationId r) {
    if (!r.is_latent() && r.explicit_index() >= p.num_explicit_relations()) {
        throw ContractError("relation id " + std::to_string(r.explicit_index()) +
                            " out of range (|R|=" + std::to_string(p.num_explicit_relations()) + ")");
    }
}

}  // namespace detail

void Hyperparams::validate() const {
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(alpha) || !finite_nonneg(beta) || !finite_nonneg(lambda)) {
        throw ConfigError("alpha, beta and lambda must be finite and >= 0");
    }
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
        throw ConfigError("learning_rate must be finite and > 0");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (eval_negatives == 0) {
        throw ConfigError("eval_negatives must be positive");
    }
}

namespace {

void init_table(Matrix& table, uint64_t seed, uint64_t table_tag, float range, bool latent_last) {
    for (uint32_t row = 0; row < table.rows(); ++row) {
        const bool is_latent = latent_last && row + 1 == table.rows();
        const uint64_t row_key = is_latent ? kLatentRowKey : row;
        Rng rng(mix_seed(seed, table_tag, row_key));
        for (float& v : table.row_span(row)) {
            v = rng.uniform_f32(-range, range);
        }
    }
}

}  // namespace

ModelParams init_params(uint32_t num_users, uint32_t num_items, uint32_t num_explicit_relations,
                        uint32_t k, uint64_t seed) {
    if (k == 0) {
        throw ContractError("embedding dimension K must be positive");
    }
    ModelParams p;
    p.k = k;
    p.user_vecs = Matrix(num_users, k);
    p.item_vecs = Matrix(num_items, k);
    p.rel_vecs = Matrix(num_explicit_relations + 1, k);
    p.item_bias.assign(num_items, 0.0f);
    p.rel_bias.assign(num_explicit_relations + 1, 0.0f);

    const float range = 0.1f / std::sqrt(static_cast<float>(k));
    init_table(p.user_vecs, seed, stream::init_user, range, false);
    init_table(p.item_vecs, seed, stream::init_item, range, false);
    init_table(p.rel_vecs, seed, stream::init_rel, range, true);
    return p;
}

double squared_distance(std::span<const float> x, std::span<const float> y) {
    if (x.size() != y.size()) {
        throw ContractError("squared_distance: length mismatch (" + std::to_string(x.size()) +
                            " vs " + std::to_string(y.size()) + ")");
    }
    return kern::sqdist(x.data(), y.data(), x.size());
}

double score_item_given_relation(const ModelParams& p, ItemId i, RelationId r, ItemId i_prime) {
    detail::check_item(p, i);
    detail::check_item(p, i_prime);
    detail::check_relation(p, r);
    const double dist =
        kern::trans_sqdist(p.item_vecs.row(i), p.rel_vecs.row(p.rel_row(r)), p.item_vecs.row(i_prime), p.k);
    return static_cast<double>(p.item_bias[i_prime]) - dist;
}

double score_relation(const ModelParams& p, UserId u, ItemId i, RelationId r) {
    detail::check_user(p, u);
    detail::check_item(p, i);
    detail::check_relation(p, r);
    const uint32_t row = p.rel_row(r);
    const double dist = kern::trans_sqdist(p.user_vecs.row(u), p.item_vecs.row(i), p.rel_vecs.row(row), p.k);
    return static_cast<double>(p.rel_bias[row]) - dist;
}

void relation_probabilities(const ModelParams& p, UserId u, ItemId i, std::span<double> out) {
    detail::check_user(p, u);
    detail::check_item(p, i);
    const uint32_t n = p.num_relations_total();
    if (out.size() != n) {
        throw ContractError("relation_probabilities: output span has wrong length");
    }
    double max_score = -1e300;
    for (uint32_t row = 0; row < n; ++row) {
        const double dist =
            kern::trans_sqdist(p.user_vecs.row(u), p.item_vecs.row(i), p.rel_vecs.row(row), p.k);
        out[row] = static_cast<double>(p.rel_bias[row]) - dist;
        max_score = std::max(max_score, out[row]);
    }
    double total = 0.0;
    for (uint32_t row = 0; row < n; ++row) {
        out[row] = std::exp(out[row] - max_score);
        total += out[row];
    }
    for (uint32_t row = 0; row < n; ++row) {
        out[row] /= total;
    }
}

std::vector<double> relation_probabilities(const ModelParams& p, UserId u, ItemId i) {
    std::vector<double> probs(p.num_relations_total());
    relation_probabilities(p, u, i, probs);
    return probs;
}

NextItemScorer::NextItemScorer(const ModelParams& p, UserId u, ItemId i, const ScoreOptions& opts)
    : params_(p), opts_(opts) {
    detail::check_user(p, u);
    detail::check_item(p, i);
    const uint32_t k = p.k;

    if (!opts.transition_mixture) {
        // preference-only predictor
    } else if (opts.explicit_mixture) {
        rows_.resize(p.num_relations_total());
        for (uint32_t row = 0; row < rows_.size(); ++row) {
            rows_[row] = row;
        }
        probs_.resize(rows_.size());
        relation_probabilities(p, u, i, probs_);
    } else {
        rows_ = {p.latent_row()};
        probs_ = {1.0};  // softmax over a single relation
    }

    pref_base_.resize(k);
    const float* uv = p.user_vecs.row(u);
    const float* iv = p.item_vecs.row(i);
    for (uint32_t d = 0; d < k; ++d) {
        pref_base_[d] = static_cast<double>(uv[d]) + static_cast<double>(iv[d]);
    }
    trans_bases_.resize(size_t(rows_.size()) * k);
    for (size_t idx = 0; idx < rows_.size(); ++idx) {
        const float* rv = p.rel_vecs.row(rows_[idx]);
        double* base = trans_bases_.data() + idx * k;
        for (uint32_t d = 0; d < k; ++d) {
            base[d] = static_cast<double>(iv[d]) + static_cast<double>(rv[d]);
        }
    }
}

double NextItemScorer::score(ItemId candidate) const {
    detail::check_item(params_, candidate);
    const uint32_t k = params_.k;
    const float* cv = params_.item_vecs.row(candidate);
    const double bias = static_cast<double>(params_.item_bias[candidate]);

    double total = bias - kern::sqdist_d32(pref_base_.data(), cv, k);
    const double comp_bias = opts_.bias_in_mixture ? bias : 0.0;
    for (size_t idx = 0; idx < rows_.size(); ++idx) {
        const double dist = kern::sqdist_d32(trans_bases_.data() + idx * k, cv, k);
        total += probs_[idx] * (comp_bias - dist);
    }
    return total;
}

void NextItemScorer::score_many(std::span<const ItemId> candidates, std::span<double> out) const {
    if (candidates.size() != out.size()) {
        throw ContractError("score_many: candidate and output lengths differ");
    }
    for (size_t i = 0; i < candidates.size(); ++i) {
        out[i] = score(candidates[i]);
    }
}

double score_next_item(const ModelParams& p, UserId u, ItemId i, ItemId i_prime,
                       const ScoreOptions& opts) {
    return NextItemScorer(p, u, i, opts).score(i_prime);
}

uint64_t parameter_count(const ModelParams& p) {
    const uint64_t users = p.num_users();
    const uint64_t items = p.num_items();
    const uint64_t rels = uint64_t(p.num_explicit_relations()) + 1;
    return (users + items + rels) * p.k + items + rels;
}

CostReport cost_report(const ModelParams& p) {
    CostReport r;
    r.parameters = parameter_count(p);
    const uint64_t rels = uint64_t(p.num_explicit_relations()) + 1;
    const uint64_t per_dist = 3ull * p.k;
    // preference distance + per-relation score distances + per-relation
    // transition distances + softmax/mix arithmetic
    r.score_flops = per_dist + rels * per_dist * 2 + 4 * rels;
    return r;
}

}  // namespace mohr
