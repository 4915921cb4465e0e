// Parameter storage and the scoring mathematics: squared translational
// distance, the item-to-item and relation recommenders, the relation softmax,
// and the mixture next-item predictor.
//
// Parameters are stored as float32 rows; every score is accumulated in
// float64. Scoring is pure and safe to call concurrently on an immutable
// ModelParams snapshot.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mohr/errors.hpp"

namespace mohr {

using UserId = uint32_t;
using ItemId = uint32_t;

// Either the latent relation r0 or an explicit relation index < |R|.
class RelationId {
public:
    static constexpr RelationId latent() { return RelationId(kLatentTag); }
    static constexpr RelationId explicit_rel(uint32_t index) { return RelationId(index); }

    constexpr bool is_latent() const { return tag_ == kLatentTag; }
    constexpr uint32_t explicit_index() const { return tag_; }

    // Storage row inside the relation tables: explicit relations first,
    // latent last.
    constexpr uint32_t row(uint32_t num_explicit) const { return is_latent() ? num_explicit : tag_; }

    friend constexpr bool operator==(RelationId a, RelationId b) = default;

private:
    static constexpr uint32_t kLatentTag = 0xffffffffu;
    explicit constexpr RelationId(uint32_t tag) : tag_(tag) {}
    uint32_t tag_;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(uint32_t rows, uint32_t cols) : rows_(rows), cols_(cols), data_(size_t(rows) * cols, 0.0f) {}

    uint32_t rows() const { return rows_; }
    uint32_t cols() const { return cols_; }

    float* row(uint32_t r) { return data_.data() + size_t(r) * cols_; }
    const float* row(uint32_t r) const { return data_.data() + size_t(r) * cols_; }
    std::span<float> row_span(uint32_t r) { return {row(r), cols_}; }
    std::span<const float> row_span(uint32_t r) const { return {row(r), cols_}; }

    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    uint32_t rows_ = 0;
    uint32_t cols_ = 0;
    std::vector<float> data_;
};

// All learnable tensors. Relation tables hold |R|+1 rows, the latent row
// stored last. After any completed training step every embedding row has
// L2 norm <= 1 + 1e-9.
struct ModelParams {
    uint32_t k = 0;
    Matrix user_vecs;              // |U| x K
    Matrix item_vecs;              // |I| x K
    Matrix rel_vecs;               // (|R|+1) x K
    std::vector<float> item_bias;  // |I|
    std::vector<float> rel_bias;   // |R|+1

    uint32_t num_users() const { return user_vecs.rows(); }
    uint32_t num_items() const { return item_vecs.rows(); }
    uint32_t num_explicit_relations() const { return rel_vecs.rows() - 1; }
    uint32_t num_relations_total() const { return rel_vecs.rows(); }

    uint32_t rel_row(RelationId r) const { return r.row(num_explicit_relations()); }
    uint32_t latent_row() const { return num_explicit_relations(); }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Embedding rows start uniform in [-0.1/sqrt(K), 0.1/sqrt(K)], biases at
// zero. Each row draws from its own seed stream keyed by (table, row), the
// latent relation row by a reserved key, so the same row gets the same start
// regardless of table sizes elsewhere.
ModelParams init_params(uint32_t num_users, uint32_t num_items, uint32_t num_explicit_relations,
                        uint32_t k, uint64_t seed);

struct Hyperparams {
    double alpha = 1.0;
    double beta = 0.1;
    double lambda = 1e-4;
    double learning_rate = 0.001;
    uint32_t batch_size = 512;
    uint32_t iterations = 10000;
    uint32_t eval_negatives = 100;
    uint64_t rng_seed = 0;

    void validate() const;
};

struct ScoreOptions {
    // Include the item bias inside each mixture component; off drops it from
    // the transition terms so the bias enters the final score once.
    bool bias_in_mixture = true;
    // Off restricts the mixture to the latent relation only, identical to
    // running with an empty relation set.
    bool explicit_mixture = true;
    // Off removes the short-term transition mixture entirely, leaving the
    // long-term preference recommender b - d(theta_u + theta_i, theta_j);
    // this is the predictor of the no-mixture ablations.
    bool transition_mixture = true;
};

// sum_k (x_k - y_k)^2
double squared_distance(std::span<const float> x, std::span<const float> y);

// b_{i'} - d(theta_i + theta_r, theta_{i'})
double score_item_given_relation(const ModelParams& p, ItemId i, RelationId r, ItemId i_prime);

// b_r - d(theta_u + theta_i, theta_r); r ranges over all relations including
// the latent one.
double score_relation(const ModelParams& p, UserId u, ItemId i, RelationId r);

// Softmax of score_relation over all |R|+1 relations (explicit rows first,
// latent last), computed with max subtraction. Entries are positive and sum
// to 1 within 1e-9.
std::vector<double> relation_probabilities(const ModelParams& p, UserId u, ItemId i);
void relation_probabilities(const ModelParams& p, UserId u, ItemId i, std::span<double> out);

// Per-(user, context item) state for scoring many candidate next items:
// mixture weights plus translated bases, shared across candidates.
class NextItemScorer {
public:
    NextItemScorer(const ModelParams& p, UserId u, ItemId i, const ScoreOptions& opts = {});

    double score(ItemId candidate) const;
    void score_many(std::span<const ItemId> candidates, std::span<double> out) const;

    // Mixture weights over the active relation rows.
    std::span<const double> probs() const { return probs_; }
    std::span<const uint32_t> rows() const { return rows_; }

private:
    const ModelParams& params_;
    ScoreOptions opts_;
    std::vector<uint32_t> rows_;        // relation rows in the mixture
    std::vector<double> probs_;         // P(r|u,i) over rows_
    std::vector<double> pref_base_;     // theta_u + theta_i
    std::vector<double> trans_bases_;   // per row: theta_i + theta_r, K each
};

// R*(i'|u,i) per the mixture predictor; with opts.explicit_mixture off this
// is the latent-only reduction.
double score_next_item(const ModelParams& p, UserId u, ItemId i, ItemId i_prime,
                       const ScoreOptions& opts = {});

// (|U|+|I|+|R|+1)*K + |I| + |R| + 1
uint64_t parameter_count(const ModelParams& p);

// Size and per-score cost accounting for run reports.
struct CostReport {
    uint64_t parameters = 0;
    // Multiply-adds for one next-item score: one preference distance plus one
    // transition distance per relation, the relation softmax, and the mix.
    uint64_t score_flops = 0;
};
CostReport cost_report(const ModelParams& p);

namespace detail {
void check_user(const ModelParams& p, UserId u);
void check_item(const ModelParams& p, ItemId i);
void check_relation(const ModelParams& p, RelationId r);
}  // namespace detail

}  // namespace mohr
