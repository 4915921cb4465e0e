// Triple samplers for the three ranking populations, the pairwise losses, the
// joint objective with analytic gradients, Adam updates with lazy (touched
// row) moments, and unit-ball norm censoring.
//
// The training loop is the sole writer of its ModelParams; evaluation
// callbacks receive read-only snapshots.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mohr/data.hpp"
#include "mohr/model.hpp"
#include "mohr/rng.hpp"

namespace mohr {

// One record of each sampled population.
struct SeqTriple {
    UserId u;
    ItemId i;      // context item S^u_k
    ItemId i_pos;  // S^u_{k+1}
    ItemId i_neg;  // not in S^u
};
struct ItemTriple {
    ItemId i;
    uint32_t rel;  // explicit relation index
    ItemId i_pos;  // in I_{i,r}
    ItemId i_neg;  // not in I_{i,r}
};
struct RelTriple {
    UserId u;
    ItemId i;
    RelationId r_pos;  // in tau(u,k)
    RelationId r_neg;  // in R-hat minus tau(u,k)
};

struct TripleBatches {
    std::vector<SeqTriple> seq;
    std::vector<ItemTriple> item;
    std::vector<RelTriple> rel;
};

struct SamplerOptions {
    // Positions k are drawn uniformly per user by default; per-action mode
    // weights users by their number of training transitions.
    bool per_action_positions = false;
    // Rejection bound for negative draws; a record is skipped once exceeded.
    uint32_t max_rejections = 100;
};

class TripleSampler {
public:
    TripleSampler(const DatasetSplit& split, const RelationGraph& graph, SamplerOptions opts = {});

    // Each returns up to batch_size records; an empty result means the
    // population itself is empty and the loss term should be skipped.
    std::vector<SeqTriple> sample_seq(uint32_t batch_size, Rng& rng) const;
    std::vector<ItemTriple> sample_item(uint32_t batch_size, Rng& rng) const;
    std::vector<RelTriple> sample_rel(uint32_t batch_size, Rng& rng) const;

    bool seq_population_empty() const { return eligible_users_.empty(); }
    bool item_population_empty() const { return nonempty_pairs_.empty(); }
    // Relation records need at least one explicit relation to admit a negative.
    bool rel_population_empty() const { return eligible_users_.empty() || graph_->num_relations() == 0; }

private:
    std::pair<UserId, uint32_t> draw_position(Rng& rng) const;

    const DatasetSplit* split_;
    const RelationGraph* graph_;
    SamplerOptions opts_;
    std::vector<UserId> eligible_users_;  // users with >= 2 training items
    std::vector<uint64_t> pair_prefix_;   // cumulative transition counts (per-action mode)
    std::vector<std::pair<ItemId, uint32_t>> nonempty_pairs_;  // (item, rel) with edges
};

struct TrainOptions {
    uint32_t k = 10;
    ScoreOptions score;
    // Apply the relation-ranking loss to raw scores instead of softmax
    // probabilities (experimental alternative; default is the literal
    // probability-difference form).
    bool rel_loss_on_scores = false;
    SamplerOptions sampler;
    // Skip sampling batches whose objective weight is zero, keeping the RNG
    // stream aligned with a run that has no such population at all.
    bool skip_unweighted_batches = false;
    uint32_t eval_every = 1000;
    uint32_t patience = 20;  // validation evals without improvement before stopping
    bool early_stopping = true;
    int eval_threads = 1;
};

// Batch means of -ln sigmoid(delta); empty batches contribute zero.
double loss_seq(const ModelParams& p, std::span<const SeqTriple> batch, const ScoreOptions& opts = {});
double loss_item(const ModelParams& p, std::span<const ItemTriple> batch);
double loss_rel(const ModelParams& p, std::span<const RelTriple> batch, bool on_scores = false);

double bias_penalty(const ModelParams& p);

// T = T_S + alpha T_I + beta T_R + lambda (sum b_i^2 + sum b_r^2)
double total_objective(const ModelParams& p, const Hyperparams& hyper, const TripleBatches& batches,
                       const TrainOptions& opts = {});

// Dense float64 gradient shaped like ModelParams, with the touched rows
// tracked so updates and re-zeroing stay proportional to batch size.
class GradientBuffer {
public:
    void reset(const ModelParams& p);

    double* user_grad(uint32_t row);
    double* item_grad(uint32_t row);
    double* rel_grad(uint32_t row);
    void add_item_bias(uint32_t i, double g);
    void add_rel_bias(uint32_t row, double g);
    void mark_bias_dense() { bias_dense_ = true; }

    // Sorted, deduplicated after finalize().
    std::span<const uint32_t> touched_user() const { return touched_user_; }
    std::span<const uint32_t> touched_item() const { return touched_item_; }
    std::span<const uint32_t> touched_rel() const { return touched_rel_; }
    std::span<const uint32_t> touched_item_bias() const { return touched_item_bias_; }
    std::span<const uint32_t> touched_rel_bias() const { return touched_rel_bias_; }
    bool bias_dense() const { return bias_dense_; }

    const double* user_row(uint32_t row) const { return user_.data() + size_t(row) * k_; }
    const double* item_row(uint32_t row) const { return item_.data() + size_t(row) * k_; }
    const double* rel_row(uint32_t row) const { return rel_.data() + size_t(row) * k_; }
    double item_bias(uint32_t i) const { return item_bias_[i]; }
    double rel_bias(uint32_t row) const { return rel_bias_[row]; }
    double* item_bias_dense_data() { return item_bias_.data(); }
    double* rel_bias_dense_data() { return rel_bias_.data(); }
    uint32_t k() const { return k_; }

    void finalize();

private:
    uint32_t k_ = 0;
    std::vector<double> user_, item_, rel_, item_bias_, rel_bias_;
    std::vector<uint32_t> touched_user_, touched_item_, touched_rel_;
    std::vector<uint32_t> touched_item_bias_, touched_rel_bias_;
    bool bias_dense_ = false;
};

struct LossBreakdown {
    double seq = 0.0;
    double item = 0.0;
    double rel = 0.0;
    double penalty = 0.0;
    double total(const Hyperparams& h) const {
        return seq + h.alpha * item + h.beta * rel + h.lambda * penalty;
    }
};

// Exact analytic gradient of total_objective with respect to every parameter
// the batches touch (plus 2*lambda*b on every bias when lambda > 0). Also
// returns the loss values of the same pass.
LossBreakdown gradients(const ModelParams& p, const Hyperparams& hyper, const TripleBatches& batches,
                        const TrainOptions& opts, GradientBuffer& out);

struct OptimizerState {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    uint64_t step = 0;
    Matrix m_user, v_user, m_item, v_item, m_rel, v_rel;
    std::vector<float> m_item_bias, v_item_bias, m_rel_bias, v_rel_bias;

    static OptimizerState init(const ModelParams& p);
};

// Bias-corrected Adam over the touched rows, then norm censoring of the
// embedding rows it updated. Rows with no gradient keep their values and
// moments (lazy updates), so a zero gradient leaves the parameters unchanged.
void adam_step(ModelParams& p, OptimizerState& state, const GradientBuffer& grad, double learning_rate);

// theta <- theta / max(||theta||_2, 1) for every embedding row; biases are
// untouched.
void norm_censor(ModelParams& p);
void censor_row(float* row, uint32_t k);

struct TrainLogRow {
    uint64_t step = 0;
    // Means over the steps since the previous row.
    double loss_seq = 0.0, loss_item = 0.0, loss_rel = 0.0, total = 0.0;
    double val_auc = 0.0, val_hr10 = 0.0, val_ndcg10 = 0.0;
};

// Callbacks observe read-only parameter snapshots; the loop remains the sole
// writer.
struct TrainCallbacks {
    std::function<void(uint64_t step, const LossBreakdown&, double total, const ModelParams&)> on_step;
    std::function<void(const TrainLogRow&)> on_eval;
};

struct TrainResult {
    ModelParams params;
    std::vector<TrainLogRow> log;
    uint64_t steps_run = 0;
    bool early_stopped = false;
    double best_val_ndcg10 = 0.0;
};

// Runs hyper.iterations steps of (sample, gradients, adam_step), evaluating
// validation metrics every opts.eval_every steps. With early stopping active
// the parameters from the best validation evaluation are returned; otherwise
// the final ones. Deterministic given hyper.rng_seed. Throws NumericError
// with a dump of the offending batches if the objective turns non-finite.
TrainResult train(const DatasetSplit& split, const RelationGraph& graph, const Hyperparams& hyper,
                  const TrainOptions& opts = {}, const TrainCallbacks& callbacks = {});

}  // namespace mohr
