#include "mohr/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mohr/evaluation.hpp"
#include "mohr/kernels.hpp"

namespace mohr {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// -ln sigmoid(x) = softplus(-x), stable in both tails.
double log_sigmoid_loss(double x) {
    if (x > 0.0) {
        return std::log1p(std::exp(-x));
    }
    return -x + std::log1p(std::exp(x));
}

// Relation scores b_r - d(theta_u + theta_i, theta_r) over every relation row.
void all_relation_scores(const ModelParams& p, UserId u, ItemId i, std::vector<double>& out) {
    const uint32_t n = p.num_relations_total();
    out.resize(n);
    for (uint32_t row = 0; row < n; ++row) {
        out[row] = static_cast<double>(p.rel_bias[row]) -
                   kern::trans_sqdist(p.user_vecs.row(u), p.item_vecs.row(i), p.rel_vecs.row(row), p.k);
    }
}

void softmax_inplace(std::vector<double>& v) {
    double max_v = v[0];
    for (const double x : v) {
        max_v = std::max(max_v, x);
    }
    double total = 0.0;
    for (double& x : v) {
        x = std::exp(x - max_v);
        total += x;
    }
    for (double& x : v) {
        x /= total;
    }
}

}  // namespace

// --- sampler ---------------------------------------------------------------

TripleSampler::TripleSampler(const DatasetSplit& split, const RelationGraph& graph, SamplerOptions opts)
    : split_(&split), graph_(&graph), opts_(opts) {
    pair_prefix_.push_back(0);
    for (UserId u = 0; u < split.num_users(); ++u) {
        const uint32_t len = split.train_len[u];
        if (len >= 2) {
            eligible_users_.push_back(u);
            pair_prefix_.push_back(pair_prefix_.back() + (len - 1));
        }
    }
    for (uint32_t rel = 0; rel < graph.num_relations(); ++rel) {
        for (ItemId i = 0; i < graph.num_items; ++i) {
            if (!graph.related(i, rel).empty()) {
                nonempty_pairs_.emplace_back(i, rel);
            }
        }
    }
}

std::pair<UserId, uint32_t> TripleSampler::draw_position(Rng& rng) const {
    if (opts_.per_action_positions) {
        const uint64_t idx = rng.bounded(pair_prefix_.back());
        const auto it = std::upper_bound(pair_prefix_.begin(), pair_prefix_.end(), idx);
        const size_t slot = size_t(it - pair_prefix_.begin()) - 1;
        const UserId u = eligible_users_[slot];
        return {u, static_cast<uint32_t>(idx - pair_prefix_[slot])};
    }
    const UserId u = eligible_users_[rng.bounded(eligible_users_.size())];
    return {u, static_cast<uint32_t>(rng.bounded(split_->train_len[u] - 1))};
}

std::vector<SeqTriple> TripleSampler::sample_seq(uint32_t batch_size, Rng& rng) const {
    std::vector<SeqTriple> batch;
    if (seq_population_empty()) {
        return batch;
    }
    const uint32_t num_items = graph_->num_items;
    batch.reserve(batch_size);
    for (uint32_t n = 0; n < batch_size; ++n) {
        const auto [u, k] = draw_position(rng);
        const auto seq = split_->train_seq(u);
        const auto excluded = split_->user_items(u);
        ItemId neg = 0;
        bool found = false;
        for (uint32_t attempt = 0; attempt < opts_.max_rejections; ++attempt) {
            neg = static_cast<ItemId>(rng.bounded(num_items));
            if (!std::binary_search(excluded.begin(), excluded.end(), neg)) {
                found = true;
                break;
            }
        }
        if (found) {
            batch.push_back({u, seq[k], seq[k + 1], neg});
        }
    }
    return batch;
}

std::vector<ItemTriple> TripleSampler::sample_item(uint32_t batch_size, Rng& rng) const {
    std::vector<ItemTriple> batch;
    if (item_population_empty()) {
        return batch;
    }
    batch.reserve(batch_size);
    for (uint32_t n = 0; n < batch_size; ++n) {
        const auto [i, rel] = nonempty_pairs_[rng.bounded(nonempty_pairs_.size())];
        const auto related = graph_->related(i, rel);
        const ItemId pos = related[rng.bounded(related.size())];
        ItemId neg = 0;
        bool found = false;
        for (uint32_t attempt = 0; attempt < opts_.max_rejections; ++attempt) {
            neg = static_cast<ItemId>(rng.bounded(graph_->num_items));
            if (!std::binary_search(related.begin(), related.end(), neg)) {
                found = true;
                break;
            }
        }
        if (found) {
            batch.push_back({i, rel, pos, neg});
        }
    }
    return batch;
}

std::vector<RelTriple> TripleSampler::sample_rel(uint32_t batch_size, Rng& rng) const {
    std::vector<RelTriple> batch;
    if (rel_population_empty()) {
        return batch;
    }
    const uint32_t num_rel_total = graph_->num_relations() + 1;
    batch.reserve(batch_size);
    for (uint32_t n = 0; n < batch_size; ++n) {
        const auto [u, k] = draw_position(rng);
        const auto seq = split_->train_seq(u);
        const auto tau = relevant_relations(*graph_, seq[k], seq[k + 1]);
        const RelationId pos = tau[rng.bounded(tau.size())];
        auto in_tau = [&](RelationId r) {
            return std::find(tau.begin(), tau.end(), r) != tau.end();
        };
        RelationId neg = RelationId::latent();
        bool found = false;
        for (uint32_t attempt = 0; attempt < opts_.max_rejections; ++attempt) {
            const uint32_t row = static_cast<uint32_t>(rng.bounded(num_rel_total));
            neg = row == graph_->num_relations() ? RelationId::latent() : RelationId::explicit_rel(row);
            if (!in_tau(neg)) {
                found = true;
                break;
            }
        }
        if (found) {
            batch.push_back({u, seq[k], pos, neg});
        }
    }
    return batch;
}

// --- losses ----------------------------------------------------------------

double loss_seq(const ModelParams& p, std::span<const SeqTriple> batch, const ScoreOptions& opts) {
    if (batch.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const SeqTriple& t : batch) {
        const NextItemScorer scorer(p, t.u, t.i, opts);
        acc += log_sigmoid_loss(scorer.score(t.i_pos) - scorer.score(t.i_neg));
    }
    return acc / static_cast<double>(batch.size());
}

double loss_item(const ModelParams& p, std::span<const ItemTriple> batch) {
    if (batch.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const ItemTriple& t : batch) {
        const RelationId r = RelationId::explicit_rel(t.rel);
        acc += log_sigmoid_loss(score_item_given_relation(p, t.i, r, t.i_pos) -
                                score_item_given_relation(p, t.i, r, t.i_neg));
    }
    return acc / static_cast<double>(batch.size());
}

double loss_rel(const ModelParams& p, std::span<const RelTriple> batch, bool on_scores) {
    if (batch.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (const RelTriple& t : batch) {
        double delta = 0.0;
        if (on_scores) {
            delta = score_relation(p, t.u, t.i, t.r_pos) - score_relation(p, t.u, t.i, t.r_neg);
        } else {
            const auto probs = relation_probabilities(p, t.u, t.i);
            delta = probs[p.rel_row(t.r_pos)] - probs[p.rel_row(t.r_neg)];
        }
        acc += log_sigmoid_loss(delta);
    }
    return acc / static_cast<double>(batch.size());
}

double bias_penalty(const ModelParams& p) {
    double acc = 0.0;
    for (const float b : p.item_bias) {
        acc += static_cast<double>(b) * static_cast<double>(b);
    }
    for (const float b : p.rel_bias) {
        acc += static_cast<double>(b) * static_cast<double>(b);
    }
    return acc;
}

double total_objective(const ModelParams& p, const Hyperparams& hyper, const TripleBatches& batches,
                       const TrainOptions& opts) {
    return loss_seq(p, batches.seq, opts.score) + hyper.alpha * loss_item(p, batches.item) +
           hyper.beta * loss_rel(p, batches.rel, opts.rel_loss_on_scores) +
           hyper.lambda * bias_penalty(p);
}

// --- gradient buffer -------------------------------------------------------

void GradientBuffer::reset(const ModelParams& p) {
    const size_t user_n = size_t(p.num_users()) * p.k;
    const size_t item_n = size_t(p.num_items()) * p.k;
    const size_t rel_n = size_t(p.num_relations_total()) * p.k;
    if (k_ != p.k || user_.size() != user_n || item_.size() != item_n || rel_.size() != rel_n) {
        k_ = p.k;
        user_.assign(user_n, 0.0);
        item_.assign(item_n, 0.0);
        rel_.assign(rel_n, 0.0);
        item_bias_.assign(p.num_items(), 0.0);
        rel_bias_.assign(p.num_relations_total(), 0.0);
    } else {
        for (const uint32_t row : touched_user_) {
            std::fill_n(user_.data() + size_t(row) * k_, k_, 0.0);
        }
        for (const uint32_t row : touched_item_) {
            std::fill_n(item_.data() + size_t(row) * k_, k_, 0.0);
        }
        for (const uint32_t row : touched_rel_) {
            std::fill_n(rel_.data() + size_t(row) * k_, k_, 0.0);
        }
        if (bias_dense_) {
            std::fill(item_bias_.begin(), item_bias_.end(), 0.0);
            std::fill(rel_bias_.begin(), rel_bias_.end(), 0.0);
        } else {
            for (const uint32_t i : touched_item_bias_) {
                item_bias_[i] = 0.0;
            }
            for (const uint32_t i : touched_rel_bias_) {
                rel_bias_[i] = 0.0;
            }
        }
    }
    touched_user_.clear();
    touched_item_.clear();
    touched_rel_.clear();
    touched_item_bias_.clear();
    touched_rel_bias_.clear();
    bias_dense_ = false;
}

double* GradientBuffer::user_grad(uint32_t row) {
    touched_user_.push_back(row);
    return user_.data() + size_t(row) * k_;
}

double* GradientBuffer::item_grad(uint32_t row) {
    touched_item_.push_back(row);
    return item_.data() + size_t(row) * k_;
}

double* GradientBuffer::rel_grad(uint32_t row) {
    touched_rel_.push_back(row);
    return rel_.data() + size_t(row) * k_;
}

void GradientBuffer::add_item_bias(uint32_t i, double g) {
    touched_item_bias_.push_back(i);
    item_bias_[i] += g;
}

void GradientBuffer::add_rel_bias(uint32_t row, double g) {
    touched_rel_bias_.push_back(row);
    rel_bias_[row] += g;
}

namespace {
void sort_unique(std::vector<uint32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}
}  // namespace

void GradientBuffer::finalize() {
    sort_unique(touched_user_);
    sort_unique(touched_item_);
    sort_unique(touched_rel_);
    sort_unique(touched_item_bias_);
    sort_unique(touched_rel_bias_);
}

// --- gradients ---------------------------------------------------------------

namespace {

// Scratch for one sequential record; sized once per gradients() call.
struct SeqScratch {
    std::vector<uint32_t> rows;
    std::vector<double> probs;
    std::vector<double> q;       // rows x K: theta_u + theta_i - theta_r
    std::vector<double> e_pref;  // K
    std::vector<double> e_comp;  // rows x K: theta_i + theta_r - theta_x
    std::vector<double> comp;    // rows: component scores for the candidate
};

void seq_record_gradient(const ModelParams& p, const SeqTriple& t, double weight,
                         const ScoreOptions& opts, SeqScratch& ws, GradientBuffer& out,
                         double& loss_acc) {
    const uint32_t k = p.k;
    const float* uv = p.user_vecs.row(t.u);
    const float* iv = p.item_vecs.row(t.i);

    if (!opts.transition_mixture) {
        ws.rows.clear();
        ws.probs.clear();
    } else if (opts.explicit_mixture) {
        const uint32_t n = p.num_relations_total();
        ws.rows.resize(n);
        ws.probs.resize(n);
        for (uint32_t row = 0; row < n; ++row) {
            ws.rows[row] = row;
            ws.probs[row] = static_cast<double>(p.rel_bias[row]) -
                            kern::trans_sqdist(uv, iv, p.rel_vecs.row(row), k);
        }
        softmax_inplace(ws.probs);
    } else {
        ws.rows.assign(1, p.latent_row());
        ws.probs.assign(1, 1.0);
    }
    const size_t nrows = ws.rows.size();

    ws.q.resize(nrows * k);
    if (opts.explicit_mixture) {
        for (size_t idx = 0; idx < nrows; ++idx) {
            const float* rv = p.rel_vecs.row(ws.rows[idx]);
            double* q = ws.q.data() + idx * k;
            for (uint32_t d = 0; d < k; ++d) {
                q[d] = static_cast<double>(uv[d]) + static_cast<double>(iv[d]) - static_cast<double>(rv[d]);
            }
        }
    }

    ws.e_pref.resize(k);
    ws.e_comp.resize(nrows * k);
    ws.comp.resize(nrows);

    const double bias_coeff = (opts.bias_in_mixture && nrows > 0) ? 2.0 : 1.0;
    double rstar[2];
    // Pass 0 computes both scores for delta; pass 1 accumulates gradients.
    for (int pass = 0; pass < 2; ++pass) {
        double sign = 0.0;
        if (pass == 1) {
            const double delta = rstar[0] - rstar[1];
            loss_acc += log_sigmoid_loss(delta);
            sign = sigmoid(delta) - 1.0;
        }
        for (int cand = 0; cand < 2; ++cand) {
            const ItemId x = cand == 0 ? t.i_pos : t.i_neg;
            const float* xv = p.item_vecs.row(x);
            const double bias = static_cast<double>(p.item_bias[x]);
            const double comp_bias = opts.bias_in_mixture ? bias : 0.0;

            for (uint32_t d = 0; d < k; ++d) {
                ws.e_pref[d] =
                    static_cast<double>(uv[d]) + static_cast<double>(iv[d]) - static_cast<double>(xv[d]);
            }
            double mix = 0.0;
            for (size_t idx = 0; idx < nrows; ++idx) {
                const float* rv = p.rel_vecs.row(ws.rows[idx]);
                double* e = ws.e_comp.data() + idx * k;
                for (uint32_t d = 0; d < k; ++d) {
                    e[d] = static_cast<double>(iv[d]) + static_cast<double>(rv[d]) -
                           static_cast<double>(xv[d]);
                }
                ws.comp[idx] = comp_bias - kern::sqnorm_d(e, k);
                mix += ws.probs[idx] * ws.comp[idx];
            }
            if (pass == 0) {
                rstar[cand] = bias - kern::sqnorm_d(ws.e_pref.data(), k) + mix;
                continue;
            }

            const double s = (cand == 0 ? 1.0 : -1.0) * sign * weight;
            kern::axpy_d(-2.0 * s, ws.e_pref.data(), out.user_grad(t.u), k);
            kern::axpy_d(-2.0 * s, ws.e_pref.data(), out.item_grad(t.i), k);
            kern::axpy_d(2.0 * s, ws.e_pref.data(), out.item_grad(x), k);
            out.add_item_bias(x, s * bias_coeff);

            const double rbar = mix;
            for (size_t idx = 0; idx < nrows; ++idx) {
                const uint32_t row = ws.rows[idx];
                const double* e = ws.e_comp.data() + idx * k;
                const double pw = s * ws.probs[idx];
                kern::axpy_d(-2.0 * pw, e, out.item_grad(t.i), k);
                kern::axpy_d(-2.0 * pw, e, out.rel_grad(row), k);
                kern::axpy_d(2.0 * pw, e, out.item_grad(x), k);
                if (opts.explicit_mixture) {
                    // Softmax Jacobian: dP_r/ds_{r'} = P_r (delta - P_{r'}).
                    const double g = s * ws.probs[idx] * (ws.comp[idx] - rbar);
                    const double* q = ws.q.data() + idx * k;
                    kern::axpy_d(-2.0 * g, q, out.user_grad(t.u), k);
                    kern::axpy_d(-2.0 * g, q, out.item_grad(t.i), k);
                    kern::axpy_d(2.0 * g, q, out.rel_grad(row), k);
                    out.add_rel_bias(row, g);
                }
            }
        }
    }
}

void item_record_gradient(const ModelParams& p, const ItemTriple& t, double weight, bool accumulate,
                          std::vector<double>& e_pos, std::vector<double>& e_neg,
                          GradientBuffer& out, double& loss_acc) {
    const uint32_t k = p.k;
    const uint32_t row = t.rel;
    const float* iv = p.item_vecs.row(t.i);
    const float* rv = p.rel_vecs.row(row);
    const float* pv = p.item_vecs.row(t.i_pos);
    const float* nv = p.item_vecs.row(t.i_neg);
    e_pos.resize(k);
    e_neg.resize(k);
    for (uint32_t d = 0; d < k; ++d) {
        const double base = static_cast<double>(iv[d]) + static_cast<double>(rv[d]);
        e_pos[d] = base - static_cast<double>(pv[d]);
        e_neg[d] = base - static_cast<double>(nv[d]);
    }
    const double delta = (static_cast<double>(p.item_bias[t.i_pos]) - kern::sqnorm_d(e_pos.data(), k)) -
                         (static_cast<double>(p.item_bias[t.i_neg]) - kern::sqnorm_d(e_neg.data(), k));
    loss_acc += log_sigmoid_loss(delta);
    if (!accumulate) {
        return;
    }
    const double w = (sigmoid(delta) - 1.0) * weight;
    kern::axpy_d(-2.0 * w, e_pos.data(), out.item_grad(t.i), k);
    kern::axpy_d(2.0 * w, e_neg.data(), out.item_grad(t.i), k);
    kern::axpy_d(-2.0 * w, e_pos.data(), out.rel_grad(row), k);
    kern::axpy_d(2.0 * w, e_neg.data(), out.rel_grad(row), k);
    kern::axpy_d(2.0 * w, e_pos.data(), out.item_grad(t.i_pos), k);
    kern::axpy_d(-2.0 * w, e_neg.data(), out.item_grad(t.i_neg), k);
    out.add_item_bias(t.i_pos, w);
    out.add_item_bias(t.i_neg, -w);
}

void rel_record_gradient(const ModelParams& p, const RelTriple& t, double weight, bool on_scores,
                         bool accumulate, std::vector<double>& scores, std::vector<double>& probs,
                         std::vector<double>& q, GradientBuffer& out, double& loss_acc) {
    const uint32_t k = p.k;
    const uint32_t n = p.num_relations_total();
    const uint32_t pos_row = p.rel_row(t.r_pos);
    const uint32_t neg_row = p.rel_row(t.r_neg);
    all_relation_scores(p, t.u, t.i, scores);

    double delta = 0.0;
    if (on_scores) {
        delta = scores[pos_row] - scores[neg_row];
    } else {
        probs = scores;
        softmax_inplace(probs);
        delta = probs[pos_row] - probs[neg_row];
    }
    loss_acc += log_sigmoid_loss(delta);
    if (!accumulate) {
        return;
    }
    const double w = (sigmoid(delta) - 1.0) * weight;

    const float* uv = p.user_vecs.row(t.u);
    const float* iv = p.item_vecs.row(t.i);
    q.resize(k);
    auto accumulate_row = [&](uint32_t row, double h) {
        if (h == 0.0) {
            return;
        }
        const float* rv = p.rel_vecs.row(row);
        for (uint32_t d = 0; d < k; ++d) {
            q[d] = static_cast<double>(uv[d]) + static_cast<double>(iv[d]) - static_cast<double>(rv[d]);
        }
        const double hw = w * h;
        kern::axpy_d(-2.0 * hw, q.data(), out.user_grad(t.u), k);
        kern::axpy_d(-2.0 * hw, q.data(), out.item_grad(t.i), k);
        kern::axpy_d(2.0 * hw, q.data(), out.rel_grad(row), k);
        out.add_rel_bias(row, hw);
    };

    if (on_scores) {
        accumulate_row(pos_row, 1.0);
        accumulate_row(neg_row, -1.0);
        return;
    }
    // Full softmax Jacobian: d(P_pos - P_neg)/ds_{r'} for every relation.
    const double p_pos = probs[pos_row];
    const double p_neg = probs[neg_row];
    for (uint32_t row = 0; row < n; ++row) {
        double h = -probs[row] * (p_pos - p_neg);
        if (row == pos_row) {
            h += p_pos;
        }
        if (row == neg_row) {
            h -= p_neg;
        }
        accumulate_row(row, h);
    }
}

}  // namespace

LossBreakdown gradients(const ModelParams& p, const Hyperparams& hyper, const TripleBatches& batches,
                        const TrainOptions& opts, GradientBuffer& out) {
    out.reset(p);
    LossBreakdown lb;

    if (!batches.seq.empty()) {
        SeqScratch ws;
        const double weight = 1.0 / static_cast<double>(batches.seq.size());
        double acc = 0.0;
        for (const SeqTriple& t : batches.seq) {
            seq_record_gradient(p, t, weight, opts.score, ws, out, acc);
        }
        lb.seq = acc / static_cast<double>(batches.seq.size());
    }

    if (!batches.item.empty()) {
        std::vector<double> e_pos, e_neg;
        const double weight = hyper.alpha / static_cast<double>(batches.item.size());
        const bool accumulate = hyper.alpha != 0.0;
        double acc = 0.0;
        for (const ItemTriple& t : batches.item) {
            item_record_gradient(p, t, weight, accumulate, e_pos, e_neg, out, acc);
        }
        lb.item = acc / static_cast<double>(batches.item.size());
    }

    if (!batches.rel.empty()) {
        std::vector<double> scores, probs, q;
        const double weight = hyper.beta / static_cast<double>(batches.rel.size());
        const bool accumulate = hyper.beta != 0.0;
        double acc = 0.0;
        for (const RelTriple& t : batches.rel) {
            rel_record_gradient(p, t, weight, opts.rel_loss_on_scores, accumulate, scores, probs, q,
                                out, acc);
        }
        lb.rel = acc / static_cast<double>(batches.rel.size());
    }

    lb.penalty = bias_penalty(p);
    if (hyper.lambda != 0.0) {
        out.mark_bias_dense();
        double* gi = out.item_bias_dense_data();
        for (size_t i = 0; i < p.item_bias.size(); ++i) {
            gi[i] += 2.0 * hyper.lambda * static_cast<double>(p.item_bias[i]);
        }
        double* gr = out.rel_bias_dense_data();
        for (size_t i = 0; i < p.rel_bias.size(); ++i) {
            gr[i] += 2.0 * hyper.lambda * static_cast<double>(p.rel_bias[i]);
        }
    }

    out.finalize();
    return lb;
}

// --- optimizer ---------------------------------------------------------------

OptimizerState OptimizerState::init(const ModelParams& p) {
    OptimizerState s;
    s.m_user = Matrix(p.num_users(), p.k);
    s.v_user = Matrix(p.num_users(), p.k);
    s.m_item = Matrix(p.num_items(), p.k);
    s.v_item = Matrix(p.num_items(), p.k);
    s.m_rel = Matrix(p.num_relations_total(), p.k);
    s.v_rel = Matrix(p.num_relations_total(), p.k);
    s.m_item_bias.assign(p.num_items(), 0.0f);
    s.v_item_bias.assign(p.num_items(), 0.0f);
    s.m_rel_bias.assign(p.num_relations_total(), 0.0f);
    s.v_rel_bias.assign(p.num_relations_total(), 0.0f);
    return s;
}

void censor_row(float* row, uint32_t k) {
    const double sq = kern::sqnorm(row, k);
    if (sq > 1.0) {
        // The margin keeps the rescaled float32 row inside the ball after
        // per-component rounding.
        const float s = static_cast<float>((1.0 - 0x1.0p-20) / std::sqrt(sq));
        kern::scale_f32(row, k, s);
    }
}

void norm_censor(ModelParams& p) {
    for (uint32_t r = 0; r < p.user_vecs.rows(); ++r) {
        censor_row(p.user_vecs.row(r), p.k);
    }
    for (uint32_t r = 0; r < p.item_vecs.rows(); ++r) {
        censor_row(p.item_vecs.row(r), p.k);
    }
    for (uint32_t r = 0; r < p.rel_vecs.rows(); ++r) {
        censor_row(p.rel_vecs.row(r), p.k);
    }
}

namespace {

void adam_update_coord(float& theta, float& m, float& v, double g, double lr, double c1, double c2) {
    const double md = OptimizerState::kBeta1 * m + (1.0 - OptimizerState::kBeta1) * g;
    const double vd = OptimizerState::kBeta2 * v + (1.0 - OptimizerState::kBeta2) * g * g;
    m = static_cast<float>(md);
    v = static_cast<float>(vd);
    theta = static_cast<float>(theta - lr * (md / c1) / (std::sqrt(vd / c2) + OptimizerState::kEpsilon));
}

}  // namespace

void adam_step(ModelParams& p, OptimizerState& state, const GradientBuffer& grad, double learning_rate) {
    ++state.step;
    const double c1 = 1.0 - std::pow(OptimizerState::kBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(OptimizerState::kBeta2, static_cast<double>(state.step));
    const uint32_t k = p.k;

    auto update_rows = [&](Matrix& theta, Matrix& m, Matrix& v, std::span<const uint32_t> rows,
                           auto grad_row, bool censor) {
        for (const uint32_t row : rows) {
            float* t = theta.row(row);
            float* mr = m.row(row);
            float* vr = v.row(row);
            const double* g = grad_row(row);
            for (uint32_t d = 0; d < k; ++d) {
                adam_update_coord(t[d], mr[d], vr[d], g[d], learning_rate, c1, c2);
            }
            if (censor) {
                censor_row(t, k);
            }
        }
    };
    update_rows(p.user_vecs, state.m_user, state.v_user, grad.touched_user(),
                [&](uint32_t r) { return grad.user_row(r); }, true);
    update_rows(p.item_vecs, state.m_item, state.v_item, grad.touched_item(),
                [&](uint32_t r) { return grad.item_row(r); }, true);
    update_rows(p.rel_vecs, state.m_rel, state.v_rel, grad.touched_rel(),
                [&](uint32_t r) { return grad.rel_row(r); }, true);

    auto update_bias = [&](std::vector<float>& theta, std::vector<float>& m, std::vector<float>& v,
                           std::span<const uint32_t> touched, auto grad_at) {
        if (grad.bias_dense()) {
            for (uint32_t i = 0; i < theta.size(); ++i) {
                adam_update_coord(theta[i], m[i], v[i], grad_at(i), learning_rate, c1, c2);
            }
        } else {
            for (const uint32_t i : touched) {
                adam_update_coord(theta[i], m[i], v[i], grad_at(i), learning_rate, c1, c2);
            }
        }
    };
    update_bias(p.item_bias, state.m_item_bias, state.v_item_bias, grad.touched_item_bias(),
                [&](uint32_t i) { return grad.item_bias(i); });
    update_bias(p.rel_bias, state.m_rel_bias, state.v_rel_bias, grad.touched_rel_bias(),
                [&](uint32_t i) { return grad.rel_bias(i); });
}

// --- training loop -----------------------------------------------------------

namespace {

std::string dump_batches(uint64_t step, const TripleBatches& b) {
    std::ostringstream os;
    os << "non-finite objective at step " << step << "; batch head:";
    const size_t max_dump = 4;
    for (size_t i = 0; i < std::min(b.seq.size(), max_dump); ++i) {
        const auto& t = b.seq[i];
        os << " seq(u=" << t.u << ",i=" << t.i << ",pos=" << t.i_pos << ",neg=" << t.i_neg << ")";
    }
    for (size_t i = 0; i < std::min(b.item.size(), max_dump); ++i) {
        const auto& t = b.item[i];
        os << " item(i=" << t.i << ",r=" << t.rel << ",pos=" << t.i_pos << ",neg=" << t.i_neg << ")";
    }
    auto rel_name = [](RelationId r) {
        return r.is_latent() ? std::string("latent") : std::to_string(r.explicit_index());
    };
    for (size_t i = 0; i < std::min(b.rel.size(), max_dump); ++i) {
        const auto& t = b.rel[i];
        os << " rel(u=" << t.u << ",i=" << t.i << ",pos=" << rel_name(t.r_pos)
           << ",neg=" << rel_name(t.r_neg) << ")";
    }
    return os.str();
}

}  // namespace

TrainResult train(const DatasetSplit& split, const RelationGraph& graph, const Hyperparams& hyper,
                  const TrainOptions& opts, const TrainCallbacks& callbacks) {
    hyper.validate();
    const InteractionDataset& ds = *split.dataset;

    TrainResult result;
    ModelParams params =
        init_params(ds.num_users(), ds.num_items(), graph.num_relations(), opts.k, hyper.rng_seed);
    OptimizerState state = OptimizerState::init(params);
    const TripleSampler sampler(split, graph, opts.sampler);
    Rng rng(mix_seed(hyper.rng_seed, stream::train_sampler));
    GradientBuffer grad;

    bool any_evaluable = false;
    for (UserId u = 0; u < split.num_users(); ++u) {
        any_evaluable = any_evaluable || split.user_evaluable(u);
    }

    ModelParams best_params;
    double best_ndcg = -1.0;
    uint32_t evals_since_best = 0;
    bool have_best = false;

    double win_seq = 0.0, win_item = 0.0, win_rel = 0.0, win_total = 0.0;
    uint64_t win_n = 0;

    uint64_t step = 0;
    bool stopped = false;
    while (step < hyper.iterations && !stopped) {
        ++step;
        TripleBatches batches;
        batches.seq = sampler.sample_seq(hyper.batch_size, rng);
        if (!(opts.skip_unweighted_batches && hyper.alpha == 0.0)) {
            batches.item = sampler.sample_item(hyper.batch_size, rng);
        }
        if (!(opts.skip_unweighted_batches && hyper.beta == 0.0)) {
            batches.rel = sampler.sample_rel(hyper.batch_size, rng);
        }

        const LossBreakdown lb = gradients(params, hyper, batches, opts, grad);
        const double total = lb.total(hyper);
        if (!std::isfinite(total)) {
            throw NumericError(dump_batches(step, batches));
        }
        adam_step(params, state, grad, hyper.learning_rate);

        win_seq += lb.seq;
        win_item += lb.item;
        win_rel += lb.rel;
        win_total += total;
        ++win_n;
        if (callbacks.on_step) {
            callbacks.on_step(step, lb, total, params);
        }

        if (opts.eval_every != 0 && step % opts.eval_every == 0) {
            EvalOptions eval_opts;
            eval_opts.negatives = hyper.eval_negatives;
            eval_opts.target = EvalTarget::validation;
            eval_opts.seed = hyper.rng_seed;
            eval_opts.threads = opts.eval_threads;
            eval_opts.score = opts.score;
            const EvalReport report = eval_setting1(params, split, eval_opts);

            TrainLogRow row;
            row.step = step;
            row.loss_seq = win_seq / static_cast<double>(win_n);
            row.loss_item = win_item / static_cast<double>(win_n);
            row.loss_rel = win_rel / static_cast<double>(win_n);
            row.total = win_total / static_cast<double>(win_n);
            row.val_auc = report.auc;
            row.val_hr10 = report.hr10;
            row.val_ndcg10 = report.ndcg10;
            result.log.push_back(row);
            if (callbacks.on_eval) {
                callbacks.on_eval(row);
            }
            win_seq = win_item = win_rel = win_total = 0.0;
            win_n = 0;

            if (opts.early_stopping && any_evaluable && report.users_evaluated > 0) {
                if (report.ndcg10 > best_ndcg) {
                    best_ndcg = report.ndcg10;
                    best_params = params;
                    have_best = true;
                    evals_since_best = 0;
                } else if (++evals_since_best >= opts.patience) {
                    stopped = true;
                }
            }
        }
    }

    result.steps_run = step;
    result.early_stopped = stopped;
    result.best_val_ndcg10 = best_ndcg;
    result.params = (opts.early_stopping && have_best) ? std::move(best_params) : std::move(params);
    return result;
}

}  // namespace mohr
