#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>

#include "mohr/kernels.hpp"
#include "mohr/synthetic.hpp"
#include "mohr/training.hpp"
#include "support/test_util.hpp"

using namespace mohr;
using mohr::test::fd_check_config;
using mohr::test::fd_gradient_check;
using mohr::test::random_batches;
using mohr::test::random_params;

namespace {

InteractionDataset direct_dataset(std::vector<std::vector<ItemId>> sequences, uint32_t items) {
    InteractionDataset ds;
    ds.sequences = std::move(sequences);
    for (size_t u = 0; u < ds.sequences.size(); ++u) {
        ds.user_raw.push_back("u" + std::to_string(u));
        ds.user_ids.emplace(ds.user_raw.back(), UserId(u));
    }
    for (uint32_t i = 0; i < items; ++i) {
        ds.item_raw.push_back("i" + std::to_string(i));
        ds.item_ids.emplace(ds.item_raw.back(), i);
    }
    return ds;
}

// Naive reimplementation of the per-record losses used as the
// scalar-by-scalar oracle.
double oracle_log_sigmoid_loss(double delta) { return -std::log(1.0 / (1.0 + std::exp(-delta))); }

double oracle_next_score(const ModelParams& p, UserId u, ItemId i, ItemId c, const ScoreOptions& o) {
    auto dist = [&](const float* a, const float* b, const float* x) {
        double acc = 0.0;
        for (uint32_t d = 0; d < p.k; ++d) {
            const double v = double(a[d]) + double(b[d]) - double(x[d]);
            acc += v * v;
        }
        return acc;
    };
    double score = double(p.item_bias[c]) - dist(p.user_vecs.row(u), p.item_vecs.row(i), p.item_vecs.row(c));
    if (!o.transition_mixture) {
        return score;
    }
    std::vector<double> probs;
    std::vector<uint32_t> rows;
    if (o.explicit_mixture) {
        double total = 0.0;
        for (uint32_t r = 0; r < p.num_relations_total(); ++r) {
            rows.push_back(r);
            probs.push_back(std::exp(double(p.rel_bias[r]) -
                                     dist(p.user_vecs.row(u), p.item_vecs.row(i), p.rel_vecs.row(r))));
            total += probs.back();
        }
        for (double& v : probs) {
            v /= total;
        }
    } else {
        rows = {p.latent_row()};
        probs = {1.0};
    }
    for (size_t n = 0; n < rows.size(); ++n) {
        const double bias = o.bias_in_mixture ? double(p.item_bias[c]) : 0.0;
        score += probs[n] * (bias - dist(p.item_vecs.row(i), p.rel_vecs.row(rows[n]), p.item_vecs.row(c)));
    }
    return score;
}

}  // namespace

TEST_CASE("sampler: a single two-item user forces the one possible record") {
    InteractionDataset ds = direct_dataset({{0, 1}}, 4);
    const DatasetSplit split = split_leave_one_out(ds);
    const RelationGraph graph = RelationGraph::empty(4);
    const TripleSampler sampler(split, graph, {});
    Rng rng(1);
    const auto batch = sampler.sample_seq(64, rng);
    REQUIRE(batch.size() == 64);
    for (const SeqTriple& t : batch) {
        CHECK(t.u == 0);
        CHECK(t.i == 0);
        CHECK(t.i_pos == 1);
        CHECK((t.i_neg == 2 || t.i_neg == 3));
    }
}

TEST_CASE("sampler: no explicit relations means empty item and relation batches") {
    InteractionDataset ds = direct_dataset({{0, 1, 2, 3}}, 6);
    const DatasetSplit split = split_leave_one_out(ds);
    const RelationGraph graph = RelationGraph::empty(6);
    const TripleSampler sampler(split, graph, {});
    CHECK(sampler.item_population_empty());
    CHECK(sampler.rel_population_empty());
    Rng rng(2);
    CHECK(sampler.sample_item(32, rng).empty());
    CHECK(sampler.sample_rel(32, rng).empty());
    CHECK(!sampler.sample_seq(32, rng).empty());
}

TEST_CASE("sampler: negatives are uniform over the admissible set") {
    // Three items; the related list of (i0, r0) is {i1}, so negatives must be
    // uniform over {i0, i2}.
    InteractionDataset ds = direct_dataset({{0, 1, 2}}, 3);
    RelationGraph graph;
    graph.num_items = 3;
    graph.relation_names = {"r0"};
    graph.adj.resize(1);
    graph.adj[0].offsets = {0, 1, 1, 1};
    graph.adj[0].targets = {1};
    const DatasetSplit split = split_leave_one_out(ds);
    const TripleSampler sampler(split, graph, {});

    Rng rng(3);
    std::map<ItemId, uint64_t> counts;
    const auto batch = sampler.sample_item(10000, rng);
    REQUIRE(batch.size() == 10000);
    for (const ItemTriple& t : batch) {
        CHECK(t.i == 0);
        CHECK(t.i_pos == 1);
        CHECK(t.i_neg != 1);
        ++counts[t.i_neg];
    }
    // Binomial(10000, 1/2): 3 sigma = 150.
    CHECK(std::abs(double(counts[0]) - 5000.0) <= 150.0);
    CHECK(std::abs(double(counts[2]) - 5000.0) <= 150.0);
}

TEST_CASE("sampler: per-action weighting favors longer sequences") {
    InteractionDataset ds = direct_dataset({{0, 1}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1, 2}}, 12);
    const DatasetSplit split = split_leave_one_out(ds);
    const RelationGraph graph = RelationGraph::empty(12);

    SamplerOptions per_action;
    per_action.per_action_positions = true;
    const TripleSampler sampler(split, graph, per_action);
    Rng rng(4);
    uint64_t long_user = 0;
    const auto batch = sampler.sample_seq(4000, rng);
    for (const SeqTriple& t : batch) {
        long_user += t.u == 1 ? 1 : 0;
    }
    // User 1 owns 10 of the 11 training transitions.
    CHECK(double(long_user) / double(batch.size()) > 0.8);
}

TEST_CASE("losses") {
    SUBCASE("zero parameters give ln 2 per record") {
        ModelParams p = random_params(2, 4, 1, 3, 7, 0.0f, 0.0f);
        const std::vector<SeqTriple> seq = {{0, 1, 2, 3}, {1, 0, 1, 2}};
        CHECK(loss_seq(p, seq) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        const std::vector<ItemTriple> item = {{0, 0, 1, 2}};
        CHECK(loss_item(p, item) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        const std::vector<RelTriple> rel = {{0, 1, RelationId::explicit_rel(0), RelationId::latent()}};
        CHECK(loss_rel(p, rel) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(loss_rel(p, rel, true) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("a large positive margin drives the loss to zero") {
        ModelParams p = random_params(1, 3, 1, 2, 8, 0.0f, 0.0f);
        p.item_bias[1] = 40.0f;
        const std::vector<ItemTriple> item = {{0, 0, 1, 2}};
        CHECK(loss_item(p, item) <= 1e-12);
    }
    SUBCASE("empty batches contribute zero") {
        const ModelParams p = random_params(2, 3, 1, 2, 9);
        CHECK(loss_seq(p, {}) == 0.0);
        CHECK(loss_item(p, {}) == 0.0);
        CHECK(loss_rel(p, {}) == 0.0);
    }
    SUBCASE("random batch of 7 matches the scalar oracle") {
        const ModelParams p = random_params(5, 9, 3, 6, 321);
        Rng rng(10);
        TripleBatches b = random_batches(p, 7, 7, 7, rng);

        for (const bool bias : {true, false}) {
            for (const int mode : {0, 1, 2}) {
                ScoreOptions o;
                o.bias_in_mixture = bias;
                o.explicit_mixture = mode == 0;
                o.transition_mixture = mode != 2;
                double expected = 0.0;
                for (const SeqTriple& t : b.seq) {
                    expected += oracle_log_sigmoid_loss(oracle_next_score(p, t.u, t.i, t.i_pos, o) -
                                                        oracle_next_score(p, t.u, t.i, t.i_neg, o));
                }
                expected /= double(b.seq.size());
                CHECK(loss_seq(p, b.seq, o) == doctest::Approx(expected).epsilon(1e-9));
            }
        }
        {
            double expected = 0.0;
            for (const ItemTriple& t : b.item) {
                expected += oracle_log_sigmoid_loss(
                    score_item_given_relation(p, t.i, RelationId::explicit_rel(t.rel), t.i_pos) -
                    score_item_given_relation(p, t.i, RelationId::explicit_rel(t.rel), t.i_neg));
            }
            expected /= double(b.item.size());
            CHECK(loss_item(p, b.item) == doctest::Approx(expected).epsilon(1e-9));
        }
        {
            double expected = 0.0;
            for (const RelTriple& t : b.rel) {
                const auto probs = relation_probabilities(p, t.u, t.i);
                expected += oracle_log_sigmoid_loss(probs[p.rel_row(t.r_pos)] - probs[p.rel_row(t.r_neg)]);
            }
            expected /= double(b.rel.size());
            CHECK(loss_rel(p, b.rel) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("total_objective") {
    const ModelParams p = random_params(4, 7, 2, 5, 99);
    Rng rng(11);
    const TripleBatches b = random_batches(p, 5, 5, 5, rng);

    SUBCASE("alpha = beta = lambda = 0 leaves the sequential loss") {
        Hyperparams h;
        h.alpha = h.beta = h.lambda = 0.0;
        CHECK(total_objective(p, h, b) == doctest::Approx(loss_seq(p, b.seq)).epsilon(1e-12));
    }
    SUBCASE("zero biases have zero penalty") {
        const ModelParams q = random_params(4, 7, 2, 5, 99, 0.3f, 0.0f);
        CHECK(bias_penalty(q) == 0.0);
    }
    SUBCASE("recomposes from the component losses") {
        Hyperparams h;
        h.alpha = 0.7;
        h.beta = 0.25;
        h.lambda = 0.01;
        const double expected = loss_seq(p, b.seq) + 0.7 * loss_item(p, b.item) +
                                0.25 * loss_rel(p, b.rel) + 0.01 * bias_penalty(p);
        CHECK(total_objective(p, h, b) == doctest::Approx(expected).epsilon(1e-12));
        // The gradient pass reports the same decomposition.
        GradientBuffer g;
        const LossBreakdown lb = gradients(p, h, b, {}, g);
        CHECK(lb.total(h) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("gradients: structural zeros") {
    const ModelParams p = random_params(3, 5, 2, 4, 55);
    GradientBuffer g;

    SUBCASE("empty batches and lambda 0 give the zero gradient") {
        Hyperparams h;
        h.lambda = 0.0;
        gradients(p, h, {}, {}, g);
        CHECK(g.touched_user().empty());
        CHECK(g.touched_item().empty());
        CHECK(g.touched_rel().empty());
        CHECK(!g.bias_dense());
    }
    SUBCASE("lambda > 0 with empty batches hits only the biases with 2 lambda b") {
        Hyperparams h;
        h.lambda = 0.125;
        gradients(p, h, {}, {}, g);
        CHECK(g.touched_user().empty());
        CHECK(g.bias_dense());
        for (uint32_t i = 0; i < p.item_bias.size(); ++i) {
            CHECK(g.item_bias(i) == doctest::Approx(2.0 * 0.125 * double(p.item_bias[i])).epsilon(1e-12));
        }
        for (uint32_t r = 0; r < p.rel_bias.size(); ++r) {
            CHECK(g.rel_bias(r) == doctest::Approx(2.0 * 0.125 * double(p.rel_bias[r])).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradients match central finite differences over 20 random configurations") {
    const auto start = std::chrono::steady_clock::now();
    for (int config = 0; config < 20; ++config) {
        const auto outcome = fd_check_config(config);
        INFO("config ", config, " worst abs ", outcome.worst_abs, " worst rel ", outcome.worst_rel,
             " at ", outcome.worst_coord);
        CHECK(outcome.ok);
        CHECK(outcome.checked > 0);
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 10.0);
}

TEST_CASE("adam_step") {
    SUBCASE("zero gradient leaves parameters untouched and bumps the step") {
        ModelParams p = random_params(2, 3, 1, 4, 13);
        const ModelParams before = p;
        OptimizerState st = OptimizerState::init(p);
        GradientBuffer g;
        g.reset(p);
        g.finalize();
        adam_step(p, st, g, 0.01);
        CHECK(st.step == 1);
        CHECK(p == before);
    }
    SUBCASE("first update magnitude is about the learning rate") {
        ModelParams p = random_params(1, 1, 0, 1, 14, 0.0f, 0.0f);
        OptimizerState st = OptimizerState::init(p);
        GradientBuffer g;
        g.reset(p);
        g.user_grad(0)[0] = 1.0;
        g.finalize();
        adam_step(p, st, g, 0.004);
        CHECK(double(p.user_vecs.row(0)[0]) == doctest::Approx(-0.004).epsilon(1e-5));
    }
    SUBCASE("ten steps match the scalar Adam recurrence") {
        ModelParams p = random_params(1, 2, 0, 3, 15);
        OptimizerState st = OptimizerState::init(p);
        const double lr = 0.02;

        // Independent recurrence with the same float32 storage behavior.
        std::vector<float> theta(p.user_vecs.row(0), p.user_vecs.row(0) + 3);
        std::vector<float> m(3, 0.0f), v(3, 0.0f);

        Rng rng(16);
        for (int step = 1; step <= 10; ++step) {
            std::vector<double> grad(3);
            for (double& x : grad) {
                x = rng.uniform(-1.0, 1.0);
            }
            GradientBuffer g;
            g.reset(p);
            double* row = g.user_grad(0);
            for (int d = 0; d < 3; ++d) {
                row[d] = grad[d];
            }
            g.finalize();
            adam_step(p, st, g, lr);

            for (int d = 0; d < 3; ++d) {
                const double md = 0.9 * m[d] + 0.1 * grad[d];
                const double vd = 0.999 * v[d] + 0.001 * grad[d] * grad[d];
                m[d] = float(md);
                v[d] = float(vd);
                const double c1 = 1.0 - std::pow(0.9, step);
                const double c2 = 1.0 - std::pow(0.999, step);
                theta[d] = float(theta[d] - lr * (md / c1) / (std::sqrt(vd / c2) + 1e-8));
            }
            // Row norms stayed below one in this configuration, so censoring
            // never rescales and the trajectories must agree tightly.
            for (int d = 0; d < 3; ++d) {
                CHECK(double(p.user_vecs.row(0)[d]) == doctest::Approx(double(theta[d])).epsilon(1e-6));
            }
        }
        CHECK(st.step == 10);
    }
}

TEST_CASE("norm censoring") {
    SUBCASE("long rows shrink to unit length, direction preserved") {
        ModelParams p = random_params(1, 1, 0, 4, 17, 0.0f, 0.0f);
        p.user_vecs.row(0)[0] = 1.2f;
        p.user_vecs.row(0)[1] = -1.6f;  // norm 2
        norm_censor(p);
        const double n = std::sqrt(kern::sqnorm(p.user_vecs.row(0), 4));
        CHECK(n == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(p.user_vecs.row(0)[0] / p.user_vecs.row(0)[1] == doctest::Approx(-0.75).epsilon(1e-6));
    }
    SUBCASE("short rows are untouched") {
        ModelParams p = random_params(1, 1, 0, 4, 18, 0.0f, 0.0f);
        p.user_vecs.row(0)[0] = 0.3f;
        p.user_vecs.row(0)[1] = -0.4f;  // norm 0.5
        const ModelParams before = p;
        norm_censor(p);
        CHECK(p == before);
    }
    SUBCASE("random matrices end with every row inside the tolerance ball") {
        ModelParams p = random_params(50, 80, 5, 16, 19, 1.2f, 0.0f);
        norm_censor(p);
        auto check_table = [&](const Matrix& m) {
            for (uint32_t r = 0; r < m.rows(); ++r) {
                double sq = 0.0;
                for (const float x : m.row_span(r)) {
                    sq += double(x) * double(x);
                }
                CHECK(std::sqrt(sq) <= 1.0 + 1e-9);
            }
        };
        check_table(p.user_vecs);
        check_table(p.item_vecs);
        check_table(p.rel_vecs);
    }
}

TEST_CASE("train") {
    SyntheticSpec spec;
    spec.num_users = 40;
    spec.num_items = 60;
    spec.num_relations = 2;
    spec.k = 6;
    spec.sequence_length = 10;
    spec.temperature = 0.3;
    spec.rng_seed = 21;
    const SyntheticData data = generate_synthetic(spec);
    const DatasetSplit split = split_leave_one_out(data.dataset);

    SUBCASE("zero iterations return the initial parameters") {
        Hyperparams h;
        h.iterations = 0;
        h.rng_seed = 5;
        TrainOptions o;
        o.k = 6;
        const TrainResult r = train(split, data.graph, h, o);
        CHECK(r.params == init_params(40, 60, 2, 6, 5));
        CHECK(r.steps_run == 0);
    }

    SUBCASE("objective falls in expectation over 500 steps") {
        Hyperparams h;
        h.iterations = 500;
        h.batch_size = 64;
        h.rng_seed = 6;
        TrainOptions o;
        o.k = 6;
        o.eval_every = 0;  // no validation scans needed here
        std::vector<double> totals;
        TrainCallbacks cb;
        cb.on_step = [&](uint64_t, const LossBreakdown&, double total, const ModelParams&) { totals.push_back(total); };
        train(split, data.graph, h, o, cb);
        REQUIRE(totals.size() == 500);
        auto window_mean = [&](size_t end) {
            double acc = 0.0;
            for (size_t i = end - 100; i < end; ++i) {
                acc += totals[i];
            }
            return acc / 100.0;
        };
        CHECK(window_mean(500) < window_mean(100));
    }

    SUBCASE("aborts on a non-finite objective with a batch dump") {
        Hyperparams h;
        h.iterations = 10;
        h.learning_rate = 1e308;  // drives the biases to overflow
        h.lambda = 1e-4;
        h.rng_seed = 7;
        TrainOptions o;
        o.k = 6;
        o.eval_every = 0;
        CHECK_THROWS_WITH_AS(train(split, data.graph, h, o), doctest::Contains("non-finite"),
                             NumericError);
    }

    SUBCASE("single-task no-mixture run equals the relation-free run step for step") {
        // Same data with the relation lists withheld.
        const RelationGraph no_graph = RelationGraph::empty(60);

        Hyperparams h;
        h.alpha = 0.0;
        h.beta = 0.0;
        h.iterations = 120;
        h.batch_size = 32;
        h.rng_seed = 8;
        TrainOptions with_rels;
        with_rels.k = 6;
        with_rels.eval_every = 40;
        with_rels.score.bias_in_mixture = false;
        with_rels.score.explicit_mixture = false;
        with_rels.skip_unweighted_batches = true;

        TrainOptions without_rels = with_rels;
        without_rels.score.explicit_mixture = true;  // collapses: only the latent relation exists

        std::vector<double> trace_a, trace_b;
        TrainCallbacks cb_a, cb_b;
        cb_a.on_step = [&](uint64_t, const LossBreakdown& lb, double, const ModelParams&) { trace_a.push_back(lb.seq); };
        cb_b.on_step = [&](uint64_t, const LossBreakdown& lb, double, const ModelParams&) { trace_b.push_back(lb.seq); };

        const TrainResult a = train(split, data.graph, h, with_rels, cb_a);
        const TrainResult b = train(split, no_graph, h, without_rels, cb_b);
        REQUIRE(trace_a.size() == trace_b.size());
        for (size_t i = 0; i < trace_a.size(); ++i) {
            CHECK(trace_a[i] == trace_b[i]);
        }
        CHECK(a.params.user_vecs == b.params.user_vecs);
        CHECK(a.params.item_vecs == b.params.item_vecs);
        // Latent relation row matches whichever slot it occupies.
        const uint32_t la = a.params.latent_row();
        for (uint32_t d = 0; d < 6; ++d) {
            CHECK(a.params.rel_vecs.row(la)[d] == b.params.rel_vecs.row(0)[d]);
        }
    }

    SUBCASE("early stopping returns the best validation snapshot") {
        Hyperparams h;
        h.iterations = 3000;
        h.batch_size = 32;
        h.rng_seed = 9;
        TrainOptions o;
        o.k = 6;
        o.eval_every = 50;
        o.patience = 3;
        const TrainResult r = train(split, data.graph, h, o);
        CHECK(r.best_val_ndcg10 >= 0.0);
        if (r.early_stopped) {
            CHECK(r.steps_run < 3000);
        }
    }
}
