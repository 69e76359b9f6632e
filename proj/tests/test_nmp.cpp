#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "groupnet/gradcheck.hpp"
#include "groupnet/nmp.hpp"

using namespace groupnet;

namespace {

template <class T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.storage()) v = static_cast<T>(rng.normal(0.0, scale));
    return t;
}

template <class T>
void randomize_biases(ParameterStore<T>& store, Rng& rng) {
    for (auto& [name, p] : store.entries())
        if (name.ends_with("bias"))
            for (auto& v : p.var.mutable_value().storage()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
}

Membership single_edge(std::vector<std::size_t> members, std::size_t n_rows) {
    Membership m;
    m.n_rows = n_rows;
    m.n_edges = 1;
    m.rows = std::move(members);
    m.edges.assign(m.rows.size(), 0);
    return m;
}

NmpConfig small_config() {
    NmpConfig cfg;
    cfg.d = 8;
    cfg.hidden = 12;
    cfg.categories = 3;
    cfg.iters = 2;
    cfg.scales = {2, 3};
    return cfg;
}

}  // namespace

TEST(CollectiveEmbedding, IdenticalMembersShareWeights) {
    Rng rng(1);
    ParameterStore<double> store;
    const Mlp f_w = mlp3("f_w", 16, 20, 1);
    f_w.register_params(store, rng);
    randomize_biases(store, rng);
    Tensor<double> v({3, 8});
    const auto row = random_tensor<double>({8}, rng);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 8; ++k) v.at(i, k) = row[k];
    auto [z, w] = collective_embedding(store, f_w, constant(v), single_edge({0, 1, 2}, 3));
    ASSERT_EQ(w.shape(), (Shape{3, 1}));
    ASSERT_EQ(z.shape(), (Shape{1, 8}));
    EXPECT_EQ(w.value()[0], w.value()[1]);
    EXPECT_EQ(w.value()[0], w.value()[2]);
    const double wsum = w.value()[0] + w.value()[1] + w.value()[2];
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(z.value()[k], wsum * row[k], 1e-12);
}

TEST(CollectiveEmbedding, MemberOrderInvariantAndShaped) {
    Rng rng(2);
    ParameterStore<float> store;
    const Mlp f_w = mlp3("f_w", 64, 32, 1);
    f_w.register_params(store, rng);
    const auto v = constant(random_tensor<float>({5, 32}, rng));
    auto [z1, w1] = collective_embedding(store, f_w, v, single_edge({0, 2, 4}, 5));
    auto [z2, w2] = collective_embedding(store, f_w, v, single_edge({4, 2, 0}, 5));
    EXPECT_EQ(z1.shape(), (Shape{1, 32}));
    EXPECT_EQ(w1.shape(), (Shape{3, 1}));
    for (std::size_t k = 0; k < 32; ++k) EXPECT_NEAR(z1.value()[k], z2.value()[k], 1e-6);
    EXPECT_THROW(collective_embedding(store, f_w, v, single_edge({}, 5)), ContractError);
}

TEST(RelationalHeads, ZeroParametersGiveHalfStrengthUniformCategory) {
    Rng rng(3);
    ParameterStore<float> store;
    const Mlp f_r = mlp3("f_r", 8, 10, 1), f_c = mlp3("f_c", 8, 10, 4);
    f_r.register_params(store, rng);
    f_c.register_params(store, rng);
    store.set_zero();
    auto [r, c] = relational_heads(store, f_r, f_c, constant(random_tensor<float>({5, 8}, rng)), 1.0, nullptr);
    for (float v : r.value().data()) EXPECT_FLOAT_EQ(v, 0.5f);
    for (float v : c.value().data()) EXPECT_FLOAT_EQ(v, 0.25f);
    EXPECT_THROW(relational_heads(store, f_r, f_c, constant(random_tensor<float>({5, 8}, rng)), 0.0, nullptr),
                 DomainError);
}

TEST(RelationalHeads, LowTemperatureSharpens) {
    const auto c = gumbel_softmax(constant(Tensor<double>::matrix(1, 3, {0.0, 1.0, 0.2})), 0.1, nullptr);
    EXPECT_GT(c.value()[1], 0.99);
}

TEST(InteractionEmbedding, HandExample) {
    // L = 1, F_1 = identity: e = r * sum v = 0.5 * (4, 6)
    const auto member_sum = constant(Tensor<double>::matrix(1, 2, {1.0 + 3.0, 2.0 + 4.0}));
    const auto e = interaction_embedding(constant(Tensor<double>::matrix(1, 1, {0.5})),
                                         constant(Tensor<double>::matrix(1, 1, {1.0})), {member_sum});
    EXPECT_DOUBLE_EQ(e.value()[0], 2.0);
    EXPECT_DOUBLE_EQ(e.value()[1], 3.0);
}

TEST(InteractionEmbedding, ZeroStrengthAndOneHotSelection) {
    Rng rng(4);
    const std::vector<Var<double>> f{constant(random_tensor<double>({2, 4}, rng)),
                                     constant(random_tensor<double>({2, 4}, rng)),
                                     constant(random_tensor<double>({2, 4}, rng))};
    const auto zero = interaction_embedding(constant(Tensor<double>({2, 1})),
                                            constant(Tensor<double>({2, 3}, 1.0 / 3.0)), f);
    for (double v : zero.value().data()) EXPECT_EQ(v, 0.0);
    const auto onehot = interaction_embedding(constant(Tensor<double>({2, 1}, 0.7)),
                                              constant(Tensor<double>::matrix(2, 3, {0, 1, 0, 0, 1, 0})), f);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(onehot.value()[i], 0.7 * f[1].value()[i]);
    EXPECT_THROW(interaction_embedding(constant(Tensor<double>({2, 1})), constant(Tensor<double>({2, 2})), f),
                 DimensionError);
}

TEST(HyperedgeToNode, IsolatedNodeAndEdgeOrder) {
    Rng rng(5);
    ParameterStore<double> store;
    const Mlp f_v = mlp3("f_v", 8, 10, 4);
    f_v.register_params(store, rng);
    randomize_biases(store, rng);
    const auto v = constant(random_tensor<double>({3, 4}, rng));
    const auto e = constant(random_tensor<double>({2, 4}, rng));
    Membership m;  // node 2 belongs to no edge
    m.n_rows = 3;
    m.n_edges = 2;
    m.rows = {0, 1, 0, 1};
    m.edges = {0, 0, 1, 1};
    const auto out = hyperedge_to_node(store, f_v, v, e, m);
    ASSERT_EQ(out.shape(), (Shape{3, 4}));
    const auto alone = f_v.forward(store, concat_cols<double>({gather_rows(v, {2}), constant(Tensor<double>({1, 4}))}));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(out.value().at(2, k), alone.value()[k]);

    Membership swapped = m;  // edges listed in the other order
    swapped.rows = {0, 1, 0, 1};
    swapped.edges = {1, 1, 0, 0};
    const auto e_swapped = gather_rows(e, {1, 0});
    const auto out2 = hyperedge_to_node(store, f_v, v, e_swapped, swapped);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(out.value()[i], out2.value()[i], 1e-12);
}

TEST(RunScale, ContractsAndLocality) {
    Rng rng(6);
    NmpConfig cfg = small_config();
    ParameterStore<double> store;
    const ScaleLayers layers("s", cfg);
    layers.register_params(store, rng);
    Membership m;  // edge {0, 1}; node 2 disconnected
    m.n_rows = 3;
    m.n_edges = 1;
    m.rows = {0, 1};
    m.edges = {0, 0};
    auto v = random_tensor<double>({3, 8}, rng);
    const auto out = run_scale(store, layers, cfg, m, constant(v), nullptr);
    EXPECT_EQ(out.shape(), (Shape{3, 8}));
    for (std::size_t k = 0; k < 8; ++k) v.at(0, k) += 1.0;
    const auto out2 = run_scale(store, layers, cfg, m, constant(v), nullptr);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(out.value().at(2, k), out2.value().at(2, k));
        EXPECT_NE(out.value().at(1, k), out2.value().at(1, k));
    }
    cfg.iters = 0;
    EXPECT_THROW(run_scale(store, layers, cfg, m, constant(v), nullptr), ConfigError);
    cfg.iters = 1;
    EXPECT_THROW(run_scale(store, layers, cfg, m, constant(random_tensor<double>({4, 8}, rng)), nullptr),
                 DimensionError);
}

TEST(RunScale, SingleIterationIsOnePhasePair) {
    Rng rng(7);
    NmpConfig cfg = small_config();
    cfg.iters = 1;
    ParameterStore<double> store;
    const ScaleLayers layers("s", cfg);
    layers.register_params(store, rng);
    const auto m = single_edge({0, 1, 2}, 3);
    const auto v = constant(random_tensor<double>({3, 8}, rng));
    const auto out = run_scale(store, layers, cfg, m, v, nullptr);

    auto [z, w] = collective_embedding(store, layers.f_w, v, m);
    auto [r, c] = relational_heads(store, layers.f_r, layers.f_c, z, cfg.tau, nullptr);
    std::vector<Var<double>> per;
    const auto s = segment_sum(gather_rows(v, m.rows), m.edges, 1);
    for (const auto& f : layers.f_cat) per.push_back(f.forward(store, s));
    const auto ref = hyperedge_to_node(store, layers.f_v, v, interaction_embedding(r, c, per), m);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.value()[i], ref.value()[i]);
}

TEST(GroupNetForward, OutputShapes) {
    Rng rng(8);
    NmpConfig cfg;
    cfg.d = 32;
    cfg.scales = {2, 3};
    GroupNetEncoder enc("m_p", cfg, 10);
    ParameterStore<float> store;
    enc.register_params(store, rng);
    const auto x = constant(random_tensor<float>({6, 20}, rng));
    EXPECT_EQ(enc.forward(store, x, 6, nullptr).v.shape(), (Shape{6, 96}));

    cfg.scales = {};
    GroupNetEncoder single("m_p", cfg, 10);
    ParameterStore<float> store2;
    single.register_params(store2, rng);
    const auto out = single.forward(store2, x, 6, nullptr);
    EXPECT_EQ(out.v.shape(), (Shape{6, 32}));
    EXPECT_EQ(out.topology[0].scales.size(), 1u);
    EXPECT_THROW(enc.forward(store, constant(random_tensor<float>({6, 18}, rng)), 6, nullptr), DimensionError);
    EXPECT_THROW(enc.forward(store, constant(random_tensor<float>({6, 20}, rng)), 4, nullptr), DimensionError);
}

TEST(GroupNetForward, BatchedScenesMatchSingleScenes) {
    Rng rng(9);
    const NmpConfig cfg = small_config();
    GroupNetEncoder enc("m", cfg, 5);
    ParameterStore<double> store;
    enc.register_params(store, rng);
    const auto x = random_tensor<double>({12, 10}, rng);
    const auto both = enc.forward(store, constant(x), 4, nullptr);
    ASSERT_EQ(both.topology.size(), 3u);
    for (std::size_t b = 0; b < 3; ++b) {
        std::vector<std::size_t> rows{4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3};
        const auto one = enc.forward(store, gather_rows(constant(x), rows), 4, nullptr);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t k = 0; k < one.v.cols(); ++k)
                EXPECT_NEAR(one.v.value().at(i, k), both.v.value().at(4 * b + i, k), 1e-12);
    }
}

TEST(GroupNetForward, HeadsStayValidUnderNoise) {
    Rng rng(10);
    const NmpConfig cfg = small_config();
    GroupNetEncoder enc("m", cfg, 5);
    ParameterStore<float> store;
    enc.register_params(store, rng);
    Rng noise(11);
    const auto out = enc.forward(store, constant(random_tensor<float>({12, 10}, rng, 3.0)), 6, &noise);
    for (const auto& t : out.traces) {
        ASSERT_EQ(t.category.cols(), cfg.categories);
        for (float r : t.strength.value().data()) {
            EXPECT_GT(r, 0.0f);
            EXPECT_LT(r, 1.0f);
        }
        for (std::size_t j = 0; j < t.category.rows(); ++j) {
            double s = 0;
            for (std::size_t l = 0; l < cfg.categories; ++l) {
                EXPECT_GE(t.category.value().at(j, l), 0.0f);
                s += t.category.value().at(j, l);
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(GroupNetForward, PermutationEquivariant) {
    Rng rng(12);
    const NmpConfig cfg = small_config();
    GroupNetEncoder enc("m", cfg, 5);
    ParameterStore<double> store;
    enc.register_params(store, rng);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_tensor<double>({6, 10}, rng);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        // row perm[i] of the relabelled scene is row i of the original
        std::vector<std::size_t> inverse(6);
        for (std::size_t i = 0; i < 6; ++i) inverse[perm[i]] = i;
        const auto a = enc.forward(store, constant(x), 6, nullptr);
        const auto b = enc.forward(store, gather_rows(constant(x), inverse), 6, nullptr);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t k = 0; k < a.v.cols(); ++k)
                EXPECT_NEAR(a.v.value().at(i, k), b.v.value().at(perm[i], k), 1e-10);
    }
}

TEST(GroupNetForward, PlainSumAggregationWhenHeadsBypassed) {
    Rng rng(13);
    NmpConfig cfg = small_config();
    cfg.categories = 1;
    cfg.iters = 1;
    cfg.scales = {3};
    GroupNetEncoder enc("m", cfg, 5);
    ParameterStore<double> store;
    enc.register_params(store, rng);
    randomize_biases(store, rng);
    const auto x = constant(random_tensor<double>({5, 10}, rng));
    NmpOverrides ov;
    ov.strength = 1.0;
    const auto out = enc.forward(store, x, 5, nullptr, nullptr, ov);

    // reference: v_i' = f_v([q_i, sum over edges e containing i of F_1(sum_{j in e} q_j)])
    const auto q = enc.f_q().forward(store, x);
    for (std::size_t s = 0; s < 2; ++s) {
        const auto& layers = enc.layers(s);
        std::vector<std::vector<double>> agg(5, std::vector<double>(cfg.d, 0.0));
        for (const auto& e : out.topology[0].scales[s].edges) {
            Tensor<double> member_sum({1, cfg.d});
            for (std::size_t j : e.members)
                for (std::size_t k = 0; k < cfg.d; ++k) member_sum[k] += q.value().at(j, k);
            const auto fe = layers.f_cat[0].forward(store, constant(member_sum));
            for (std::size_t i : e.members)
                for (std::size_t k = 0; k < cfg.d; ++k) agg[i][k] += fe.value()[k];
        }
        for (std::size_t i = 0; i < 5; ++i) {
            Tensor<double> in({1, 2 * cfg.d});
            for (std::size_t k = 0; k < cfg.d; ++k) {
                in[k] = q.value().at(i, k);
                in[cfg.d + k] = agg[i][k];
            }
            const auto ref = layers.f_v.forward(store, constant(in));
            for (std::size_t k = 0; k < cfg.d; ++k)
                EXPECT_NEAR(out.v.value().at(i, s * cfg.d + k), ref.value()[k], 1e-10);
        }
    }
}

TEST(GroupNetForward, ForcedZeroStrengthSilencesMessages) {
    Rng rng(14);
    const NmpConfig cfg = small_config();
    GroupNetEncoder enc("m", cfg, 5);
    ParameterStore<double> store;
    enc.register_params(store, rng);
    auto x = random_tensor<double>({4, 10}, rng);
    NmpOverrides ov;
    ov.strength = 0.0;
    const auto a = enc.forward(store, constant(x), 4, nullptr, nullptr, ov);
    for (std::size_t k = 0; k < 10; ++k) x.at(3, k) *= 2.0;
    const auto b = enc.forward(store, constant(x), 4, nullptr, &a.topology, ov);
    for (std::size_t k = 0; k < a.v.cols(); ++k) EXPECT_EQ(a.v.value().at(0, k), b.v.value().at(0, k));
}

TEST(GroupNetGradient, FiniteDifferenceWithFrozenNoise) {
    Rng rng(15);
    NmpConfig cfg = small_config();
    cfg.d = 4;
    cfg.hidden = 5;
    cfg.categories = 2;
    GroupNetEncoder enc("m", cfg, 3);
    ParameterStore<double> store;
    enc.register_params(store, rng);
    randomize_biases(store, rng);
    const auto x = random_tensor<double>({8, 6}, rng);
    const auto topo = enc.forward(store, constant(x), 4, nullptr).topology;
    const auto target = random_tensor<double>({8, enc.output_width()}, rng);
    std::function<Var<double>(const ParameterStore<double>&)> fn = [&](const ParameterStore<double>& p) {
        Rng noise(99);  // identical Gumbel draws on every evaluation
        const auto out = enc.forward(p, constant(x), 4, &noise, &topo);
        return sum(mul(out.v, constant(target)));
    };
    // small step: with many ReLU units a wider stencil can straddle a kink
    const auto res = finite_diff_check<double>(fn, store, 1e-6, 0, 1e-6);
    EXPECT_LT(res.max_rel_error, 1e-3) << res.worst_param << "[" << res.worst_index << "] ad=" << res.analytic
                                       << " fd=" << res.numeric;
    EXPECT_GT(res.checked, 500u);
}
