#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "groupnet/dataset.hpp"

using namespace groupnet;

namespace {

double max_abs(double a, double b) { return std::max(std::abs(a), std::abs(b)); }

SceneConfig unit_step_config() {
    SceneConfig cfg;
    cfg.dt = 1e-3;
    cfg.substeps = 1;
    return cfg;
}

}  // namespace

TEST(Springs, CoincidentParticlesAtRestStayTogether) {
    SceneConfig cfg;
    ParticleState s(2);
    s.pos = {{0.3, -0.2}, {0.3, -0.2}};
    const std::vector<std::size_t> members{0, 1};
    const auto seg = simulate_springs(cfg, members, s, 20);
    for (const auto& frame : seg) EXPECT_EQ(frame[0], frame[1]);
}

TEST(Springs, MirrorPairKeepsCentreOfMass) {
    SceneConfig cfg;
    ParticleState s(2);
    s.pos = {{1.0, 0.5}, {-1.0, -0.5}};
    s.vel = {{0.2, -0.7}, {-0.2, 0.7}};
    const std::vector<std::size_t> members{0, 1};
    for (const auto& frame : simulate_springs(cfg, members, s, 50)) {
        const Vec2 com = (frame[0] + frame[1]) * 0.5;
        EXPECT_NEAR(com.x, 0.0, 1e-12);
        EXPECT_NEAR(com.y, 0.0, 1e-12);
    }
}

TEST(Springs, LeapfrogEnergyDriftIsSmall) {
    SceneConfig cfg = unit_step_config();
    ParticleState s(3);
    s.pos = {{0.0, 0.0}, {1.0, 0.2}, {-0.4, 0.9}};
    s.vel = {{0.3, 0.0}, {-0.1, 0.4}, {0.0, -0.5}};
    const std::vector<std::size_t> members{0, 1, 2};
    const double e0 = spring_energy(cfg, members, s);
    simulate_springs(cfg, members, s, 1001);  // 1000 integrator steps
    EXPECT_LT(std::abs(spring_energy(cfg, members, s) - e0) / std::abs(e0), 1e-3);
}

TEST(Springs, RejectsSingletonsAndNonFiniteState) {
    SceneConfig cfg;
    ParticleState s(2);
    const std::vector<std::size_t> one{0};
    EXPECT_THROW(simulate_springs(cfg, one, s, 3), ContractError);
    s.pos[1].x = std::numeric_limits<double>::quiet_NaN();
    const std::vector<std::size_t> both{0, 1};
    EXPECT_THROW(simulate_springs(cfg, both, s, 3), SimulationError);
}

TEST(RigidGroup, PureTranslation) {
    SceneConfig cfg;
    ParticleState s(3);
    const std::vector<std::size_t> members{0, 1, 2};
    const auto offs = star_offsets(3, 1.0, 0.3);
    for (std::size_t i = 0; i < 3; ++i) s.pos[i] = Vec2{0.5, -1.0} + offs[i];
    const Vec2 v{0.4, -0.25};
    const auto seg = simulate_rigid_group(cfg, members, s, {v, 0.0}, 12);
    for (std::size_t f = 1; f < seg.size(); ++f)
        for (std::size_t a = 0; a < 3; ++a) {
            const Vec2 step = seg[f][a] - seg[f - 1][a];
            EXPECT_NEAR(step.x, v.x * cfg.frame_dt(), 1e-12);
            EXPECT_NEAR(step.y, v.y * cfg.frame_dt(), 1e-12);
        }
}

TEST(RigidGroup, DistancesAreConstant) {
    SceneConfig cfg;
    cfg.substeps = 100;
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ParticleState s(3);
        const std::vector<std::size_t> members{0, 1, 2};
        for (auto& p : s.pos) p = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const RigidMotion m{{rng.normal(), rng.normal()}, rng.normal(0.0, 3.0)};
        const auto seg = simulate_rigid_group(cfg, members, s, m, 40);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b) {
                const double d0 = (seg[0][a] - seg[0][b]).norm();
                for (const auto& frame : seg) EXPECT_LT(std::abs((frame[a] - frame[b]).norm() - d0), 1e-6);
            }
    }
}

TEST(RigidGroup, PureRotationKeepsCentroid) {
    SceneConfig cfg;
    ParticleState s(3);
    const std::vector<std::size_t> members{0, 1, 2};
    const auto offs = star_offsets(3, 1.0, 0.0);
    const Vec2 c0{-0.7, 1.1};
    for (std::size_t i = 0; i < 3; ++i) s.pos[i] = c0 + offs[i];
    for (const auto& frame : simulate_rigid_group(cfg, members, s, {{0.0, 0.0}, 2.5}, 30)) {
        const Vec2 c = (frame[0] + frame[1] + frame[2]) * (1.0 / 3.0);
        EXPECT_NEAR(c.x, c0.x, 1e-6);
        EXPECT_NEAR(c.y, c0.y, 1e-6);
    }
}

TEST(RigidGroup, CoincidentAnchorsAreAConfigError) {
    SceneConfig cfg;
    ParticleState s(3);
    s.pos = {{0, 0}, {0, 0}, {1, 0}};
    const std::vector<std::size_t> members{0, 1, 2};
    EXPECT_THROW(simulate_rigid_group(cfg, members, s, {}, 5), ConfigError);
}

TEST(Charged, FixedParticleDoesNotMove) {
    SceneConfig cfg;
    ParticleState s(2);
    s.pos = {{0.2, 0.1}, {1.2, -0.3}};
    s.vel[1] = {-1.0, 0.5};
    const auto seg = simulate_coulomb_pair(cfg, 3.0, s, 20);
    for (const auto& frame : seg) EXPECT_EQ(frame[0], (Vec2{0.2, 0.1}));
}

TEST(Charged, HeadOnApproachSlowsUntilTurningPoint) {
    SceneConfig cfg = unit_step_config();
    cfg.substeps = 10;
    ParticleState s(2);
    s.pos = {{0.0, 0.0}, {1.0, 0.0}};
    s.vel[1] = {-2.0, 0.0};
    // radial speed v = -dr/dt while approaching; energy argument: v^2 = v0^2 - 2Cq(1/r - 1/r0)
    const auto seg = simulate_coulomb_pair(cfg, 1.0, s, 200);
    double prev_r = 1.0;
    double prev_speed = std::numeric_limits<double>::infinity();
    bool turned = false;
    for (std::size_t f = 1; f < seg.size(); ++f) {
        const double r = seg[f][1].x;
        const double speed = (prev_r - r) / cfg.frame_dt();
        if (speed <= 0) {
            turned = true;
            break;
        }
        EXPECT_LT(speed, prev_speed);
        prev_speed = speed;
        prev_r = r;
    }
    EXPECT_TRUE(turned);
}

TEST(Charged, EnergyIsConserved) {
    SceneConfig cfg = unit_step_config();
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        ParticleState s(2);
        s.pos = {{0.0, 0.0}, {rng.uniform(0.8, 1.5), rng.uniform(-1.0, 1.0)}};
        s.vel[1] = {rng.normal(0.0, 0.5), rng.normal(0.0, 0.5)};
        const double q = rng.uniform(0.5, 5.0);
        const double e0 = coulomb_energy(cfg, q, s);
        simulate_coulomb_pair(cfg, q, s, 1001);
        EXPECT_LT(std::abs(coulomb_energy(cfg, q, s) - e0) / std::abs(e0), 1e-3);
    }
}

TEST(GenerateDataset, EmptyDatasetHasMeta) {
    SceneConfig cfg;
    const Dataset ds = generate_dataset(Experiment::mixed6, cfg, 0, 3);
    const std::string text = encode_dataset(ds);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    const Dataset back = decode_dataset(text);
    EXPECT_TRUE(back.samples.empty());
    EXPECT_EQ(back.experiment, Experiment::mixed6);
    const Json meta = Json::parse(text.substr(0, text.find('\n')));
    for (const char* key : {"format_version", "experiment", "n_agents", "t_past", "t_future", "seed", "norm_mean",
                            "norm_std", "scene_config"})
        EXPECT_TRUE(meta.contains(key)) << key;
}

TEST(GenerateDataset, FreeCategoryIsExactlyLinear) {
    SceneConfig cfg;
    cfg.n_agents = 3;
    cfg.category_types = {"free"};
    const Dataset ds = generate_dataset(Experiment::category3, cfg, 5, 9);
    for (const auto& s : ds.samples) {
        ASSERT_EQ(s.types, std::vector<std::string>{"free"});
        for (const auto& agent : s.traj) {
            const Vec2 v = agent[1] - agent[0];
            for (std::size_t f = 0; f < agent.size(); ++f) {
                const Vec2 expect = agent[0] + v * static_cast<double>(f);
                EXPECT_LT(max_abs(agent[f].x - expect.x, agent[f].y - expect.y), 1e-12);
            }
        }
    }
}

TEST(GenerateDataset, SameSeedSameBytes) {
    SceneConfig cfg;
    cfg.n_agents = 3;
    const auto a = encode_dataset(generate_dataset(Experiment::category3, cfg, 8, 77));
    const auto b = encode_dataset(generate_dataset(Experiment::category3, cfg, 8, 77));
    const auto c = encode_dataset(generate_dataset(Experiment::category3, cfg, 8, 78));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(GenerateDataset, SamplesDependOnlyOnSeedAndIndex) {
    SceneConfig cfg;
    const Dataset ds = generate_dataset(Experiment::mixed6, cfg, 6, 5);
    for (std::size_t i : {5u, 2u, 0u}) {
        const LabelledSample s = make_sample(Experiment::mixed6, cfg, i, 5);
        EXPECT_EQ(sample_to_json(s), sample_to_json(ds.samples[i]));
    }
}

TEST(GenerateDataset, Mixed6LabelsPartitionAgents) {
    SceneConfig cfg;
    cfg.substeps = 100;
    const Dataset ds = generate_dataset(Experiment::mixed6, cfg, 30, 12);
    for (const auto& s : ds.samples) {
        ASSERT_EQ(s.types, (std::vector<std::string>{"lightbar", "spring", "free"}));
        ASSERT_EQ(s.groups[0].size(), 3u);
        ASSERT_EQ(s.groups[1].size(), 2u);
        ASSERT_EQ(s.groups[2].size(), 1u);
        std::set<std::size_t> all;
        for (const auto& g : s.groups) all.insert(g.begin(), g.end());
        EXPECT_EQ(all, (std::set<std::size_t>{0, 1, 2, 3, 4, 5}));
        // the bar stays rigid
        const auto& bar = s.groups[0];
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b) {
                const double d0 = (s.traj[bar[a]][0] - s.traj[bar[b]][0]).norm();
                for (std::size_t f = 0; f < cfg.frames(); ++f)
                    EXPECT_LT(std::abs((s.traj[bar[a]][f] - s.traj[bar[b]][f]).norm() - d0), 1e-6);
            }
    }
}

TEST(GenerateDataset, ChargedStoresChargeInRange) {
    SceneConfig cfg;
    cfg.n_agents = 2;
    const Dataset ds = generate_dataset(Experiment::charged2, cfg, 20, 4);
    for (const auto& s : ds.samples) {
        ASSERT_TRUE(s.charge.has_value());
        EXPECT_GE(*s.charge, 0.5);
        EXPECT_LE(*s.charge, 5.0);
        for (std::size_t f = 0; f < cfg.frames(); ++f) EXPECT_EQ(s.traj[0][f], s.traj[0][0]);
    }
}

TEST(GenerateDataset, AgentCountMustMatchRecipe) {
    SceneConfig cfg;
    cfg.n_agents = 4;
    EXPECT_THROW(generate_dataset(Experiment::mixed6, cfg, 1, 0), ConfigError);
    EXPECT_THROW(generate_dataset(Experiment::category3, cfg, 1, 0), ConfigError);
}

TEST(DatasetFile, RoundTripAndUnwritablePath) {
    SceneConfig cfg;
    cfg.n_agents = 2;
    const Dataset ds = generate_dataset(Experiment::charged2, cfg, 3, 1);
    const auto path = std::filesystem::temp_directory_path() / "groupnet_ds_test.jsonl";
    write_dataset(path, ds);
    const Dataset back = read_dataset(path);
    EXPECT_EQ(encode_dataset(back), encode_dataset(ds));
    std::filesystem::remove(path);
    EXPECT_THROW(write_dataset("/nonexistent-dir/x/y.jsonl", ds), IoError);
}

TEST(DatasetFile, RejectsUnknownMetaKeysAndBadShapes) {
    SceneConfig cfg;
    cfg.n_agents = 2;
    const Dataset ds = generate_dataset(Experiment::charged2, cfg, 1, 1);
    std::string text = encode_dataset(ds);
    Json meta = Json::parse(text.substr(0, text.find('\n')));
    meta["extra"] = 1;
    EXPECT_THROW(decode_dataset(meta.dump() + text.substr(text.find('\n'))), ConfigError);

    Json sample = sample_to_json(ds.samples[0]);
    sample["traj"][0].erase(0);
    EXPECT_THROW(decode_dataset(text.substr(0, text.find('\n') + 1) + sample.dump() + "\n"), ConfigError);
}

TEST(SceneConfigJson, RoundTripAndValidation) {
    SceneConfig cfg;
    cfg.spring_k = 2.5;
    cfg.category_types = {"free", "lightbar"};
    const SceneConfig back = scene_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    Json bad = to_json(cfg);
    bad["t_past"] = 1;
    EXPECT_THROW(scene_config_from_json(bad), ConfigError);
    bad = to_json(cfg);
    bad["category_types"] = {"teleport"};
    EXPECT_THROW(scene_config_from_json(bad), ConfigError);
}
