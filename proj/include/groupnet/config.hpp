#pragma once

// Experiment configuration: one strict JSON document covering the scene,
// model, loss, optimiser, evaluation and paths. Missing keys take defaults;
// unknown keys are rejected.

#include <string>
#include <vector>

#include "groupnet/nmp.hpp"
#include "groupnet/sim.hpp"

namespace groupnet {

struct ModelConfig {
    std::size_t d = 32;
    std::size_t d_z = 32;
    std::size_t hidden = 64;
    std::size_t categories = 2;  // L
    double tau = 0.5;
    std::size_t iters = 3;
    std::size_t k0 = 0;  // 0 selects N - 1
    std::vector<std::size_t> scales{2, 3};
    HyperedgeSolver solver = HyperedgeSolver::automatic;
    bool gumbel_noise = true;

    NmpConfig nmp() const {
        NmpConfig c;
        c.d = d;
        c.hidden = hidden;
        c.categories = categories;
        c.tau = tau;
        c.iters = iters;
        c.k0 = k0;
        c.scales = scales;
        c.solver = solver;
        c.gumbel_noise = gumbel_noise;
        return c;
    }

    void validate() const {
        nmp().validate();
        if (d_z < 1) throw ConfigError("model: d_z must be positive");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LossConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    std::size_t k_variety = 20;
    double lambda = 1.0;

    void validate() const {
        if (!(alpha >= 0) || !(beta >= 0) || !(gamma >= 0)) throw ConfigError("loss: weights must be non-negative");
        if (k_variety < 1) throw ConfigError("loss: k_variety must be at least 1");
        if (!(lambda > 0)) throw ConfigError("loss: lambda must be positive");
    }

    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct OptimConfig {
    double lr = 1e-4;
    double decay_factor = 0.9;
    int decay_period = 10;
    std::size_t epochs = 100;
    std::size_t batch = 32;

    void validate() const {
        if (!(lr > 0)) throw ConfigError("optim: lr must be positive");
        if (!(decay_factor > 0)) throw ConfigError("optim: decay_factor must be positive");
        if (decay_period < 0) throw ConfigError("optim: decay_period must be non-negative");
        if (batch < 1) throw ConfigError("optim: batch must be at least 1");
    }

    friend bool operator==(const OptimConfig&, const OptimConfig&) = default;
};

enum class Reduction { per_agent, per_scene };

inline std::string to_string(Reduction r) { return r == Reduction::per_agent ? "per-agent" : "per-scene"; }

inline Reduction reduction_from_string(const std::string& s) {
    if (s == "per-agent") return Reduction::per_agent;
    if (s == "per-scene") return Reduction::per_scene;
    throw ConfigError("unknown reduction '" + s + "' (expected per-agent or per-scene)");
}

struct EvalConfig {
    std::size_t k = 20;  // samples per scene for minADE/minFDE
    Reduction reduction = Reduction::per_agent;
    double mapping_fraction = 0.2;  // held-out split for the category bijection

    void validate() const {
        if (k < 1) throw ConfigError("eval: k must be at least 1");
        if (!(mapping_fraction > 0 && mapping_fraction < 1)) throw ConfigError("eval: mapping_fraction must be in (0, 1)");
    }

    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct PathsConfig {
    std::string dataset;
    std::string output;

    friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::mixed6;
    SceneConfig scene;
    std::size_t n_samples = 1000;
    ModelConfig model;
    LossConfig loss;
    OptimConfig optim;
    EvalConfig eval;
    std::uint64_t seed = 0;
    PathsConfig paths;

    void validate() const {
        scene.validate();
        model.validate();
        loss.validate();
        optim.validate();
        eval.validate();
    }
};

inline bool operator==(const SceneConfig& a, const SceneConfig& b) {
    return a.n_agents == b.n_agents && a.t_past == b.t_past && a.t_future == b.t_future && a.dt == b.dt &&
           a.substeps == b.substeps && a.spring_k == b.spring_k && a.coulomb_c == b.coulomb_c &&
           a.charge_range == b.charge_range && a.init_pos_box == b.init_pos_box &&
           a.init_vel_sigma == b.init_vel_sigma && a.r_min == b.r_min && a.arm_length == b.arm_length &&
           a.angular_vel_sigma == b.angular_vel_sigma && a.category_types == b.category_types;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.experiment == b.experiment && a.scene == b.scene && a.n_samples == b.n_samples && a.model == b.model &&
           a.loss == b.loss && a.optim == b.optim && a.eval == b.eval && a.seed == b.seed && a.paths == b.paths;
}

/// Scene defaults of each experiment recipe.
inline SceneConfig default_scene(Experiment e) {
    SceneConfig s;
    s.n_agents = e == Experiment::mixed6 ? 6 : e == Experiment::category3 ? 3 : 2;
    return s;
}

/// Default scales larger than the scene cannot form a group; drop them.
inline void fit_default_scales(ModelConfig& m, std::size_t n_agents) {
    std::erase_if(m.scales, [&](std::size_t k) { return k > n_agents; });
}

inline Json to_json(const ModelConfig& m) {
    return Json{{"d", m.d},           {"d_z", m.d_z},   {"hidden", m.hidden}, {"L", m.categories},
                {"tau", m.tau},       {"iters", m.iters}, {"K0", m.k0},       {"scales", m.scales},
                {"solver", to_string(m.solver)}, {"gumbel_noise", m.gumbel_noise}};
}

inline Json to_json(const LossConfig& l) {
    return Json{{"alpha", l.alpha}, {"beta", l.beta}, {"gamma", l.gamma}, {"K_variety", l.k_variety},
                {"lambda", l.lambda}};
}

inline Json to_json(const OptimConfig& o) {
    return Json{{"lr", o.lr},
                {"decay_factor", o.decay_factor},
                {"decay_period", o.decay_period},
                {"epochs", o.epochs},
                {"batch", o.batch}};
}

inline Json to_json(const EvalConfig& e) {
    return Json{{"K", e.k}, {"reduction", to_string(e.reduction)}, {"mapping_fraction", e.mapping_fraction}};
}

inline Json to_json(const ExperimentConfig& c) {
    return Json{{"experiment", to_string(c.experiment)},
                {"scene_config", to_json(c.scene)},
                {"n_samples", c.n_samples},
                {"model", to_json(c.model)},
                {"loss", to_json(c.loss)},
                {"optim", to_json(c.optim)},
                {"eval", to_json(c.eval)},
                {"seed", c.seed},
                {"paths", Json{{"dataset", c.paths.dataset}, {"output", c.paths.output}}}};
}

inline ModelConfig model_config_from_json(const Json& j) {
    const std::string where = "model";
    require_known_keys(j, {"d", "d_z", "hidden", "L", "tau", "iters", "K0", "scales", "solver", "gumbel_noise"},
                      where);
    ModelConfig m;
    read_opt(j, "d", m.d, where);
    read_opt(j, "d_z", m.d_z, where);
    read_opt(j, "hidden", m.hidden, where);
    read_opt(j, "L", m.categories, where);
    read_opt(j, "tau", m.tau, where);
    read_opt(j, "iters", m.iters, where);
    read_opt(j, "K0", m.k0, where);
    read_opt(j, "scales", m.scales, where);
    std::string solver = to_string(m.solver);
    read_opt(j, "solver", solver, where);
    m.solver = solver_from_string(solver);
    read_opt(j, "gumbel_noise", m.gumbel_noise, where);
    return m;
}

inline LossConfig loss_config_from_json(const Json& j) {
    const std::string where = "loss";
    require_known_keys(j, {"alpha", "beta", "gamma", "K_variety", "lambda"}, where);
    LossConfig l;
    read_opt(j, "alpha", l.alpha, where);
    read_opt(j, "beta", l.beta, where);
    read_opt(j, "gamma", l.gamma, where);
    read_opt(j, "K_variety", l.k_variety, where);
    read_opt(j, "lambda", l.lambda, where);
    return l;
}

inline OptimConfig optim_config_from_json(const Json& j) {
    const std::string where = "optim";
    require_known_keys(j, {"lr", "decay_factor", "decay_period", "epochs", "batch"}, where);
    OptimConfig o;
    read_opt(j, "lr", o.lr, where);
    read_opt(j, "decay_factor", o.decay_factor, where);
    read_opt(j, "decay_period", o.decay_period, where);
    read_opt(j, "epochs", o.epochs, where);
    read_opt(j, "batch", o.batch, where);
    return o;
}

inline EvalConfig eval_config_from_json(const Json& j) {
    const std::string where = "eval";
    require_known_keys(j, {"K", "reduction", "mapping_fraction"}, where);
    EvalConfig e;
    read_opt(j, "K", e.k, where);
    std::string red = to_string(e.reduction);
    read_opt(j, "reduction", red, where);
    e.reduction = reduction_from_string(red);
    read_opt(j, "mapping_fraction", e.mapping_fraction, where);
    return e;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
    const std::string where = "config";
    require_known_keys(j, {"experiment", "scene_config", "n_samples", "model", "loss", "optim", "eval", "seed", "paths"},
                       where);
    ExperimentConfig c;
    std::string experiment = to_string(c.experiment);
    read_opt(j, "experiment", experiment, where);
    c.experiment = experiment_from_string(experiment);
    c.scene = default_scene(c.experiment);
    if (j.contains("scene_config")) {
        // scene keys default per experiment, then the file overrides
        Json scene = to_json(c.scene);
        require_known_keys(j.at("scene_config"),
                           {"n_agents", "t_past", "t_future", "dt", "substeps", "spring_k", "coulomb_c",
                            "charge_range", "init_pos_box", "init_vel_sigma", "r_min", "arm_length",
                            "angular_vel_sigma", "category_types"},
                           "scene_config");
        scene.update(j.at("scene_config"));
        c.scene = scene_config_from_json(scene);
    }
    read_opt(j, "n_samples", c.n_samples, where);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (!j.contains("model") || !j.at("model").contains("scales")) fit_default_scales(c.model, c.scene.n_agents);
    if (j.contains("loss")) c.loss = loss_config_from_json(j.at("loss"));
    if (j.contains("optim")) c.optim = optim_config_from_json(j.at("optim"));
    if (j.contains("eval")) c.eval = eval_config_from_json(j.at("eval"));
    read_opt(j, "seed", c.seed, where);
    if (j.contains("paths")) {
        require_known_keys(j.at("paths"), {"dataset", "output"}, "paths");
        read_opt(j.at("paths"), "dataset", c.paths.dataset, "paths");
        read_opt(j.at("paths"), "output", c.paths.output, "paths");
    }
    c.validate();
    return c;
}

inline ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    return experiment_config_from_json(parse_json(text, origin));
}

}  // namespace groupnet
