#pragma once

// Training loop, model persistence and batched prediction.
//
// Output directory layout:
//   model.ckpt        parameters + Adam moments
//   model.json        experiment config, data shape and normalisation
//   metrics.csv       epoch,elbo,kl,rec,variety,total,lr
//   train_state.json  completed epochs and optimiser step (for resume)

#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include "groupnet/checkpoint.hpp"
#include "groupnet/predictor.hpp"

namespace groupnet {

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double elbo = 0, kl = 0, rec = 0, variety = 0, total = 0, lr = 0;
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline constexpr const char* kMetricsHeader = "epoch,elbo,kl,rec,variety,total,lr";

inline std::string metrics_row(const EpochMetrics& m) {
    return std::to_string(m.epoch) + "," + format_double(m.elbo) + "," + format_double(m.kl) + "," +
           format_double(m.rec) + "," + format_double(m.variety) + "," + format_double(m.total) + "," +
           format_double(m.lr);
}

/// A model with its parameters and the data conventions it was trained with.
struct TrainedModel {
    ExperimentConfig config;
    ModelShape shape;
    Normalizer norm;
    GroupNetModel model;
    ParameterStore<float> store;
    std::vector<EpochMetrics> history;
    long adam_steps = 0;
};

/// Fresh model with parameters drawn from the config seed.
inline void initialise_model(TrainedModel& tm) {
    tm.model = GroupNetModel(tm.config.model, tm.shape);
    tm.store = ParameterStore<float>();
    Rng init(tm.config.seed, 1);
    tm.model.register_params(tm.store, init);
    tm.store.zero_grad();
}

inline Json model_sidecar(const TrainedModel& tm) {
    return Json{{"format", "groupnet-model"},
                {"version", 1},
                {"config", to_json(tm.config)},
                {"n_agents", tm.shape.n_agents},
                {"t_past", tm.shape.t_past},
                {"t_future", tm.shape.t_future},
                {"norm_mean", tm.norm.mean},
                {"norm_std", tm.norm.std}};
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& ckpt) {
    auto p = ckpt;
    return p.replace_extension(".json");
}

inline void save_model(const TrainedModel& tm, const std::filesystem::path& ckpt, bool with_optimizer = true) {
    auto entries = parameters_to_entries(tm.store);
    if (with_optimizer) {
        auto opt = optimizer_to_entries(tm.store);
        entries.insert(entries.end(), opt.begin(), opt.end());
    }
    save_checkpoint(ckpt, entries);
    write_file_atomic(sidecar_path(ckpt), model_sidecar(tm).dump(2) + "\n");
}

/// Loads a checkpoint and its sidecar; shape or name mismatches raise LoadError.
inline TrainedModel load_model(const std::filesystem::path& ckpt, bool with_optimizer = false) {
    const auto side_path = sidecar_path(ckpt);
    const Json side = parse_json(read_file(side_path), side_path.string());
    TrainedModel tm;
    try {
        require_known_keys(side, {"format", "version", "config", "n_agents", "t_past", "t_future", "norm_mean", "norm_std"},
                           side_path.string());
        if (side.at("format") != "groupnet-model" || side.at("version") != 1)
            throw LoadError(side_path.string() + ": not a model sidecar");
        tm.config = experiment_config_from_json(side.at("config"));
        tm.shape = {side.at("n_agents").get<std::size_t>(), side.at("t_past").get<std::size_t>(),
                    side.at("t_future").get<std::size_t>()};
        tm.norm.mean = side.at("norm_mean").get<std::array<double, 2>>();
        tm.norm.std = side.at("norm_std").get<std::array<double, 2>>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(side_path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(side_path.string() + ": " + e.what());
    }
    initialise_model(tm);
    const auto entries = load_checkpoint(ckpt);
    load_parameters(tm.store, entries);
    if (with_optimizer) load_optimizer(tm.store, entries);
    return tm;
}

inline void check_dataset_matches(const TrainedModel& tm, const Dataset& ds) {
    if (ds.n_agents() != tm.shape.n_agents || ds.t_past() != tm.shape.t_past || ds.t_future() != tm.shape.t_future)
        throw ConfigError("dataset shape (N=" + std::to_string(ds.n_agents()) + ", T_p=" + std::to_string(ds.t_past()) +
                          ", T_f=" + std::to_string(ds.t_future()) + ") does not match the model (N=" +
                          std::to_string(tm.shape.n_agents) + ", T_p=" + std::to_string(tm.shape.t_past) +
                          ", T_f=" + std::to_string(tm.shape.t_future) + ")");
}

struct TrainOptions {
    std::filesystem::path out_dir;  // empty: keep everything in memory
    bool resume = false;
    std::size_t stop_after = 0;  // stop once this many epochs are complete (0: run all)
    std::function<void(const EpochMetrics&)> on_epoch;
};

namespace detail {

inline void write_training_state(const TrainedModel& tm, const std::filesystem::path& dir) {
    ensure_directory(dir);
    save_model(tm, dir / "model.ckpt");
    std::string csv = std::string(kMetricsHeader) + "\n";
    for (const auto& m : tm.history) csv += metrics_row(m) + "\n";
    write_file_atomic(dir / "metrics.csv", csv);
    const Json state{{"epochs_completed", tm.history.size()}, {"adam_steps", tm.adam_steps}};
    write_file_atomic(dir / "train_state.json", state.dump(2) + "\n");
}

inline std::vector<EpochMetrics> read_metrics(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    if (line != kMetricsHeader) throw LoadError(path.string() + ": unexpected header");
    std::vector<EpochMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochMetrics m;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &m.epoch, &m.elbo, &m.kl, &m.rec, &m.variety,
                        &m.total, &m.lr) != 7)
            throw LoadError(path.string() + ": malformed row '" + line + "'");
        out.push_back(m);
    }
    return out;
}

inline void restore_training_state(TrainedModel& tm, const std::filesystem::path& dir) {
    TrainedModel saved = load_model(dir / "model.ckpt", true);
    if (saved.shape != tm.shape || !(saved.config.model == tm.config.model) || !(saved.config.loss == tm.config.loss) ||
        saved.config.seed != tm.config.seed || saved.config.optim.lr != tm.config.optim.lr ||
        saved.config.optim.batch != tm.config.optim.batch)
        throw ConfigError("resume: checkpoint in " + dir.string() + " was trained with a different configuration");
    const Json state = parse_json(read_file(dir / "train_state.json"), "train_state.json");
    tm.store = std::move(saved.store);
    tm.adam_steps = state.at("adam_steps").get<long>();
    auto hist = read_metrics(dir / "metrics.csv");
    const auto done = state.at("epochs_completed").get<std::size_t>();
    if (hist.size() < done) throw LoadError("resume: metrics.csv is shorter than the recorded progress");
    hist.resize(done);
    tm.history = std::move(hist);
}

}  // namespace detail

/// Mini-batch Adam training. Shuffling, Gumbel noise and latent draws come from
/// streams derived from (seed, epoch, batch), so runs are reproducible and a
/// resumed run continues exactly where an interrupted one stopped.
inline TrainedModel train(const ExperimentConfig& cfg, const Dataset& ds, const TrainOptions& opt = {}) {
    cfg.validate();
    if (ds.samples.empty()) throw ConfigError("train: dataset has no samples");
    TrainedModel tm;
    tm.config = cfg;
    tm.shape = {ds.n_agents(), ds.t_past(), ds.t_future()};
    tm.norm = {ds.norm_mean, ds.norm_std};
    initialise_model(tm);
    if (opt.resume) {
        if (opt.out_dir.empty()) throw ConfigError("resume needs an output directory");
        if (std::filesystem::exists(opt.out_dir / "train_state.json")) detail::restore_training_state(tm, opt.out_dir);
    }

    const std::size_t n = ds.samples.size();
    const std::size_t batch = std::min(cfg.optim.batch, n);
    std::size_t epoch = tm.history.size();
    while (epoch < cfg.optim.epochs && !(opt.stop_after && epoch >= opt.stop_after)) {
        const double lr = decayed_lr(cfg.optim.lr, cfg.optim.decay_factor, cfg.optim.decay_period, static_cast<int>(epoch));
        std::vector<std::size_t> order = all_indices(n);
        Rng shuffle = Rng(cfg.seed, 2).split(epoch);
        std::shuffle(order.begin(), order.end(), shuffle.engine());
        EpochMetrics m;
        m.epoch = epoch + 1;
        m.lr = lr;
        const Rng noise_root = Rng(cfg.seed, 3).split(epoch);
        for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
            const SceneBatch sb = make_batch(ds, idx, tm.norm);
            Rng noise = noise_root.split(b);
            const auto terms = tm.model.loss(tm.store, cfg.loss, constant(sb.past), constant(sb.future), noise);
            backward(terms.total, tm.store);
            adam_step(tm.store, lr, ++tm.adam_steps);
            const double w = static_cast<double>(idx.size()) / static_cast<double>(n);
            m.elbo += w * terms.elbo(cfg.loss);
            m.kl += w * terms.kl.item();
            m.rec += w * terms.rec.item();
            m.variety += w * terms.variety.item();
            m.total += w * terms.total.item();
        }
        tm.history.push_back(m);
        ++epoch;
        if (!opt.out_dir.empty()) detail::write_training_state(tm, opt.out_dir);
        if (opt.on_epoch) opt.on_epoch(m);
    }
    if (!opt.out_dir.empty() && tm.history.empty()) detail::write_training_state(tm, opt.out_dir);
    return tm;
}

/// Loss terms on a dataset without updating parameters (fixed noise stream).
inline EpochMetrics evaluate_loss(const TrainedModel& tm, const Dataset& ds, std::uint64_t seed) {
    check_dataset_matches(tm, ds);
    EpochMetrics m;
    const std::size_t n = ds.samples.size();
    const std::size_t batch = std::max<std::size_t>(1, tm.config.optim.batch);
    Rng root(seed, 4);
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(n, start + batch); ++i) idx.push_back(i);
        const SceneBatch sb = make_batch(ds, idx, tm.norm);
        Rng noise = root.split(b);
        const auto t = tm.model.loss(tm.store, tm.config.loss, constant(sb.past), constant(sb.future), noise);
        const double w = static_cast<double>(idx.size()) / static_cast<double>(n);
        m.elbo += w * t.elbo(tm.config.loss);
        m.kl += w * t.kl.item();
        m.rec += w * t.rec.item();
        m.variety += w * t.variety.item();
        m.total += w * t.total.item();
    }
    return m;
}

/// K prior samples per scene, raw coordinates: result[scene][k][agent][t].
using ScenePredictions = std::vector<std::vector<std::vector<std::vector<Vec2>>>>;

inline ScenePredictions predict(const TrainedModel& tm, const Dataset& ds, std::size_t k, std::uint64_t seed,
                                std::size_t batch = 32) {
    check_dataset_matches(tm, ds);
    if (k < 1) throw ConfigError("predict: K must be at least 1");
    const std::size_t n = tm.shape.n_agents, tf = tm.shape.t_future;
    ScenePredictions out(ds.samples.size());
    for (std::size_t start = 0; start < ds.samples.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(ds.samples.size(), start + batch); ++i) idx.push_back(i);
        const SceneBatch sb = make_batch(ds, idx, tm.norm);
        // stream keyed by the batch offset
        Rng rng = Rng(seed, 5).split(start);
        const auto fut = tm.model.sample_future(tm.store, constant(sb.past), k, tm.config.loss.lambda, rng);
        const std::size_t r = idx.size() * n;
        for (std::size_t s = 0; s < idx.size(); ++s) {
            auto& scene = out[idx[s]];
            scene.assign(k, std::vector<std::vector<Vec2>>(n, std::vector<Vec2>(tf)));
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t a = 0; a < n; ++a)
                    for (std::size_t t = 0; t < tf; ++t) {
                        const std::size_t row = kk * r + s * n + a;
                        scene[kk][a][t] = {tm.norm.inverse(fut.value().at(row, 2 * t), 0),
                                           tm.norm.inverse(fut.value().at(row, 2 * t + 1), 1)};
                    }
        }
    }
    return out;
}

}  // namespace groupnet
