#pragma once

// JSON-lines dataset container. Line 1 is the meta record, each following
// line one sample with raw (unnormalized) coordinates.

#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "groupnet/io.hpp"
#include "groupnet/sim.hpp"

namespace groupnet {

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
    Experiment experiment = Experiment::mixed6;
    std::uint64_t seed = 0;
    SceneConfig scene;
    std::array<double, 2> norm_mean{0.0, 0.0};
    std::array<double, 2> norm_std{1.0, 1.0};
    std::vector<LabelledSample> samples;

    std::size_t n_agents() const { return scene.n_agents; }
    std::size_t t_past() const { return scene.t_past; }
    std::size_t t_future() const { return scene.t_future; }
};

/// Per-coordinate mean and standard deviation over every stored position.
inline void compute_norm_stats(Dataset& ds) {
    std::array<double, 2> sum{0, 0}, sq{0, 0};
    double n = 0;
    for (const auto& s : ds.samples)
        for (const auto& agent : s.traj)
            for (const Vec2& p : agent) {
                sum[0] += p.x;
                sum[1] += p.y;
                n += 1;
            }
    if (n == 0) {
        ds.norm_mean = {0.0, 0.0};
        ds.norm_std = {1.0, 1.0};
        return;
    }
    ds.norm_mean = {sum[0] / n, sum[1] / n};
    for (const auto& s : ds.samples)
        for (const auto& agent : s.traj)
            for (const Vec2& p : agent) {
                sq[0] += (p.x - ds.norm_mean[0]) * (p.x - ds.norm_mean[0]);
                sq[1] += (p.y - ds.norm_mean[1]) * (p.y - ds.norm_mean[1]);
            }
    for (int c = 0; c < 2; ++c) {
        const double sd = std::sqrt(sq[c] / n);
        ds.norm_std[c] = sd > 1e-12 ? sd : 1.0;
    }
}

inline Dataset generate_dataset(Experiment experiment, const SceneConfig& cfg, std::size_t n_samples,
                                std::uint64_t seed) {
    cfg.validate();
    Dataset ds;
    ds.experiment = experiment;
    ds.seed = seed;
    ds.scene = cfg;
    ds.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) ds.samples.push_back(make_sample(experiment, cfg, i, seed));
    compute_norm_stats(ds);
    return ds;
}

inline Json meta_to_json(const Dataset& ds) {
    return Json{{"format_version", kDatasetFormatVersion},
                {"experiment", to_string(ds.experiment)},
                {"n_agents", ds.scene.n_agents},
                {"t_past", ds.scene.t_past},
                {"t_future", ds.scene.t_future},
                {"seed", ds.seed},
                {"norm_mean", ds.norm_mean},
                {"norm_std", ds.norm_std},
                {"scene_config", to_json(ds.scene)}};
}

inline Json sample_to_json(const LabelledSample& s) {
    Json traj = Json::array();
    for (const auto& agent : s.traj) {
        Json frames = Json::array();
        for (const Vec2& p : agent) frames.push_back(Json::array({p.x, p.y}));
        traj.push_back(std::move(frames));
    }
    return Json{{"sample_id", s.sample_id},
                {"traj", std::move(traj)},
                {"groups", s.groups},
                {"types", s.types},
                {"charge", s.charge ? Json(*s.charge) : Json(nullptr)}};
}

inline std::string encode_dataset(const Dataset& ds) {
    std::string out = meta_to_json(ds).dump();
    out += '\n';
    for (const auto& s : ds.samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    write_file_atomic(path, encode_dataset(ds));
}

namespace detail {

inline void check_labels(const LabelledSample& s, std::size_t n_agents) {
    if (s.groups.size() != s.types.size()) throw ConfigError("dataset: groups and types differ in length");
    for (const auto& g : s.groups)
        for (std::size_t m : g)
            if (m >= n_agents) throw ConfigError("dataset: group member out of range");
}

}  // namespace detail

inline Dataset decode_dataset(const std::string& text, const std::string& origin = "dataset") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(origin + ": missing meta record");
    const Json meta = parse_json(line, origin + " meta");
    require_known_keys(meta,
                       {"format_version", "experiment", "n_agents", "t_past", "t_future", "seed", "norm_mean",
                        "norm_std", "scene_config"},
                       origin + " meta");
    Dataset ds;
    try {
        if (meta.at("format_version").get<int>() != kDatasetFormatVersion)
            throw ConfigError(origin + ": unsupported format_version");
        ds.experiment = experiment_from_string(meta.at("experiment").get<std::string>());
        ds.seed = meta.at("seed").get<std::uint64_t>();
        ds.scene = scene_config_from_json(meta.at("scene_config"));
        ds.norm_mean = meta.at("norm_mean").get<std::array<double, 2>>();
        ds.norm_std = meta.at("norm_std").get<std::array<double, 2>>();
        if (meta.at("n_agents").get<std::size_t>() != ds.scene.n_agents ||
            meta.at("t_past").get<std::size_t>() != ds.scene.t_past ||
            meta.at("t_future").get<std::size_t>() != ds.scene.t_future)
            throw ConfigError(origin + ": meta shape disagrees with scene_config");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": malformed meta record (" + e.what() + ")");
    }

    const std::size_t n_frames = ds.scene.frames();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const Json j = parse_json(line, origin + " line " + std::to_string(line_no));
        LabelledSample s;
        try {
            s.sample_id = j.at("sample_id").get<std::size_t>();
            const auto& traj = j.at("traj");
            if (traj.size() != ds.scene.n_agents) throw ConfigError("agent count mismatch");
            for (const auto& agent : traj) {
                if (agent.size() != n_frames) throw ConfigError("frame count mismatch");
                std::vector<Vec2> frames;
                frames.reserve(n_frames);
                for (const auto& p : agent) {
                    const Vec2 v{p.at(0).get<double>(), p.at(1).get<double>()};
                    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw ConfigError("non-finite coordinate");
                    frames.push_back(v);
                }
                s.traj.push_back(std::move(frames));
            }
            s.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
            s.types = j.at("types").get<std::vector<std::string>>();
            if (!j.at("charge").is_null()) s.charge = j.at("charge").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": " + e.what());
        }
        detail::check_labels(s, ds.scene.n_agents);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline Dataset read_dataset(const std::filesystem::path& path) {
    return decode_dataset(read_file(path), path.string());
}

/// Contiguous sub-range of samples sharing the parent's meta.
inline Dataset slice_dataset(const Dataset& ds, std::size_t begin, std::size_t end) {
    Dataset out = ds;
    end = std::min(end, ds.samples.size());
    begin = std::min(begin, end);
    out.samples.assign(ds.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                       ds.samples.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

}  // namespace groupnet
