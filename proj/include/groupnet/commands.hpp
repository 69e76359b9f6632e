#pragma once

// Command-line front end. `run_cli` parses arguments, dispatches to one
// subcommand and maps the error taxonomy onto exit codes:
//   0 success, 2 config / usage error, 3 I/O error, 4 numeric error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "groupnet/plot.hpp"
#include "groupnet/sweep.hpp"

namespace groupnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

struct CliGlobals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

namespace cli {

inline ExperimentConfig load_config(const CliGlobals& g, const std::string& experiment = "") {
    ExperimentConfig c;
    if (!g.config.empty()) {
        if (!experiment.empty()) throw ConfigError("--experiment cannot be combined with --config");
        c = parse_experiment_config(read_file(g.config), g.config);
    } else {
        c.experiment = experiment_from_string(experiment.empty() ? "mixed6" : experiment);
        c.scene = default_scene(c.experiment);
        fit_default_scales(c.model, c.scene.n_agents);
    }
    if (g.seed) c.seed = *g.seed;
    c.validate();
    return c;
}

inline std::string need_path(const std::string& given, const std::string& fallback, const std::string& what) {
    if (!given.empty()) return given;
    if (!fallback.empty()) return fallback;
    throw ConfigError("missing " + what);
}

/// Sibling file with a different suffix: report.json -> report.csv.
inline std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
    auto stem = p;
    stem.replace_extension();
    return stem.string() + suffix;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    write_file_atomic(path, j.dump(2) + "\n");
}

inline void write_text(const std::filesystem::path& path, const std::string& s) {
    if (path.has_parent_path()) ensure_directory(path.parent_path());
    write_file_atomic(path, s);
}

inline Json tracks_json(const std::vector<std::vector<Vec2>>& agents) {
    Json a = Json::array();
    for (const auto& agent : agents) {
        Json t = Json::array();
        for (const Vec2& p : agent) t.push_back({p.x, p.y});
        a.push_back(std::move(t));
    }
    return a;
}

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

/// Relational heads of one encoded scene: {scales: [{K, hyperedges: [{members, r, c}]}]}.
inline Json scene_heads_json(const EncodedScene& e) {
    Json scales = Json::array();
    for (std::size_t s = 0; s < e.topology.scales.size(); ++s) {
        Json edges = Json::array();
        const auto& sc = e.topology.scales[s];
        for (std::size_t j = 0; j < sc.edges.size(); ++j) {
            Json c = Json::array();
            for (std::size_t l = 0; l < e.category[s].cols(); ++l) c.push_back(e.category[s].at(j, l));
            edges.push_back({{"members", sc.edges[j].members}, {"r", e.strength[s][j]}, {"c", c}});
        }
        scales.push_back({{"K", sc.group_size}, {"hyperedges", edges}});
    }
    return Json{{"scales", scales}};
}

inline Json group_report_json(const GroupReport& rep) {
    Json j = Json::object();
    for (const auto& [type, r] : rep)
        j[type] = {{"recovered", r.recovered}, {"total", r.total}, {"unscorable", r.unscorable}, {"rate", r.rate()}};
    return j;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"GroupNet: multiscale hypergraph trajectory prediction with relational reasoning", "groupnet"};
    app.require_subcommand(1);
    CliGlobals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the configuration seed");
    app.add_option("--config", g.config, "Experiment configuration (JSON)");
    app.add_option("--out", g.out, "Output file or directory");

    std::string experiment, dataset_path, model_path, reduction, input_path, eval_dataset;
    std::size_t k = 0, sample_index = 0;
    bool defaults = false, resume = false;
    std::vector<std::string> scale_sets;
    std::vector<std::uint64_t> seeds;

    auto* c_config = app.add_subcommand("config", "Print or normalise an experiment configuration");
    c_config->add_flag("--defaults", defaults, "Emit the default configuration");
    c_config->add_option("--experiment", experiment, "mixed6 | category3 | charged2");

    auto* c_sim = app.add_subcommand("simulate", "Generate a labelled dataset");
    c_sim->add_option("--experiment", experiment, "Experiment recipe when no --config is given");

    auto* c_train = app.add_subcommand("train", "Train a model");
    c_train->add_option("--dataset", dataset_path, "Dataset (JSON lines)");
    c_train->add_flag("--resume", resume, "Continue from the state in --out");

    auto* c_pred = app.add_subcommand("predict", "Sample future trajectories");
    auto* c_eval = app.add_subcommand("eval", "minADE / minFDE report");
    auto* c_reason = app.add_subcommand("reason", "Relational-reasoning probes");
    auto* c_topo = app.add_subcommand("infer-topology", "Affinity matrix and hypergraph of one sample");
    for (auto* s : {c_pred, c_eval, c_reason, c_topo}) {
        s->add_option("--model", model_path, "Checkpoint (model.ckpt, sidecar model.json beside it)")->required();
        s->add_option("--dataset", dataset_path, "Dataset (JSON lines)")->required();
    }
    for (auto* s : {c_pred, c_eval}) s->add_option("--k", k, "Samples per scene (default: eval.K)");
    c_eval->add_option("--reduction", reduction, "per-agent | per-scene (default: eval.reduction)");
    c_topo->add_option("--sample", sample_index, "Sample index");

    auto* c_sweep = app.add_subcommand("sweep", "Scale ablation");
    c_sweep->add_option("--dataset", dataset_path, "Training dataset");
    c_sweep->add_option("--eval-dataset", eval_dataset, "Evaluation dataset (default: the training set)");
    c_sweep->add_option("--scales", scale_sets, "Scale sets such as none, 2 or 2,3 (repeatable)");
    c_sweep->add_option("--seeds", seeds, "Training seeds (default: the config seed)");

    auto* c_plot = app.add_subcommand("plot", "Render a CSV report as SVG");
    c_plot->add_option("--input", input_path, "CSV file")->required();

    for (auto* s : app.get_subcommands([](CLI::App*) { return true; })) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help requests come through here with exit code 0
        return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
    }
    if (seed_opt->count()) g.seed = seed_value;

    try {
        if (*c_config) {
            ExperimentConfig cfg;
            if (defaults) {
                if (!g.config.empty()) throw ConfigError("--defaults cannot be combined with --config");
                cfg = cli::load_config(g, experiment);
            } else if (!g.config.empty()) {
                cfg = cli::load_config(g);
            } else {
                throw ConfigError("config: pass --defaults or --config");
            }
            const std::string text = to_json(cfg).dump(2) + "\n";
            if (g.out.empty())
                out << text;
            else
                cli::write_text(g.out, text);
            return kExitOk;
        }

        if (*c_sim) {
            const auto cfg = cli::load_config(g, experiment);
            const auto path = cli::need_path(g.out, cfg.paths.dataset, "--out (dataset path)");
            const auto ds = generate_dataset(cfg.experiment, cfg.scene, cfg.n_samples, cfg.seed);
            if (std::filesystem::path(path).has_parent_path()) ensure_directory(std::filesystem::path(path).parent_path());
            write_dataset(path, ds);
            out << "wrote " << ds.samples.size() << " " << to_string(cfg.experiment) << " samples to " << path << "\n";
            return kExitOk;
        }

        if (*c_train) {
            const auto cfg = cli::load_config(g);
            const auto ds = read_dataset(cli::need_path(dataset_path, cfg.paths.dataset, "--dataset"));
            TrainOptions o;
            o.out_dir = cli::need_path(g.out, cfg.paths.output, "--out (output directory)");
            o.resume = resume;
            o.on_epoch = [&](const EpochMetrics& m) {
                out << "epoch " << m.epoch << "/" << cfg.optim.epochs << " total " << format_double(m.total)
                    << " elbo " << format_double(m.elbo) << " variety " << format_double(m.variety) << "\n";
            };
            const auto tm = train(cfg, ds, o);
            out << "checkpoint " << (o.out_dir / "model.ckpt").string() << " after " << tm.history.size()
                << " epochs\n";
            return kExitOk;
        }

        if (*c_pred || *c_eval || *c_reason || *c_topo) {
            const TrainedModel tm = load_model(model_path);
            const Dataset ds = read_dataset(dataset_path);
            check_dataset_matches(tm, ds);
            const std::uint64_t seed = g.seed.value_or(tm.config.seed);
            const std::size_t kk = k ? k : tm.config.eval.k;

            if (*c_pred) {
                const auto preds = predict(tm, ds, kk, seed);
                Json samples = Json::array();
                for (std::size_t i = 0; i < preds.size(); ++i) {
                    Json ks = Json::array();
                    for (const auto& sample : preds[i]) ks.push_back(cli::tracks_json(sample));
                    samples.push_back({{"sample_id", ds.samples[i].sample_id}, {"predictions", ks}});
                }
                const Json j{{"K", kk}, {"seed", seed}, {"samples", samples}};
                cli::write_json(cli::need_path(g.out, "", "--out"), j);
                out << "wrote " << kk << " samples for " << preds.size() << " scenes\n";
                return kExitOk;
            }

            if (*c_eval) {
                const Reduction red = reduction.empty() ? tm.config.eval.reduction : reduction_from_string(reduction);
                const auto preds = predict(tm, ds, kk, seed);
                const auto m = evaluate_predictions(preds, ds, red);
                const Json j{{"K", kk},
                             {"reduction", to_string(red)},
                             {"seed", seed},
                             {"n_samples", ds.samples.size()},
                             {"min_ade", m.mean.min_ade},
                             {"min_fde", m.mean.min_fde}};
                const std::filesystem::path path = cli::need_path(g.out, "", "--out");
                cli::write_json(path, j);
                std::string csv = "sample_id,min_ade,min_fde\n";
                for (std::size_t i = 0; i < m.per_sample.size(); ++i)
                    csv += std::to_string(ds.samples[i].sample_id) + "," + format_double(m.per_sample[i].min_ade) +
                           "," + format_double(m.per_sample[i].min_fde) + "\n";
                cli::write_text(cli::with_suffix(path, ".csv"), csv);
                out << "minADE_" << kk << " " << format_double(m.mean.min_ade) << " minFDE_" << kk << " "
                    << format_double(m.mean.min_fde) << "\n";
                return kExitOk;
            }

            if (*c_reason) {
                const auto enc = encode_scenes(tm, ds);
                Json j;
                Json samples = Json::array();
                for (std::size_t i = 0; i < enc.size(); ++i) {
                    Json s = cli::scene_heads_json(enc[i]);
                    s["sample_id"] = ds.samples[i].sample_id;
                    samples.push_back(std::move(s));
                }
                j["samples"] = samples;
                j["experiment"] = to_string(ds.experiment);
                // category labels exist whenever some group has two or more members
                bool labelled = false;
                for (const auto& s : ds.samples)
                    for (const auto& grp : s.groups) labelled |= grp.size() >= 2;
                j["category_accuracy"] = nullptr;
                if (labelled && ds.experiment != Experiment::charged2) {
                    const auto cat = category_probe(tm, ds, tm.config.eval.mapping_fraction);
                    j["category_accuracy"] = cat.accuracy;
                    j["category"] = {{"labels", cat.labels},
                                     {"mapping", cat.mapping},
                                     {"n_mapping", cat.n_mapping},
                                     {"n_test", cat.n_test},
                                     {"misses", cat.misses}};
                }
                std::string csv = "charge,strength\n";
                j["strength_points"] = Json::array();
                j["spearman_rho"] = nullptr;
                if (ds.experiment == Experiment::charged2) {
                    const auto st = strength_probe(tm, ds);
                    for (const auto& [q, r] : st.points) {
                        j["strength_points"].push_back({q, r});
                        csv += format_double(q) + "," + format_double(r) + "\n";
                    }
                    j["spearman_rho"] = st.spearman.rho;
                    j["spearman_degenerate"] = st.spearman.degenerate;
                }
                std::vector<MultiscaleHypergraph> topo;
                for (const auto& e : enc) topo.push_back(e.topology);
                j["group_recovery"] = cli::group_report_json(score_groups(topo, scale_group_sizes(tm.config.model), ds));
                const std::filesystem::path path = cli::need_path(g.out, "", "--out");
                cli::write_json(path, j);
                cli::write_text(cli::with_suffix(path, "_strength.csv"), csv);
                out << "wrote reasoning report for " << enc.size() << " samples\n";
                return kExitOk;
            }

            // infer-topology
            if (sample_index >= ds.samples.size())
                throw ConfigError("--sample " + std::to_string(sample_index) + " out of range (dataset has " +
                                  std::to_string(ds.samples.size()) + ")");
            const SceneBatch sb = make_batch(ds, {sample_index}, tm.norm);
            const auto& enc = tm.model.past_encoder();
            const Var<float> q = embed_trajectories(tm.store, enc.f_q(), constant(sb.past));
            const AffinityMatrix a = affinity(q.value());
            const auto h = enc.infer_topology(q.value(), tm.shape.n_agents)[0];
            Json aff = Json::array();
            for (std::size_t i = 0; i < a.n; ++i) {
                Json row = Json::array();
                for (std::size_t jx = 0; jx < a.n; ++jx) row.push_back(cli::round6(a(i, jx)));
                aff.push_back(row);
            }
            Json scales = Json::array();
            for (const auto& sc : h.scales) {
                Json edges = Json::array();
                for (const auto& e : sc.edges) edges.push_back(e.members);
                scales.push_back({{"K", sc.group_size}, {"hyperedges", edges}});
            }
            const Json j{{"affinity", aff}, {"scales", scales}};
            if (g.out.empty())
                out << j.dump(2) << "\n";
            else
                cli::write_json(g.out, j);
            return kExitOk;
        }

        if (*c_sweep) {
            const auto cfg = cli::load_config(g);
            const auto train_ds = read_dataset(cli::need_path(dataset_path, cfg.paths.dataset, "--dataset"));
            const auto eval_ds = eval_dataset.empty() ? train_ds : read_dataset(eval_dataset);
            SweepOptions so;
            if (scale_sets.empty()) scale_sets = {"none", scales_key(cfg.model.scales)};
            for (const auto& s : scale_sets) so.scale_sets.push_back(parse_scales_key(s));
            so.seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
            const std::filesystem::path dir = cli::need_path(g.out, cfg.paths.output, "--out (output directory)");
            so.out_dir = dir;
            so.on_row = [&](const SweepRow& r) {
                out << "scales " << scales_key(r.scales) << " seed " << r.seed << " minADE " << format_double(r.min_ade)
                    << " minFDE " << format_double(r.min_fde) << "\n";
            };
            const auto rows = run_sweep(cfg, train_ds, eval_ds, so);
            std::string csv = "scales,seed,min_ade,min_fde\n";
            Json jr = Json::array();
            for (const auto& r : rows) {
                csv += "\"" + scales_key(r.scales) + "\"," + std::to_string(r.seed) + "," + format_double(r.min_ade) +
                       "," + format_double(r.min_fde) + "\n";
                jr.push_back({{"scales", r.scales}, {"seed", r.seed}, {"min_ade", r.min_ade}, {"min_fde", r.min_fde}});
            }
            Json summary = Json::object();
            for (const auto& set : so.scale_sets) summary[scales_key(set)] = mean_ade(rows, set);
            cli::write_text(dir / "sweep.csv", csv);
            cli::write_json(dir / "sweep.json", Json{{"rows", jr}, {"mean_min_ade", summary}});
            return kExitOk;
        }

        if (*c_plot) {
            const CsvTable t = parse_csv(read_file(input_path), input_path);
            if (t.rows.empty()) err << "warning: " << input_path << " has no data rows; writing an empty plot\n";
            const PlotSpec spec = choose_plot(t);
            const auto path = cli::need_path(g.out, "", "--out");
            cli::write_text(path, render_svg(t, spec, std::filesystem::path(input_path).filename().string()));
            out << "wrote " << path << "\n";
            return kExitOk;
        }
    } catch (const IoError& e) {  // LoadError included
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    err << "error: no subcommand\n";
    return kExitConfig;
}

}  // namespace groupnet
