// Acceptance run: one PASS/FAIL line per criterion.
//
// Exit status is 0 once every criterion has been evaluated, whatever the
// verdicts; `--strict` makes any FAIL exit 1.

#include <bit>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "groupnet/commands.hpp"
#include "groupnet/gradcheck.hpp"

using namespace groupnet;
namespace fs = std::filesystem;

namespace {

struct Protocol {
    std::vector<std::uint64_t> category_seeds{1, 2, 3, 4, 5};
    std::size_t category_train = 1000, category_test = 200, category_epochs = 100;
    std::size_t strength_samples = 1000, strength_epochs = 30;
    std::size_t group_samples = 1000, group_epochs = 30;
    std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
    std::size_t ablation_train = 500, ablation_eval = 200, ablation_epochs = 20;
    std::size_t ablation_k = 20;

    static Protocol quick() {
        Protocol p;
        p.category_seeds = {1};
        p.category_train = 100;
        p.category_test = 50;
        p.category_epochs = 2;
        p.strength_samples = p.group_samples = 100;
        p.strength_epochs = p.group_epochs = 2;
        p.ablation_seeds = {1};
        p.ablation_train = 50;
        p.ablation_eval = 20;
        p.ablation_epochs = 1;
        return p;
    }
};

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
}

std::string fmt_sci(double v) {
    std::ostringstream o;
    o << std::scientific << std::setprecision(2) << v;
    return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Desk-scale model shared by the trained criteria.
ExperimentConfig desk_config(Experiment e, std::uint64_t seed) {
    ExperimentConfig c;
    c.experiment = e;
    c.scene = default_scene(e);
    c.scene.substeps = 100;  // 0.1 time units per frame: interactions bend the paths visibly
    c.model.d = 16;
    c.model.hidden = 32;
    c.model.d_z = 8;
    fit_default_scales(c.model, c.scene.n_agents);
    c.loss.k_variety = 5;
    c.optim.lr = 1e-3;
    c.optim.batch = 32;
    c.seed = seed;
    return c;
}

Dataset held_out(const ExperimentConfig& c, const Dataset& train_ds, std::size_t n, std::uint64_t seed) {
    Dataset d = generate_dataset(c.experiment, c.scene, n, seed);
    d.norm_mean = train_ds.norm_mean;
    d.norm_std = train_ds.norm_std;
    return d;
}

TrainedModel fit(const ExperimentConfig& c, const Dataset& ds, const std::string& tag) {
    TrainOptions o;
    const auto t0 = std::chrono::steady_clock::now();
    o.on_epoch = [&](const EpochMetrics& m) {
        if (m.epoch % 10 == 0 || m.epoch == c.optim.epochs)
            std::cerr << "  [" << tag << "] epoch " << m.epoch << " total " << fmt(m.total) << " ("
                      << fmt(seconds_since(t0), 1) << " s)\n";
    };
    return train(c, ds, o);
}

// ---------------------------------------------------------------------------

Verdict category_recognition(const Protocol& p, std::vector<std::string> types, double required) {
    const auto t0 = std::chrono::steady_clock::now();
    double acc_sum = 0;
    std::string per_seed;
    for (std::uint64_t seed : p.category_seeds) {
        ExperimentConfig c = desk_config(Experiment::category3, seed);
        c.scene.category_types = types;
        c.model.categories = types.size();
        c.model.scales = {3};
        c.optim.epochs = p.category_epochs;
        const Dataset train_ds = generate_dataset(c.experiment, c.scene, p.category_train, 100 + seed);
        const Dataset test_ds = held_out(c, train_ds, p.category_test, 200 + seed);
        const auto tm = fit(c, train_ds, std::to_string(types.size()) + "-type seed " + std::to_string(seed));
        const auto rep = category_probe(tm, test_ds, c.eval.mapping_fraction);
        acc_sum += rep.accuracy;
        per_seed += (per_seed.empty() ? "" : " ") + fmt(rep.accuracy, 3);
    }
    const double acc = acc_sum / static_cast<double>(p.category_seeds.size());
    const double secs = seconds_since(t0);
    Verdict v;
    v.pass = acc >= required;
    v.detail = "accuracy " + fmt(acc) + " (need >= " + fmt(required, 2) + "; seeds " + per_seed + "; " +
               fmt(secs / 60.0, 1) + " min)";
    if (types.size() == 2) {
        // the two-type protocol also carries a 30 minute CPU budget
        v.pass = v.pass && secs <= 1800.0;
        v.detail += secs <= 1800.0 ? "" : " over the 30 min budget";
    }
    return v;
}

Verdict strength_reasoning(const Protocol& p) {
    ExperimentConfig c = desk_config(Experiment::charged2, 1);
    c.optim.epochs = p.strength_epochs;
    const Dataset ds = generate_dataset(c.experiment, c.scene, p.strength_samples, 300);
    const auto tm = fit(c, ds, "charged2");
    const auto rep = strength_probe(tm, ds);
    Verdict v;
    v.pass = !rep.spearman.degenerate && rep.spearman.rho >= 0.8;
    v.detail = rep.spearman.degenerate ? "strength constant over the dataset (rank correlation undefined)"
                                       : "spearman rho " + fmt(rep.spearman.rho) + " (need >= 0.8)";
    v.detail += " over " + std::to_string(rep.points.size()) + " samples";
    return v;
}

Verdict group_capture(const Protocol& p) {
    ExperimentConfig c = desk_config(Experiment::mixed6, 1);
    c.optim.epochs = p.group_epochs;
    const Dataset ds = generate_dataset(c.experiment, c.scene, p.group_samples, 400);
    const auto tm = fit(c, ds, "mixed6");
    const auto learnt = group_probe(tm, ds);
    const auto random = random_group_baseline(c.model, ds, c.seed);
    auto rate = [](const GroupReport& r, const std::string& type) {
        auto it = r.find(type);
        return it == r.end() ? 0.0 : it->second.rate();
    };
    const double bar = rate(learnt, "lightbar"), spring = rate(learnt, "spring");
    const double bar0 = rate(random, "lightbar"), spring0 = rate(random, "spring");
    Verdict v;
    v.pass = bar >= 0.7 && spring >= 0.7 && bar0 <= 0.3 && spring0 <= 0.4;
    v.detail = "light-bar " + fmt(bar, 3) + ", spring " + fmt(spring, 3) + " (need >= 0.7); random " + fmt(bar0, 3) +
               " / " + fmt(spring0, 3) + " (need <= 0.3 / 0.4)";
    return v;
}

// Exhaustive search over bitmasks, independent of the solver's enumeration.
std::vector<std::size_t> brute_force_hyperedge(const AffinityMatrix& a, std::size_t seed, std::size_t k) {
    std::vector<std::size_t> best;
    double best_val = -1;
    for (unsigned mask = 0; mask < (1u << a.n); ++mask) {
        if (std::popcount(mask) != static_cast<int>(k) || !(mask & (1u << seed))) continue;
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < a.n; ++i)
            if (mask & (1u << i)) set.push_back(i);
        double val = 0;
        for (std::size_t x : set)
            for (std::size_t y : set) val += std::abs(a(x, y));
        if (val > best_val + 1e-12 || (std::abs(val - best_val) <= 1e-12 && set < best)) {
            best_val = val;
            best = set;
        }
    }
    return best;
}

Verdict exact_solver() {
    Rng rng(2025);
    std::size_t mismatches = 0, cases = 0;
    for (std::size_t n = 2; n <= 8; ++n)
        for (std::size_t k = 2; k <= std::min<std::size_t>(4, n); ++k)
            for (int trial = 0; trial < 100; ++trial) {
                Tensor<double> q({n, 4});
                for (auto& v : q.storage()) v = rng.normal();
                const auto a = affinity(q);
                for (std::size_t seed = 0; seed < n; ++seed, ++cases)
                    mismatches += hyperedge_exact(a, seed, k) != brute_force_hyperedge(a, seed, k);
            }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(cases) + " (matrix, seed) cases"};
}

template <class T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

Verdict gradient_suite() {
    Rng rng(31);
    // every differentiable op in one graph
    ParameterStore<double> ops;
    ops.add("a", random_tensor<double>({4, 3}, rng));
    ops.add("b", random_tensor<double>({3, 5}, rng));
    ops.add("bias", random_tensor<double>({5}, rng));
    ops.add("c", random_tensor<double>({4, 5}, rng));
    ops.add("s", random_tensor<double>({4, 1}, rng, 0.5, 1.5));
    ops.add("gx", random_tensor<double>({4, 6}, rng));
    ops.add("gh", random_tensor<double>({4, 6}, rng));
    ops.add("h", random_tensor<double>({4, 2}, rng));
    ops.add("logits", random_tensor<double>({3, 4}, rng));
    const auto target = random_tensor<double>({4, 5}, rng);
    const auto op_res = finite_diff_check<double>(
        [&](const ParameterStore<double>& p) {
            auto ab = matmul(p.get("a"), p.get("b"));
            auto lin = linear(p.get("a"), p.get("b"), p.get("bias"));
            auto mixed = add(mul(sigmoid(ab), tanh(lin)), sub(p.get("c"), scale(lin, 0.3)));
            auto soft = softmax_rows(mul_col(mixed, p.get("s")));
            auto e = exp(scale(soft, 0.5));
            auto cat = concat_cols<double>({e, add_scalar(p.get("c"), 0.25)});
            auto sl = slice_cols(cat, 3, 5);
            auto seg = segment_sum(gather_rows(sl, {3, 0, 0, 2}), {1, 0, 1, 1}, 2);
            auto gru = gru_cell(p.get("gx"), p.get("gh"), p.get("h"));
            Rng noise(5);
            auto gs = gumbel_softmax(p.get("logits"), 0.7, &noise);
            auto diff = sub(reshape(sl, {4, 5}), constant(target));
            return add(add(add(sum(square(diff)), sum(row_sum(seg))), sum(square(gru))), sum(square(gs)));
        },
        ops, 1e-5);

    // whole CVAE loss, Gumbel and latent noise frozen
    ModelConfig mc;
    mc.d = 3;
    mc.hidden = 4;
    mc.d_z = 2;
    mc.categories = 2;
    mc.iters = 2;
    mc.scales = {3};
    GroupNetModel model(mc, {3, 3, 2});
    ParameterStore<double> store;
    model.register_params(store, rng);
    const auto past = constant(random_tensor<double>({6, 6}, rng));
    const auto future = constant(random_tensor<double>({6, 4}, rng));
    FixedTopology topo;
    topo.past = model.past_encoder().forward(store, past, 3, nullptr).topology;
    topo.future = model.future_encoder().forward(store, future, 3, nullptr).topology;
    LossConfig lc;
    lc.k_variety = 3;
    const auto e2e = finite_diff_check<double>(
        [&](const ParameterStore<double>& p) {
            Rng noise(99);
            return model.loss(p, lc, past, future, noise, &topo).total;
        },
        store, 1e-6, 0, 1e-5);

    // KL against the one-dimensional closed form
    double kl_err = 0;
    for (int i = 0; i < 100; ++i) {
        const double mu = rng.uniform(-3, 3), sigma = rng.uniform(0.05, 3), lambda = rng.uniform(0.1, 4);
        const double closed =
            0.5 * (sigma * sigma / lambda + mu * mu / lambda - 1.0 - 2.0 * std::log(sigma) + std::log(lambda));
        const double got = gaussian_kl(constant(Tensor<double>({1, 1}, mu)), constant(Tensor<double>({1, 1}, std::log(sigma))),
                                       constant(Tensor<double>({1, 1}, sigma)), lambda)
                               .item();
        kl_err = std::max(kl_err, std::abs(got - closed));
    }
    Verdict v;
    v.pass = op_res.max_rel_error < 1e-4 && e2e.max_rel_error < 1e-3 && kl_err < 1e-6;
    v.detail = "ops " + fmt_sci(op_res.max_rel_error) + " (< 1e-4), end-to-end " + fmt_sci(e2e.max_rel_error) + " over " +
               std::to_string(e2e.checked) + " entries (< 1e-3), KL " + fmt_sci(kl_err) + " (< 1e-6)";
    return v;
}

Verdict scale_ablation(const Protocol& p) {
    ExperimentConfig c = desk_config(Experiment::mixed6, 1);
    c.optim.epochs = p.ablation_epochs;
    c.eval.k = p.ablation_k;
    const Dataset train_ds = generate_dataset(c.experiment, c.scene, p.ablation_train, 500);
    const Dataset eval_ds = held_out(c, train_ds, p.ablation_eval, 501);
    SweepOptions opt;
    opt.scale_sets = {{}, {2, 3}};
    opt.seeds = p.ablation_seeds;
    opt.on_row = [](const SweepRow& r) {
        std::cerr << "  [sweep] scales " << scales_key(r.scales) << " seed " << r.seed << " minADE " << fmt(r.min_ade) << "\n";
    };
    const auto rows = run_sweep(c, train_ds, eval_ds, opt);
    const double multi = mean_ade(rows, {2, 3}), pair = mean_ade(rows, {});
    return {multi <= pair, "minADE_" + std::to_string(p.ablation_k) + " {2,3} " + fmt(multi) + " vs pairwise " + fmt(pair)};
}

AgentTracks random_tracks(Rng& rng, std::size_t agents, std::size_t steps) {
    AgentTracks t(agents, std::vector<Vec2>(steps));
    for (auto& a : t)
        for (auto& p : a) p = {rng.normal(), rng.normal()};
    return t;
}

Verdict metric_oracle() {
    Rng rng(8);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.index(6), n = 1 + rng.index(6), t = 1 + rng.index(12);
        const auto gt = random_tracks(rng, n, t);
        std::vector<AgentTracks> preds;
        for (std::size_t s = 0; s < k; ++s) preds.push_back(random_tracks(rng, n, t));
        // per agent: best sample per agent; per scene: best joint sample
        double pa_ade = 0, pa_fde = 0, ps_ade = 1e300, ps_fde = 1e300;
        std::vector<std::vector<double>> ade(k, std::vector<double>(n)), fde(k, std::vector<double>(n));
        for (std::size_t s = 0; s < k; ++s)
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t i = 0; i < t; ++i)
                    ade[s][a] += std::hypot(preds[s][a][i].x - gt[a][i].x, preds[s][a][i].y - gt[a][i].y) / t;
                fde[s][a] = std::hypot(preds[s][a][t - 1].x - gt[a][t - 1].x, preds[s][a][t - 1].y - gt[a][t - 1].y);
            }
        for (std::size_t a = 0; a < n; ++a) {
            double ba = 1e300, bf = 1e300;
            for (std::size_t s = 0; s < k; ++s) {
                ba = std::min(ba, ade[s][a]);
                bf = std::min(bf, fde[s][a]);
            }
            pa_ade += ba / n;
            pa_fde += bf / n;
        }
        for (std::size_t s = 0; s < k; ++s) {
            double sa = 0, sf = 0;
            for (std::size_t a = 0; a < n; ++a) {
                sa += ade[s][a] / n;
                sf += fde[s][a] / n;
            }
            ps_ade = std::min(ps_ade, sa);
            ps_fde = std::min(ps_fde, sf);
        }
        const auto ra = displacement_metrics(preds, gt, Reduction::per_agent);
        const auto rs = displacement_metrics(preds, gt, Reduction::per_scene);
        worst = std::max({worst, std::abs(ra.min_ade - pa_ade), std::abs(ra.min_fde - pa_fde),
                          std::abs(rs.min_ade - ps_ade), std::abs(rs.min_fde - ps_fde)});
    }
    std::size_t violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto gt = random_tracks(rng, 4, 8);
        for (auto red : {Reduction::per_agent, Reduction::per_scene}) {
            std::vector<AgentTracks> preds;
            double ade = 1e300, fde = 1e300;
            for (int k = 0; k < 10; ++k) {
                preds.push_back(random_tracks(rng, 4, 8));
                const auto r = displacement_metrics(preds, gt, red);
                violations += r.min_ade > ade || r.min_fde > fde;
                ade = r.min_ade;
                fde = r.min_fde;
            }
        }
    }
    return {worst < 1e-9 && violations == 0,
            "max deviation " + fmt_sci(worst) + " (< 1e-9), " + std::to_string(violations) + " monotonicity violations"};
}

// ---------------------------------------------------------------------------
// determinism through the command-line front end

int cli(std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), "groupnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out) *out = o.str();
    if (code != 0) std::cerr << "  [determinism] " << args[1] << " failed: " << e.str();
    return code;
}

/// Runs every subcommand into `dir`; stdout captures land in files too.
bool run_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string text;
    if (cli({"config", "--defaults", "--experiment", "mixed6"}, &text)) return false;
    write_file_atomic(dir / "defaults.json", text);
    Json c = parse_json(text, "defaults");
    c["n_samples"] = 12;
    c["model"]["d"] = 6;
    c["model"]["hidden"] = 8;
    c["model"]["d_z"] = 3;
    c["loss"]["K_variety"] = 2;
    c["optim"]["epochs"] = 2;
    c["optim"]["batch"] = 5;
    c["eval"]["K"] = 4;
    c["seed"] = 17;
    const auto cfg = (dir / "config.json").string();
    write_file_atomic(cfg, c.dump(2));
    const auto ds = (dir / "data.jsonl").string(), run = (dir / "run").string(), ckpt = (dir / "run" / "model.ckpt").string();
    const bool ok =
        !cli({"simulate", "--config", cfg, "--out", ds}) &&
        !cli({"simulate", "--experiment", "charged2", "--seed", "3", "--out", (dir / "charged.jsonl").string()}) &&
        !cli({"train", "--config", cfg, "--dataset", ds, "--out", run}) &&
        !cli({"predict", "--config", cfg, "--model", ckpt, "--dataset", ds, "--out", (dir / "pred.json").string()}) &&
        !cli({"eval", "--config", cfg, "--model", ckpt, "--dataset", ds, "--out", (dir / "eval.json").string()}) &&
        !cli({"reason", "--config", cfg, "--model", ckpt, "--dataset", ds, "--out", (dir / "reason.json").string()}) &&
        !cli({"infer-topology", "--model", ckpt, "--dataset", ds, "--sample", "3", "--out", (dir / "topo.json").string()}) &&
        !cli({"sweep", "--config", cfg, "--dataset", ds, "--scales", "none", "2,3", "--seeds", "1", "2", "--out",
              (dir / "sweep").string()}) &&
        !cli({"plot", "--input", (dir / "run" / "metrics.csv").string(), "--out", (dir / "metrics.svg").string()}) &&
        !cli({"plot", "--input", (dir / "reason_strength.csv").string(), "--out", (dir / "strength.svg").string()});
    return ok;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return files;
}

Verdict determinism(const fs::path& work) {
    if (!run_pipeline(work / "first") || !run_pipeline(work / "second")) return {false, "a subcommand failed"};
    const auto a = snapshot(work / "first"), b = snapshot(work / "second");
    std::size_t differing = 0;
    std::string names;
    for (const auto& [name, bytes] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second != bytes) {
            ++differing;
            names += " " + name;
        }
    }
    differing += b.size() > a.size() ? b.size() - a.size() : 0;
    return {differing == 0 && a.size() == b.size(),
            std::to_string(a.size()) + " files from 9 subcommands, " + std::to_string(differing) + " differ" + names};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run"};
    bool strict = false, quick = false;
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "groupnet_acceptance").string();
    std::string report_path;
    app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
    app.add_flag("--quick", quick, "Tiny datasets and epochs (smoke run; verdicts are not meaningful)");
    app.add_option("--only", only, "Criterion numbers to run");
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--report", report_path, "Also write the verdict lines to this file");
    CLI11_PARSE(app, argc, argv);
    const Protocol p = quick ? Protocol::quick() : Protocol{};

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"category recognition, 2 types", [&] { return category_recognition(p, {"free", "lightbar"}, 0.90); }},
        {"category recognition, 3 types", [&] { return category_recognition(p, {"free", "spring", "lightbar"}, 0.70); }},
        {"strength reasoning", [&] { return strength_reasoning(p); }},
        {"group capture", [&] { return group_capture(p); }},
        {"exact hyperedge solver", [] { return exact_solver(); }},
        {"gradient suite", [] { return gradient_suite(); }},
        {"scale ablation trend", [&] { return scale_ablation(p); }},
        {"metric oracle", [] { return metric_oracle(); }},
        {"determinism", [&] { return determinism(work); }},
    };
    std::ostringstream report;
    auto emit = [&](const std::string& line) {
        std::cout << line << std::endl;
        report << line << "\n";
    };
    if (quick) emit("quick protocol: verdicts of criteria 1-4 and 7 are not meaningful");
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
        std::cerr << "criterion " << number << " running\n";
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        emit(std::string(v.pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(number) + " " + criteria[i].first +
             ": " + v.detail + "  [" + fmt(seconds_since(t0), 1) + " s]");
    }
    emit(std::to_string(failed) + " criteria failed");
    if (!report_path.empty()) write_file_atomic(report_path, report.str());
    return strict && failed ? 1 : 0;
}
