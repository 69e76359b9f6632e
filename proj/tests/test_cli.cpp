#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

#include "groupnet/commands.hpp"

using namespace groupnet;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "groupnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("groupnet_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// Small, fast experiment config written to `dir/config.json`.
std::string small_config(const fs::path& dir, const std::string& experiment, std::size_t samples, std::size_t epochs,
                         const std::function<void(Json&)>& tweak = {}) {
    Json c = parse_json(run({"config", "--defaults", "--experiment", experiment}).out, "defaults");
    c["n_samples"] = samples;
    c["model"]["d"] = 6;
    c["model"]["hidden"] = 8;
    c["model"]["d_z"] = 3;
    c["model"]["iters"] = 1;
    c["loss"]["K_variety"] = 2;
    c["optim"]["epochs"] = epochs;
    c["optim"]["batch"] = 5;
    c["eval"]["K"] = 3;
    if (tweak) tweak(c);
    const auto path = dir / "config.json";
    write_file_atomic(path, c.dump(2));
    return path.string();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_substr(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

// Validator for the schema keywords the published report schema uses.
void check_schema(const Json& v, const Json& schema, const std::string& where, std::vector<std::string>& errors) {
    auto fail = [&](const std::string& msg) { errors.push_back(where + ": " + msg); };
    if (schema.contains("type")) {
        std::vector<std::string> types;
        if (schema["type"].is_array())
            for (const auto& t : schema["type"]) types.push_back(t);
        else
            types.push_back(schema["type"]);
        auto is = [&](const std::string& t) {
            if (t == "object") return v.is_object();
            if (t == "array") return v.is_array();
            if (t == "string") return v.is_string();
            if (t == "integer") return v.is_number_integer();
            if (t == "number") return v.is_number();
            if (t == "boolean") return v.is_boolean();
            if (t == "null") return v.is_null();
            return false;
        };
        if (std::none_of(types.begin(), types.end(), is)) {
            fail("wrong type " + std::string(v.type_name()));
            return;
        }
    }
    if (schema.contains("enum") && std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end())
        fail("not in enum");
    if (v.is_number()) {
        if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>()) fail("below minimum");
        if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>()) fail("above maximum");
    }
    if (v.is_object()) {
        if (schema.contains("required"))
            for (const auto& k : schema["required"])
                if (!v.contains(k.get<std::string>())) fail("missing " + k.get<std::string>());
        for (const auto& [k, sub] : v.items()) {
            if (schema.contains("properties") && schema["properties"].contains(k))
                check_schema(sub, schema["properties"][k], where + "." + k, errors);
            else if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object())
                check_schema(sub, schema["additionalProperties"], where + "." + k, errors);
        }
    }
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) fail("too few items");
        if (schema.contains("maxItems") && v.size() > schema["maxItems"].get<std::size_t>()) fail("too many items");
        if (schema.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i)
                check_schema(v[i], schema["items"], where + "[" + std::to_string(i) + "]", errors);
    }
}

/// Shared category3 workspace: dataset plus a 2-epoch model.
class CliWorkspace : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir = new fs::path(scratch("workspace"));
        config = new std::string(small_config(*dir, "category3", 10, 2));
        ASSERT_EQ(run({"simulate", "--config", *config, "--out", (*dir / "ds.jsonl").string()}).code, 0);
        ASSERT_EQ(run({"train", "--config", *config, "--dataset", (*dir / "ds.jsonl").string(), "--out",
                       (*dir / "run").string()})
                      .code,
                  0);
    }
    static void TearDownTestSuite() {
        delete dir;
        delete config;
    }
    static std::string ds() { return (*dir / "ds.jsonl").string(); }
    static std::string ckpt() { return (*dir / "run" / "model.ckpt").string(); }
    static fs::path* dir;
    static std::string* config;
};
fs::path* CliWorkspace::dir = nullptr;
std::string* CliWorkspace::config = nullptr;

}  // namespace

// ---------------------------------------------------------------------------
// config

TEST(CliConfig, DefaultsRoundTrip) {
    const auto r = run({"config", "--defaults"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto c = parse_experiment_config(r.out, "stdout");
    EXPECT_EQ(to_json(c).dump(2) + "\n", r.out);  // serialise -> parse -> serialise fixpoint
    EXPECT_EQ(c.model.d_z, 32u);
    EXPECT_EQ(c.loss.k_variety, 20u);
    EXPECT_DOUBLE_EQ(c.optim.lr, 1e-4);
}

TEST(CliConfig, NormalisesAFile) {
    const auto dir = scratch("normalise");
    write_file_atomic(dir / "c.json", R"({"experiment": "charged2", "model": {"d": 8}})");
    const auto r = run({"config", "--config", (dir / "c.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto c = parse_experiment_config(r.out, "stdout");
    EXPECT_EQ(c.experiment, Experiment::charged2);
    EXPECT_EQ(c.scene.n_agents, 2u);
    EXPECT_EQ(c.model.d, 8u);
    EXPECT_EQ(c.model.hidden, 64u);
}

TEST(CliConfig, TwoAgentDefaultsKeepOnlyPairScale) {
    const auto c = parse_experiment_config(run({"config", "--defaults", "--experiment", "charged2"}).out, "stdout");
    EXPECT_EQ(c.model.scales, (std::vector<std::size_t>{2}));
    const auto m = parse_experiment_config(run({"config", "--defaults", "--experiment", "mixed6"}).out, "stdout");
    EXPECT_EQ(m.model.scales, (std::vector<std::size_t>{2, 3}));
}

TEST(CliConfig, GumbelNoiseRoundTrips) {
    const auto dir = scratch("gumbel");
    write_file_atomic(dir / "c.json", R"({"model": {"gumbel_noise": false}})");
    const auto r = run({"config", "--config", (dir / "c.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(parse_experiment_config(r.out, "stdout").model.gumbel_noise);
    write_file_atomic(dir / "c.json", R"({"model": {"gumbel_noise": "no"}})");
    EXPECT_EQ(run({"config", "--config", (dir / "c.json").string()}).code, 2);
}

TEST(CliConfig, UnknownKeyIsConfigError) {
    const auto dir = scratch("unknown");
    write_file_atomic(dir / "c.json", R"({"model": {"dd": 8}})");
    const auto r = run({"config", "--config", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("dd"), std::string::npos) << r.err;
}

TEST(CliConfig, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"config"}).code, 2);
    EXPECT_EQ(run({"config", "--defaults", "--experiment", "bogus"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

// ---------------------------------------------------------------------------
// simulate

TEST(CliSimulate, WritesOneLinePerSamplePlusMeta) {
    const auto dir = scratch("simulate");
    const auto cfg = small_config(dir, "mixed6", 7, 1);
    const auto r = run({"simulate", "--config", cfg, "--out", (dir / "d.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(read_file(dir / "d.jsonl")), 8u);
    const auto ds = read_dataset(dir / "d.jsonl");
    EXPECT_EQ(ds.samples.size(), 7u);
    EXPECT_EQ(ds.n_agents(), 6u);
}

TEST(CliSimulate, MissingConfigNamesThePath) {
    const auto r = run({"simulate", "--config", "/nonexistent/where.json", "--out", "/tmp/x.jsonl"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("/nonexistent/where.json"), std::string::npos);
    EXPECT_EQ(count_lines(r.err), 1u);
}

TEST(CliSimulate, DeterministicAndSeeded) {
    const auto dir = scratch("simulate_det");
    const auto cfg = small_config(dir, "charged2", 5, 1);
    run({"simulate", "--config", cfg, "--out", (dir / "a.jsonl").string()});
    run({"simulate", "--config", cfg, "--out", (dir / "b.jsonl").string()});
    run({"simulate", "--config", cfg, "--seed", "9", "--out", (dir / "c.jsonl").string()});
    EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
    EXPECT_NE(read_file(dir / "a.jsonl"), read_file(dir / "c.jsonl"));
    EXPECT_EQ(read_dataset(dir / "c.jsonl").seed, 9u);
}

TEST(CliSimulate, NeedsAnOutputPath) { EXPECT_EQ(run({"simulate", "--experiment", "charged2"}).code, 2); }

// ---------------------------------------------------------------------------
// train

TEST_F(CliWorkspace, TrainWritesArtifactsQuickly) {
    const auto out = scratch("train_quick");
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run({"train", "--config", *config, "--dataset", ds(), "--out", out.string()});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LT(secs, 60.0);
    for (const char* f : {"model.ckpt", "model.json", "metrics.csv", "train_state.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(count_lines(read_file(out / "metrics.csv")), 3u);
    EXPECT_EQ(read_file(out / "model.ckpt"), read_file(*dir / "run" / "model.ckpt"));
}

TEST_F(CliWorkspace, TrainResumesBitIdentically) {
    const auto out = scratch("train_resume");
    const auto one = small_config(out, "category3", 10, 1);
    ASSERT_EQ(run({"train", "--config", one, "--dataset", ds(), "--out", (out / "run").string()}).code, 0);
    ASSERT_EQ(run({"train", "--config", *config, "--dataset", ds(), "--out", (out / "run").string(), "--resume"}).code, 0);
    for (const char* f : {"model.ckpt", "metrics.csv", "train_state.json"})
        EXPECT_EQ(read_file(out / "run" / f), read_file(*dir / "run" / f)) << f;
}

TEST_F(CliWorkspace, TrainShapeMismatchIsConfigError) {
    const auto out = scratch("train_bad");
    const auto cfg = small_config(out, "category3", 10, 1, [](Json& c) { c["model"]["scales"] = {2, 4}; });
    const auto r = run({"train", "--config", cfg, "--dataset", ds(), "--out", (out / "run").string()});
    EXPECT_EQ(r.code, 2);
}

TEST_F(CliWorkspace, DivergentTrainingIsNumericError) {
    const auto out = scratch("train_nan");
    const auto cfg = small_config(out, "category3", 10, 30, [](Json& c) { c["optim"]["lr"] = 1e30; });
    const auto r = run({"train", "--config", cfg, "--dataset", ds(), "--out", (out / "run").string()});
    EXPECT_EQ(r.code, 4) << r.err;
}

// ---------------------------------------------------------------------------
// predict / eval / reason / infer-topology

TEST_F(CliWorkspace, PredictShapeAndDeterminism) {
    const auto out = scratch("predict");
    ASSERT_EQ(run({"predict", "--model", ckpt(), "--dataset", ds(), "--k", "4", "--out", (out / "a.json").string()}).code, 0);
    ASSERT_EQ(run({"predict", "--model", ckpt(), "--dataset", ds(), "--k", "4", "--out", (out / "b.json").string()}).code, 0);
    EXPECT_EQ(read_file(out / "a.json"), read_file(out / "b.json"));
    const Json j = parse_json(read_file(out / "a.json"), "a.json");
    ASSERT_EQ(j["samples"].size(), 10u);
    const auto& p = j["samples"][0]["predictions"];
    ASSERT_EQ(p.size(), 4u);
    ASSERT_EQ(p[0].size(), 3u);
    EXPECT_EQ(p[0][0].size(), 10u);
    EXPECT_EQ(p[0][0][0].size(), 2u);
}

TEST_F(CliWorkspace, EvalWritesReportAndCsv) {
    const auto out = scratch("eval");
    const auto r = run({"eval", "--model", ckpt(), "--dataset", ds(), "--out", (out / "report.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = parse_json(read_file(out / "report.json"), "report");
    EXPECT_EQ(j["K"], 3);
    EXPECT_EQ(j["reduction"], "per-agent");
    EXPECT_TRUE(std::isfinite(j["min_ade"].get<double>()));
    EXPECT_GE(j["min_fde"].get<double>(), 0.0);
    const auto csv = read_file(out / "report.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,min_ade,min_fde");
    EXPECT_EQ(count_lines(csv), 11u);
    run({"eval", "--model", ckpt(), "--dataset", ds(), "--out", (out / "again.json").string()});
    EXPECT_EQ(read_file(out / "report.json"), read_file(out / "again.json"));
    EXPECT_EQ(read_file(out / "report.csv"), read_file(out / "again.csv"));
    EXPECT_EQ(run({"eval", "--model", ckpt(), "--dataset", ds(), "--reduction", "per-frame", "--out",
                   (out / "x.json").string()})
                  .code,
              2);
}

TEST_F(CliWorkspace, EvalOnUntrainedCheckpoint) {
    const auto out = scratch("eval_untrained");
    const auto cfg = small_config(out, "category3", 10, 0);
    ASSERT_EQ(run({"train", "--config", cfg, "--dataset", ds(), "--out", (out / "run").string()}).code, 0);
    const auto r = run({"eval", "--model", (out / "run" / "model.ckpt").string(), "--dataset", ds(), "--out",
                        (out / "e.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = parse_json(read_file(out / "e.json"), "e");
    EXPECT_TRUE(std::isfinite(j["min_ade"].get<double>()));
    EXPECT_GT(j["min_ade"].get<double>(), 0.0);
}

TEST_F(CliWorkspace, ModelDatasetMismatch) {
    const auto out = scratch("mismatch");
    const auto cfg = small_config(out, "charged2", 3, 1);
    run({"simulate", "--config", cfg, "--out", (out / "c.jsonl").string()});
    EXPECT_EQ(run({"eval", "--model", ckpt(), "--dataset", (out / "c.jsonl").string(), "--out",
                   (out / "e.json").string()})
                  .code,
              2);
    EXPECT_EQ(run({"eval", "--model", (out / "none.ckpt").string(), "--dataset", ds(), "--out",
                   (out / "e.json").string()})
                  .code,
              3);
}

TEST_F(CliWorkspace, ReasonMatchesPublishedSchema) {
    const auto out = scratch("reason");
    ASSERT_EQ(run({"reason", "--model", ckpt(), "--dataset", ds(), "--out", (out / "r.json").string()}).code, 0);
    const Json report = parse_json(read_file(out / "r.json"), "r.json");
    const Json schema =
        parse_json(read_file(fs::path(GROUPNET_SOURCE_DIR) / "docs" / "reason.schema.json"), "reason.schema.json");
    std::vector<std::string> errors;
    check_schema(report, schema, "$", errors);
    EXPECT_TRUE(errors.empty()) << errors.front();
    EXPECT_EQ(report["samples"].size(), 10u);
    EXPECT_EQ(report["samples"][0]["scales"].size(), 3u);  // pairwise scale plus {2, 3}
    EXPECT_TRUE(fs::exists(out / "r_strength.csv"));
    run({"reason", "--model", ckpt(), "--dataset", ds(), "--out", (out / "s.json").string()});
    EXPECT_EQ(read_file(out / "r.json"), read_file(out / "s.json"));
}

TEST(CliSchemaCheck, RejectsMalformedReport) {
    const Json schema =
        parse_json(read_file(fs::path(GROUPNET_SOURCE_DIR) / "docs" / "reason.schema.json"), "reason.schema.json");
    Json bad = {{"experiment", "mixed6"}, {"samples", Json::array()}, {"category_accuracy", 1.5},
                {"strength_points", Json::array()}, {"spearman_rho", nullptr}};
    std::vector<std::string> errors;
    check_schema(bad, schema, "$", errors);
    EXPECT_EQ(errors.size(), 2u);  // group_recovery missing, accuracy above 1
}

TEST(CliReason, StrengthCsvOnChargedData) {
    const auto dir = scratch("reason_charged");
    const auto cfg = small_config(dir, "charged2", 8, 1);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir / "d.jsonl").string()}).code, 0);
    ASSERT_EQ(run({"train", "--config", cfg, "--dataset", (dir / "d.jsonl").string(), "--out", (dir / "run").string()}).code, 0);
    ASSERT_EQ(run({"reason", "--model", (dir / "run" / "model.ckpt").string(), "--dataset", (dir / "d.jsonl").string(),
                   "--out", (dir / "r.json").string()})
                  .code,
              0);
    const Json j = parse_json(read_file(dir / "r.json"), "r");
    EXPECT_EQ(j["strength_points"].size(), 8u);
    EXPECT_TRUE(j["spearman_rho"].is_number());
    EXPECT_TRUE(j["category_accuracy"].is_null());
    const auto csv = read_file(dir / "r_strength.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "charge,strength");
    EXPECT_EQ(count_lines(csv), 9u);
}

TEST_F(CliWorkspace, InferTopologyOutput) {
    const auto out = scratch("topo");
    const auto r = run({"infer-topology", "--model", ckpt(), "--dataset", ds(), "--sample", "2", "--out",
                        (out / "t.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = parse_json(read_file(out / "t.json"), "t");
    ASSERT_EQ(j["affinity"].size(), 3u);
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_DOUBLE_EQ(j["affinity"][a][a].get<double>(), 1.0);
        for (std::size_t b = 0; b < 3; ++b) {
            const double v = j["affinity"][a][b];
            EXPECT_DOUBLE_EQ(v, std::round(v * 1e6) / 1e6);
            EXPECT_EQ(v, j["affinity"][b][a].get<double>());
        }
    }
    ASSERT_EQ(j["scales"].size(), 3u);
    EXPECT_EQ(j["scales"][2]["K"], 3);
    EXPECT_EQ(j["scales"][2]["hyperedges"][0], (Json{0, 1, 2}));
    EXPECT_EQ(run({"infer-topology", "--model", ckpt(), "--dataset", ds(), "--sample", "10"}).code, 2);
}

// ---------------------------------------------------------------------------
// sweep

TEST(CliSweep, OneRowPerScaleSet) {
    const auto dir = scratch("sweep");
    const auto cfg = small_config(dir, "mixed6", 6, 1);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", (dir / "d.jsonl").string()}).code, 0);
    const auto r = run({"sweep", "--config", cfg, "--dataset", (dir / "d.jsonl").string(), "--scales", "2", "2,3",
                        "--out", (dir / "sw").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = parse_json(read_file(dir / "sw" / "sweep.json"), "sweep");
    ASSERT_EQ(j["rows"].size(), 2u);
    EXPECT_EQ(j["rows"][0]["scales"], (Json{2}));
    EXPECT_EQ(j["rows"][1]["scales"], (Json{2, 3}));
    EXPECT_TRUE(j["mean_min_ade"].contains("2"));
    EXPECT_TRUE(j["mean_min_ade"].contains("2,3"));
    EXPECT_EQ(count_lines(read_file(dir / "sw" / "sweep.csv")), 3u);
    const auto first = read_file(dir / "sw" / "sweep.json");
    run({"sweep", "--config", cfg, "--dataset", (dir / "d.jsonl").string(), "--scales", "2", "2,3", "--out",
         (dir / "sw").string()});
    EXPECT_EQ(read_file(dir / "sw" / "sweep.json"), first);
    EXPECT_EQ(run({"sweep", "--config", cfg, "--dataset", (dir / "d.jsonl").string(), "--scales", "1,x", "--out",
                   (dir / "sw2").string()})
                  .code,
              2);
}

// ---------------------------------------------------------------------------
// plot

TEST(CliPlot, StrengthScatterHasAxisLabels) {
    const auto dir = scratch("plot_scatter");
    write_file_atomic(dir / "s.csv", "charge,strength\n0.5,0.2\n1.5,0.4\n3,0.9\n");
    const auto r = run({"plot", "--input", (dir / "s.csv").string(), "--out", (dir / "s.svg").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto svg = read_file(dir / "s.svg");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find(">charge</text>"), std::string::npos);
    EXPECT_NE(svg.find(">strength</text>"), std::string::npos);
    EXPECT_EQ(count_substr(svg, "<circle"), 3u);
}

TEST(CliPlot, EmptyCsvWarnsAndSucceeds) {
    const auto dir = scratch("plot_empty");
    for (const char* text : {"", "charge,strength\n"}) {
        write_file_atomic(dir / "e.csv", text);
        const auto r = run({"plot", "--input", (dir / "e.csv").string(), "--out", (dir / "e.svg").string()});
        EXPECT_EQ(r.code, 0);
        EXPECT_NE(r.err.find("warning"), std::string::npos);
        EXPECT_NE(read_file(dir / "e.svg").find("</svg>"), std::string::npos);
    }
}

TEST(CliPlot, LossLogHasOnePolylinePerTerm) {
    const auto dir = scratch("plot_loss");
    write_file_atomic(dir / "m.csv", "epoch,elbo,kl,rec,variety,total,lr\n1,5,1,2,3,10,0.001\n2,4,1,1,2,8,0.001\n");
    ASSERT_EQ(run({"plot", "--input", (dir / "m.csv").string(), "--out", (dir / "m.svg").string()}).code, 0);
    const auto svg = read_file(dir / "m.svg");
    EXPECT_EQ(count_substr(svg, "<polyline"), 5u);
    for (const char* term : {"elbo", "kl", "rec", "variety", "total"})
        EXPECT_NE(svg.find("data-name=\"" + std::string(term) + "\""), std::string::npos) << term;
    ASSERT_EQ(run({"plot", "--input", (dir / "m.csv").string(), "--out", (dir / "n.svg").string()}).code, 0);
    EXPECT_EQ(read_file(dir / "n.svg"), svg);
}

TEST(CliPlot, MalformedCsvIsConfigError) {
    const auto dir = scratch("plot_bad");
    write_file_atomic(dir / "b.csv", "a,b\n1,zz\n");
    EXPECT_EQ(run({"plot", "--input", (dir / "b.csv").string(), "--out", (dir / "b.svg").string()}).code, 2);
    EXPECT_EQ(run({"plot", "--input", (dir / "missing.csv").string(), "--out", (dir / "b.svg").string()}).code, 3);
}
