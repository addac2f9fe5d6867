// End-to-end runs of the command-line binary. The path to the built
// executable arrives in CROPTRACK_CLI (set by the test harness).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <croptrack/serialize.hpp>
#include <croptrack/simulate.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace croptrack;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CROPTRACK_CLI");
    REQUIRE_MESSAGE(p != nullptr, "CROPTRACK_CLI must point at the built binary");
    REQUIRE(*p != '\0');
    return p;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("croptrack_cli_" + std::to_string(::getpid()) + "_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), "missing file: " << p.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

RunResult run_cli(const std::string& args, const TempDir& scratch) {
    const fs::path out_file = scratch / "stdout.txt";
    const fs::path err_file = scratch / "stderr.txt";
    const std::string cmd = "\"" + cli_path() + "\" " + args + " > \"" +
                            out_file.string() + "\" 2> \"" + err_file.string() + "\"";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = (raw == -1 || !WIFEXITED(raw)) ? -1 : WEXITSTATUS(raw);
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

SceneConfig clean_two_fruit_scene() {
    SceneConfig cfg;
    cfg.geometry = ImageGeometry(400, 300, Direction::RightToLeft, 0.2, 0.15);
    cfg.speed = 10.0;
    cfg.frame_count = 60;
    cfg.seed = 42;
    cfg.fruits = {{420.0, 50.0, 40.0, 40.0, 0}, {520.0, 150.0, 50.0, 45.0, 2}};
    return cfg;
}

fs::path write_scene(const TempDir& dir, const SceneConfig& cfg,
                     const std::string& name = "scene.json") {
    const fs::path p = dir / name;
    std::ofstream f(p);
    f << to_json(cfg).dump(2) << '\n';
    return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

}  // namespace

TEST_CASE("simulate writes byte-identical outputs for identical inputs") {
    TempDir dir("sim_determinism");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    for (const char* sub : {"a", "b"}) {
        const auto r = run_cli("simulate --scene " + q(scene) + " --out " + q(dir / sub), dir);
        CAPTURE(r.err);
        REQUIRE(r.exit_code == 0);
    }
    const std::string dets = slurp(dir / "a" / "detections.jsonl");
    CHECK(!dets.empty());
    CHECK(dets == slurp(dir / "b" / "detections.jsonl"));
    CHECK(slurp(dir / "a" / "ground_truth.jsonl") == slurp(dir / "b" / "ground_truth.jsonl"));
    CHECK(slurp(dir / "a" / "true_counts.json") == slurp(dir / "b" / "true_counts.json"));
}

TEST_CASE("simulate --seed overrides the scene seed") {
    TempDir dir("sim_seed");
    SceneConfig cfg = clean_two_fruit_scene();
    cfg.noise.jitter_std = 0.05;  // make the stream seed-sensitive
    const fs::path scene = write_scene(dir, cfg);
    for (const char* sub : {"s1", "s1_again", "s2"}) {
        const std::string seed = (std::string(sub) == "s2") ? "124" : "123";
        const auto r = run_cli("simulate --scene " + q(scene) + " --seed " + seed +
                                   " --out " + q(dir / sub),
                               dir);
        REQUIRE(r.exit_code == 0);
    }
    CHECK(slurp(dir / "s1" / "detections.jsonl") == slurp(dir / "s1_again" / "detections.jsonl"));
    CHECK(slurp(dir / "s1" / "detections.jsonl") != slurp(dir / "s2" / "detections.jsonl"));
    // the truth side must not depend on the seed at all
    CHECK(slurp(dir / "s1" / "ground_truth.jsonl") == slurp(dir / "s2" / "ground_truth.jsonl"));
}

TEST_CASE("track reproduces the simulator's true counts on a clean stream") {
    TempDir dir("track_counts");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);

    const auto r = run_cli("track --detections " + q(dir / "sim" / "detections.jsonl") +
                               " --out " + q(dir / "trk"),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);

    const Json report = load(dir / "trk" / "count_report.json");
    const Json truth = load(dir / "sim" / "true_counts.json");
    CHECK(report.at("counts") == truth.at("counts"));
    CHECK(report.at("total") == truth.at("total"));
    CHECK(report.at("total").get<int>() == 2);
    CHECK(report.at("tracks").size() == 2);
}

TEST_CASE("track is byte-deterministic and --audit logs every frame") {
    TempDir dir("track_determinism");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);

    const std::string args =
        "track --detections " + q(dir / "sim" / "detections.jsonl") + " --audit --out ";
    REQUIRE(run_cli(args + q(dir / "t1"), dir).exit_code == 0);
    REQUIRE(run_cli(args + q(dir / "t2"), dir).exit_code == 0);

    CHECK(slurp(dir / "t1" / "count_report.json") == slurp(dir / "t2" / "count_report.json"));
    const std::string audit = slurp(dir / "t1" / "audit.jsonl");
    CHECK(audit == slurp(dir / "t2" / "audit.jsonl"));
    CHECK(count_lines(audit) == 60);

    std::istringstream lines(audit);
    std::string line;
    std::int64_t expect_frame = 0;
    while (std::getline(lines, line)) {
        const Json rec = Json::parse(line);
        CHECK(rec.at("frame").get<std::int64_t>() == expect_frame++);
        CHECK(rec.contains("matched"));
        CHECK(rec.contains("spawned"));
        CHECK(rec.contains("suppressed"));
    }
}

TEST_CASE("tracker flags override the defaults") {
    TempDir dir("track_flags");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);

    // an overlap threshold above 1 disables stage-1 binding entirely, so
    // every frame spawn-checks both fruits; merge/boundary gates are off
    // too, leaving one fresh single-detection track per fruit per frame
    const auto r = run_cli("track --detections " + q(dir / "sim" / "detections.jsonl") +
                               " --gamma-dt 1.5 --gamma-merge 1.5 --gamma-bndry 1.5"
                               " --min-track-detections 2 --out " + q(dir / "flg"),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(load(dir / "flg" / "count_report.json").at("total").get<int>() == 0);
}

TEST_CASE("evaluate in detection mode scores a clean stream as perfect") {
    TempDir dir("eval_clean");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);

    const auto r = run_cli("evaluate --detections " + q(dir / "sim" / "detections.jsonl") +
                               " --ground-truth " + q(dir / "sim" / "ground_truth.jsonl") +
                               " --out " + q(dir / "ev"),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);

    const Json metrics = load(dir / "ev" / "metrics.json");
    const auto& results = metrics.at("results");
    CHECK(results.size() == metrics.at("iou_grid").size());
    for (const auto& entry : results) {
        const auto& eq = entry.at("equal_error");
        CHECK(eq.at("f1").get<double>() == doctest::Approx(100.0).epsilon(1e-9));
        CHECK(eq.at("crossing_found").get<bool>());
        // zero label noise: the confusion diagonal is 100 wherever defined
        const auto& percent = entry.at("confusion").at("percent");
        for (std::size_t row = 0; row < percent.size(); ++row) {
            if (percent[row][row].is_null()) continue;
            CHECK(percent[row][row].get<double>() == doctest::Approx(100.0));
        }
    }

    const std::string csv = slurp(dir / "ev" / "pr_curves.csv");
    CHECK(csv.rfind("iou,threshold,precision,recall\n", 0) == 0);
    const int expected_rows = static_cast<int>(metrics.at("iou_grid").size() *
                                               metrics.at("score_thresholds").size());
    CHECK(count_lines(csv) == expected_rows + 1);
}

TEST_CASE("evaluate in counts mode reproduces the benchmark error table") {
    TempDir dir("eval_counts");
    const LabelSet labels;
    {
        std::ofstream f(dir / "est.json");
        f << counts_to_json({159, 38, 227}, labels).dump(2) << '\n';
    }
    {
        std::ofstream f(dir / "truth.json");
        f << counts_to_json({179, 34, 229}, labels).dump(2) << '\n';
    }
    const auto r = run_cli("evaluate --est-counts " + q(dir / "est.json") +
                               " --true-counts " + q(dir / "truth.json") + " --out " +
                               q(dir / "pe"),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);

    const Json pe = load(dir / "pe" / "percent_error.json");
    auto near = [&](const Json& v, double want) {
        REQUIRE(v.is_number());
        CHECK(std::abs(v.get<double>() - want) <= 0.05);
    };
    near(pe.at("per_label").at("green"), 11.2);
    near(pe.at("per_label").at("mixed"), 11.8);
    near(pe.at("per_label").at("red"), 0.9);
    near(pe.at("total"), 4.1);
}

TEST_CASE("evaluate rejects mixed or incomplete mode selections") {
    TempDir dir("eval_modes");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);
    {
        std::ofstream f(dir / "est.json");
        f << counts_to_json({1, 2, 3}, LabelSet{}).dump() << '\n';
    }

    auto expect_failure = [&](const std::string& args) {
        const auto r = run_cli(args, dir);
        CAPTURE(args);
        CHECK(r.exit_code != 0);
        CHECK(r.err.find("error") != std::string::npos);
    };
    expect_failure("evaluate --detections " + q(dir / "sim" / "detections.jsonl") +
                   " --out " + q(dir / "x1"));
    expect_failure("evaluate --est-counts " + q(dir / "est.json") + " --out " + q(dir / "x2"));
    expect_failure("evaluate --detections " + q(dir / "sim" / "detections.jsonl") +
                   " --est-counts " + q(dir / "est.json") + " --out " + q(dir / "x3"));
}

TEST_CASE("a malformed stream is reported with its line number") {
    TempDir dir("bad_line");
    const fs::path bad = dir / "bad.jsonl";
    {
        std::ofstream f(bad);
        for (int i = 0; i < 6; ++i) {
            f << R"({"frame": )" << i
              << R"(, "detections": [{"box": [10, 10, 20, 20], "fg": 0.9, )"
              << R"("quality": {"green": 0.8, "mixed": 0.1, "red": 0.1}}]})" << '\n';
        }
        f << "{ not json at all\n";
    }
    const auto r = run_cli("track --detections " + q(bad) + " --out " + q(dir / "out"), dir);
    CHECK(r.exit_code != 0);
    CAPTURE(r.err);
    CHECK(r.err.find("line 7") != std::string::npos);
}

TEST_CASE("an empty stream yields a zero report") {
    TempDir dir("empty_stream");
    const fs::path empty = dir / "empty.jsonl";
    { std::ofstream f(empty); }
    const auto r = run_cli("track --detections " + q(empty) + " --out " + q(dir / "out"), dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    const Json report = load(dir / "out" / "count_report.json");
    CHECK(report.at("total").get<int>() == 0);
    for (const auto& [label, n] : report.at("counts").items()) {
        CAPTURE(label);
        CHECK(n.get<int>() == 0);
    }
    CHECK(report.at("tracks").empty());
}

TEST_CASE("tune sweeps the grid and prefers the smallest tied cell") {
    TempDir dir("tune_smoke");
    const fs::path scene = write_scene(dir, clean_two_fruit_scene());
    REQUIRE(run_cli("simulate --scene " + q(scene) + " --out " + q(dir / "sim"), dir).exit_code == 0);

    const auto r = run_cli("tune --stream " + q(dir / "sim" / "detections.jsonl") +
                               " --truth " + q(dir / "sim" / "true_counts.json") +
                               " --grid-dt 0.2,0.3 --grid-merge 0.4 --grid-bndry 0.5"
                               " --out " + q(dir / "tn"),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);

    const Json best = load(dir / "tn" / "best_config.json");
    CHECK(best.at("gamma_dt").get<double>() == 0.2);
    CHECK(best.at("gamma_merge").get<double>() == 0.4);
    CHECK(best.at("gamma_bndry").get<double>() == 0.5);

    const std::string csv = slurp(dir / "tn" / "grid_table.csv");
    CHECK(count_lines(csv) == 3);  // header + one row per cell per stream
    CHECK(csv.rfind("gamma_dt,gamma_merge,gamma_bndry,stream", 0) == 0);
    // the clean stream is counted exactly in every cell
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
        CHECK(line.substr(line.size() - 4) == ",0,0");
    }
}

TEST_CASE("missing inputs and unknown paths fail cleanly") {
    TempDir dir("bad_invocations");
    auto expect_failure = [&](const std::string& args) {
        const auto r = run_cli(args, dir);
        CAPTURE(args);
        CHECK(r.exit_code != 0);
    };
    expect_failure("");
    expect_failure("track");
    expect_failure("track --detections " + q(dir / "nope.jsonl") + " --out " + q(dir / "o"));
    expect_failure("simulate --scene " + q(dir / "nope.json") + " --out " + q(dir / "o"));
    expect_failure("frobnicate");
}
