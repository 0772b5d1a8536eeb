#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <sstream>

#include "basinlab/config.hpp"
#include "basinlab/csv.hpp"
#include "basinlab/errors.hpp"
#include "basinlab/experiment.hpp"

#include "helpers.hpp"

using namespace basinlab;

namespace {

const char* kAnalyticConfig = R"(
# quick analytic study
[world]
preset = "ring"

[schedule]
T = 24
beta_start = 0.005
beta_end = 0.25

[backend]
kind = "analytic"

[guidance]
w_cfg = 5.0

[mitigation]
strategy = "none"

[run]
seeds = [1, 2, 3]
out_dir = "OUTDIR"
)";

std::string config_with_outdir(const std::string& base, const std::string& out_dir) {
    std::string text = base;
    const auto pos = text.find("OUTDIR");
    text.replace(pos, 6, out_dir);
    return text;
}

std::string slurp(const std::string& path) { return read_file(path); }

}  // namespace

TEST_CASE("key-table parsing: sections, arrays, comments, failure modes") {
    const auto file = TomlFile::parse(R"(
top = 1
[alpha]
x = 2.5           # trailing comment
name = "hello"
flag = true
values = [1, 2.5, 3]
nested = [[1, 2], [3, 4]]

[alpha.beta]
deep = -3
)");
    CHECK(file.section("").at("top").as_int() == 1);
    CHECK(file.section("alpha").at("x").as_real() == doctest::Approx(2.5));
    CHECK(file.section("alpha").at("name").s == "hello");
    CHECK(file.section("alpha").at("flag").b == true);
    CHECK(file.section("alpha").at("values").as_real_array() ==
          std::vector<double>{1.0, 2.5, 3.0});
    CHECK(file.section("alpha").at("nested").arr[1].as_real_array() ==
          std::vector<double>{3.0, 4.0});
    CHECK(file.section("alpha.beta").at("deep").as_int() == -3);
    CHECK(file.subsections("alpha") == std::vector<std::string>{"beta"});

    CHECK_THROWS_AS(TomlFile::parse("x = "), ConfigError);
    CHECK_THROWS_AS(TomlFile::parse("x = [1, 2"), ConfigError);
    CHECK_THROWS_AS(TomlFile::parse("x = \"unterminated"), ConfigError);
    CHECK_THROWS_AS(TomlFile::parse("x = 1\nx = 2"), ConfigError);
    CHECK_THROWS_AS(TomlFile::parse("x = 1 stray"), ConfigError);
}

TEST_CASE("experiment config validation") {
    CHECK_THROWS_AS(parse_config("[world]\npreset = \"ring\"\n[run]\nseeds = []\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[world]\npreset = \"ring\"\n[run]\nseeds = [1, 1]\n"),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_config("[world]\npreset = \"ring\"\n[mitigation]\nstrategy = \"what\"\n"
                     "[run]\nseeds = [1]\n"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_config("[world]\npreset = \"ring\"\n[sweep]\naxis = \"l_target\"\n"
                     "[run]\nseeds = [1]\n"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_config("[world]\npreset = \"ring\"\n[run]\nseeds = [1]\ncondition = \"nope\"\n"),
        ConfigError);

    const auto cfg = parse_config(config_with_outdir(kAnalyticConfig, "tmp"));
    CHECK(cfg.schedule.T == 24);
    CHECK(cfg.condition == "MEM");  // defaults to the memorized condition
    CHECK(cfg.backend.kind == BackendKind::analytic);
    CHECK(cfg.resolved_eps_mem() == doctest::Approx(3.0 * 0.015));
    CHECK(!cfg.digest.empty());
}

TEST_CASE("seed ranges expand into distinct seeds") {
    const auto cfg = parse_config(
        "[world]\npreset = \"ring\"\n[run]\nseed_range = [3, 7]\n");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5, 6, 7});
    CHECK_THROWS_AS(parse_config("[world]\npreset = \"ring\"\n[run]\nseed_range = [7, 3]\n"),
                    ConfigError);
}

TEST_CASE("worlds without a memorized condition report no duplicate hits") {
    auto cfg = parse_config(R"(
[world]
d = 2

[world.condition.a]
components = [[1.0, -2.0, 0.0, 0.4]]

[world.condition.b]
components = [[1.0, 2.0, 0.0, 0.4]]

[backend]
kind = "analytic"

[schedule]
T = 8
beta_start = 0.01
beta_end = 0.3

[run]
seeds = [1, 2]
condition = "a"
)");
    CHECK(cfg.resolved_eps_mem() == 0.0);
    const auto report = run_experiment(cfg, false);
    for (const auto& row : report.rows) {
        CHECK(row.error.empty());
        CHECK_FALSE(row.hit);
    }
}

TEST_CASE("explicit worlds load from per-condition sections") {
    const auto cfg = parse_config(R"(
[world]
d = 2

[world.condition.left]
components = [[1.0, -2.0, 0.0, 0.4]]

[world.condition.dup]
memorized = true
components = [[0.9, 2.0, 2.0, 0.01], [0.1, 2.0, 2.0, 0.5]]

[run]
seeds = [4]
)");
    CHECK(cfg.world.conditions.size() == 2);
    CHECK(cfg.world.conditions[0].id == "left");
    CHECK(cfg.world.conditions[1].memorized);
    CHECK(cfg.condition == "dup");
    CHECK(cfg.world.conditions[1].dominant().sigma == doctest::Approx(0.01));
}

TEST_CASE("run_experiment: accounting, determinism, and error isolation") {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "basinlab_harness_test";
    fs::remove_all(base);

    SUBCASE("mitigation none: one row per seed, 2T evaluations each") {
        auto cfg = parse_config(config_with_outdir(kAnalyticConfig, (base / "a").string()));
        const auto report = run_experiment(cfg);
        REQUIRE(report.rows.size() == 3);
        for (const auto& row : report.rows) {
            CHECK(row.error.empty());
            CHECK(row.evals == 2u * 24u);
            CHECK(row.grads == 0u);
        }
        CHECK(fs::exists(base / "a" / "runs.csv"));
        CHECK(fs::exists(base / "a" / "metrics.csv"));
        const std::string runs = slurp((base / "a" / "runs.csv").string());
        CHECK(runs.find("# config_digest=" + cfg.digest) != std::string::npos);
    }

    SUBCASE("identical configs give byte-identical outputs, threaded or not") {
        // same config text, only the output directory differs (as with --out)
        auto cfg = parse_config(config_with_outdir(kAnalyticConfig, "unused"));
        cfg.out_dir = (base / "b1").string();
        (void)run_experiment(cfg);
        cfg.out_dir = (base / "b2").string();
        (void)run_experiment(cfg);
        setenv("BASINLAB_THREADS", "3", 1);
        cfg.out_dir = (base / "b3").string();
        (void)run_experiment(cfg);
        unsetenv("BASINLAB_THREADS");
        for (const char* name : {"runs.csv", "metrics.csv", "transitions.csv",
                                 "traces_none_0.csv", "overlay.svg", "tradeoff.svg"}) {
            const std::string a = slurp((base / "b1" / name).string());
            CHECK(a == slurp((base / "b2" / name).string()));
            CHECK(a == slurp((base / "b3" / name).string()));
        }
    }

    SUBCASE("a failing run is recorded and does not abort the sweep") {
        auto cfg = parse_config(config_with_outdir(kAnalyticConfig, (base / "c").string()));
        cfg.mitigation.strategy = MitigationStrategy::persample;
        cfg.mitigation.persample.l_target = 1e-13;  // unreachable
        cfg.mitigation.persample.max_iters = 4;
        const auto report = run_experiment(cfg, false);
        REQUIRE(report.rows.size() == 3);
        for (const auto& row : report.rows) CHECK(!row.error.empty());
    }

    fs::remove_all(base);
}

TEST_CASE("a saved model loaded through model_path matches the trained one") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "basinlab_model_path_test";
    fs::create_directories(dir);
    const std::string model_file = (dir / "model.json").string();

    auto cfg = parse_config(R"(
[world]
preset = "ring"
[schedule]
T = 8
beta_start = 0.01
beta_end = 0.3
[backend]
kind = "trained"
steps = 40
batch = 8
n_per_condition = 20
duplication_factor = 20
[run]
seeds = [1]
)");
    const auto trained = build_backend(cfg);
    dynamic_cast<const MlpDenoiser&>(*trained).save_json(model_file);

    cfg.backend.model_path = model_file;
    const auto loaded = build_backend(cfg);
    CHECK(dynamic_cast<const MlpDenoiser&>(*loaded).parameters() ==
          dynamic_cast<const MlpDenoiser&>(*trained).parameters());
    fs::remove_all(dir);
}

TEST_CASE("dataset CSV export carries the duplicate flags") {
    const auto world = ring_world();
    const auto ds = sample_dataset(world, 5, 7, 3);
    std::ostringstream out;
    const std::vector<std::string> header{"config_digest=test", "seed=3"};
    write_dataset_csv(out, ds, world, header);
    const std::string text = out.str();
    CHECK(text.find("x_1,x_2,condition_id,is_duplicate") != std::string::npos);
    CHECK(text.find("MEM,1") != std::string::npos);
    CHECK(text.find("# seed=3") != std::string::npos);
}
