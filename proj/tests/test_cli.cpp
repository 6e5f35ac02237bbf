#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "bayesreloc/cli.hpp"
#include "bayesreloc/scenes.hpp"
#include "doctest.h"

using namespace bayesreloc;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "bayesreloc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path workdir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "bayesreloc_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string p(const std::string& name) { return (workdir() / name).string(); }

// Dataset, checkpoint and calibration shared by the cases below.
void ensure_pipeline() {
    static bool done = false;
    if (done) return;
    REQUIRE(cli({"gen", "--seed", "3", "--out", p("data")}).code == 0);
    REQUIRE(cli({"train", "--data", p("data"), "--epochs", "1", "--seed", "4", "--out", p("model.json")}).code == 0);
    REQUIRE(cli({"calibrate", "--model", p("model.json"), "--data", p("data"), "--out", p("cal.json")}).code == 0);
    done = true;
}

}  // namespace

TEST_CASE("gen, train, calibrate and eval on defaults") {
    ensure_pipeline();
    CHECK(fs::exists(workdir() / "data" / "scene.json"));
    CHECK(fs::exists(workdir() / "data" / "train.txt"));
    CHECK(fs::exists(workdir() / "model.json"));
    CHECK(fs::exists(workdir() / "cal.json"));
    const Run eval = cli({"eval", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("data"),
                          "--seed", "5", "--out", p("eval")});
    CHECK(eval.code == 0);
    CHECK(fs::exists(workdir() / "eval" / "summary.json"));
    CHECK(fs::exists(workdir() / "eval" / "queries.tsv"));
}

TEST_CASE("other subcommands run") {
    ensure_pipeline();
    CHECK(cli({"sample", "--model", p("model.json"), "--data", p("data"), "--query", "synthetic/test/000001",
               "--samples", "7"})
              .out.find("n=7") != std::string::npos);
    CHECK(cli({"sweep", "--model", p("model.json"), "--data", p("data"), "--counts", "1,5", "--repetitions", "2"})
              .code == 0);
    REQUIRE(cli({"eval", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("data"), "--out",
                 p("eval2")})
                .code == 0);
    const Run hist = cli({"hist", "--table", p("eval2/queries.tsv"), "--thresholds", "1,5,10,1000"});
    CHECK(hist.code == 0);
    CHECK(hist.out.find("1000") != std::string::npos);
    CHECK(cli({"time", "--model", p("model.json"), "--data", p("data"), "--counts", "5"}).code == 0);
}

TEST_CASE("detect writes three confusion matrices") {
    ensure_pipeline();
    REQUIRE(cli({"gen", "--seed", "8", "--scene-id", "other", "--n-train", "200", "--n-test", "20", "--out",
                 p("data_other")})
                .code == 0);
    REQUIRE(cli({"train", "--data", p("data_other"), "--epochs", "1", "--out", p("model_other.json")}).code == 0);
    REQUIRE(cli({"calibrate", "--model", p("model_other.json"), "--data", p("data_other"), "--out",
                 p("cal_other.json")})
                .code == 0);
    const Run r = cli({"detect", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("data"),
                       "--model", p("model_other.json"), "--calibration", p("cal_other.json"), "--data",
                       p("data_other"), "--samples", "5", "--out", p("detect")});
    CHECK(r.code == 0);
    CHECK(fs::exists(workdir() / "detect" / "confusion_combined.tsv"));
    CHECK(fs::exists(workdir() / "detect" / "confusion_translation.tsv"));
    CHECK(fs::exists(workdir() / "detect" / "confusion_rotation.tsv"));
}

TEST_CASE("mismatched feature width is a data error") {
    ensure_pipeline();
    SceneSpec spec;
    spec.scene_id = "synthetic";
    spec.feature_dim = 16;
    write_text_file(workdir() / "narrow.json", format_scene_spec(spec));
    REQUIRE(cli({"gen", "--spec", p("narrow.json"), "--n-train", "50", "--n-test", "10", "--out", p("narrow")})
                .code == 0);
    const Run r = cli({"eval", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("narrow"),
                       "--out", p("eval_narrow")});
    CHECK(r.code == 2);
    CHECK(r.err.find("width") != std::string::npos);
    CHECK(r.err.back() == '\n');
}

TEST_CASE("malformed data file reports its line") {
    ensure_pipeline();
    fs::create_directories(workdir() / "broken");
    fs::copy_file(workdir() / "data" / "scene.json", workdir() / "broken" / "scene.json",
                  fs::copy_options::overwrite_existing);
    for (const char* f : {"train.txt", "calib.txt"}) {
        fs::copy_file(workdir() / "data" / f, workdir() / "broken" / f, fs::copy_options::overwrite_existing);
    }
    write_text_file(workdir() / "broken" / "test.txt", "bayesreloc-data-v1 feature_dim=32\nq 0 0 0 0 0 0 0\n");
    const Run r = cli({"eval", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("broken"),
                       "--out", p("eval_broken")});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("divergent training is a numerical failure") {
    ensure_pipeline();
    const Run r = cli({"train", "--data", p("data"), "--lr", "1e3", "--epochs", "50", "--out", p("bad.json")});
    CHECK(r.code == 3);
    CHECK(r.err.find("NonFiniteLoss") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"train"}).code == 1);
    CHECK(cli({"gen"}).code == 1);  // --out missing
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("identical runs write identical query tables") {
    ensure_pipeline();
    for (const char* dir : {"det_a", "det_b"}) {
        REQUIRE(cli({"eval", "--model", p("model.json"), "--calibration", p("cal.json"), "--data", p("data"),
                     "--seed", "11", "--out", p(dir)})
                    .code == 0);
    }
    CHECK(read_text_file(workdir() / "det_a" / "queries.tsv") == read_text_file(workdir() / "det_b" / "queries.tsv"));
}
