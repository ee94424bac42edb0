#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "odam/cli.hpp"

using namespace odam;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "odam_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

RunConfig small() {
    return parse_config(
        "identities = 3\nper_identity = 10\nepochs = 2\nlayer_dims = 8,4\nadapt_layers = 2\n"
        "pairs_per_batch = 4\nrefs_per_class = 4\n");
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ODAM_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse_config reads keys, comments and lists") {
    const RunConfig c = parse_config(
        "# comment line\n"
        "seed = 9\n"
        "outlier_ratio = 0.25   # trailing comment\n"
        "layer_dims = 16, 8\n"
        "mode = siamese_da\n"
        "translation = 1, -2\n"
        "normalize_similarity = false\n"
        "directions = t2t,t2s\n");
    CHECK(c.seed() == 9);
    CHECK(c.toy.seed == 9);
    CHECK(c.toy.outlier_ratio == 0.25);
    CHECK(c.train.layer_dims == std::vector<std::size_t>{16, 8});
    CHECK(c.train.mode == TrainMode::SiameseDA);
    CHECK(c.toy.translation == std::vector<double>{1.0, -2.0});
    CHECK_FALSE(c.train.normalize_similarity);
    CHECK(c.directions == std::vector<std::string>{"t2t", "t2s"});
}

TEST_CASE("parse_config errors") {
    try {
        parse_config("epochs = 3\nlearning_rat = 0.1\n");
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("learning_rat") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("epochs\n"), UsageError);
    CHECK_THROWS_AS(parse_config("epochs = -1\n"), UsageError);
    CHECK_THROWS_AS(parse_config("margin = abc\n"), UsageError);
    CHECK_THROWS_AS(parse_config("mode = dann\n"), UsageError);
    CHECK_THROWS_AS(parse_config("directions = t2s,x2y\n"), UsageError);
    CHECK_THROWS_AS(load_config("/nonexistent/odam.cfg"), UsageError);
}

TEST_CASE("echo_config round trips every key") {
    RunConfig c = small();
    c.toy.translation = {0.5, 0.25};
    c.train.similarity_scale = 3.5;
    c.inlier_threshold = 0.4;
    const std::string echo = echo_config(c);
    const RunConfig back = parse_config(echo);
    CHECK(echo_config(back) == echo);
    std::size_t lines = 0;
    for (char ch : echo) lines += ch == '\n';
    CHECK(lines == config_keys().size());
}

TEST_CASE("the shipped toy config parses") {
    const RunConfig c = load_config(fs::path(ODAM_SOURCE_DIR) / "configs" / "toy.cfg");
    CHECK(c.toy.identities == 4);
    CHECK(c.train.epochs == 50);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("state file round trip") {
    TargetState st = unit_target_state(3);
    st.weights = {0.7, 0.123456789, 1.0 / 3.0};
    st.classes[1] = PseudoClass::Outlier;
    st.epoch = 12;
    const auto p = fresh("state") / "state";
    write_state(st, p);
    CHECK(read_state(p) == st);
}

TEST_CASE("cmd_gen writes datasets and is byte-identical per seed") {
    std::ostringstream log;
    const auto a = fresh("gen_a"), b = fresh("gen_b");
    cmd_gen(RunConfig{}, a, log);
    cmd_gen(RunConfig{}, b, log);
    for (const char* f : {"source.data", "target.data", "config.echo"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(slurp(a / "source.data").rfind("odam-v1 2\n", 0) == 0);
    CHECK(slurp(a / "target.data").rfind("odam-v1 2\n", 0) == 0);

    RunConfig bad;
    bad.toy.outlier_ratio = 0.6;
    CHECK_THROWS_AS(cmd_gen(bad, fresh("gen_bad"), log), OutlierRatioError);
}

TEST_CASE("train then eval writes every artifact") {
    std::ostringstream log;
    const auto dir = fresh("pipeline");
    RunConfig c = small();
    cmd_gen(c, dir / "data", log);
    const auto src = dir / "data" / "source.data", tgt = dir / "data" / "target.data";

    const auto report = cmd_train(c, src, tgt, dir / "run", log);
    CHECK(report.epochs.size() == 2);
    for (const char* f : {"config.echo", "train.log", "checkpoint", "state"}) CHECK(fs::exists(dir / "run" / f));

    const auto ev = cmd_eval(c, dir / "run", src, tgt, log);
    REQUIRE(ev.directions.size() == 3);
    for (const auto& d : ev.directions) {
        CHECK(d.map.map >= 0.0);
        CHECK(d.map.map <= 1.0);
        CHECK(fs::exists(dir / "run" / "eval" / (d.direction + ".report")));
        CHECK(fs::exists(dir / "run" / "pr" / (d.direction + ".dat")));
    }
    CHECK(fs::exists(dir / "run" / "eval" / "outliers.report"));
    CHECK(slurp(dir / "run" / "eval" / "t2s.report").find("map = ") != std::string::npos);

    c.directions = {"t2s"};
    CHECK(cmd_eval(c, dir / "run", src, tgt, log).directions.size() == 1);

    // Missing dataset: the message names the path.
    try {
        cmd_train(c, dir / "absent.data", tgt, dir / "run2", log);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("absent.data") != std::string::npos);
    }
}

TEST_CASE("train log is deterministic apart from wall time") {
    std::ostringstream log;
    const auto dir = fresh("det");
    const RunConfig c = small();
    cmd_gen(c, dir / "data", log);
    const auto src = dir / "data" / "source.data", tgt = dir / "data" / "target.data";
    cmd_train(c, src, tgt, dir / "a", log);
    cmd_train(c, src, tgt, dir / "b", log);
    CHECK(slurp(dir / "a" / "checkpoint") == slurp(dir / "b" / "checkpoint"));
    CHECK(slurp(dir / "a" / "state") == slurp(dir / "b" / "state"));
    auto strip_time = [](const std::string& text) {
        std::istringstream is(text);
        std::string line, out;
        while (std::getline(is, line)) out += line.substr(0, line.rfind(' ')) + '\n';
        return out;
    };
    CHECK(strip_time(slurp(dir / "a" / "train.log")) == strip_time(slurp(dir / "b" / "train.log")));
}

TEST_CASE("eval refuses a checkpoint of the wrong input dim") {
    std::ostringstream log;
    const auto dir = fresh("dim");
    RunConfig c2 = small();
    cmd_gen(c2, dir / "d2", log);
    cmd_train(c2, dir / "d2" / "source.data", dir / "d2" / "target.data", dir / "run", log);
    RunConfig c16 = small();
    c16.toy.dim = 16;
    cmd_gen(c16, dir / "d16", log);
    fs::remove(dir / "run" / "state");
    try {
        cmd_eval(c16, dir / "run", dir / "d16" / "source.data", dir / "d16" / "target.data", log);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("input dim 2, data has dim 16") != std::string::npos);
    }
}

TEST_CASE("cmd_sweep rows and usage errors") {
    std::ostringstream log;
    const auto dir = fresh("sweep");
    const RunConfig c = small();
    const auto cells = cmd_sweep(c, {0.1}, {1}, dir, log);
    CHECK(cells.size() == 2);
    std::size_t rows = 0;
    std::istringstream table(slurp(dir / "table.txt"));
    for (std::string line; std::getline(table, line);) rows += line[0] != '#';
    CHECK(rows == 2);
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(fs::exists(dir / "r0.1_s1" / "da-outlier-detection" / "eval" / "t2s.report"));
    CHECK(fs::exists(dir / "r0.1_s1" / "siamese-da-out" / "checkpoint"));

    CHECK_THROWS_AS(cmd_sweep(c, {}, {1}, fresh("sweep_empty"), log), UsageError);
    CHECK_THROWS_AS(cmd_sweep(c, {0.1}, {}, fresh("sweep_empty"), log), UsageError);
    CHECK_THROWS_AS(cmd_sweep(c, {0.1, 0.6}, {1}, fresh("sweep_bad"), log), OutlierRatioError);
}

TEST_CASE("sweep cell and aggregate counts") {
    // 4 ratios x 5 seeds x 2 modes = 40 runs, 8 aggregate rows; counted on a cheap config.
    std::ostringstream log;
    const auto dir = fresh("sweep_full");
    RunConfig c = small();
    c.train.epochs = 1;
    c.toy.per_identity = 6;
    c.train.pairs_per_batch = 2;
    const auto cells = cmd_sweep(c, {0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4, 5}, dir, log);
    CHECK(cells.size() == 40);
    std::size_t rows = 0;
    std::istringstream summary(slurp(dir / "summary.txt"));
    for (std::string line; std::getline(summary, line);) rows += line[0] != '#';
    CHECK(rows == 8);
}

TEST_CASE("mean_std") {
    CHECK(mean_std({}) == std::pair<double, double>{0.0, 0.0});
    CHECK(mean_std({2.0}) == std::pair<double, double>{2.0, 0.0});
    const auto [m, s] = mean_std({1.0, 2.0, 3.0});
    CHECK(m == 2.0);
    CHECK(s == 1.0);
}

TEST_CASE("front end exit codes") {
    const auto dir = fresh("exe");
    const std::string out = " --out " + (dir / "d").string();
    CHECK(run_cli("gen" + out) == 0);
    CHECK(fs::exists(dir / "d" / "target.data"));
    const std::string data = " " + (dir / "d" / "source.data").string() + " " + (dir / "d" / "target.data").string();
    CHECK(run_cli("train --out " + (dir / "r").string() + " --mode dann" + data) == 2);
    CHECK(run_cli("train --out " + (dir / "r").string() + " " + (dir / "none.data").string() + " " +
                  (dir / "d" / "target.data").string()) == 1);
    CHECK(run_cli("sweep --ratios \"\"" + out) == 2);
    CHECK(run_cli("eval --directions t2x --out " + (dir / "r").string() + data) == 2);
    CHECK(run_cli("frobnicate") != 0);

    std::ofstream(dir / "ratio.cfg") << "outlier_ratio = 0.6\n";
    CHECK(run_cli("gen --config " + (dir / "ratio.cfg").string() + out) == 1);
}
