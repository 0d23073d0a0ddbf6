#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ncp/config.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = "cli_scratch";

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunResult run_cli(const std::string& args) {
    fs::create_directories(kScratch);
    fs::path out = kScratch / "stdout.txt";
    fs::path err = kScratch / "stderr.txt";
    std::string cmd = std::string("\"") + NCP_CLI_BIN + "\" " + args + " > " + out.string() +
                      " 2> " + err.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << text;
}

fs::path train_config() {
    fs::path path = kScratch / "train.cfg";
    write_text(path,
               "# toy training setup\n"
               "[dataset]\n"
               "family = linear_gaussian\n"
               "n = 512\n"
               "n_val = 200\n"
               "seed = 3\n"
               "\n"
               "[train]\n"
               "epochs = 8\n"
               "batch_size = 32\n"
               "patience = 8\n"
               "d = 4\n"
               "hidden_u = 8\n"
               "hidden_v = 8\n"
               "\n"
               "[postprocess]\n"
               "mode = whitened\n"
               "eps = 1e-6\n");
    return path;
}

fs::path bench_config() {
    fs::path path = kScratch / "bench.cfg";
    write_text(path,
               "[train]\n"
               "epochs = 2\n"
               "batch_size = 16\n"
               "patience = 2\n"
               "d = 4\n"
               "hidden_u = 8\n"
               "hidden_v = 8\n"
               "[postprocess]\n"
               "mode = whitened\n");
    return path;
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

// Trains once per binary invocation test session and reuses the archive.
fs::path shared_model() {
    static fs::path model;
    if (model.empty()) {
        fs::path cfg = train_config();
        RunResult r = run_cli("--config " + cfg.string() + " --out " +
                              (kScratch / "shared").string() + " train");
        REQUIRE(r.code == 0);
        model = kScratch / "shared" / "model.ncpm";
        REQUIRE(fs::exists(model));
    }
    return model;
}

}  // namespace

TEST_CASE("config text parsing") {
    ncp::ConfigMap cfg = ncp::parse_config_text(
        "top = 1\n[alpha]\nkey = two words  # comment\n\n[beta]\nkey=3\n");
    CHECK(ncp::config_str(cfg, "top", "") == "1");
    CHECK(ncp::config_str(cfg, "alpha.key", "") == "two words");
    CHECK(ncp::config_num(cfg, "beta.key", 0) == 3.0);
    CHECK(ncp::config_num(cfg, "missing", 7.5) == 7.5);
    CHECK_THROWS(ncp::parse_config_text("key_without_value\n"));
    CHECK_THROWS(ncp::parse_config_text("[unclosed\n"));
    CHECK_THROWS(ncp::config_num(cfg, "alpha.key", 0));
    CHECK_THROWS(ncp::load_config("no_such_config_file.cfg"));
}

TEST_CASE("train writes a model archive and a loss history") {
    fs::path cfg = train_config();
    fs::path out = kScratch / "train_a";
    RunResult r = run_cli("--config " + cfg.string() + " --out " + out.string() + " train");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("trained") != std::string::npos);
    CHECK(fs::exists(out / "model.ncpm"));
    CHECK(fs::exists(out / "history.csv"));
    std::string history = slurp(out / "history.csv");
    CHECK(history.rfind("epoch,train_loss,train_reg,val_loss\n", 0) == 0);
    CHECK(count_lines(history) == 1 + 8);
}

TEST_CASE("rerunning the same config produces identical artifacts") {
    fs::path cfg = train_config();
    fs::path out_a = kScratch / "repro_a";
    fs::path out_b = kScratch / "repro_b";
    REQUIRE(run_cli("--config " + cfg.string() + " --out " + out_a.string() + " train").code == 0);
    REQUIRE(run_cli("--config " + cfg.string() + " --out " + out_b.string() + " train").code == 0);
    std::string model_a = slurp(out_a / "model.ncpm");
    CHECK(!model_a.empty());
    CHECK(model_a == slurp(out_b / "model.ncpm"));
    CHECK(slurp(out_a / "history.csv") == slurp(out_b / "history.csv"));
}

TEST_CASE("the global seed flag overrides the config seed") {
    fs::path cfg = train_config();
    fs::path out_a = kScratch / "seed_a";
    fs::path out_b = kScratch / "seed_b";
    REQUIRE(run_cli("--config " + cfg.string() + " --seed 9 --out " + out_a.string() +
                    " train").code == 0);
    REQUIRE(run_cli("--config " + cfg.string() + " --seed 9 --out " + out_b.string() +
                    " train").code == 0);
    CHECK(slurp(out_a / "model.ncpm") == slurp(out_b / "model.ncpm"));
    CHECK(slurp(out_a / "model.ncpm") != slurp(shared_model()));
}

TEST_CASE("train rejects a missing config or dataset file") {
    RunResult r = run_cli("--config no_such.cfg train");
    CHECK(r.code == 2);
    CHECK(r.err.find("config not found") != std::string::npos);

    fs::path cfg = kScratch / "missing_csv.cfg";
    write_text(cfg, "[dataset]\ncsv = not_there.csv\n");
    RunResult rr = run_cli("--config " + cfg.string() + " train");
    CHECK(rr.code == 2);
    CHECK(rr.err.find("not found") != std::string::npos);
}

TEST_CASE("infer statistics emit the documented shapes") {
    fs::path model = shared_model();
    std::string base = "infer --model " + model.string();

    RunResult mean = run_cli(base + " --statistic mean --x 0.5");
    REQUIRE(mean.code == 0);
    CHECK(mean.out.find("\"mean\":") != std::string::npos);

    RunResult quant = run_cli(base + " --statistic quantile --x 0.5 --q 0.25");
    REQUIRE(quant.code == 0);
    CHECK(quant.out.find("\"q\": 0.25") != std::string::npos);
    CHECK(quant.out.find("\"value\":") != std::string::npos);

    RunResult moment = run_cli(base + " --statistic moment --x 0.5 --order 2");
    REQUIRE(moment.code == 0);
    CHECK(moment.out.find("\"order\": 2") != std::string::npos);

    RunResult interval = run_cli(base + " --statistic interval --x 0.5 --alpha 0.2");
    REQUIRE(interval.code == 0);
    CHECK(interval.out.find("\"nominal\": 0.8") != std::string::npos);
    CHECK(interval.out.find("\"lower\":") != std::string::npos);
    CHECK(interval.out.find("\"achieved\":") != std::string::npos);

    RunResult prob = run_cli(base + " --statistic prob --x 0.5 --b-lo -1 --b-hi 1");
    REQUIRE(prob.code == 0);
    CHECK(prob.out.find("\"raw\":") != std::string::npos);
    CHECK(prob.out.find("\"sanitized\":") != std::string::npos);

    RunResult cov = run_cli(base + " --statistic cov --x 0.5");
    REQUIRE(cov.code == 0);
    CHECK(count_lines(cov.out) == 1);

    RunResult box = run_cli(base + " --statistic mean --box-lo -0.5 --box-hi 0.5");
    CHECK(box.code == 0);
}

TEST_CASE("infer writes files under --out and honors the grid size") {
    fs::path model = shared_model();
    fs::path out = kScratch / "infer_out";
    RunResult r = run_cli("--out " + out.string() + " infer --model " + model.string() +
                          " --statistic cdf --x 0.0 --grid-points 64");
    REQUIRE(r.code == 0);
    std::string csv = slurp(out / "infer_cdf.csv");
    CHECK(csv.rfind("t,F_raw,F_sanitized\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 64);
    CHECK(csv == r.out);
}

TEST_CASE("infer rejects malformed queries") {
    fs::path model = shared_model();
    std::string base = "infer --model " + model.string();
    CHECK(run_cli(base + " --statistic sideways --x 0.5").code == 2);
    CHECK(run_cli(base + " --statistic mean").code == 2);
    CHECK(run_cli(base + " --statistic prob --x 0.5").code == 2);
    CHECK(run_cli("infer --model no_such_model.ncpm --statistic mean --x 0.5").code == 2);
    CHECK(run_cli("infer --statistic mean --x 0.5").code != 0);  // missing required --model
}

TEST_CASE("cde benchmark profile writes reports") {
    fs::path cfg = bench_config();
    fs::path out = kScratch / "bench_cde";
    RunResult r = run_cli("--config " + cfg.string() + " --profile linear_gaussian --out " +
                          out.string() + " benchmark --n 128 --seed-count 1");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out / "cde_linear_gaussian.csv"));
    CHECK(fs::exists(out / "cde_linear_gaussian.json"));
    std::string js = slurp(out / "cde_linear_gaussian.json");
    CHECK(js.find("\"mean_ks\":") != std::string::npos);
    CHECK(js.find("\"std_ks\":") != std::string::npos);
    CHECK(r.out.find("mean_ks") != std::string::npos);
    std::string csv = slurp(out / "cde_linear_gaussian.csv");
    CHECK(csv.rfind("dataset,seed,x_index,ks\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 19);
}

TEST_CASE("coverage benchmark profile writes reports") {
    fs::path cfg = bench_config();
    fs::path out = kScratch / "bench_cov";
    RunResult r = run_cli("--config " + cfg.string() + " --profile laplace_coverage --out " +
                          out.string() + " benchmark --n 200 --seed-count 1 --alpha 0.25");
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out / "coverage_laplace.csv"));
    std::string js = slurp(out / "coverage_laplace.json");
    CHECK(js.find("\"coverage\":") != std::string::npos);
    CHECK(js.find("\"mean_width\":") != std::string::npos);
    CHECK(js.find("\"nominal\": 0.75") != std::string::npos);
}

TEST_CASE("benchmark validates its profile") {
    CHECK(run_cli("benchmark --n 128").code == 2);
    CHECK(run_cli("--profile venusian_weather benchmark --n 128").code == 2);
}

TEST_CASE("oracle check passes, and the sabotage flag proves it can fail") {
    RunResult ok = run_cli("oracle-check --sizes 2,4 --trials 3");
    CAPTURE(ok.err);
    REQUIRE(ok.code == 0);
    CHECK(ok.out.find("[PASS] operator reconstruction") != std::string::npos);
    CHECK(ok.out.find("[PASS] rank truncation bound") != std::string::npos);
    CHECK(ok.out.find("[PASS] divergence optimum") != std::string::npos);
    CHECK(ok.out.find("[PASS] loss estimator identity") != std::string::npos);
    CHECK(ok.out.find("[PASS] loss gradients") != std::string::npos);
    CHECK(ok.out.find("all oracle checks passed") != std::string::npos);

    RunResult bad = run_cli("oracle-check --sizes 2,4 --trials 3 --force-failure");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("[FAIL] operator reconstruction") != std::string::npos);

    CHECK(run_cli("oracle-check --sizes '' --trials 3").code == 2);
    CHECK(run_cli("oracle-check --sizes 1,4 --trials 3").code == 2);
}
