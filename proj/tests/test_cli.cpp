#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = NMPSIM_CLI_PATH;
const std::string kConfigs = NMPSIM_CONFIG_DIR;

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& tag) {
    fs::path d = fs::temp_directory_path() / ("nmpsim_cli_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string small_workload() { return " --prompt-tokens 16 --output-tokens 24 "; }

}  // namespace

TEST_CASE("run writes report files and exits zero") {
    const fs::path out = temp_dir("run");
    const int rc = run_cli("run --model " + kConfigs + "/models/fastvlm-0.6b.json --out " +
                           out.string() + small_workload());
    CHECK(rc == 0);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "report.csv"));
    const std::string json = slurp(out / "report.json");
    for (const char* key : {"\"model\"", "\"steady_decode_token_per_s\"", "\"token_per_j\"",
                            "\"avg_power_w\"", "\"traffic\"", "\"kv\""})
        CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("identical runs produce byte-identical report files") {
    const fs::path out1 = temp_dir("det1"), out2 = temp_dir("det2");
    REQUIRE(run_cli("run --model " + kConfigs + "/models/mobilevlm-1.7b.json --out " +
                    out1.string() + small_workload()) == 0);
    REQUIRE(run_cli("run --model " + kConfigs + "/models/mobilevlm-1.7b.json --out " +
                    out2.string() + small_workload()) == 0);
    CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
    CHECK(slurp(out1 / "report.csv") == slurp(out2 / "report.csv"));
}

TEST_CASE("error paths carry distinct documented exit codes") {
    const fs::path out = temp_dir("err");
    // 3: missing file
    CHECK(run_cli("run --model /no/such/model.json --out " + out.string()) == 3);
    // 4: schema violation names the offending key (checked via stderr capture)
    const fs::path bad = out / "bad.json";
    std::ofstream(bad) << R"({"name":"x","hidden_dim":64,"num_layers":1,"num_heads":2,
        "head_dim":32,"ffn_dim":128,"vocab_size":100,"mystery_knob":5})";
    const std::string cmd = kCli + " run --model " + bad.string() + " --out " + out.string() +
                            " 2> " + (out / "stderr.txt").string() + " > /dev/null";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 4);
    CHECK(slurp(out / "stderr.txt").find("mystery_knob") != std::string::npos);
    // 2: usage error
    CHECK(run_cli("run") == 2);
    CHECK(run_cli("no-such-subcommand") == 2);
}

TEST_CASE("sweep emits one row per point") {
    const fs::path out = temp_dir("sweep");
    REQUIRE(run_cli("sweep --model " + kConfigs +
                    "/models/fastvlm-0.6b.json --axis seqlen --values 8,16,32 --out " +
                    out.string() + " --prompt-tokens 8") == 0);
    const std::string csv = slurp(out / "sweep.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 points
    CHECK(csv.find("seqlen,8,1,") != std::string::npos);
    CHECK(csv.find("seqlen,32,1,") != std::string::npos);
}

TEST_CASE("compare prints speedup rows against the shipped constants") {
    const fs::path out = temp_dir("cmp");
    const std::string cmd = kCli + " compare --model " + kConfigs +
                            "/models/fastvlm-0.6b.json --baseline jetson" + small_workload() +
                            " > " + (out / "stdout.txt").string() + " 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const std::string table = slurp(out / "stdout.txt");
    CHECK(table.find("baseline,") != std::string::npos);
    CHECK(table.find("jetson,7.4,11,") != std::string::npos);
    // unknown baseline -> config error
    CHECK(run_cli("compare --model " + kConfigs +
                  "/models/fastvlm-0.6b.json --baseline hal9000" + small_workload()) == 4);
}

TEST_CASE("figdata emits plot-ready tables") {
    const fs::path out = temp_dir("fig");
    const std::string models = kConfigs + "/models/fastvlm-0.6b.json";
    REQUIRE(run_cli("figdata --figure fig10 --models " + models + " --out " + out.string() +
                    small_workload()) == 0);
    const std::string fig10 = slurp(out / "fig10.csv");
    CHECK(fig10.find("model,het_tps,dram_only_tps,speedup,efficiency_ratio") == 0);
    CHECK(fig10.find("fastvlm-0.6b,") != std::string::npos);

    CHECK(run_cli("figdata --figure fig42 --models " + models + " --out " + out.string()) == 4);
}

TEST_CASE("plan dump and re-ingest reproduce the run") {
    const fs::path out = temp_dir("plan");
    const std::string model = kConfigs + "/models/fastvlm-0.6b.json";
    REQUIRE(run_cli("run --model " + model + " --out " + (out / "a").string() +
                    " --dump-plan " + (out / "plan.json").string() + small_workload()) == 0);
    REQUIRE(fs::exists(out / "plan.json"));
    REQUIRE(run_cli("run --model " + model + " --out " + (out / "b").string() + " --plan " +
                    (out / "plan.json").string() + small_workload()) == 0);
    CHECK(slurp(out / "a/report.json") == slurp(out / "b/report.json"));
}

TEST_CASE("event trace is line-delimited records") {
    const fs::path out = temp_dir("trace");
    REQUIRE(run_cli("run --model " + kConfigs + "/models/fastvlm-0.6b.json --out " +
                    out.string() + " --trace " + (out / "trace.jsonl").string() +
                    " --prompt-tokens 4 --output-tokens 2") == 0);
    std::ifstream in(out / "trace.jsonl");
    std::string line;
    int lines = 0;
    bool shape_ok = true;
    while (std::getline(in, line)) {
        ++lines;
        shape_ok = shape_ok && line.find("\"time_ps\":") != std::string::npos &&
                   line.find("\"chiplet\":") != std::string::npos &&
                   line.find("\"event\":") != std::string::npos &&
                   line.find("\"id\":") != std::string::npos;
    }
    CHECK(lines > 100);
    CHECK(shape_ok);
}
