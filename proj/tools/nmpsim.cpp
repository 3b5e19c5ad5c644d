// Command-line front end: single runs, sweeps, baseline comparisons, and
// plot-ready figure data for the chiplet near-memory inference simulator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmpsim/baselines.hpp"
#include "nmpsim/engine.hpp"
#include "nmpsim/plan_io.hpp"
#include "nmpsim/report_io.hpp"

namespace fs = std::filesystem;
using namespace nmpsim;

namespace {

// Exit codes, documented in the README:
//   0 ok, 2 usage, 3 missing file, 4 config/schema violation,
//   5 capacity error, 6 mapping error, 7 simulation error, 1 other.
constexpr int kExitUsage = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitConfig = 4;
constexpr int kExitCapacity = 5;
constexpr int kExitMapping = 6;
constexpr int kExitSimulation = 7;

struct WorkloadFlags {
    int prompt_tokens = 128;
    std::string image = "512x512";
    int output_tokens = 488;
};

ImageDims parse_image(const std::string& s) {
    if (s.empty() || s == "none") return {};
    const auto x = s.find('x');
    if (x == std::string::npos)
        throw ConfigError("--image expects WxH (e.g. 512x512) or 'none', got '" + s + "'");
    ImageDims d;
    d.width = std::stoi(s.substr(0, x));
    d.height = std::stoi(s.substr(x + 1));
    if (d.width < 0 || d.height < 0) throw ConfigError("--image dims must be non-negative");
    return d;
}

PlacementPolicy parse_policy(const std::string& s) {
    if (s == "het" || s == "heterogeneous") return PlacementPolicy::Heterogeneous;
    if (s == "dram-only" || s == "dramonly") return PlacementPolicy::DramOnly;
    throw ConfigError("--policy must be het|dram-only, got '" + s + "'");
}

RunInputs make_inputs(const std::string& model_path, const std::string& hw,
                      const std::string& policy, const WorkloadFlags& wl) {
    RunInputs in;
    in.model = load_model_config(model_path);
    in.platform = load_platform(hw);
    in.policy = parse_policy(policy.empty() ? in.platform.default_policy : policy);
    in.prompt_tokens = wl.prompt_tokens;
    in.image = parse_image(wl.image);
    in.output_tokens = wl.output_tokens;
    return in;
}

void write_report_files(const SimReport& rep, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", report_to_json(rep));
    write_text_file(out_dir + "/report.csv",
                    report_csv_header() + "\n" + report_csv_row(rep) + "\n");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_run(const std::string& model, const std::string& hw, const std::string& policy,
            const WorkloadFlags& wl, const std::string& out_dir, const std::string& trace_path,
            const std::string& plan_path, const std::string& dump_plan_path) {
    RunInputs in = make_inputs(model, hw, policy, wl);

    std::ofstream trace_file;
    TraceSink sink;
    if (!trace_path.empty()) {
        trace_file.open(trace_path, std::ios::binary);
        if (!trace_file) throw FileError("cannot write trace file: " + trace_path);
        sink = [&trace_file](const TraceRecord& r) {
            trace_file << "{\"time_ps\":" << r.time_ps << ",\"chiplet\":\"" << r.chiplet
                       << "\",\"event\":\"" << r.event << "\",\"id\":" << r.id << "}\n";
        };
    }

    SimReport rep;
    if (!plan_path.empty() || !dump_plan_path.empty()) {
        const OperatorGraph graph =
            build_graph(in.model, in.prompt_tokens, in.image, in.output_tokens);
        MappingPlan plan = plan_path.empty() ? build_plan(graph, in.platform, in.policy)
                                             : load_plan(plan_path);
        if (!dump_plan_path.empty()) {
            write_text_file(dump_plan_path, plan_to_json(plan));
            std::cout << "plan written to " << dump_plan_path << "\n";
        }
        rep = run(graph, plan, in.platform, sink ? &sink : nullptr);
    } else {
        rep = simulate(in, sink ? &sink : nullptr);
    }

    write_report_files(rep, out_dir);
    std::cout << rep.model_name << " [" << rep.policy << "]: " << rep.steady_decode_token_per_s
              << " token/s steady decode, " << rep.avg_power_w << " W avg, " << rep.token_per_j
              << " token/J, total " << rep.total_latency_ns * 1e-6 << " ms\n"
              << "reports written to " << out_dir << "\n";
    return 0;
}

int cmd_sweep(const std::string& model, const std::string& hw, const std::string& policy,
              const WorkloadFlags& wl, const std::string& axis_name, const std::string& values,
              const std::string& out_dir, int jobs) {
    RunInputs base = make_inputs(model, hw, policy, wl);
    const SweepAxis axis = parse_sweep_axis(axis_name);
    const std::vector<std::string> vals = split_csv(values);
    if (vals.empty()) throw ConfigError("sweep: --values must be a non-empty list");
    const auto points = sweep(base, axis, vals, jobs);

    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "axis,value,ok,error," << report_csv_header() << "\n";
    bool any_failed = false;
    for (const auto& p : points) {
        csv << axis_name << ',' << p.value << ',' << (p.ok ? 1 : 0) << ",\"" << p.error << "\",";
        if (p.ok)
            csv << report_csv_row(p.report);
        else
            any_failed = true;
        csv << "\n";
    }
    write_text_file(out_dir + "/sweep.csv", csv.str());
    std::cout << "sweep over " << axis_name << " (" << points.size() << " points) written to "
              << out_dir << "/sweep.csv" << (any_failed ? " (some points failed)" : "") << "\n";
    return 0;
}

int cmd_compare(const std::string& report_path, const std::string& model, const std::string& hw,
                const std::string& policy, const WorkloadFlags& wl,
                const std::string& baseline_name, const std::string& baselines_path,
                const std::string& out_dir) {
    SimReport rep;
    if (!report_path.empty()) {
        std::ifstream in(report_path);
        if (!in) throw FileError("cannot open report: " + report_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto j = nlohmann::json::parse(ss.str());
        rep.model_name = j.at("model").get<std::string>();
        rep.steady_decode_token_per_s = j.at("steady_decode_token_per_s").get<double>();
        rep.token_per_j = j.at("token_per_j").get<double>();
    } else {
        if (model.empty())
            throw ConfigError("compare: provide --report or --model");
        rep = simulate(make_inputs(model, hw, policy, wl));
    }

    auto all = baselines_path.empty() ? builtin_baselines() : load_baselines(baselines_path);
    std::vector<BaselineRecord> chosen;
    if (baseline_name == "all") chosen = all;
    else chosen.push_back(find_baseline(all, baseline_name));

    const std::string table = comparison_table(rep, chosen);
    std::cout << table;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text_file(out_dir + "/compare.csv", table);
    }
    return 0;
}

int cmd_figdata(const std::string& figure, const std::string& models_csv, const std::string& hw,
                const WorkloadFlags& wl, const std::string& out_dir) {
    const std::vector<std::string> model_paths = split_csv(models_csv);
    if (model_paths.empty()) throw ConfigError("figdata: --models must list model configs");
    fs::create_directories(out_dir);
    std::ostringstream csv;

    if (figure == "fig7") {
        const auto baselines = builtin_baselines();
        const BaselineRecord& jetson = find_baseline(baselines, "jetson");
        csv << "model,tps,power_w,token_per_j,speedup_vs_jetson_lo,speedup_vs_jetson_hi,"
               "efficiency_vs_jetson_lo,efficiency_vs_jetson_hi\n";
        for (const auto& path : model_paths) {
            const SimReport rep = simulate(make_inputs(path, hw, "het", wl));
            const Comparison c = compare(rep, jetson);
            csv << rep.model_name << ',' << rep.steady_decode_token_per_s << ','
                << rep.avg_power_w << ',' << rep.token_per_j << ',' << c.speedup_vs_lo << ','
                << c.speedup_vs_hi << ',' << c.efficiency_vs_lo << ',' << c.efficiency_vs_hi
                << "\n";
        }
        write_text_file(out_dir + "/fig7.csv", csv.str());
    } else if (figure == "fig9") {
        csv << "model,output_tokens,latency_ms,energy_j\n";
        for (const auto& path : model_paths) {
            RunInputs base = make_inputs(path, hw, "het", wl);
            const auto points =
                sweep(base, SweepAxis::SeqLen, {"128", "256", "512", "1024", "2048", "4096"}, 1);
            for (const auto& p : points) {
                if (!p.ok) throw SimulationError("fig9 point " + p.value + " failed: " + p.error);
                csv << p.report.model_name << ',' << p.value << ','
                    << p.report.total_latency_ns * 1e-6 << ',' << p.report.energy_per_inference_j
                    << "\n";
            }
        }
        write_text_file(out_dir + "/fig9.csv", csv.str());
    } else if (figure == "fig10") {
        csv << "model,het_tps,dram_only_tps,speedup,efficiency_ratio\n";
        for (const auto& path : model_paths) {
            RunInputs in = make_inputs(path, hw, "het", wl);
            const SimReport het = simulate(in);
            in.policy = PlacementPolicy::DramOnly;
            const SimReport dro = simulate(in);
            csv << het.model_name << ',' << het.steady_decode_token_per_s << ','
                << dro.steady_decode_token_per_s << ','
                << het.steady_decode_token_per_s / dro.steady_decode_token_per_s << ','
                << het.token_per_j / dro.token_per_j << "\n";
        }
        write_text_file(out_dir + "/fig10.csv", csv.str());
    } else {
        throw ConfigError("figdata: --figure must be fig7|fig9|fig10, got '" + figure + "'");
    }
    std::cout << figure << " data written to " << out_dir << "/" << figure << ".csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Performance and energy simulator for heterogeneous near-memory chiplet "
                 "inference"};
    app.require_subcommand(1);

    std::string model, hw = "default", policy, out_dir = "out", trace_path, plan_path,
                dump_plan_path;
    WorkloadFlags wl;
    std::string axis, values, report_path, baseline = "all", baselines_path, figure, models_csv;
    int jobs = 1;

    auto add_workload = [&](CLI::App* cmd) {
        cmd->add_option("--prompt-tokens", wl.prompt_tokens, "text prompt length");
        cmd->add_option("--image", wl.image, "input image WxH or 'none' (default 512x512)");
        cmd->add_option("--output-tokens", wl.output_tokens, "decode steps to simulate");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "simulate one experiment");
    run_cmd->add_option("--model", model, "model config JSON")->required();
    run_cmd->add_option("--hw", hw, "hardware preset (default|dram-only) or JSON path");
    run_cmd->add_option("--policy", policy, "het|dram-only (default: preset policy)");
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--trace", trace_path, "write line-delimited event trace");
    run_cmd->add_option("--plan", plan_path, "re-ingest a previously dumped mapping plan");
    run_cmd->add_option("--dump-plan", dump_plan_path, "write the mapping plan JSON");
    add_workload(run_cmd);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run an axis sweep");
    sweep_cmd->add_option("--model", model, "model config JSON")->required();
    sweep_cmd->add_option("--hw", hw, "hardware preset or JSON path");
    sweep_cmd->add_option("--policy", policy, "het|dram-only");
    sweep_cmd->add_option("--axis", axis, "seqlen|policy|linkbw|tierpolicy")->required();
    sweep_cmd->add_option("--values", values, "comma-separated axis values")->required();
    sweep_cmd->add_option("--out", out_dir, "output directory");
    sweep_cmd->add_option("--jobs", jobs, "concurrent sweep points");
    add_workload(sweep_cmd);

    CLI::App* compare_cmd = app.add_subcommand("compare", "compare against baseline constants");
    compare_cmd->add_option("--report", report_path, "existing report.json");
    compare_cmd->add_option("--model", model, "model config JSON (simulated if no --report)");
    compare_cmd->add_option("--hw", hw, "hardware preset or JSON path");
    compare_cmd->add_option("--policy", policy, "het|dram-only");
    compare_cmd->add_option("--baseline", baseline, "jetson|facil|all");
    compare_cmd->add_option("--baselines-file", baselines_path, "baseline constants JSON");
    compare_cmd->add_option("--out", out_dir, "optional output directory");
    add_workload(compare_cmd);

    CLI::App* figdata_cmd = app.add_subcommand("figdata", "emit plot-ready figure data");
    figdata_cmd->add_option("--figure", figure, "fig7|fig9|fig10")->required();
    figdata_cmd->add_option("--models", models_csv, "comma-separated model config paths")
        ->required();
    figdata_cmd->add_option("--hw", hw, "hardware preset or JSON path");
    figdata_cmd->add_option("--out", out_dir, "output directory");
    add_workload(figdata_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (run_cmd->parsed())
            return cmd_run(model, hw, policy, wl, out_dir, trace_path, plan_path, dump_plan_path);
        if (sweep_cmd->parsed())
            return cmd_sweep(model, hw, policy, wl, axis, values, out_dir, jobs);
        if (compare_cmd->parsed())
            return cmd_compare(report_path, model, hw, policy, wl, baseline, baselines_path,
                               out_dir == "out" ? "" : out_dir);
        if (figdata_cmd->parsed()) return cmd_figdata(figure, models_csv, hw, wl, out_dir);
    } catch (const FileError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return kExitMissingFile;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const MappingError& e) {
        std::cerr << "mapping error: " << e.what() << "\n";
        return kExitMapping;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kExitSimulation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
