// Command-line driver: generate synthetic data, run ordering experiments,
// verify the distance bounds, and summarize existing trace directories.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "gradorder/harness.hpp"

namespace {

int cmd_gen_data(std::uint64_t seed, std::size_t n, std::size_t dim, double low, double high,
                 const std::string& out_path) {
    const gradorder::Dataset d = gradorder::gen_synthetic(seed, n, dim, low, high);
    gradorder::save_csv(d, out_path);
    std::cout << "wrote " << d.rows << " x " << d.cols << " samples to " << out_path << "\n";
    return 0;
}

int cmd_run(const std::string& config_path) {
    const gradorder::ExperimentConfig cfg = gradorder::load_config(config_path);
    const gradorder::ExperimentSummary summary = gradorder::run_experiment(cfg);
    for (const auto& run : summary.runs) {
        std::cout << summary.experiment << " strategy=" << run.strategy << " seed=" << run.seed
                  << " status=" << run.status;
        if (run.final_loss) std::cout << " final_loss=" << gradorder::format_double(*run.final_loss);
        if (run.final_accuracy)
            std::cout << " final_accuracy=" << gradorder::format_double(*run.final_accuracy);
        std::cout << "\n";
    }
    std::cout << "summary: " << summary.summary_path.string() << "\n";
    return summary.all_diverged() ? 1 : 0;
}

int cmd_bound_check(const std::string& config_path) {
    const gradorder::ExperimentConfig cfg = gradorder::load_config(config_path);
    const gradorder::BoundCheckReport report = gradorder::run_bound_check(cfg);

    std::cout << "bound check: " << report.experiment << " seed=" << report.seed
              << " strategy=" << report.strategy << "\n";
    std::cout << "  x* residual gradient norm: "
              << gradorder::format_double(report.x_star_grad_norm) << "\n";
    std::cout << "  distance^2 entering checked phase: "
              << gradorder::format_double(report.warm_dist_sq) << "\n";
    std::cout << "  thm1=" << report.thm1_status << " thm2=" << report.thm2_status
              << " thm3=" << report.thm3_status << " thm4=" << report.thm4_status << "\n";
    for (const auto& row : report.rows) {
        std::cout << "  epoch " << row.epoch << ": dist_sq="
                  << gradorder::format_double(row.dist_sq)
                  << " measured_next=" << gradorder::format_double(row.measured_next);
        if (row.thm1) std::cout << " thm1=" << gradorder::format_double(*row.thm1);
        if (row.thm2) std::cout << " thm2=" << gradorder::format_double(*row.thm2);
        if (row.thm3) std::cout << " thm3=" << gradorder::format_double(*row.thm3);
        if (row.thm4) std::cout << " thm4=" << gradorder::format_double(*row.thm4);
        std::cout << (row.pass ? " PASS" : " FAIL") << "\n";
    }
    std::cout << "  pass rate: " << report.pass_rate << "\n";

    std::filesystem::create_directories(cfg.output_dir);
    const auto path = cfg.output_dir / (cfg.experiment + "__bound_check.json");
    std::ofstream out(path);
    out << gradorder::bound_report_to_json(report).dump(2) << '\n';
    std::cout << "report: " << path.string() << "\n";
    return report.pass_rate == 1.0 ? 0 : 2;
}

int cmd_compare(const std::string& dir) {
    const auto rows = gradorder::summarize_trace_dir(dir);
    if (rows.empty()) {
        std::cout << "no trace files found in " << dir << "\n";
        return 1;
    }
    struct Agg {
        double final_sum = 0.0;
        std::size_t count = 0;
    };
    std::map<std::pair<std::string, std::string>, Agg> agg;
    for (const auto& r : rows) {
        auto& a = agg[{r.experiment, r.strategy}];
        a.final_sum += r.final_loss;
        a.count += 1;
    }
    std::printf("%-28s %-26s %6s %18s\n", "experiment", "strategy", "seeds", "mean final loss");
    for (const auto& [key, a] : agg) {
        std::printf("%-28s %-26s %6zu %18.10g\n", key.first.c_str(), key.second.c_str(), a.count,
                    a.final_sum / static_cast<double>(a.count));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-norm example orderings for shuffling SGD"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
    std::uint64_t seed = 1;
    std::size_t n = 32, dim = 2;
    double low = -10.0, high = 10.0;
    std::string out_path = "synthetic.csv";
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--n", n, "number of samples");
    gen->add_option("--dim", dim, "feature dimension");
    gen->add_option("--low", low, "coordinate lower bound");
    gen->add_option("--high", high, "coordinate upper bound");
    gen->add_option("--out", out_path, "output CSV path");

    auto* run = app.add_subcommand("run", "run an ordering-comparison experiment");
    std::string run_config;
    run->add_option("--config", run_config, "experiment config JSON")->required();

    auto* bound = app.add_subcommand("bound-check", "verify the distance upper bounds on a run");
    std::string bound_config;
    bound->add_option("--config", bound_config, "experiment config JSON")->required();

    auto* compare = app.add_subcommand("compare", "summarize existing trace directories");
    std::string compare_dir = ".";
    compare->add_option("--dir", compare_dir, "directory holding trace CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(seed, n, dim, low, high, out_path);
        if (run->parsed()) return cmd_run(run_config);
        if (bound->parsed()) return cmd_bound_check(bound_config);
        if (compare->parsed()) return cmd_compare(compare_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
