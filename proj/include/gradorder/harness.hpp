#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gradorder/bounds.hpp"
#include "gradorder/core.hpp"
#include "gradorder/data.hpp"
#include "gradorder/losses.hpp"
#include "gradorder/mlp.hpp"
#include "gradorder/optimizer.hpp"
#include "gradorder/ordering.hpp"

namespace gradorder {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

struct DatasetSpec {
    enum class Kind { Synthetic, Csv } kind = Kind::Synthetic;
    // synthetic; a missing seed means "use the run seed", so every run seed
    // draws its own instance
    std::optional<std::uint64_t> seed;
    std::size_t n = 32;
    std::size_t dim = 2;
    double low = -10.0;
    double high = 10.0;
    // csv
    std::filesystem::path path;
    CsvSchema schema;
    bool normalize = false;  // min-max scale features to [0, 1]
};

struct LossSpec {
    enum class Family { QuarticQuadratic, IndicatorSwitched, LinRegQuartic, Mlp } family =
        Family::QuarticQuadratic;
    double grad_scale = 1e-10;         // LinRegQuartic only
    std::vector<std::size_t> hidden;   // Mlp hidden widths, e.g. [128]
};

struct InitSpec {
    // Default: origin for the analytic losses, seeded uniform net init for Mlp.
    enum class Kind { Default, Value } kind = Kind::Default;
    ParamVector value;
};

struct BoundCheckSpec {
    std::size_t warm_epochs = 0;
    StepSchedule warm_schedule{ScheduleKind::DecreasingPerEpoch, 1e-4, 1};
    OrderingStrategy warm_strategy{StrategyKind::RandomShuffle};
    double tolerance = 1e-9;
};

struct ExperimentConfig {
    std::string experiment = "experiment";
    DatasetSpec dataset;
    LossSpec loss;
    TrainConfig train;
    std::vector<OrderingStrategy> strategies;
    std::vector<std::uint64_t> seeds;
    bool precompute_x_star = false;
    InitSpec init;
    std::filesystem::path output_dir = "out";
    BoundCheckSpec bound_check;
};

// ---------------------------------------------------------------------------
// enum <-> string maps (the JSON vocabulary)
// ---------------------------------------------------------------------------

inline std::string strategy_name(const OrderingStrategy& s) {
    switch (s.kind) {
        case StrategyKind::RandomShuffle: return "random_shuffle";
        case StrategyKind::DecreasingGradNorm: return "decreasing_grad_norm";
        case StrategyKind::IncreasingGradNorm: return "increasing_grad_norm";
        case StrategyKind::Incremental: return "incremental";
        case StrategyKind::LogitNorm:
            return s.logit_order == LogitOrder::WorstFirstByLoss ? "logit_norm_worst_first"
                                                                 : "logit_norm_ascending";
    }
    return "unknown";
}

inline StrategyKind parse_strategy_kind(const std::string& s) {
    if (s == "random_shuffle") return StrategyKind::RandomShuffle;
    if (s == "decreasing_grad_norm") return StrategyKind::DecreasingGradNorm;
    if (s == "increasing_grad_norm") return StrategyKind::IncreasingGradNorm;
    if (s == "incremental") return StrategyKind::Incremental;
    if (s == "logit_norm" || s == "logit_norm_worst_first" || s == "logit_norm_ascending")
        return StrategyKind::LogitNorm;
    throw std::invalid_argument("unknown ordering strategy '" + s + "'");
}

inline OrderingStrategy parse_strategy(const json& j) {
    OrderingStrategy s;
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        s.kind = parse_strategy_kind(name);
        if (name == "logit_norm_ascending") s.logit_order = LogitOrder::AscendingLogitNorm;
        return s;
    }
    s.kind = parse_strategy_kind(j.at("kind").get<std::string>());
    if (j.contains("logit_order")) {
        const std::string o = j.at("logit_order").get<std::string>();
        if (o == "worst_first_by_loss")
            s.logit_order = LogitOrder::WorstFirstByLoss;
        else if (o == "ascending_logit_norm")
            s.logit_order = LogitOrder::AscendingLogitNorm;
        else
            throw std::invalid_argument("unknown logit_order '" + o + "'");
    }
    return s;
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "constant") return ScheduleKind::Constant;
    if (s == "decreasing_per_iteration") return ScheduleKind::DecreasingPerIteration;
    if (s == "decreasing_per_epoch") return ScheduleKind::DecreasingPerEpoch;
    throw std::invalid_argument("unknown schedule kind '" + s + "'");
}

inline std::string schedule_kind_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::DecreasingPerIteration: return "decreasing_per_iteration";
        case ScheduleKind::DecreasingPerEpoch: return "decreasing_per_epoch";
    }
    return "unknown";
}

inline StepSchedule parse_schedule(const json& j) {
    StepSchedule s;
    s.kind = parse_schedule_kind(j.at("kind").get<std::string>());
    s.alpha0 = j.at("alpha0").get<double>();
    if (j.contains("n")) s.n = j.at("n").get<std::size_t>();
    return s;
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "full_ordering") return Algorithm::FullOrdering;
    if (s == "data_selection") return Algorithm::DataSelection;
    if (s == "sort_before_minibatch") return Algorithm::SortBeforeMiniBatch;
    if (s == "sort_within_minibatch") return Algorithm::SortWithinMiniBatch;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    cfg.experiment = j.value("experiment", std::string("experiment"));

    const json& d = j.at("dataset");
    const std::string dkind = d.at("kind").get<std::string>();
    if (dkind == "synthetic") {
        cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
        if (d.contains("seed") && !d.at("seed").is_null())
            cfg.dataset.seed = d.at("seed").get<std::uint64_t>();
        cfg.dataset.n = d.value("n", std::size_t{32});
        cfg.dataset.dim = d.value("dim", std::size_t{2});
        cfg.dataset.low = d.value("low", -10.0);
        cfg.dataset.high = d.value("high", 10.0);
    } else if (dkind == "csv") {
        cfg.dataset.kind = DatasetSpec::Kind::Csv;
        cfg.dataset.path = d.at("path").get<std::string>();
        if (d.contains("target_column")) {
            const json& t = d.at("target_column");
            if (t.is_string())
                cfg.dataset.schema.target = t.get<std::string>();
            else
                cfg.dataset.schema.target = t.get<std::size_t>();
        }
        const std::string tk = d.value("target_kind", std::string("none"));
        cfg.dataset.schema.target_kind = tk == "regression"     ? TargetKind::Regression
                                         : tk == "classification" ? TargetKind::Classification
                                                                  : TargetKind::None;
    } else {
        throw std::invalid_argument("unknown dataset kind '" + dkind + "'");
    }
    cfg.dataset.normalize = d.value("normalize", false);

    const json& l = j.at("loss");
    const std::string fam = l.at("family").get<std::string>();
    if (fam == "quartic_quadratic")
        cfg.loss.family = LossSpec::Family::QuarticQuadratic;
    else if (fam == "indicator_switched")
        cfg.loss.family = LossSpec::Family::IndicatorSwitched;
    else if (fam == "linreg_quartic")
        cfg.loss.family = LossSpec::Family::LinRegQuartic;
    else if (fam == "mlp")
        cfg.loss.family = LossSpec::Family::Mlp;
    else
        throw std::invalid_argument("unknown loss family '" + fam + "'");
    cfg.loss.grad_scale = l.value("grad_scale", 1e-10);
    if (l.contains("hidden")) cfg.loss.hidden = l.at("hidden").get<std::vector<std::size_t>>();

    const json& t = j.at("train");
    cfg.train.algorithm = parse_algorithm(t.at("algorithm").get<std::string>());
    cfg.train.epochs = t.at("epochs").get<std::size_t>();
    cfg.train.batch_size = t.value("batch_size", std::size_t{0});
    cfg.train.select_count = t.value("select_count", std::size_t{0});
    cfg.train.warm_start_epochs = t.value("warm_start_epochs", std::size_t{0});
    if (t.contains("warm_start_strategy"))
        cfg.train.warm_start_strategy = parse_strategy(t.at("warm_start_strategy"));
    cfg.train.schedule = parse_schedule(t.at("schedule"));

    for (const json& s : j.at("strategies")) cfg.strategies.push_back(parse_strategy(s));
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.strategies.empty() || cfg.seeds.empty())
        throw std::invalid_argument("config needs at least one strategy and one seed");

    cfg.precompute_x_star = j.value("x_star", std::string("none")) == "precompute";

    if (j.contains("init")) {
        const json& init = j.at("init");
        const std::string ik = init.value("kind", std::string("default"));
        if (ik == "value") {
            cfg.init.kind = InitSpec::Kind::Value;
            cfg.init.value = init.at("value").get<ParamVector>();
        } else if (ik != "default" && ik != "origin") {
            throw std::invalid_argument("unknown init kind '" + ik + "'");
        }
    }
    cfg.output_dir = j.value("output_dir", std::string("out"));

    if (j.contains("bound_check")) {
        const json& b = j.at("bound_check");
        cfg.bound_check.warm_epochs = b.value("warm_epochs", std::size_t{0});
        if (b.contains("warm_schedule"))
            cfg.bound_check.warm_schedule = parse_schedule(b.at("warm_schedule"));
        if (b.contains("warm_strategy"))
            cfg.bound_check.warm_strategy = parse_strategy(b.at("warm_strategy"));
        cfg.bound_check.tolerance = b.value("tolerance", 1e-9);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json j;
    in >> j;
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// model construction
// ---------------------------------------------------------------------------

inline Dataset make_dataset(const DatasetSpec& spec, std::uint64_t run_seed) {
    Dataset d;
    if (spec.kind == DatasetSpec::Kind::Synthetic)
        d = gen_synthetic(spec.seed.value_or(run_seed), spec.n, spec.dim, spec.low, spec.high);
    else
        d = load_csv(spec.path, spec.schema);
    if (spec.normalize) d = min_max_scaled(d);
    return d;
}

inline std::unique_ptr<LossModel> make_model(const LossSpec& spec, const Dataset& data) {
    switch (spec.family) {
        case LossSpec::Family::QuarticQuadratic:
            return std::make_unique<SyntheticAnchorLoss>(
                data, SyntheticAnchorLoss::Mode::QuarticPlusQuadratic);
        case LossSpec::Family::IndicatorSwitched:
            return std::make_unique<SyntheticAnchorLoss>(
                data, SyntheticAnchorLoss::Mode::IndicatorSwitched);
        case LossSpec::Family::LinRegQuartic:
            return std::make_unique<LinRegQuarticLoss>(data, spec.grad_scale);
        case LossSpec::Family::Mlp: {
            std::vector<std::size_t> dims;
            dims.push_back(data.cols);
            dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
            dims.push_back(std::max<std::size_t>(data.num_classes, 2));
            return std::make_unique<MlpLoss>(DenseNet(dims), data);
        }
    }
    throw std::logic_error("make_model: unknown family");
}

inline ParamVector initial_point(const InitSpec& init, const LossSpec& loss,
                                 const LossModel& model, std::uint64_t run_seed) {
    if (init.kind == InitSpec::Kind::Value) {
        if (init.value.size() != model.dim())
            throw std::invalid_argument("init value dimension mismatch");
        return init.value;
    }
    if (loss.family == LossSpec::Family::Mlp)
        return static_cast<const MlpLoss&>(model).net().init_params(run_seed);
    return ParamVector(model.dim(), 0.0);
}

// ---------------------------------------------------------------------------
// x* precompute: full-batch gradient descent with backtracking line search
// ---------------------------------------------------------------------------

struct XStarResult {
    ParamVector x;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

inline XStarResult precompute_x_star(const LossModel& model, ParamVector x0, double tol = 1e-12,
                                     std::size_t max_iters = 200000) {
    XStarResult res;
    res.x = std::move(x0);
    ParamVector trial(res.x.size());

    // Phase 1: Armijo backtracking on F. Stops once the certified decrease
    // falls below F's floating-point resolution (F* is generally nonzero, so
    // the line search cannot see progress all the way down to tol).
    double f = full_loss(model, res.x);
    double step = 1e-3;
    for (; res.iterations < max_iters; ++res.iterations) {
        const ParamVector g = full_gradient(model, res.x);
        const double gn2 = squared_norm(g);
        res.grad_norm = std::sqrt(gn2);
        if (res.grad_norm < tol) {
            res.converged = true;
            return res;
        }
        step = std::min(step * 2.0, 1e8);
        double ft = f;
        bool accepted = false;
        while (step * gn2 > 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f)) {
            trial = res.x;
            axpy_neg(trial, step, g);
            ft = full_loss(model, trial);
            if (std::isfinite(ft) && ft <= f - 0.5 * step * gn2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        res.x = trial;
        f = ft;
    }

    // Phase 2: backtracking descent on ||grad F|| itself, which stays
    // well-scaled near x* where F is flat to machine precision.
    ParamVector g = full_gradient(model, res.x);
    double gn = norm(g);
    step = std::max(step, 1e-12);
    for (; res.iterations < max_iters; ++res.iterations) {
        res.grad_norm = gn;
        if (gn < tol) {
            res.converged = true;
            return res;
        }
        step = std::min(step * 2.0, 1e8);
        bool accepted = false;
        while (step > 1e-300) {
            trial = res.x;
            axpy_neg(trial, step, g);
            const ParamVector gt = full_gradient(model, trial);
            const double gnt = norm(gt);
            if (std::isfinite(gnt) && gnt < gn) {
                res.x = trial;
                g = gt;
                gn = gnt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    res.grad_norm = gn;
    res.converged = gn < tol;
    return res;
}

// ---------------------------------------------------------------------------
// trace serialization
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<TraceRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trace file " + path.string());
    out << "epoch,iteration,loss,dist_sq,step_size\n";
    for (const TraceRecord& r : records) {
        out << r.epoch << ',' << r.iteration << ',' << format_double(r.loss) << ',';
        if (r.dist_sq) out << format_double(*r.dist_sq);
        out << ',' << format_double(r.step_size) << '\n';
    }
}

inline std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace file " + path.string());
    std::vector<TraceRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 5)
            throw std::runtime_error("trace " + path.string() + ": bad row " + std::to_string(row));
        TraceRecord r;
        r.epoch = static_cast<std::size_t>(detail::parse_numeric_cell(cells[0], row, 0));
        r.iteration = static_cast<std::size_t>(detail::parse_numeric_cell(cells[1], row, 1));
        r.loss = detail::parse_numeric_cell(cells[2], row, 2);
        if (!cells[3].empty()) r.dist_sq = detail::parse_numeric_cell(cells[3], row, 3);
        r.step_size = detail::parse_numeric_cell(cells[4], row, 4);
        records.push_back(std::move(r));
        ++row;
    }
    return records;
}

inline std::vector<double> epoch_end_losses(const std::vector<TraceRecord>& records) {
    std::vector<double> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i + 1 == records.size() || records[i + 1].epoch != records[i].epoch)
            out.push_back(records[i].loss);
    }
    return out;
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

struct RunSummary {
    std::string strategy;
    std::uint64_t seed = 0;
    std::string status = "ok";  // "ok" or "diverged"
    double initial_loss = 0.0;
    std::optional<double> final_loss;
    std::vector<double> epoch_end_losses;
    std::optional<double> final_accuracy;  // classifiers only
    std::string trace_file;
};

struct ExperimentSummary {
    std::string experiment;
    std::vector<RunSummary> runs;
    std::filesystem::path summary_path;

    bool all_diverged() const {
        return !runs.empty() &&
               std::all_of(runs.begin(), runs.end(),
                           [](const RunSummary& r) { return r.status == "diverged"; });
    }
};

inline json summary_to_json(const ExperimentSummary& s) {
    json j;
    j["experiment"] = s.experiment;
    j["runs"] = json::array();
    for (const RunSummary& r : s.runs) {
        json rj;
        rj["strategy"] = r.strategy;
        rj["seed"] = r.seed;
        rj["status"] = r.status;
        rj["initial_loss"] = r.initial_loss;
        rj["final_loss"] = r.final_loss ? json(*r.final_loss) : json(nullptr);
        rj["epoch_end_losses"] = r.epoch_end_losses;
        if (r.final_accuracy) rj["final_accuracy"] = *r.final_accuracy;
        rj["trace"] = r.trace_file;
        j["runs"].push_back(std::move(rj));
    }
    // per-strategy means over non-diverged seeds
    json means = json::object();
    std::map<std::string, std::vector<const RunSummary*>> by_strategy;
    for (const RunSummary& r : s.runs)
        if (r.status == "ok") by_strategy[r.strategy].push_back(&r);
    for (const auto& [name, runs] : by_strategy) {
        double final_mean = 0.0;
        std::size_t max_epochs = 0;
        for (const RunSummary* r : runs) {
            final_mean += *r->final_loss;
            max_epochs = std::max(max_epochs, r->epoch_end_losses.size());
        }
        final_mean /= static_cast<double>(runs.size());
        std::vector<double> epoch_mean(max_epochs, 0.0);
        std::vector<std::size_t> counts(max_epochs, 0);
        for (const RunSummary* r : runs)
            for (std::size_t e = 0; e < r->epoch_end_losses.size(); ++e) {
                epoch_mean[e] += r->epoch_end_losses[e];
                ++counts[e];
            }
        for (std::size_t e = 0; e < max_epochs; ++e)
            epoch_mean[e] /= static_cast<double>(std::max<std::size_t>(counts[e], 1));
        means[name] = {{"final_loss", final_mean},
                       {"epoch_end_losses", epoch_mean},
                       {"seeds", runs.size()}};
    }
    j["strategy_means"] = std::move(means);
    return j;
}

inline std::string trace_file_name(const std::string& experiment, const std::string& strategy,
                                   std::uint64_t seed) {
    return experiment + "__" + strategy + "__seed" + std::to_string(seed) + ".csv";
}

/// Runs every (strategy, seed) pair, writes one trace CSV per run and one
/// summary JSON per experiment. All strategies under one seed share the same
/// dataset instance, initial point, and shuffle seed.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    ExperimentSummary summary;
    summary.experiment = cfg.experiment;

    for (std::uint64_t seed : cfg.seeds) {
        const Dataset data = make_dataset(cfg.dataset, seed);
        const std::unique_ptr<LossModel> model = make_model(cfg.loss, data);
        const ParamVector x0 = initial_point(cfg.init, cfg.loss, *model, seed);

        std::optional<ParamVector> x_star;
        if (cfg.precompute_x_star) {
            XStarResult xs = precompute_x_star(*model, x0);
            if (!xs.converged)
                throw std::runtime_error("x* precompute failed: gradient norm " +
                                         format_double(xs.grad_norm) + " after " +
                                         std::to_string(xs.iterations) + " iterations");
            x_star = std::move(xs.x);
        }

        for (const OrderingStrategy& strat : cfg.strategies) {
            TrainConfig tc = cfg.train;
            tc.strategy = strat;
            tc.strategy.seed = seed;
            tc.warm_start_strategy.seed = seed;

            RunSummary run;
            run.strategy = strategy_name(strat);
            run.seed = seed;
            run.initial_loss = full_loss(*model, x0);
            try {
                const TrainResult result =
                    train(*model, &data, tc, x0, x_star ? &*x_star : nullptr);
                const std::string fname = trace_file_name(cfg.experiment, run.strategy, seed);
                write_trace_csv(cfg.output_dir / fname, result.records);
                run.trace_file = fname;
                run.epoch_end_losses = epoch_end_losses(result.records);
                run.final_loss = result.records.empty() ? run.initial_loss
                                                        : result.records.back().loss;
                if (const auto* mlp = dynamic_cast<const MlpLoss*>(model.get()))
                    run.final_accuracy = mlp->accuracy(result.final_x);
            } catch (const DivergenceError&) {
                run.status = "diverged";
            }
            summary.runs.push_back(std::move(run));
        }
    }

    summary.summary_path = cfg.output_dir / (cfg.experiment + "__summary.json");
    std::ofstream out(summary.summary_path);
    out << summary_to_json(summary).dump(2) << '\n';
    return summary;
}

// ---------------------------------------------------------------------------
// run_bound_check
// ---------------------------------------------------------------------------

struct EpochBoundRow {
    std::size_t epoch = 0;
    double dist_sq = 0.0;
    double measured_next = 0.0;
    double eps_k = 0.0;
    std::optional<double> thm1, thm2, thm3, thm4;
    bool pass = true;
};

struct BoundCheckReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string strategy;
    double warm_dist_sq = 0.0;       // ||x - x*||^2 entering the checked phase
    double x_star_grad_norm = 0.0;   // residual of the precompute
    std::string thm1_status = "not_applicable";
    std::string thm2_status = "not_applicable";
    std::string thm3_status = "not_applicable";
    std::string thm4_status = "not_applicable";
    std::vector<EpochBoundRow> rows;
    double pass_rate = 0.0;
};

/// Harvests BoundInputs for epoch k of a full-ordering run. Caps come from
/// the running max of every gradient norm observed through the end of epoch
/// k, plus the estimator's margin.
inline BoundInputs harvest_bound_inputs(const EpochLog& log, const GradBoundEstimate& caps,
                                        double strong_convexity, double alpha_k1, double eps,
                                        std::span<const double> x_star) {
    const std::size_t n = log.visit_order.size();
    BoundInputs in;
    in.dist_sq_k = squared_distance(log.x_start, x_star);
    in.M.resize(n);
    in.C.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        in.M[i] = log.start_keys[log.visit_order[i]];
        in.C[i] = caps.cap(log.visit_order[i]);
    }
    in.M_prime = log.visit_grad_norms;
    in.m.assign(n, strong_convexity);
    in.alphas = log.step_sizes;
    in.alpha_k = log.step_sizes.front();
    in.alpha_k1 = alpha_k1;
    in.eps_k = eps;
    return in;
}

/// Runs the bound-verification pipeline for one seed: precompute x*, warm
/// start with random shuffling, then run the configured full-ordering phase
/// and test the Theorem 1-4 right-hand sides against the measured
/// next-epoch distance for every epoch.
inline BoundCheckReport run_bound_check(const ExperimentConfig& cfg) {
    if (cfg.train.algorithm != Algorithm::FullOrdering)
        throw std::invalid_argument("bound-check supports only the full-ordering algorithm");
    if (!cfg.precompute_x_star)
        throw std::invalid_argument("bound-check requires x_star mode 'precompute'");
    if (cfg.loss.family == LossSpec::Family::Mlp)
        throw std::invalid_argument("bound-check needs a convex loss family");
    if (cfg.loss.family == LossSpec::Family::LinRegQuartic && cfg.loss.grad_scale != 1.0)
        throw std::invalid_argument(
            "bound-check requires grad_scale = 1 so gradients match the loss being bounded");

    const std::uint64_t seed = cfg.seeds.front();
    const Dataset data = make_dataset(cfg.dataset, seed);
    const std::unique_ptr<LossModel> model = make_model(cfg.loss, data);
    const ParamVector x0 = initial_point(cfg.init, cfg.loss, *model, seed);

    XStarResult xs = precompute_x_star(*model, x0);
    if (!xs.converged)
        throw std::runtime_error("x* precompute failed: gradient norm " +
                                 format_double(xs.grad_norm) + " after " +
                                 std::to_string(xs.iterations) + " iterations");

    BoundCheckReport report;
    report.experiment = cfg.experiment;
    report.seed = seed;
    report.strategy = strategy_name(cfg.strategies.front());
    report.x_star_grad_norm = xs.grad_norm;

    // warm phase: random shuffling until the iterate is near x*
    ParamVector x_warm = x0;
    if (cfg.bound_check.warm_epochs > 0) {
        TrainConfig warm;
        warm.algorithm = Algorithm::FullOrdering;
        warm.strategy = cfg.bound_check.warm_strategy;
        warm.strategy.seed = seed;
        warm.schedule = cfg.bound_check.warm_schedule;
        warm.epochs = cfg.bound_check.warm_epochs;
        x_warm = train(*model, &data, warm, x0).final_x;
    }
    report.warm_dist_sq = squared_distance(x_warm, xs.x);

    // checked phase
    TrainConfig tc = cfg.train;
    tc.strategy = cfg.strategies.front();
    tc.strategy.seed = seed;
    tc.warm_start_epochs = 0;
    const TrainResult result = train(*model, &data, tc, x_warm, &xs.x);

    const double m = model->strong_convexity();
    const bool constant_step = tc.schedule.kind == ScheduleKind::Constant;
    const bool strongly_convex = m > 0.0;
    report.thm1_status = (strongly_convex && !constant_step) ? "checked" : "not_applicable";
    report.thm2_status = (strongly_convex && constant_step) ? "checked" : "not_applicable";
    report.thm3_status = !constant_step ? "checked" : "not_applicable";
    report.thm4_status = constant_step ? "checked" : "not_applicable";

    const std::size_t n = model->components();
    GradBoundEstimate caps(n);
    std::size_t passed = 0;
    for (std::size_t k = 0; k < result.epochs.size(); ++k) {
        const EpochLog& log = result.epochs[k];
        caps.observe_all(log.start_keys);
        for (std::size_t i = 0; i < log.visit_order.size(); ++i)
            caps.observe(log.visit_order[i], log.visit_grad_norms[i]);

        const double eps = epsilon_k(*model, log.x_start, xs.x);
        const double alpha_k1 =
            alpha_at(tc.schedule, k + 1, static_cast<std::uint64_t>(k + 1) * n);
        const BoundInputs in = harvest_bound_inputs(log, caps, m, alpha_k1, eps, xs.x);

        EpochBoundRow row;
        row.epoch = log.epoch;
        row.dist_sq = in.dist_sq_k;
        row.eps_k = eps;
        row.measured_next = k + 1 < result.epochs.size()
                                ? squared_distance(result.epochs[k + 1].x_start, xs.x)
                                : squared_distance(result.final_x, xs.x);
        const double tol = cfg.bound_check.tolerance;
        if (report.thm1_status == "checked") {
            row.thm1 = bound_thm1(in);
            row.pass = row.pass && row.measured_next <= *row.thm1 + tol;
        }
        if (report.thm2_status == "checked") {
            row.thm2 = bound_thm2(in);
            row.pass = row.pass && row.measured_next <= *row.thm2 + tol;
        }
        if (report.thm3_status == "checked") {
            row.thm3 = bound_thm3(in);
            row.pass = row.pass && row.measured_next <= *row.thm3 + tol;
        }
        if (report.thm4_status == "checked") {
            row.thm4 = bound_thm4(in);
            row.pass = row.pass && row.measured_next <= *row.thm4 + tol;
        }
        if (row.pass) ++passed;
        report.rows.push_back(std::move(row));
    }
    report.pass_rate = report.rows.empty()
                           ? 1.0
                           : static_cast<double>(passed) / static_cast<double>(report.rows.size());
    return report;
}

inline json bound_report_to_json(const BoundCheckReport& r) {
    json j;
    j["experiment"] = r.experiment;
    j["seed"] = r.seed;
    j["strategy"] = r.strategy;
    j["warm_dist_sq"] = r.warm_dist_sq;
    j["x_star_grad_norm"] = r.x_star_grad_norm;
    j["thm1"] = r.thm1_status;
    j["thm2"] = r.thm2_status;
    j["thm3"] = r.thm3_status;
    j["thm4"] = r.thm4_status;
    j["pass_rate"] = r.pass_rate;
    j["epochs"] = json::array();
    for (const EpochBoundRow& row : r.rows) {
        json rj;
        rj["epoch"] = row.epoch;
        rj["dist_sq"] = row.dist_sq;
        rj["measured_next"] = row.measured_next;
        rj["eps_k"] = row.eps_k;
        if (row.thm1) rj["bound_thm1"] = *row.thm1;
        if (row.thm2) rj["bound_thm2"] = *row.thm2;
        if (row.thm3) rj["bound_thm3"] = *row.thm3;
        if (row.thm4) rj["bound_thm4"] = *row.thm4;
        rj["pass"] = row.pass;
        j["epochs"].push_back(std::move(rj));
    }
    return j;
}

// ---------------------------------------------------------------------------
// compare: summarize existing trace directories
// ---------------------------------------------------------------------------

struct CompareRow {
    std::string experiment;
    std::string strategy;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    std::vector<double> epoch_end;
};

inline std::optional<CompareRow> parse_trace_name(const std::filesystem::path& p) {
    const std::string stem = p.stem().string();
    const std::size_t first = stem.find("__");
    if (first == std::string::npos) return std::nullopt;
    const std::size_t second = stem.find("__seed", first + 2);
    if (second == std::string::npos) return std::nullopt;
    CompareRow row;
    row.experiment = stem.substr(0, first);
    row.strategy = stem.substr(first + 2, second - first - 2);
    try {
        row.seed = std::stoull(stem.substr(second + 6));
    } catch (...) {
        return std::nullopt;
    }
    return row;
}

inline std::vector<CompareRow> summarize_trace_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CompareRow> rows;
    for (const auto& f : files) {
        auto row = parse_trace_name(f);
        if (!row) continue;
        const auto records = read_trace_csv(f);
        if (records.empty()) continue;
        row->final_loss = records.back().loss;
        row->epoch_end = epoch_end_losses(records);
        rows.push_back(std::move(*row));
    }
    return rows;
}

}  // namespace gradorder
