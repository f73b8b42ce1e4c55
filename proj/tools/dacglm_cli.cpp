// Command-line front end: fit, combine, partition, simulate, diagnose.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dacglm/engine.hpp"
#include "dacglm/simbench.hpp"

namespace fs = std::filesystem;
using namespace dacglm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

int report_error(const std::string& kind, const std::string& message) {
    json j{{"error", {{"type", kind}, {"message", message}}}};
    std::cerr << j.dump() << '\n';
    return kExitError;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

struct InputFlags {
    std::string input;
    std::string manifest;
    std::string response = "y";
    std::vector<std::string> features;
    bool no_intercept = false;

    void add(CLI::App* app) {
        app->add_option("input", input, "Input CSV with a header row");
        app->add_option("--manifest", manifest, "Shard manifest JSON (instead of an input CSV)")
            ->excludes(app->get_option("input"));
        app->add_option("--response", response, "Response column name")->capture_default_str();
        app->add_option("--features", features,
                        "Comma-separated feature columns (default: every other numeric column)")
            ->delimiter(',');
        app->add_flag("--no-intercept", no_intercept, "Do not add an unpenalised intercept");
    }
};

struct FitFlags {
    InputFlags in;
    std::string family = "gaussian";
    std::string method = "modac";
    int k = 1;
    std::uint64_t seed = 1;
    int workers = 1;
    double level = 0.95;
    int omega = -1;
    double lambda = 0.0;
    bool cv = false;
    bool theory = false;
    bool adaptive = false;
    double gamma = 1.0;
    bool shared_lambda = false;
    bool common_phi = false;
    bool allow_partial = false;
    double ridge_tau = 0.0;
    bool no_auto_ridge = false;
    bool force = false;
    double tol = 1e-7;
    int folds = 5;
    int grid_size = 100;
    double grid_min_ratio = 1e-3;
    std::string out = "fit.json";
    std::string coef_csv = "coefficients.csv";
    std::string emit_summaries;
    bool json_stdout = false;
};

void add_fit(CLI::App& app, FitFlags& f) {
    auto* cmd = app.add_subcommand("fit", "Fit a model to one dataset, divided into K batches");
    f.in.add(cmd);
    cmd->add_option("--family", f.family, "gaussian, logistic or poisson")
        ->check(CLI::IsMember({"gaussian", "logistic", "binomial", "poisson"}))
        ->capture_default_str();
    cmd->add_option("--method", f.method, "modac, meta, voting, lassoinf, glm or lasso")
        ->check(CLI::IsMember({"modac", "meta", "voting", "lassoinf", "glm", "lasso"}))
        ->capture_default_str();
    cmd->add_option("--k", f.k, "Number of batches (ignored with --manifest)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed for partitioning and CV folds")->capture_default_str();
    cmd->add_option("--workers", f.workers, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--level", f.level, "Confidence level")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--omega", f.omega, "Voting threshold (default floor(K/2))");
    auto* lam = cmd->add_option("--lambda", f.lambda, "Fixed penalty level")
                    ->check(CLI::NonNegativeNumber);
    auto* cv = cmd->add_flag("--cv", f.cv, "Tune lambda by cross-validation (default)");
    auto* th = cmd->add_flag("--theory-lambda", f.theory, "Use lambda = sqrt(log p / n_k)");
    lam->excludes(cv)->excludes(th);
    cv->excludes(th);
    cmd->add_flag("--adaptive", f.adaptive, "Adaptive lasso weights from an unpenalised fit");
    cmd->add_option("--gamma", f.gamma, "Adaptive lasso exponent")->capture_default_str();
    cmd->add_flag("--shared-lambda", f.shared_lambda, "Average the per-batch CV choices");
    cmd->add_flag("--common-phi", f.common_phi, "Pool the dispersion across batches");
    cmd->add_flag("--allow-partial", f.allow_partial, "Combine surviving batches (exit code 2)");
    cmd->add_option("--ridge-tau", f.ridge_tau, "Ridge added to the information matrix")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_flag("--no-auto-ridge", f.no_auto_ridge, "Fail instead of escalating the ridge");
    cmd->add_flag("--force", f.force, "Debias fits that did not converge");
    cmd->add_option("--tol", f.tol, "Solver tolerance")->capture_default_str();
    cmd->add_option("--folds", f.folds, "CV folds")->capture_default_str();
    cmd->add_option("--grid-size", f.grid_size, "Lambda grid size")->capture_default_str();
    cmd->add_option("--grid-min-ratio", f.grid_min_ratio, "Smallest lambda / lambda_max")
        ->capture_default_str();
    cmd->add_option("--out", f.out, "Combined fit JSON")->capture_default_str();
    cmd->add_option("--coef-csv", f.coef_csv, "Coefficient table CSV (empty to skip)")
        ->capture_default_str();
    cmd->add_option("--emit-summaries", f.emit_summaries,
                    "Directory for per-batch summary JSON files");
    cmd->add_flag("--json", f.json_stdout, "Print the result JSON on stdout");
}

PipelineConfig pipeline_config(const FitFlags& f) {
    PipelineConfig c;
    c.input = f.in.input;
    c.manifest = f.in.manifest;
    c.schema.response = f.in.response;
    c.schema.features = f.in.features;
    c.intercept = !f.in.no_intercept;
    c.family = FamilySpec::of(parse_family(f.family));
    c.method = parse_method(f.method);
    c.K = f.k;
    c.seed = f.seed;
    c.workers = f.workers;
    c.level = f.level;
    c.omega = f.omega;
    c.lambda_mode = f.theory ? LambdaMode::theory : LambdaMode::cv;
    c.lambda = f.lambda;
    c.adaptive = f.adaptive;
    c.adaptive_gamma = f.gamma;
    c.shared_lambda = f.shared_lambda;
    c.common_phi = f.common_phi;
    c.allow_partial = f.allow_partial;
    c.ridge_tau = f.ridge_tau;
    c.auto_ridge = !f.no_auto_ridge;
    c.force_debias = f.force;
    c.penalty.tol = f.tol;
    c.penalty.n_folds = f.folds;
    c.penalty.grid_size = f.grid_size;
    c.penalty.grid_min_ratio = f.grid_min_ratio;
    return c;
}

int run_fit(const FitFlags& f, bool lambda_given) {
    if (f.in.input.empty() && f.in.manifest.empty())
        return report_error("UsageError", "fit needs an input CSV or --manifest");
    PipelineConfig c = pipeline_config(f);
    if (lambda_given) c.lambda_mode = LambdaMode::fixed;
    const PipelineResult r = run_pipeline(c);
    const json out = to_json(r, c);
    write_text(f.out, out.dump(2) + "\n");
    if (!f.coef_csv.empty()) write_text(f.coef_csv, coefficient_csv(r.combined, c.level));
    if (!f.emit_summaries.empty()) {
        if (!has_inference(c.method))
            return report_error("UsageError", "--emit-summaries needs an inference method");
        fs::create_directories(f.emit_summaries);
        for (const auto& b : r.batches) {
            if (b.failed) continue;
            char name[32];
            std::snprintf(name, sizeof name, "batch_%03d.json", b.index);
            write_batch_summary(fs::path(f.emit_summaries) / name, b.summary);
        }
    }
    if (f.json_stdout) std::cout << out.dump(2) << '\n';
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    return r.partial ? kExitPartial : kExitOk;
}

struct CombineFlags {
    std::vector<std::string> summaries;
    std::string method = "dac";
    double level = 0.95;
    bool common_phi = false;
    bool no_auto_ridge = false;
    std::string out = "combined.json";
    std::string coef_csv = "coefficients.csv";
    bool json_stdout = false;
};

void add_combine(CLI::App& app, CombineFlags& f) {
    auto* cmd = app.add_subcommand("combine", "Combine saved per-batch summaries");
    cmd->add_option("summaries", f.summaries, "Batch summary JSON files")->required();
    cmd->add_option("--method", f.method, "dac or meta")
        ->check(CLI::IsMember({"dac", "meta"}))
        ->capture_default_str();
    cmd->add_option("--level", f.level, "Confidence level")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_flag("--common-phi", f.common_phi, "Pool the dispersion across batches");
    cmd->add_flag("--no-auto-ridge", f.no_auto_ridge, "Fail instead of escalating the ridge");
    cmd->add_option("--out", f.out, "Combined fit JSON")->capture_default_str();
    cmd->add_option("--coef-csv", f.coef_csv, "Coefficient table CSV (empty to skip)")
        ->capture_default_str();
    cmd->add_flag("--json", f.json_stdout, "Print the result JSON on stdout");
}

int run_combine(const CombineFlags& f) {
    std::vector<BatchSummary> summaries;
    for (const auto& path : f.summaries) summaries.push_back(read_batch_summary(path));
    for (std::size_t k = 1; k < summaries.size(); ++k)
        if (summaries[k].p() != summaries[0].p())
            throw DataError("dimension mismatch: '" + f.summaries[k] + "' has p = " +
                            std::to_string(summaries[k].p()) + " but '" + f.summaries[0] +
                            "' has p = " + std::to_string(summaries[0].p()));
    CombineOptions opts;
    opts.common_phi = f.common_phi;
    opts.auto_ridge = !f.no_auto_ridge;
    const CombinedFit fit =
        f.method == "meta" ? combine_meta(summaries, opts) : combine_dac(summaries, opts);
    json out = to_json(fit, f.level);
    out["config"] = {{"summaries", f.summaries},
                     {"method", f.method},
                     {"level", f.level},
                     {"common_phi", f.common_phi},
                     {"auto_ridge", !f.no_auto_ridge}};
    write_text(f.out, out.dump(2) + "\n");
    if (!f.coef_csv.empty()) write_text(f.coef_csv, coefficient_csv(fit, f.level));
    if (f.json_stdout) std::cout << out.dump(2) << '\n';
    return kExitOk;
}

struct PartitionFlags {
    std::string input;
    std::string response = "y";
    std::vector<std::string> features;
    int k = 2;
    std::uint64_t seed = 1;
    std::string out_dir = "shards";
};

void add_partition(CLI::App& app, PartitionFlags& f) {
    auto* cmd = app.add_subcommand("partition", "Split a CSV into K random shards and a manifest");
    cmd->add_option("input", f.input, "Input CSV with a header row")->required();
    cmd->add_option("--response", f.response, "Response column name")->capture_default_str();
    cmd->add_option("--features", f.features, "Comma-separated feature columns")->delimiter(',');
    cmd->add_option("--k", f.k, "Number of shards")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Partition seed")->capture_default_str();
    cmd->add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
}

int run_partition(const PartitionFlags& f) {
    const Dataset data = load_csv(f.input, {f.response, f.features});
    const auto parts = random_partition(data.n(), f.k, f.seed);
    fs::create_directories(f.out_dir);
    ShardManifest m;
    m.schema.response = f.response;
    m.schema.features = data.column_names;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "shard_%03zu.csv", k);
        const fs::path path = fs::path(f.out_dir) / name;
        write_csv(path, data.subset(parts[k]), f.response);
        m.shards.push_back({name, static_cast<long>(parts[k].size()), file_checksum(path)});
    }
    write_manifest(fs::path(f.out_dir) / "manifest.json", m);
    return kExitOk;
}

struct SimulateFlags {
    std::string preset = "desk";
    std::string family = "gaussian";
    long N = 0, p = 0, s0 = -1;
    int k = 0;
    double signal = 0.0, rho = 0.0, level = 0.95;
    int n_reps = 0;
    std::uint64_t seed = 1;
    std::vector<std::string> methods;
    std::vector<int> omegas;
    bool omega_sweep = false;
    bool fix_signal = false;
    bool keep_estimates = false;
    int workers = 1;
    std::string out_dir = "study";
    bool json_stdout = false;
};

void add_simulate(CLI::App& app, SimulateFlags& f) {
    auto* cmd = app.add_subcommand("simulate", "Run a simulation study comparing the estimators");
    cmd->add_option("--preset", f.preset, "desk, table1-gaussian, table1-logistic or table1-poisson")
        ->check(CLI::IsMember({"desk", "table1-gaussian", "table1-logistic", "table1-poisson"}))
        ->capture_default_str();
    cmd->add_option("--family", f.family, "gaussian, logistic or poisson (desk preset)")
        ->check(CLI::IsMember({"gaussian", "logistic", "binomial", "poisson"}))
        ->capture_default_str();
    cmd->add_option("--N", f.N, "Total sample size")->check(CLI::PositiveNumber);
    cmd->add_option("--p", f.p, "Number of covariates")->check(CLI::PositiveNumber);
    cmd->add_option("--k", f.k, "Number of batches")->check(CLI::PositiveNumber);
    cmd->add_option("--s0", f.s0, "Number of nonzero coefficients")->check(CLI::NonNegativeNumber);
    cmd->add_option("--signal", f.signal, "Nonzero coefficient value (default per family)");
    cmd->add_option("--rho", f.rho, "Compound-symmetry correlation")->check(CLI::Range(0.0, 0.999999));
    cmd->add_option("--n-reps", f.n_reps, "Replicates")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Study seed")->capture_default_str();
    cmd->add_option("--methods", f.methods,
                    "Comma-separated subset of glm,lasso,lassoinf,voting,meta,modac")
        ->delimiter(',');
    cmd->add_option("--omega", f.omegas, "Voting thresholds (comma-separated)")->delimiter(',');
    cmd->add_flag("--omega-sweep", f.omega_sweep, "Voting with every omega in 0..K-1");
    cmd->add_option("--level", f.level, "Confidence level")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_flag("--fix-signal", f.fix_signal, "Keep signal positions fixed across replicates");
    cmd->add_flag("--keep-estimates", f.keep_estimates, "Store estimates in study_raw.jsonl");
    cmd->add_option("--workers", f.workers, "Replicates run concurrently")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
    cmd->add_flag("--json", f.json_stdout, "Print the summary as JSON on stdout");
}

int run_simulate(const SimulateFlags& f, const CLI::App& cmd) {
    SimConfig c = preset(f.preset, FamilySpec::of(parse_family(f.family)));
    if (cmd.count("--family")) c.family = FamilySpec::of(parse_family(f.family));
    if (cmd.count("--N")) c.N = f.N;
    if (cmd.count("--p")) c.p = f.p;
    if (cmd.count("--k")) c.K = f.k;
    if (cmd.count("--s0")) c.s0 = f.s0;
    if (cmd.count("--signal")) c.signal = f.signal;
    if (cmd.count("--rho")) c.rho = f.rho;
    if (cmd.count("--n-reps")) c.n_reps = f.n_reps;
    c.seed = f.seed;
    c.level = f.level;
    if (!f.methods.empty()) {
        c.methods.clear();
        for (const auto& m : f.methods) c.methods.push_back(parse_sim_method(m));
    }
    c.omegas = f.omegas;
    c.omega_sweep = f.omega_sweep;
    c.fix_signal_positions = f.fix_signal;
    c.keep_estimates = f.keep_estimates;
    c.workers = f.workers;
    const StudyResult r = run_study(c);
    write_study(r, f.out_dir);
    if (f.json_stdout) {
        json rows = json::array();
        for (const auto& m : r.summary) {
            json row{{"method", m.method},
                     {"sensitivity", m.sensitivity},
                     {"specificity", m.specificity},
                     {"mse_signal", m.mse_signal},
                     {"mse_null", m.mse_null},
                     {"abs_bias_signal", m.abs_bias_signal},
                     {"abs_bias_null", m.abs_bias_null},
                     {"wall_time_s", m.wall_time_s},
                     {"reps", m.reps},
                     {"failures", m.failures}};
            if (m.omega >= 0) row["omega"] = m.omega;
            if (m.coverage_signal) {
                row["coverage_signal"] = *m.coverage_signal;
                row["coverage_null"] = *m.coverage_null;
                row["asymp_se_signal"] = *m.asymp_se_signal;
                row["asymp_se_null"] = *m.asymp_se_null;
            }
            rows.push_back(row);
        }
        std::cout << json{{"config", to_json(c)}, {"summary", rows}}.dump(2) << '\n';
    } else {
        std::cout << summary_csv(r.summary);
    }
    return kExitOk;
}

struct DiagnoseFlags {
    InputFlags in;
    int k = 1;
    std::uint64_t seed = 1;
    bool json_stdout = false;
};

void add_diagnose(CLI::App& app, DiagnoseFlags& f) {
    auto* cmd = app.add_subcommand("diagnose", "Report per-batch design conditions");
    f.in.add(cmd);
    cmd->add_option("--k", f.k, "Number of batches (ignored with --manifest)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", f.seed, "Partition seed")->capture_default_str();
    cmd->add_flag("--json", f.json_stdout, "Print the report as JSON");
}

int run_diagnose(const DiagnoseFlags& f) {
    std::vector<Dataset> batches;
    auto prep = [&](Dataset d) { return f.in.no_intercept ? d : d.with_intercept(); };
    if (!f.in.manifest.empty()) {
        const ShardManifest m = read_manifest(f.in.manifest);
        for (std::size_t k = 0; k < m.shards.size(); ++k) batches.push_back(prep(load_shard(m, k)));
    } else if (!f.in.input.empty()) {
        const Dataset d = prep(load_csv(f.in.input, {f.in.response, f.in.features}));
        for (const auto& idx : random_partition(d.n(), f.k, f.seed)) batches.push_back(d.subset(idx));
    } else {
        return report_error("UsageError", "diagnose needs an input CSV or --manifest");
    }
    const ConditionReport r = diagnose_conditions(batches);
    if (f.json_stdout) {
        std::cout << to_json(r).dump(2) << '\n';
    } else {
        std::printf("%6s %8s %6s %12s %12s %8s %12s %s\n", "batch", "n", "p", "sigma_min",
                    "sigma_max", "p/n", "lambda", "flags");
        for (const auto& c : r.batches)
            std::printf("%6d %8ld %6ld %12.6g %12.6g %8.4f %12.6g %s%s\n", c.index, c.n, c.p,
                        c.sigma_min, c.sigma_max, c.p_over_n, c.theory_lambda,
                        c.rank_deficient ? "rank-deficient " : "",
                        c.high_dimension ? "p/n>0.5" : "");
        for (const auto& w : r.warnings) std::printf("warning: %s\n", w.c_str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Divide-and-combine regularised GLM estimation and inference", "dacglm"};
    app.set_config("--config", "", "TOML/INI file of flags; command-line flags take precedence");
    app.require_subcommand(1);
    FitFlags fit;
    CombineFlags comb;
    PartitionFlags part;
    SimulateFlags sim;
    DiagnoseFlags diag;
    add_fit(app, fit);
    add_combine(app, comb);
    add_partition(app, part);
    add_simulate(app, sim);
    add_diagnose(app, diag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("UsageError", e.what());
    }

    try {
        if (app.got_subcommand("fit"))
            return run_fit(fit, app.get_subcommand("fit")->count("--lambda") > 0);
        if (app.got_subcommand("combine")) return run_combine(comb);
        if (app.got_subcommand("partition")) return run_partition(part);
        if (app.got_subcommand("simulate")) return run_simulate(sim, *app.get_subcommand("simulate"));
        if (app.got_subcommand("diagnose")) return run_diagnose(diag);
    } catch (const DataError& e) {
        return report_error("DataError", e.what());
    } catch (const SingularMatrixError& e) {
        return report_error("SingularMatrixError", e.what());
    } catch (const PipelineError& e) {
        return report_error("PipelineError", e.what());
    } catch (const std::invalid_argument& e) {
        return report_error("InvalidArgument", e.what());
    } catch (const std::exception& e) {
        return report_error("Error", e.what());
    }
    return kExitError;
}
