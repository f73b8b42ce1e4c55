#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dacglm/engine.hpp"

namespace dacglm {

enum class SimMethod { glm, lasso, lassoinf, voting, meta, modac };

std::string_view to_string(SimMethod m);  ///< upper-case label, e.g. "MODAC"
SimMethod parse_sim_method(std::string_view name);  ///< case-insensitive
const std::vector<SimMethod>& all_sim_methods();

/// Default nonzero coefficient value: 0.3 gaussian, 0.3 logistic, 0.1 poisson.
double default_signal(FamilyKind kind);

struct SimConfig {
    long N = 2000;
    long p = 50;
    int K = 4;
    long s0 = 10;
    /// NaN selects default_signal(family).
    double signal = std::numeric_limits<double>::quiet_NaN();
    double rho = 0.8;
    FamilySpec family = FamilySpec::gaussian();
    double phi = 1.0;  ///< gaussian noise variance
    int n_reps = 200;
    std::uint64_t seed = 1;
    std::vector<SimMethod> methods = all_sim_methods();
    double level = 0.95;
    /// Voting thresholds; empty means {floor(K / 2)}.
    std::vector<int> omegas;
    bool omega_sweep = false;  ///< omegas = 0..K-1
    bool fix_signal_positions = false;
    int workers = 1;  ///< replicates run concurrently
    PenaltyConfig penalty;
    LambdaMode lambda_mode = LambdaMode::cv;
    double lambda = 0.0;
    bool keep_estimates = false;  ///< write per-coefficient estimates to the raw records

    double effective_signal() const;
    std::vector<int> effective_omegas() const;
};

/// Named configurations: desk, table1-gaussian, table1-logistic, table1-poisson.
SimConfig preset(std::string_view name, FamilySpec family = FamilySpec::gaussian());
void validate(const SimConfig& config);

/// Rows i.i.d. N(0, C) with C_jj = 1, C_jl = rho.
MatrixXd gen_design(Index n, Index p, double rho, std::uint64_t seed);

struct TrueCoefficients {
    VectorXd beta0;
    std::vector<Index> signal_set;  ///< sorted
};

TrueCoefficients gen_coefficients(Index p, Index s0, double signal, std::uint64_t seed);

/// Throws DataError naming the linear predictor when a poisson mean overflows.
VectorXd gen_response(const MatrixXd& X, const VectorXd& beta0, const FamilySpec& family,
                      double phi, std::uint64_t seed);

struct MetricsRow {
    std::string method;
    int omega = -1;  ///< voting only
    double sensitivity = 0.0;
    double specificity = 0.0;
    double mse_signal = 0.0;
    double mse_null = 0.0;
    double abs_bias_signal = 0.0;
    double abs_bias_null = 0.0;
    std::optional<double> coverage_signal, coverage_null;
    std::optional<double> asymp_se_signal, asymp_se_null;
    double wall_time_s = 0.0;
    int reps = 0;      ///< replicates aggregated
    int failures = 0;  ///< replicates where the method failed

    std::string label() const;
};

/// Metrics of one estimate. With `inference`, a coefficient is selected when
/// its interval excludes zero; without, when the estimate is nonzero.
MetricsRow evaluate(const std::string& method, const VectorXd& estimate,
                    const std::vector<WaldRow>* inference, const VectorXd& beta0,
                    const std::vector<Index>& signal_set);

struct RepRecord {
    int rep = 0;
    std::string method;
    int omega = -1;
    bool failed = false;
    std::string error;
    MetricsRow metrics;
    VectorXd estimate;
    VectorXd std_error;  ///< empty for methods without inference
};

struct StudyResult {
    SimConfig config;
    std::vector<MetricsRow> summary;  ///< one per method (per omega for voting)
    std::vector<RepRecord> raw;       ///< ordered by rep, then method
};

/// Records for one replicate, in method order.
std::vector<RepRecord> run_replicate(const SimConfig& config, int rep);

StudyResult run_study(const SimConfig& config);

/// Mean of the successful records of each (method, omega).
std::vector<MetricsRow> aggregate(const std::vector<RepRecord>& raw);

/// Metrics as rows, methods as columns.
std::string summary_csv(const std::vector<MetricsRow>& rows);
/// One line per (method, metric) with the configuration repeated for plotting.
std::string long_csv(const StudyResult& result);
std::string raw_jsonl(const StudyResult& result);
json to_json(const SimConfig& config);

/// Writes study_summary.csv, study_raw.jsonl and study_long.csv.
void write_study(const StudyResult& result, const std::filesystem::path& dir);

}  // namespace dacglm
