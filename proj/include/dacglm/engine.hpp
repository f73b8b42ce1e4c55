#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dacglm/combine.hpp"
#include "dacglm/io.hpp"

namespace dacglm {

enum class Method { modac, meta, voting, lassoinf, glm, lasso };
enum class LambdaMode { cv, fixed, theory };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::string_view to_string(LambdaMode m);

/// Single-batch methods (lassoinf, glm, lasso) ignore K.
bool is_single_batch(Method m);
/// Methods that report Wald inference.
bool has_inference(Method m);

struct PipelineConfig {
    std::string input;     ///< CSV file, partitioned into K batches
    std::string manifest;  ///< pre-sharded input; takes precedence over `input`
    CsvSchema schema;
    FamilySpec family = FamilySpec::gaussian();
    bool intercept = false;  ///< unpenalised leading column of ones
    int K = 1;
    Method method = Method::modac;
    PenaltyConfig penalty;
    LambdaMode lambda_mode = LambdaMode::cv;
    double lambda = 0.0;  ///< used when lambda_mode == fixed
    bool adaptive = false;
    double adaptive_gamma = 1.0;
    bool shared_lambda = false;  ///< average the per-batch CV choices
    std::uint64_t seed = 1;
    int workers = 1;
    bool allow_partial = false;
    bool common_phi = false;
    int omega = -1;  ///< voting threshold; negative means floor(K / 2)
    double level = 0.95;
    double ridge_tau = 0.0;
    bool auto_ridge = true;
    bool force_debias = false;
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const PipelineConfig& config);

/// Effective configuration; excludes `workers`, which cannot change results.
json config_to_json(const PipelineConfig& config);

struct BatchCondition {
    int index = 0;
    long n = 0;
    long p = 0;
    double sigma_min = 0.0;  ///< of X_k / sqrt(n_k)
    double sigma_max = 0.0;
    double p_over_n = 0.0;
    double theory_lambda = 0.0;  ///< sqrt(log p / n_k)
    bool rank_deficient = false;
    bool high_dimension = false;  ///< p / n_k > 0.5
};

struct ConditionReport {
    std::vector<BatchCondition> batches;
    std::vector<std::string> warnings;
};

inline constexpr double kMaxDimensionRatio = 0.5;

BatchCondition diagnose_batch(const Dataset& data, int index);
ConditionReport diagnose_conditions(const std::vector<Dataset>& batches);
json to_json(const ConditionReport& report);

/// Per-batch settings shared by the pipeline and the simulation harness.
struct BatchOptions {
    FamilySpec family = FamilySpec::gaussian();
    Method method = Method::modac;
    PenaltyConfig penalty;
    LambdaMode lambda_mode = LambdaMode::cv;
    double lambda = 0.0;
    bool adaptive = false;
    double adaptive_gamma = 1.0;
    DebiasOptions debias;
    bool intercept = false;  ///< first column is unpenalised
    bool diagnose = true;
};

struct BatchResult {
    int index = 0;
    long n = 0;
    double lambda = 0.0;
    LassoFit fit;
    double phi_hat = 1.0;
    BatchSummary summary;   ///< inference methods
    MatrixXd neg_hessian;   ///< voting and lasso
    BatchCondition condition;
    bool failed = false;
    std::string error;
    std::vector<std::string> warnings;
    double fit_seconds = 0.0;     ///< thread CPU time for tuning and fitting
    double debias_seconds = 0.0;  ///< thread CPU time for the debias step
};

/// Penalty level for a batch under `options` (CV uses the batch's child seed).
double choose_lambda(const Dataset& data, const BatchOptions& options, std::uint64_t seed,
                     int index);

/// Tune, fit and summarise one batch. Errors are captured in the result.
BatchResult process_batch(const Dataset& data, int index, const BatchOptions& options,
                          std::uint64_t seed, std::optional<double> lambda = std::nullopt);

/// Runs f(0..count-1) on `workers` threads. f must not throw.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& f);

/// Thread CPU seconds consumed so far by the calling thread.
double thread_cpu_seconds();

struct PipelineResult {
    CombinedFit combined;
    Method method = Method::modac;
    std::vector<BatchResult> batches;
    bool partial = false;
    std::vector<std::string> warnings;
    double combine_seconds = 0.0;
    double max_batch_seconds = 0.0;
    double wall_seconds = 0.0;
};

class PipelineError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Reads `config.input` or `config.manifest`. Shards are loaded one per worker.
PipelineResult run_pipeline(const PipelineConfig& config);

/// In-memory variant: partitions `data` into K batches (column names kept).
PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& config);

/// Output artifact: combined fit, method, per-batch facts and effective config.
/// Contains no timings so that it is reproducible bit for bit.
json to_json(const PipelineResult& result, const PipelineConfig& config);

}  // namespace dacglm
