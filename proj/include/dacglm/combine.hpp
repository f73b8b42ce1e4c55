#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dacglm/inference.hpp"

namespace dacglm {

enum class Combiner { dac, meta, voting };

std::string_view to_string(Combiner c);

struct CombinedFit {
    VectorXd beta;
    /// Covariance of the combined estimate (Sigma_dac / N for MODAC).
    MatrixXd covariance;
    long N = 0;
    int K = 0;
    Combiner combiner = Combiner::dac;
    int omega = -1;
    double ridge_tau = 0.0;
    /// Coefficients with inference; voting leaves the unvoted ones false.
    std::vector<bool> has_inference;
    std::vector<std::string> column_names;
    std::vector<std::string> diagnostics;
    std::vector<int> included_batches;
};

struct CombineOptions {
    bool allow_partial = false;
    bool common_phi = false;
    bool auto_ridge = true;
};

/// Entry for a batch whose fit failed upstream; `summary` is ignored.
struct BatchOutcome {
    BatchSummary summary;
    bool failed = false;
    std::string error;
};

/// (sum_k P_k)^{-1} sum_k P_k beta_c_k, accumulated in ascending batch order.
CombinedFit combine_dac(const std::vector<BatchSummary>& summaries,
                        const CombineOptions& options = {});

/// Same weighted average over lambda = 0 (MLE) summaries.
CombinedFit combine_meta(const std::vector<BatchSummary>& summaries,
                         const CombineOptions& options = {});

/// Failure-aware front end shared by the two precision-weighted combiners.
CombinedFit combine_outcomes(const std::vector<BatchOutcome>& outcomes, Combiner combiner,
                             const CombineOptions& options = {});

struct VotingInput {
    VectorXd beta;          ///< batch lasso estimate
    MatrixXd neg_hessian;   ///< -dS_{n_k}/dbeta at beta (includes 1/phi_k)
    long n = 0;
};

std::vector<Index> vote_set(const std::vector<VotingInput>& inputs, int omega);

/// Majority-voting estimator on {j : #{k : beta_kj != 0} > omega}.
CombinedFit combine_voting(const std::vector<VotingInput>& inputs, int omega,
                           const std::vector<std::string>& names = {});

/// Disjoint near-equal cover of [0, n_total); remainder to the lowest batches.
std::vector<std::vector<Index>> random_partition(Index n_total, int K, std::uint64_t seed);

std::vector<WaldRow> wald_inference(const CombinedFit& fit, double level);

}  // namespace dacglm
