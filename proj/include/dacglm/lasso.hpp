#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dacglm/glm.hpp"

namespace dacglm {

inline constexpr double kInfiniteWeight = std::numeric_limits<double>::infinity();

/// Solver and tuning settings. An empty lambda_grid means "build the default
/// grid from lambda_max"; empty penalty_weights means all ones.
struct PenaltyConfig {
    std::vector<double> lambda_grid;
    VectorXd penalty_weights;
    int n_folds = 5;
    double tol = 1e-7;
    int max_outer_iter = 50;
    int max_inner_iter = 10000;
    int grid_size = 100;
    double grid_min_ratio = 1e-3;
    /// Active-set Newton refinement after coordinate descent.
    bool polish = true;
};

struct LassoFit {
    VectorXd beta;
    double lambda = 0.0;
    VectorXd subgradient;
    int n_iter = 0;
    bool converged = false;
    double kkt_violation = 0.0;
    /// Penalised log-likelihood after each outer iteration.
    std::vector<double> objective_trace;
    std::vector<std::string> warnings;

    Index nnz() const { return count_nonzero(beta); }
};

struct CvPoint {
    double lambda = 0.0;
    double mean_deviance = 0.0;
    double sd_deviance = 0.0;
    int folds_used = 0;
};

struct CvResult {
    double lambda_star = 0.0;
    std::size_t index_star = 0;
    std::vector<CvPoint> curve;
    std::vector<std::string> warnings;
};

double soft_threshold(double z, double gamma);

/// Resolved per-coefficient weights: config weights or all ones; checks shape.
VectorXd resolve_weights(const PenaltyConfig& config, Index p);

/// max_j |S_n(beta_null)_j| / w_j over coordinates with finite positive weight.
/// beta_null has unpenalised (w_j = 0) coordinates at their restricted MLE.
double lambda_max(const Dataset& data, const FamilySpec& family, const VectorXd& weights);

/// Descending log-spaced grid from lambda_max to ratio * lambda_max.
std::vector<double> default_lambda_grid(double lmax, int size, double min_ratio);

/// Maximises (1/n) loglik(beta) - lambda * sum_j w_j |beta_j| on the phi = 1 scale
/// by penalised IRLS with cyclic coordinate descent.
LassoFit fit_lasso(const Dataset& data, const FamilySpec& family, double lambda,
                   const PenaltyConfig& config,
                   const std::optional<VectorXd>& warm_start = std::nullopt);

/// Warm-started fits along a descending grid.
std::vector<LassoFit> fit_lasso_path(const Dataset& data, const FamilySpec& family,
                                     const std::vector<double>& grid,
                                     const PenaltyConfig& config);

/// Seeded K-fold cross-validation on mean out-of-fold deviance (minimum rule,
/// ties go to the larger lambda).
CvResult cv_tune(const Dataset& data, const FamilySpec& family, const PenaltyConfig& config,
                 std::uint64_t seed);

/// w_j = |beta_j|^{-gamma}; zeros map to +infinity.
VectorXd adaptive_weights(const VectorXd& beta_init, double gamma = 1.0);

/// ||S_n(beta) - lambda * w .* kappa||_inf for the fit's subgradient.
double kkt_residual(const LassoFit& fit, const Dataset& data, const FamilySpec& family,
                    double phi = 1.0, const VectorXd& weights = VectorXd());

/// Subgradient recovered from the score: sign(beta_j) on the active set,
/// S_j / (lambda w_j) clipped to [-1, 1] elsewhere.
VectorXd recover_subgradient(const VectorXd& beta, const VectorXd& score, double lambda,
                             const VectorXd& weights);

}  // namespace dacglm
