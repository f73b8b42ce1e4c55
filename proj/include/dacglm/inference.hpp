#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dacglm/lasso.hpp"

namespace dacglm {

class SingularMatrixError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Debiased estimate of one batch and the quantities a combiner needs.
/// `precision` stores n * Sigma_n^{-1}, which is the inverse covariance of beta_c.
struct BatchSummary {
    VectorXd beta_c;
    MatrixXd precision;
    long n = 0;
    double phi_hat = 1.0;
    double lambda = 0.0;
    double ridge_tau = 0.0;
    double kkt_violation = 0.0;
    bool converged = true;
    int batch_index = 0;
    /// Nonzero pattern of the lasso fit the summary was built from.
    std::vector<bool> active;
    std::vector<std::string> column_names;

    Index p() const { return beta_c.size(); }
};

struct DebiasOptions {
    double ridge_tau = 0.0;
    /// Escalate tau by x10 from 1e-8 (cap 1e-2) when the factorisation fails.
    bool auto_ridge = true;
    /// Accept non-converged fits.
    bool force = false;
};

inline constexpr double kRidgeStart = 1e-8;
inline constexpr double kRidgeCap = 1e-2;

/// Cholesky of A + tau I with tau escalation. Returns the tau used.
/// Throws SingularMatrixError if no tau up to the cap works (or auto is off).
struct RidgedCholesky {
    Eigen::LLT<MatrixXd> llt;
    double tau = 0.0;
};
RidgedCholesky ridged_cholesky(const MatrixXd& a, double tau, bool auto_ridge);

/// beta_c = beta + M^{-1} S_n(beta) with M = neg_hessian(beta) + tau I.
BatchSummary debias(const LassoFit& fit, const Dataset& data, const FamilySpec& family,
                    double phi, const DebiasOptions& options = {});

/// Subgradient route beta + M^{-1} lambda w .* kappa. Diagnostic only.
VectorXd debias_via_subgradient(const LassoFit& fit, const Dataset& data,
                                const FamilySpec& family, double phi, double ridge_tau,
                                const VectorXd& weights = VectorXd());

/// Sigma_n = (precision / n)^{-1}.
MatrixXd covariance(const BatchSummary& summary);

/// h(b) proportional to exp(-1/2 (b - center)' precision (b - center)).
struct ConfidenceDensity {
    VectorXd center;
    MatrixXd precision;
    bool log_normalizer_omitted = true;

    double log_density(const VectorXd& b) const;
};

ConfidenceDensity confidence_density(const BatchSummary& summary);

struct WaldRow {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_value = 1.0;
    bool degenerate = false;  ///< SE == 0
    bool available = true;    ///< false when the estimator offers no inference
};

double normal_quantile(double prob);
double two_sided_p(double z);

/// Wald table from estimates and their covariance (of the estimate itself).
/// `available` (optional) marks coefficients that carry inference.
std::vector<WaldRow> wald_table(const VectorXd& estimate, const MatrixXd& cov, double level,
                                const std::vector<std::string>& names = {},
                                const std::vector<bool>& available = {});

std::vector<WaldRow> wald_inference(const BatchSummary& summary, double level);

}  // namespace dacglm
