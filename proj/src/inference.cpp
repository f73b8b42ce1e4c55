#include "dacglm/inference.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace dacglm {

RidgedCholesky ridged_cholesky(const MatrixXd& a, double tau, bool auto_ridge) {
    const Index p = a.rows();
    auto attempt = [&](double t, RidgedCholesky& out) {
        MatrixXd m = a;
        if (t > 0.0) m.diagonal().array() += t;
        out.llt.compute(m);
        out.tau = t;
        return out.llt.info() == Eigen::Success && out.llt.rcond() > 1e-13;
    };
    RidgedCholesky out;
    if (p == 0) {
        out.tau = tau;
        return out;
    }
    if (attempt(tau, out)) return out;
    if (!auto_ridge)
        throw SingularMatrixError(
            "information matrix is singular; rerun with a ridge term (tau > 0) or enable "
            "automatic ridge fallback");
    for (double t = std::max(kRidgeStart, tau * 10.0); t <= kRidgeCap * (1.0 + 1e-12); t *= 10.0)
        if (attempt(t, out)) return out;
    throw SingularMatrixError("information matrix remains singular with ridge tau up to " +
                              std::to_string(kRidgeCap));
}

BatchSummary debias(const LassoFit& fit, const Dataset& data, const FamilySpec& family,
                    double phi, const DebiasOptions& options) {
    if (!(phi > 0.0)) throw std::invalid_argument("debias: dispersion must be positive");
    if (!fit.converged && !options.force)
        throw std::runtime_error("debias: lasso fit did not converge (set force to override)");
    if (options.ridge_tau < 0.0) throw std::invalid_argument("debias: ridge tau must be >= 0");
    const MatrixXd m = neg_hessian(family, data, fit.beta, phi);
    const VectorXd s = score(family, data, fit.beta, phi);
    const RidgedCholesky chol = ridged_cholesky(m, options.ridge_tau, options.auto_ridge);

    BatchSummary out;
    out.beta_c = fit.beta + chol.llt.solve(s);
    out.precision = m;
    if (chol.tau > 0.0) out.precision.diagonal().array() += chol.tau;
    out.precision *= static_cast<double>(data.n());
    out.n = static_cast<long>(data.n());
    out.phi_hat = phi;
    out.lambda = fit.lambda;
    out.ridge_tau = chol.tau;
    out.kkt_violation = fit.kkt_violation;
    out.converged = fit.converged;
    out.active.resize(static_cast<std::size_t>(data.p()));
    for (Index j = 0; j < data.p(); ++j) out.active[static_cast<std::size_t>(j)] = fit.beta(j) != 0.0;
    out.column_names = data.column_names;
    return out;
}

VectorXd debias_via_subgradient(const LassoFit& fit, const Dataset& data,
                                const FamilySpec& family, double phi, double ridge_tau,
                                const VectorXd& weights) {
    MatrixXd m = neg_hessian(family, data, fit.beta, phi);
    if (ridge_tau > 0.0) m.diagonal().array() += ridge_tau;
    const VectorXd w = weights.size() ? weights : VectorXd::Ones(data.p());
    VectorXd g(data.p());
    for (Index j = 0; j < data.p(); ++j)
        g(j) = std::isfinite(w(j)) ? fit.lambda * w(j) * fit.subgradient(j) : 0.0;
    // The lasso objective lives on the phi = 1 scale; rescale to match S_n / phi.
    g /= phi;
    return fit.beta + m.llt().solve(g);
}

MatrixXd covariance(const BatchSummary& summary) {
    const Index p = summary.p();
    Eigen::LLT<MatrixXd> llt(summary.precision / static_cast<double>(summary.n));
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13))
        throw SingularMatrixError("covariance: precision matrix is singular");
    return llt.solve(MatrixXd::Identity(p, p));
}

double ConfidenceDensity::log_density(const VectorXd& b) const {
    const VectorXd d = b - center;
    return -0.5 * d.dot(precision * d);
}

ConfidenceDensity confidence_density(const BatchSummary& summary) {
    return {summary.beta_c, summary.precision, true};
}

double normal_quantile(double prob) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, prob);
}

double two_sided_p(double z) {
    if (std::isinf(z)) return 0.0;
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

std::vector<WaldRow> wald_table(const VectorXd& estimate, const MatrixXd& cov, double level,
                                const std::vector<std::string>& names,
                                const std::vector<bool>& available) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<WaldRow> rows;
    rows.reserve(static_cast<std::size_t>(estimate.size()));
    for (Index j = 0; j < estimate.size(); ++j) {
        WaldRow r;
        const auto uj = static_cast<std::size_t>(j);
        r.name = uj < names.size() ? names[uj] : "x" + std::to_string(j + 1);
        r.estimate = estimate(j);
        if (!available.empty() && !available[uj]) {
            r.available = false;
            r.std_error = r.ci_lo = r.ci_hi = r.p_value = nan;
            rows.push_back(r);
            continue;
        }
        r.std_error = std::sqrt(std::max(0.0, cov(j, j)));
        r.ci_lo = r.estimate - z * r.std_error;
        r.ci_hi = r.estimate + z * r.std_error;
        if (r.std_error == 0.0) {
            r.degenerate = true;
            r.p_value = r.estimate == 0.0 ? 1.0 : 0.0;
        } else {
            r.p_value = two_sided_p(r.estimate / r.std_error);
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<WaldRow> wald_inference(const BatchSummary& summary, double level) {
    const MatrixXd cov = covariance(summary) / static_cast<double>(summary.n);
    return wald_table(summary.beta_c, cov, level, summary.column_names);
}

}  // namespace dacglm
