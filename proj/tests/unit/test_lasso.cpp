#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/QR>
#include <cmath>

#include "dacglm/lasso.hpp"
#include "helpers.hpp"

using namespace dacglm;
using testutil::random_glm;

namespace {

const FamilyKind kAll[] = {FamilyKind::gaussian, FamilyKind::logistic, FamilyKind::poisson};

/// Design with X'X / n = I.
Dataset orthonormal(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const MatrixXd g = testutil::normal_matrix(n, p, rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    Dataset d;
    d.X = qr.householderQ() * MatrixXd::Identity(n, p) * std::sqrt(static_cast<double>(n));
    std::normal_distribution<double> z;
    d.y.resize(n);
    VectorXd beta = VectorXd::Zero(p);
    beta(0) = 1.0;
    beta(1) = -0.5;
    beta(2) = 0.2;
    const VectorXd mean = d.X * beta;
    for (Index i = 0; i < n; ++i) d.y(i) = mean(i) + z(rng);
    return d;
}

/// Unpenalised logistic/poisson MLE by plain Newton-Raphson.
VectorXd newton_mle(FamilyKind kind, const Dataset& d) {
    VectorXd beta = VectorXd::Zero(d.p());
    for (int it = 0; it < 100; ++it) {
        const VectorXd s = testutil::score_oracle(kind, d, beta);
        const MatrixXd h = testutil::info_oracle(kind, d, beta);
        const VectorXd step = h.ldlt().solve(s);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-13) break;
    }
    return beta;
}

double kkt_oracle(FamilyKind kind, const Dataset& d, const LassoFit& fit) {
    const VectorXd s = testutil::score_oracle(kind, d, fit.beta);
    double worst = 0.0;
    for (Index j = 0; j < d.p(); ++j) {
        double r;
        if (fit.beta(j) != 0.0) r = std::abs(s(j) - fit.lambda * (fit.beta(j) > 0 ? 1.0 : -1.0));
        else r = std::max(0.0, std::abs(s(j)) - fit.lambda);
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace

TEST_CASE("soft threshold") {
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
    CHECK(soft_threshold(1.0, 1.0) == 0.0);
    CHECK_THROWS(soft_threshold(1.0, -1.0));
}

TEST_CASE("orthonormal gaussian design matches closed-form soft thresholding") {
    const Dataset d = orthonormal(200, 8, 3);
    const VectorXd z = d.X.transpose() * d.y / 200.0;
    PenaltyConfig cfg;
    for (double lambda : {0.0, 0.01, 0.1, 0.3, 0.7, 2.0}) {
        CAPTURE(lambda);
        const LassoFit fit = fit_lasso(d, FamilySpec::gaussian(), lambda, cfg);
        CHECK(fit.converged);
        for (Index j = 0; j < 8; ++j) CHECK(std::abs(fit.beta(j) - soft_threshold(z(j), lambda)) < 1e-8);
    }
}

TEST_CASE("lambda = 0 gaussian equals least squares") {
    const Dataset d = random_glm(FamilyKind::gaussian, 120, 7, 4);
    const VectorXd ols = d.X.colPivHouseholderQr().solve(d.y);
    const LassoFit fit = fit_lasso(d, FamilySpec::gaussian(), 0.0, {});
    CHECK(fit.converged);
    CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("lambda = 0 logistic and poisson equal the Newton MLE") {
    for (FamilyKind k : {FamilyKind::logistic, FamilyKind::poisson}) {
        CAPTURE(k);
        const Dataset d = random_glm(k, 300, 5, 5);
        const LassoFit fit = fit_lasso(d, FamilySpec::of(k), 0.0, {});
        CHECK(fit.converged);
        CHECK((fit.beta - newton_mle(k, d)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("KKT conditions hold at every converged fit") {
    int checked = 0;
    for (FamilyKind k : kAll) {
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            const Dataset d = random_glm(k, 80 + 20 * static_cast<Index>(seed), 10, seed);
            const double lmax = lambda_max(d, FamilySpec::of(k), VectorXd::Ones(10));
            PenaltyConfig cfg;
            for (double frac : {0.9, 0.4, 0.1, 0.02}) {
                const LassoFit fit = fit_lasso(d, FamilySpec::of(k), frac * lmax, cfg);
                if (!fit.converged) continue;
                ++checked;
                const double tol = cfg.tol * std::max(1.0, fit.lambda);
                CHECK(kkt_oracle(k, d, fit) <= tol);
                CHECK(kkt_residual(fit, d, FamilySpec::of(k)) <= tol);
            }
        }
    }
    CHECK(checked >= 90);
}

TEST_CASE("lambda_max zeroes the fit and anything smaller does not") {
    for (FamilyKind k : kAll) {
        CAPTURE(k);
        const Dataset d = random_glm(k, 200, 6, 21);
        const double lmax = lambda_max(d, FamilySpec::of(k), VectorXd::Ones(6));
        CHECK(lmax == doctest::Approx(testutil::score_oracle(k, d, VectorXd::Zero(6)).cwiseAbs().maxCoeff()));
        CHECK(fit_lasso(d, FamilySpec::of(k), lmax * 1.0001, {}).nnz() == 0);
        CHECK(fit_lasso(d, FamilySpec::of(k), lmax * 0.95, {}).nnz() > 0);
    }
}

TEST_CASE("unpenalised coordinates are fitted at every lambda") {
    Dataset d = random_glm(FamilyKind::logistic, 300, 4, 22).with_intercept();
    PenaltyConfig cfg;
    cfg.penalty_weights = VectorXd::Ones(5);
    cfg.penalty_weights(0) = 0.0;
    const double lmax = lambda_max(d, FamilySpec::logistic(), cfg.penalty_weights);
    const LassoFit fit = fit_lasso(d, FamilySpec::logistic(), lmax * 1.01, cfg);
    CHECK(fit.beta.tail(4).isZero(0.0));
    const double ybar = d.y.mean();
    CHECK(fit.beta(0) == doctest::Approx(std::log(ybar / (1 - ybar))).epsilon(1e-8));
}

TEST_CASE("infinite weights freeze coordinates at zero") {
    const Dataset d = random_glm(FamilyKind::gaussian, 100, 4, 23);
    PenaltyConfig cfg;
    cfg.penalty_weights = VectorXd::Ones(4);
    cfg.penalty_weights(1) = kInfiniteWeight;
    const LassoFit fit = fit_lasso(d, FamilySpec::gaussian(), 0.0, cfg);
    CHECK(fit.beta(1) == 0.0);
    const VectorXd w = adaptive_weights((VectorXd(3) << 0.5, 0.0, -2.0).finished(), 1.0);
    CHECK(w(0) == 2.0);
    CHECK(std::isinf(w(1)));
    CHECK(w(2) == 0.5);
}

TEST_CASE("objective trace is nondecreasing") {
    for (FamilyKind k : kAll) {
        const Dataset d = random_glm(k, 150, 12, 31);
        const double lmax = lambda_max(d, FamilySpec::of(k), VectorXd::Ones(12));
        const LassoFit fit = fit_lasso(d, FamilySpec::of(k), 0.05 * lmax, {});
        for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
            CHECK(fit.objective_trace[t] >= fit.objective_trace[t - 1] - 1e-12);
    }
}

TEST_CASE("warm starts do not change the solution") {
    const Dataset d = random_glm(FamilyKind::poisson, 200, 8, 32);
    const LassoFit cold = fit_lasso(d, FamilySpec::poisson(), 0.02, {});
    const LassoFit warm = fit_lasso(d, FamilySpec::poisson(), 0.02, {}, VectorXd::Constant(8, 0.3));
    CHECK((cold.beta - warm.beta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("default grid is descending and log-spaced") {
    const auto g = default_lambda_grid(2.0, 100, 1e-3);
    REQUIRE(g.size() == 100);
    CHECK(g.front() == 2.0);
    CHECK(g.back() == doctest::Approx(2e-3));
    for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] < g[k - 1]);
    CHECK(g[1] / g[0] == doctest::Approx(g[51] / g[50]));
}

TEST_CASE("cross-validation is seeded and picks a grid value") {
    const Dataset d = random_glm(FamilyKind::gaussian, 200, 10, 41);
    PenaltyConfig cfg;
    cfg.grid_size = 30;
    const CvResult a = cv_tune(d, FamilySpec::gaussian(), cfg, 5);
    const CvResult b = cv_tune(d, FamilySpec::gaussian(), cfg, 5);
    CHECK(a.lambda_star == b.lambda_star);
    CHECK(a.curve.size() == 30);
    CHECK(a.curve[a.index_star].lambda == a.lambda_star);
    for (const auto& pt : a.curve) CHECK(pt.mean_deviance >= a.curve[a.index_star].mean_deviance);
}

TEST_CASE("cross-validation ties go to the larger lambda") {
    Dataset d = random_glm(FamilyKind::gaussian, 50, 2, 42);
    d.X.setZero();
    PenaltyConfig cfg;
    cfg.lambda_grid = {0.5, 0.2, 0.1};
    const CvResult r = cv_tune(d, FamilySpec::gaussian(), cfg, 1);
    CHECK(r.index_star == 0);
    CHECK(r.lambda_star == 0.5);
}

TEST_CASE("cross-validation rejects an ascending grid") {
    const Dataset d = random_glm(FamilyKind::gaussian, 50, 2, 43);
    PenaltyConfig cfg;
    cfg.lambda_grid = {0.1, 0.2};
    CHECK_THROWS(cv_tune(d, FamilySpec::gaussian(), cfg, 1));
}

TEST_CASE("weights of the wrong length are rejected") {
    const Dataset d = random_glm(FamilyKind::gaussian, 50, 3, 44);
    PenaltyConfig cfg;
    cfg.penalty_weights = VectorXd::Ones(2);
    CHECK_THROWS(fit_lasso(d, FamilySpec::gaussian(), 0.1, cfg));
    CHECK_THROWS(fit_lasso(d, FamilySpec::gaussian(), -0.1, {}));
}

TEST_CASE("subgradient recovery") {
    VectorXd beta(3), s(3);
    beta << 0.5, 0.0, -1.0;
    s << 0.2, 0.1, -0.2;
    const VectorXd k = recover_subgradient(beta, s, 0.2, VectorXd::Ones(3));
    CHECK(k(0) == 1.0);
    CHECK(k(1) == doctest::Approx(0.5));
    CHECK(k(2) == -1.0);
}
