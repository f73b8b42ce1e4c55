#pragma once

#include "dacglm/dataset.hpp"

namespace dacglm {

/// Linear predictor, mean and variance weights at a coefficient vector.
struct ModelState {
    VectorXd beta;
    VectorXd eta;
    VectorXd mu;
    VectorXd weights;  ///< diagonal of P_n, clamped
    bool mean_cap_exceeded = false;
};

ModelState model_state(const FamilySpec& family, const Dataset& data, const VectorXd& beta);

/// Average log-likelihood (1/n) sum {y eta - b(eta)} / phi.
double mean_loglik(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
                   double phi = 1.0);

/// S_n(beta) = (1/n) sum {y_i - g^{-1}(x_i' beta)} x_i / phi.
VectorXd score(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
               double phi = 1.0);

/// (1/(n phi)) X' P_n(beta) X, i.e. -dS_n/dbeta.
MatrixXd neg_hessian(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
                     double phi = 1.0);

struct DispersionEstimate {
    double value = 1.0;
    bool degenerate = false;  ///< zero residual deviance
    bool estimated = false;
};

/// phi_hat = (n - |beta|_0)^{-1} sum d(y_i, mu_i). Families with a fixed
/// policy return the fixed value. Throws DataError when n <= |beta|_0.
DispersionEstimate dispersion_estimate(const FamilySpec& family, const Dataset& data,
                                       const VectorXd& beta);

Index count_nonzero(const VectorXd& v);

}  // namespace dacglm
