#pragma once

#include <random>

#include "dacglm/dataset.hpp"

namespace testutil {

using dacglm::Dataset;
using dacglm::FamilyKind;
using dacglm::Index;
using dacglm::MatrixXd;
using dacglm::VectorXd;

inline MatrixXd normal_matrix(Index n, Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = z(rng);
    return x;
}

/// Random GLM data drawn with the standard library only.
inline Dataset random_glm(FamilyKind kind, Index n, Index p, std::uint64_t seed,
                          double scale = 0.3) {
    std::mt19937_64 rng(seed);
    Dataset d;
    d.X = normal_matrix(n, p, rng);
    VectorXd beta(p);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (Index j = 0; j < p; ++j) beta(j) = (j % 3 == 0) ? u(rng) * 2 : 0.0;
    const VectorXd eta = d.X * beta;
    d.y.resize(n);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> unif;
    for (Index i = 0; i < n; ++i) {
        switch (kind) {
            case FamilyKind::gaussian: d.y(i) = eta(i) + z(rng); break;
            case FamilyKind::logistic: d.y(i) = unif(rng) < 1.0 / (1.0 + std::exp(-eta(i))); break;
            case FamilyKind::poisson: {
                std::poisson_distribution<int> pois(std::exp(eta(i)));
                d.y(i) = pois(rng);
                break;
            }
        }
    }
    return d;
}

/// Plain mean-function oracle written independently of the library.
inline double mean_of(FamilyKind kind, double eta) {
    switch (kind) {
        case FamilyKind::gaussian: return eta;
        case FamilyKind::logistic: return 1.0 / (1.0 + std::exp(-eta));
        case FamilyKind::poisson: return std::exp(eta);
    }
    return eta;
}

inline double var_of(FamilyKind kind, double mu) {
    switch (kind) {
        case FamilyKind::gaussian: return 1.0;
        case FamilyKind::logistic: return mu * (1.0 - mu);
        case FamilyKind::poisson: return mu;
    }
    return 1.0;
}

inline VectorXd score_oracle(FamilyKind kind, const Dataset& d, const VectorXd& beta,
                             double phi = 1.0) {
    const VectorXd eta = d.X * beta;
    VectorXd r(d.n());
    for (Index i = 0; i < d.n(); ++i) r(i) = d.y(i) - mean_of(kind, eta(i));
    return d.X.transpose() * r / (static_cast<double>(d.n()) * phi);
}

inline MatrixXd info_oracle(FamilyKind kind, const Dataset& d, const VectorXd& beta,
                            double phi = 1.0) {
    const VectorXd eta = d.X * beta;
    MatrixXd h = MatrixXd::Zero(d.p(), d.p());
    for (Index i = 0; i < d.n(); ++i) {
        const double w = var_of(kind, mean_of(kind, eta(i)));
        h += w * d.X.row(i).transpose() * d.X.row(i);
    }
    return h / (static_cast<double>(d.n()) * phi);
}

}  // namespace testutil
