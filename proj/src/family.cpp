#include "dacglm/family.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dacglm {

FamilySpec FamilySpec::of(FamilyKind k) {
    switch (k) {
        case FamilyKind::gaussian: return gaussian();
        case FamilyKind::logistic: return logistic();
        case FamilyKind::poisson: return poisson();
    }
    return gaussian();
}

std::string_view to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::gaussian: return "gaussian";
        case FamilyKind::logistic: return "logistic";
        case FamilyKind::poisson: return "poisson";
    }
    return "unknown";
}

FamilyKind parse_family(std::string_view name) {
    if (name == "gaussian") return FamilyKind::gaussian;
    if (name == "logistic" || name == "binomial") return FamilyKind::logistic;
    if (name == "poisson") return FamilyKind::poisson;
    throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

double link_inverse(const FamilySpec& family, double eta) {
    switch (family.kind) {
        case FamilyKind::gaussian: return eta;
        case FamilyKind::logistic:
            if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
            else {
                const double e = std::exp(eta);
                return e / (1.0 + e);
            }
        case FamilyKind::poisson: return std::exp(eta);
    }
    return eta;
}

double variance_weight(const FamilySpec& family, double mu) {
    switch (family.kind) {
        case FamilyKind::gaussian: return 1.0;
        case FamilyKind::logistic: return mu * (1.0 - mu);
        case FamilyKind::poisson: return mu;
    }
    return 1.0;
}

double clamped_weight(const FamilySpec& family, double mu) {
    switch (family.kind) {
        case FamilyKind::gaussian: return 1.0;
        case FamilyKind::logistic: {
            const double m = std::clamp(mu, kLogisticMeanEps, 1.0 - kLogisticMeanEps);
            return m * (1.0 - m);
        }
        case FamilyKind::poisson: return std::max(mu, kPoissonWeightFloor);
    }
    return 1.0;
}

namespace {
// log(1 + exp(x)) without overflow.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }
}  // namespace

double loglik_term(const FamilySpec& family, double y, double eta) {
    switch (family.kind) {
        case FamilyKind::gaussian: return y * eta - 0.5 * eta * eta;
        case FamilyKind::logistic: return y * eta - softplus(eta);
        case FamilyKind::poisson: return y * eta - std::exp(eta);
    }
    return 0.0;
}

double unit_deviance(const FamilySpec& family, double y, double mu) {
    switch (family.kind) {
        case FamilyKind::gaussian: return (y - mu) * (y - mu);
        case FamilyKind::logistic: {
            const double m = std::clamp(mu, kLogisticMeanEps, 1.0 - kLogisticMeanEps);
            return 2.0 * (xlogy(y, y / m) + xlogy(1.0 - y, (1.0 - y) / (1.0 - m)));
        }
        case FamilyKind::poisson: {
            const double m = std::max(mu, kPoissonWeightFloor);
            return 2.0 * (xlogy(y, y / m) - (y - m));
        }
    }
    return 0.0;
}

}  // namespace dacglm
