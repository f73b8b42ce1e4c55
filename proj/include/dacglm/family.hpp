#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace dacglm {

enum class FamilyKind { gaussian, logistic, poisson };

/// Dispersion handling. `fixed` carries the value; `estimated` means the
/// mean unit deviance over residual degrees of freedom is used.
struct DispersionPolicy {
    enum class Kind { fixed, estimated };
    Kind kind = Kind::fixed;
    double value = 1.0;

    static DispersionPolicy fixed(double v) { return {Kind::fixed, v}; }
    static DispersionPolicy estimated() { return {Kind::estimated, 1.0}; }
    bool is_fixed() const { return kind == Kind::fixed; }
};

/// GLM family with its canonical link (identity, logit, log).
struct FamilySpec {
    FamilyKind kind = FamilyKind::gaussian;
    DispersionPolicy dispersion = DispersionPolicy::estimated();

    static FamilySpec gaussian() { return {FamilyKind::gaussian, DispersionPolicy::estimated()}; }
    static FamilySpec logistic() { return {FamilyKind::logistic, DispersionPolicy::fixed(1.0)}; }
    static FamilySpec poisson() { return {FamilyKind::poisson, DispersionPolicy::fixed(1.0)}; }
    static FamilySpec of(FamilyKind k);
};

// Clamping constants for the mean/weight computations.
inline constexpr double kLogisticMeanEps = 1e-8;
inline constexpr double kPoissonWeightFloor = 1e-8;
inline constexpr double kPoissonMeanCap = 1e10;

std::string_view to_string(FamilyKind k);
FamilyKind parse_family(std::string_view name);

/// g^{-1}(eta). Logistic is evaluated without overflow for any finite eta.
double link_inverse(const FamilySpec& family, double eta);

/// Variance function V(mu): 1, mu(1-mu), mu. No clamping.
double variance_weight(const FamilySpec& family, double mu);

/// Variance weight used in P_n: logistic mean clamped to [eps, 1-eps],
/// poisson weight floored.
double clamped_weight(const FamilySpec& family, double mu);

/// Per-observation log-likelihood contribution y*eta - b(eta) (phi = 1,
/// normalising term c(y, phi) dropped).
double loglik_term(const FamilySpec& family, double y, double eta);

/// Unit deviance d(y, mu).
double unit_deviance(const FamilySpec& family, double y, double mu);

}  // namespace dacglm
