#include "dacglm/glm.hpp"

#include <cmath>
#include <string>

namespace dacglm {

namespace {
void check_dims(const Dataset& data, const VectorXd& beta) {
    if (beta.size() != data.p())
        throw DataError("coefficient length " + std::to_string(beta.size()) +
                        " does not match design columns " + std::to_string(data.p()));
}
}  // namespace

Index count_nonzero(const VectorXd& v) {
    Index k = 0;
    for (Index j = 0; j < v.size(); ++j) k += v(j) != 0.0;
    return k;
}

ModelState model_state(const FamilySpec& family, const Dataset& data, const VectorXd& beta) {
    check_dims(data, beta);
    ModelState s;
    s.beta = beta;
    s.eta = data.X * beta;
    s.mu.resize(data.n());
    s.weights.resize(data.n());
    for (Index i = 0; i < data.n(); ++i) {
        s.mu(i) = link_inverse(family, s.eta(i));
        s.weights(i) = clamped_weight(family, s.mu(i));
        if (family.kind == FamilyKind::poisson && s.mu(i) > kPoissonMeanCap)
            s.mean_cap_exceeded = true;
    }
    return s;
}

double mean_loglik(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
                   double phi) {
    check_dims(data, beta);
    const VectorXd eta = data.X * beta;
    double acc = 0.0;
    for (Index i = 0; i < data.n(); ++i) acc += loglik_term(family, data.y(i), eta(i));
    return acc / (static_cast<double>(data.n()) * phi);
}

VectorXd score(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
               double phi) {
    check_dims(data, beta);
    if (!(phi > 0.0)) throw std::invalid_argument("dispersion must be positive");
    const VectorXd eta = data.X * beta;
    VectorXd resid(data.n());
    for (Index i = 0; i < data.n(); ++i) resid(i) = data.y(i) - link_inverse(family, eta(i));
    return data.X.transpose() * resid / (static_cast<double>(data.n()) * phi);
}

MatrixXd neg_hessian(const FamilySpec& family, const Dataset& data, const VectorXd& beta,
                     double phi) {
    check_dims(data, beta);
    if (!(phi > 0.0)) throw std::invalid_argument("dispersion must be positive");
    const Index p = data.p();
    MatrixXd h(p, p);
    if (family.kind == FamilyKind::gaussian) {
        h.setZero();
        h.selfadjointView<Eigen::Lower>().rankUpdate(data.X.transpose());
    } else {
        const ModelState s = model_state(family, data, beta);
        const MatrixXd wx = s.weights.array().sqrt().matrix().asDiagonal() * data.X;
        h.setZero();
        h.selfadjointView<Eigen::Lower>().rankUpdate(wx.transpose());
    }
    h = h.selfadjointView<Eigen::Lower>();
    return h / (static_cast<double>(data.n()) * phi);
}

DispersionEstimate dispersion_estimate(const FamilySpec& family, const Dataset& data,
                                       const VectorXd& beta) {
    if (family.dispersion.is_fixed()) return {family.dispersion.value, false, false};
    const Index df = data.n() - count_nonzero(beta);
    if (df <= 0)
        throw DataError("oversaturated model: n = " + std::to_string(data.n()) +
                        " does not exceed the number of nonzero coefficients");
    const VectorXd eta = data.X * beta;
    double dev = 0.0;
    for (Index i = 0; i < data.n(); ++i)
        dev += unit_deviance(family, data.y(i), link_inverse(family, eta(i)));
    DispersionEstimate out;
    out.value = dev / static_cast<double>(df);
    out.degenerate = out.value == 0.0;
    out.estimated = true;
    return out;
}

}  // namespace dacglm
