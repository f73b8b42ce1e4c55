#include "dacglm/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dacglm/rng.hpp"

namespace dacglm {

double soft_threshold(double z, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

VectorXd resolve_weights(const PenaltyConfig& config, Index p) {
    if (config.penalty_weights.size() == 0) return VectorXd::Ones(p);
    if (config.penalty_weights.size() != p)
        throw std::invalid_argument("penalty_weights length " +
                                    std::to_string(config.penalty_weights.size()) +
                                    " does not match p = " + std::to_string(p));
    for (Index j = 0; j < p; ++j) {
        const double w = config.penalty_weights(j);
        if (std::isnan(w) || w < 0.0)
            throw std::invalid_argument("penalty weights must be nonnegative");
    }
    return config.penalty_weights;
}

VectorXd adaptive_weights(const VectorXd& beta_init, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("adaptive_weights: gamma must be positive");
    VectorXd w(beta_init.size());
    for (Index j = 0; j < w.size(); ++j) {
        const double a = std::abs(beta_init(j));
        w(j) = a == 0.0 ? kInfiniteWeight : std::pow(a, -gamma);
    }
    return w;
}

VectorXd recover_subgradient(const VectorXd& beta, const VectorXd& s, double lambda,
                             const VectorXd& weights) {
    const Index p = beta.size();
    VectorXd kappa = VectorXd::Zero(p);
    for (Index j = 0; j < p; ++j) {
        const double w = weights.size() ? weights(j) : 1.0;
        if (beta(j) > 0.0) kappa(j) = 1.0;
        else if (beta(j) < 0.0) kappa(j) = -1.0;
        else if (lambda > 0.0 && w > 0.0 && std::isfinite(w))
            kappa(j) = std::clamp(s(j) / (lambda * w), -1.0, 1.0);
    }
    return kappa;
}

namespace {

double kkt_from_score(const VectorXd& s, const VectorXd& kappa, double lambda,
                      const VectorXd& weights) {
    double worst = 0.0;
    for (Index j = 0; j < s.size(); ++j) {
        const double w = weights.size() ? weights(j) : 1.0;
        if (!std::isfinite(w)) continue;  // frozen at zero
        worst = std::max(worst, std::abs(s(j) - lambda * w * kappa(j)));
    }
    return worst;
}

/// Penalised GLM problem on internally rescaled columns. The rescaling is a
/// change of variables b_j = s_j beta_j with penalty lambda w_j / s_j, so the
/// objective and its solution are those of the original problem.
class LassoProblem {
  public:
    LassoProblem(const Dataset& data, const FamilySpec& family, const VectorXd& weights)
        : family_(family), y_(data.y), weights_(weights), n_(data.n()), p_(data.p()) {
        scale_.resize(p_);
        xs_.resize(n_, p_);
        for (Index j = 0; j < p_; ++j) {
            const double ms = data.X.col(j).squaredNorm() / static_cast<double>(n_);
            scale_(j) = ms > 0.0 ? std::sqrt(ms) : 1.0;
            zero_col_.push_back(ms == 0.0);
            xs_.col(j) = data.X.col(j) / scale_(j);
        }
        if (family_.kind == FamilyKind::gaussian) {
            // Column mean squares are exactly one after rescaling.
            unit_diag_ = VectorXd::Ones(p_);
            for (Index j = 0; j < p_; ++j)
                unit_diag_(j) = zero_col_[j] ? 0.0 : xs_.col(j).squaredNorm() / double(n_);
            gram_.reset(xs_, nullptr);
        }
    }

    Index p() const { return p_; }
    const VectorXd& scale() const { return scale_; }

    LassoFit solve(double lambda, const VectorXd& beta_start, const PenaltyConfig& cfg,
                   bool polish) const;

  private:
    double objective(const VectorXd& eta, const VectorXd& b, const VectorXd& pen) const {
        double ll = 0.0;
        for (Index i = 0; i < n_; ++i) ll += loglik_term(family_, y_(i), eta(i));
        double penalty = 0.0;
        for (Index j = 0; j < p_; ++j)
            if (b(j) != 0.0) penalty += pen(j) * std::abs(b(j));
        return -ll / static_cast<double>(n_) + penalty;
    }

    void mean_and_weights(const VectorXd& eta, VectorXd& mu, VectorXd& v) const {
        mu.resize(n_);
        v.resize(n_);
        for (Index i = 0; i < n_; ++i) {
            mu(i) = link_inverse(family_, eta(i));
            v(i) = clamped_weight(family_, mu(i));
        }
    }

    VectorXd std_score(const VectorXd& eta) const {
        VectorXd r(n_);
        for (Index i = 0; i < n_; ++i) r(i) = y_(i) - link_inverse(family_, eta(i));
        return xs_.transpose() * r / static_cast<double>(n_);
    }

    /// Original-scale KKT residual given the rescaled score.
    double kkt(const VectorXd& b, const VectorXd& sscore, double lambda) const {
        VectorXd beta = b.cwiseQuotient(scale_);
        VectorXd s = sscore.cwiseProduct(scale_);
        for (Index j = 0; j < p_; ++j)
            if (zero_col_[j]) s(j) = 0.0;
        return kkt_from_score(s, recover_subgradient(beta, s, lambda, weights_), lambda,
                              weights_);
    }

    /// Columns of the weighted Gram matrix X' V X / n, computed on demand.
    struct Gram {
        const MatrixXd* xs = nullptr;
        const VectorXd* v = nullptr;  ///< null: unit weights
        std::vector<VectorXd> cols;
        std::vector<bool> have;

        void reset(const MatrixXd& x, const VectorXd* weights) {
            xs = &x;
            v = weights;
            cols.assign(static_cast<std::size_t>(x.cols()), VectorXd());
            have.assign(static_cast<std::size_t>(x.cols()), false);
        }
        const VectorXd& col(Index j) {
            const auto uj = static_cast<std::size_t>(j);
            if (!have[uj]) {
                const double inv_n = 1.0 / static_cast<double>(xs->rows());
                if (v) cols[uj] = xs->transpose() * xs->col(j).cwiseProduct(*v) * inv_n;
                else cols[uj] = xs->transpose() * xs->col(j) * inv_n;
                have[uj] = true;
            }
            return cols[uj];
        }
    };

    /// Coordinate descent on (1/2n) sum v_i (z_i - x_i'b)^2 + sum pen_j |b_j|
    /// in covariance form. `g` holds X' V (z - X b) / n and is kept in sync with b.
    int coordinate_descent(VectorXd& b, VectorXd& g, const VectorXd& u, const VectorXd& pen,
                           double tol, int max_passes, Gram& gram) const;

    struct NewtonResult {
        VectorXd b;
        int iterations = 0;
        bool converged = false;
        bool factor_failed = false;
        bool sign_changed = false;
    };

    /// Newton iterations on the free coordinates (nonzero or unpenalised) with
    /// the others fixed at zero; penalised signs held fixed.
    NewtonResult newton_refine(const VectorXd& b0, const VectorXd& pen, double tol,
                               int max_iter, bool sign_constrained,
                               std::vector<double>* trace) const;

    FamilySpec family_;
    VectorXd y_;
    VectorXd weights_;
    Index n_;
    Index p_;
    MatrixXd xs_;
    VectorXd scale_;
    VectorXd unit_diag_;
    std::vector<bool> zero_col_;
    mutable Gram gram_;  ///< unweighted, reused across solves
};

int LassoProblem::coordinate_descent(VectorXd& b, VectorXd& g, const VectorXd& u,
                                     const VectorXd& pen, double tol, int max_passes,
                                     Gram& gram) const {
    std::vector<Index> active;
    int passes = 0;
    auto update = [&](Index j) -> double {
        if (!std::isfinite(pen(j)) || u(j) <= 0.0) return 0.0;
        const double bnew = soft_threshold(g(j) + u(j) * b(j), pen(j)) / u(j);
        const double delta = bnew - b(j);
        if (delta != 0.0) {
            g.noalias() -= delta * gram.col(j);
            b(j) = bnew;
        }
        return std::abs(delta);
    };
    while (passes < max_passes) {
        // Full sweep, which also discovers the active set.
        double full_delta = 0.0;
        for (Index j = 0; j < p_; ++j) full_delta = std::max(full_delta, update(j));
        ++passes;
        if (full_delta < tol) break;
        active.clear();
        for (Index j = 0; j < p_; ++j)
            if (b(j) != 0.0) active.push_back(j);
        while (passes < max_passes) {
            double d = 0.0;
            for (Index j : active) d = std::max(d, update(j));
            ++passes;
            if (d < tol) break;
        }
    }
    return passes;
}

LassoProblem::NewtonResult LassoProblem::newton_refine(const VectorXd& b0, const VectorXd& pen,
                                                      double tol, int max_iter,
                                                      bool sign_constrained,
                                                      std::vector<double>* trace) const {
    NewtonResult res;
    res.b = b0;
    std::vector<Index> idx;
    for (Index j = 0; j < p_; ++j) {
        if (zero_col_[j] || !std::isfinite(pen(j))) continue;
        if (b0(j) != 0.0 || pen(j) == 0.0) idx.push_back(j);
    }
    if (idx.empty()) {
        res.converged = true;
        return res;
    }
    const Index m = static_cast<Index>(idx.size());
    MatrixXd xa(n_, m);
    VectorXd sgn(m), pa(m), ba(m);
    for (Index k = 0; k < m; ++k) {
        xa.col(k) = xs_.col(idx[k]);
        pa(k) = pen(idx[k]);
        ba(k) = b0(idx[k]);
        sgn(k) = ba(k) > 0.0 ? 1.0 : (ba(k) < 0.0 ? -1.0 : 0.0);
    }
    // Smooth objective on the orthant fixed by the current signs.
    auto restricted_obj = [&](const VectorXd& coef, const VectorXd& eta) {
        double ll = 0.0;
        for (Index i = 0; i < n_; ++i) ll += loglik_term(family_, y_(i), eta(i));
        return -ll / static_cast<double>(n_) + pa.cwiseProduct(sgn).dot(coef);
    };
    VectorXd eta = xa * ba;
    double obj = restricted_obj(ba, eta);
    VectorXd mu, v;
    for (int it = 0; it < max_iter; ++it) {
        mean_and_weights(eta, mu, v);
        const VectorXd grad = xa.transpose() * (y_ - mu) / double(n_) - pa.cwiseProduct(sgn);
        MatrixXd h = MatrixXd::Zero(m, m);
        const MatrixXd wx = v.array().sqrt().matrix().asDiagonal() * xa;
        h.selfadjointView<Eigen::Lower>().rankUpdate(wx.transpose(), 1.0 / double(n_));
        Eigen::LLT<MatrixXd> llt(h.selfadjointView<Eigen::Lower>());
        if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
            res.factor_failed = true;
            return res;
        }
        const VectorXd step = llt.solve(grad);
        double t = 1.0;
        VectorXd trial, trial_eta;
        double trial_obj = obj;
        for (int halving = 0; halving < 40; ++halving) {
            trial = ba + t * step;
            trial_eta = xa * trial;
            trial_obj = restricted_obj(trial, trial_eta);
            if (std::isfinite(trial_obj) && trial_obj <= obj + 1e-13 * (1.0 + std::abs(obj)))
                break;
            t *= 0.5;
        }
        if (!std::isfinite(trial_obj) || !trial.allFinite()) {
            res.factor_failed = true;
            return res;
        }
        const double moved = (trial - ba).cwiseAbs().maxCoeff();
        ba = trial;
        eta = trial_eta;
        obj = trial_obj;
        ++res.iterations;
        if (sign_constrained) {
            for (Index k = 0; k < m; ++k)
                if (pa(k) > 0.0 && ba(k) * sgn(k) <= 0.0) {
                    res.sign_changed = true;
                    return res;
                }
        }
        for (Index k = 0; k < m; ++k) res.b(idx[k]) = ba(k);
        if (trace) trace->push_back(-obj);
        if (moved < tol) {
            res.converged = true;
            break;
        }
        if (ba.cwiseAbs().maxCoeff() > 1e10) break;
    }
    return res;
}

LassoFit LassoProblem::solve(double lambda, const VectorXd& beta_start,
                             const PenaltyConfig& cfg, bool polish) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be a nonnegative finite number");
    const bool gaussian = family_.kind == FamilyKind::gaussian;
    const double inv_n = 1.0 / static_cast<double>(n_);
    const double kkt_tol = cfg.tol * std::max(1.0, lambda);

    VectorXd pen(p_);
    bool unpenalised = true;
    for (Index j = 0; j < p_; ++j) {
        const double w = weights_(j);
        if (zero_col_[j] || !std::isfinite(w)) pen(j) = kInfiniteWeight;
        else pen(j) = lambda * w / scale_(j);
        if (std::isfinite(pen(j)) && pen(j) > 0.0) unpenalised = false;
    }

    LassoFit fit;
    fit.lambda = lambda;
    VectorXd b = beta_start.cwiseProduct(scale_);
    for (Index j = 0; j < p_; ++j)
        if (!std::isfinite(pen(j))) b(j) = 0.0;

    VectorXd eta = xs_ * b;
    double obj = objective(eta, b, pen);
    if (!std::isfinite(obj)) {
        b.setZero();
        eta.setZero();
        obj = objective(eta, b, pen);
    }
    fit.objective_trace.push_back(-obj);

    bool converged = false;
    bool use_cd = true;
    if (unpenalised) {
        // Unpenalised: Newton/IRLS with dense solves. Coordinate descent is the
        // fallback when the information matrix is singular.
        NewtonResult nr = newton_refine(b, pen, cfg.tol, cfg.max_outer_iter, false,
                                        &fit.objective_trace);
        fit.n_iter += nr.iterations;
        if (!nr.factor_failed) {
            use_cd = false;
            b = nr.b;
            eta = xs_ * b;
            obj = objective(eta, b, pen);
            converged = nr.converged && kkt(b, std_score(eta), lambda) <= kkt_tol;
        }
    }

    if (use_cd) {
        VectorXd mu, v, u(p_), g(p_);
        Gram weighted;
        double inner_tol = std::max(cfg.tol, 1e-5);
        int passes_left = cfg.max_inner_iter;
        for (int outer = 0; outer < cfg.max_outer_iter && passes_left > 0; ++outer) {
            ++fit.n_iter;
            if (gaussian) {
                u = unit_diag_;
                g = xs_.transpose() * (y_ - eta) * inv_n;
            } else {
                mean_and_weights(eta, mu, v);
                for (Index j = 0; j < p_; ++j) u(j) = v.dot(xs_.col(j).cwiseAbs2()) * inv_n;
                weighted.reset(xs_, &v);
                // X' V (z - X b) / n with working response z = eta + (y - mu) / v
                g = xs_.transpose() * (y_ - mu) * inv_n;
            }
            VectorXd b_new = b;
            passes_left -= coordinate_descent(b_new, g, u, pen, inner_tol, passes_left,
                                              gaussian ? gram_ : weighted);
            VectorXd eta_new = xs_ * b_new;
            double obj_new = objective(eta_new, b_new, pen);
            const double slack = 1e-12 * (1.0 + std::abs(obj));
            double t = 1.0;
            const VectorXd dir = b_new - b;
            while (!(obj_new <= obj + slack) && t > 1e-6) {
                t *= 0.5;
                b_new = b + t * dir;
                eta_new = xs_ * b_new;
                obj_new = objective(eta_new, b_new, pen);
            }
            if (!(obj_new <= obj + slack)) break;
            const double delta = (b_new - b).cwiseAbs().maxCoeff();
            b = b_new;
            eta = eta_new;
            obj = obj_new;
            fit.objective_trace.push_back(-obj);
            if (delta < std::max(cfg.tol, inner_tol) || gaussian) {
                if (kkt(b, std_score(eta), lambda) <= kkt_tol) {
                    converged = true;
                    break;
                }
                // Solve the current sign pattern exactly; coordinate descent
                // alone converges slowly on correlated designs.
                NewtonResult nr = newton_refine(b, pen, cfg.tol * 1e-3, 20, true, nullptr);
                if (!nr.factor_failed && !nr.sign_changed) {
                    const VectorXd reta = xs_ * nr.b;
                    const double robj = objective(reta, nr.b, pen);
                    if (robj <= obj + 1e-12 * (1.0 + std::abs(obj))) {
                        b = nr.b;
                        eta = reta;
                        obj = robj;
                        fit.objective_trace.push_back(-obj);
                        if (kkt(b, std_score(eta), lambda) <= kkt_tol) {
                            converged = true;
                            break;
                        }
                    }
                }
                inner_tol = std::max(inner_tol * 0.1, 1e-15);
            }
        }
    }

    if (polish && !unpenalised) {
        NewtonResult nr = newton_refine(b, pen, cfg.tol * 1e-3, 20, true, nullptr);
        if (!nr.factor_failed && !nr.sign_changed) {
            const VectorXd reta = xs_ * nr.b;
            const double before = kkt(b, std_score(eta), lambda);
            const double after = kkt(nr.b, std_score(reta), lambda);
            const double robj = objective(reta, nr.b, pen);
            if (after <= before && robj <= obj + 1e-12 * (1.0 + std::abs(obj))) {
                b = nr.b;
                eta = reta;
                obj = robj;
                fit.objective_trace.push_back(-obj);
                if (after <= kkt_tol) converged = true;
            }
        }
    }

    fit.beta = b.cwiseQuotient(scale_);
    VectorXd s = std_score(eta).cwiseProduct(scale_);
    for (Index j = 0; j < p_; ++j)
        if (zero_col_[j]) s(j) = 0.0;
    fit.subgradient = recover_subgradient(fit.beta, s, lambda, weights_);
    fit.kkt_violation = kkt_from_score(s, fit.subgradient, lambda, weights_);
    fit.converged = converged && fit.beta.allFinite() && fit.kkt_violation <= kkt_tol;
    if (!fit.converged)
        fit.warnings.push_back("lasso solve did not converge at lambda = " +
                               std::to_string(lambda) + " (kkt " +
                               std::to_string(fit.kkt_violation) + ")");
    if (family_.kind == FamilyKind::poisson) {
        for (Index i = 0; i < n_; ++i)
            if (std::exp(eta(i)) > kPoissonMeanCap) {
                fit.warnings.push_back("poisson mean exceeds cap at row " +
                                       std::to_string(i + 1));
                break;
            }
    }
    return fit;
}

}  // namespace

double lambda_max(const Dataset& data, const FamilySpec& family, const VectorXd& weights) {
    const Index p = data.p();
    if (weights.size() != p) throw std::invalid_argument("lambda_max: weight length mismatch");
    bool any_penalised = false;
    VectorXd free_weights = VectorXd::Constant(p, kInfiniteWeight);
    for (Index j = 0; j < p; ++j) {
        if (std::isfinite(weights(j)) && weights(j) > 0.0) any_penalised = true;
        if (weights(j) == 0.0) free_weights(j) = 0.0;
    }
    if (!any_penalised)
        throw std::invalid_argument("lambda_max: every coefficient has infinite or zero weight");
    VectorXd beta_null = VectorXd::Zero(p);
    if ((free_weights.array() == 0.0).any()) {
        PenaltyConfig cfg;
        cfg.penalty_weights = free_weights;
        beta_null = fit_lasso(data, family, 0.0, cfg).beta;
    }
    const VectorXd s = score(family, data, beta_null, 1.0);
    double lmax = 0.0;
    for (Index j = 0; j < p; ++j)
        if (std::isfinite(weights(j)) && weights(j) > 0.0)
            lmax = std::max(lmax, std::abs(s(j)) / weights(j));
    return lmax;
}

std::vector<double> default_lambda_grid(double lmax, int size, double min_ratio) {
    if (size < 1) throw std::invalid_argument("lambda grid size must be positive");
    if (!(lmax > 0.0)) return {0.0};
    std::vector<double> grid(static_cast<std::size_t>(size));
    if (size == 1) {
        grid[0] = lmax;
        return grid;
    }
    const double lo = std::log(min_ratio);
    for (int k = 0; k < size; ++k)
        grid[static_cast<std::size_t>(k)] =
            lmax * std::exp(lo * static_cast<double>(k) / static_cast<double>(size - 1));
    grid.front() = lmax;
    return grid;
}

LassoFit fit_lasso(const Dataset& data, const FamilySpec& family, double lambda,
                   const PenaltyConfig& config, const std::optional<VectorXd>& warm_start) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
    const VectorXd w = resolve_weights(config, data.p());
    LassoProblem problem(data, family, w);
    VectorXd start = VectorXd::Zero(data.p());
    if (warm_start) {
        if (warm_start->size() != data.p())
            throw std::invalid_argument("warm start length does not match p");
        start = *warm_start;
    }
    return problem.solve(lambda, start, config, config.polish);
}

std::vector<LassoFit> fit_lasso_path(const Dataset& data, const FamilySpec& family,
                                     const std::vector<double>& grid,
                                     const PenaltyConfig& config) {
    const VectorXd w = resolve_weights(config, data.p());
    LassoProblem problem(data, family, w);
    std::vector<LassoFit> out;
    out.reserve(grid.size());
    VectorXd start = VectorXd::Zero(data.p());
    for (double lambda : grid) {
        out.push_back(problem.solve(lambda, start, config, config.polish));
        if (out.back().beta.allFinite()) start = out.back().beta;
    }
    return out;
}

CvResult cv_tune(const Dataset& data, const FamilySpec& family, const PenaltyConfig& config,
                 std::uint64_t seed) {
    const Index n = data.n();
    if (config.n_folds < 2) throw std::invalid_argument("cv_tune: n_folds must be at least 2");
    if (n < 2 * static_cast<Index>(config.n_folds))
        throw std::invalid_argument("cv_tune: need n >= 2 * n_folds");
    const VectorXd w = resolve_weights(config, data.p());
    std::vector<double> grid = config.lambda_grid;
    if (grid.empty())
        grid = default_lambda_grid(lambda_max(data, family, w), config.grid_size,
                                   config.grid_min_ratio);
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] < grid[k - 1]))
            throw std::invalid_argument("lambda grid must be strictly descending");

    CvResult result;
    const std::size_t G = grid.size();
    if (G == 1) {
        result.lambda_star = grid[0];
        result.curve.push_back({grid[0], 0.0, 0.0, 0});
    }

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(seed, seed_stream::cv_folds, 0));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
            static_cast<int>(i % config.n_folds);

    // dev[f][g], NaN when excluded
    std::vector<std::vector<double>> dev(
        static_cast<std::size_t>(config.n_folds),
        std::vector<double>(G, std::numeric_limits<double>::quiet_NaN()));
    PenaltyConfig inner = config;
    inner.polish = false;
    inner.penalty_weights = w;
    if (G > 1) {
        for (int f = 0; f < config.n_folds; ++f) {
            std::vector<Index> train, test;
            for (Index i = 0; i < n; ++i)
                (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
            const Dataset tr = data.subset(train);
            const Dataset te = data.subset(test);
            try {
                LassoProblem problem(tr, family, w);
                VectorXd start = VectorXd::Zero(data.p());
                for (std::size_t g = 0; g < G; ++g) {
                    LassoFit fit;
                    try {
                        fit = problem.solve(grid[g], start, inner, false);
                    } catch (const std::exception& e) {
                        result.warnings.push_back("fold " + std::to_string(f) + " lambda " +
                                                  std::to_string(grid[g]) + ": " + e.what());
                        continue;
                    }
                    if (!fit.converged || !fit.beta.allFinite()) {
                        result.warnings.push_back("fold " + std::to_string(f) +
                                                  " excluded at lambda " +
                                                  std::to_string(grid[g]));
                        if (fit.beta.allFinite()) start = fit.beta;
                        continue;
                    }
                    start = fit.beta;
                    const VectorXd eta = te.X * fit.beta;
                    double d = 0.0;
                    for (Index i = 0; i < te.n(); ++i)
                        d += unit_deviance(family, te.y(i), link_inverse(family, eta(i)));
                    dev[static_cast<std::size_t>(f)][g] = d / static_cast<double>(te.n());
                }
            } catch (const std::exception& e) {
                result.warnings.push_back("fold " + std::to_string(f) + " failed: " + e.what());
            }
        }
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < G; ++g) {
            CvPoint pt;
            pt.lambda = grid[g];
            double sum = 0.0, sumsq = 0.0;
            for (int f = 0; f < config.n_folds; ++f) {
                const double d = dev[static_cast<std::size_t>(f)][g];
                if (std::isnan(d)) continue;
                sum += d;
                sumsq += d * d;
                ++pt.folds_used;
            }
            if (pt.folds_used == 0) {
                pt.mean_deviance = std::numeric_limits<double>::quiet_NaN();
                pt.sd_deviance = std::numeric_limits<double>::quiet_NaN();
                result.warnings.push_back("lambda " + std::to_string(grid[g]) +
                                          " excluded: every fold failed");
                result.curve.push_back(pt);
                continue;
            }
            const double k = pt.folds_used;
            pt.mean_deviance = sum / k;
            pt.sd_deviance = k > 1 ? std::sqrt(std::max(0.0, (sumsq - sum * sum / k) / (k - 1)))
                                   : 0.0;
            result.curve.push_back(pt);
            // Strict comparison: ties keep the earlier (larger) lambda.
            if (pt.mean_deviance < best) {
                best = pt.mean_deviance;
                result.index_star = g;
                result.lambda_star = grid[g];
            }
        }
        if (!std::isfinite(best)) throw std::runtime_error("cv_tune: every lambda failed");
    }
    return result;
}

double kkt_residual(const LassoFit& fit, const Dataset& data, const FamilySpec& family,
                    double phi, const VectorXd& weights) {
    const VectorXd s = score(family, data, fit.beta, phi);
    const VectorXd w = weights.size() ? weights : VectorXd::Ones(data.p());
    return kkt_from_score(s, fit.subgradient, fit.lambda, w);
}

}  // namespace dacglm
