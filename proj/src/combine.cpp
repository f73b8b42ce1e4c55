#include "dacglm/combine.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dacglm/rng.hpp"

namespace dacglm {

std::string_view to_string(Combiner c) {
    switch (c) {
        case Combiner::dac: return "dac";
        case Combiner::meta: return "meta";
        case Combiner::voting: return "voting";
    }
    return "unknown";
}

namespace {

CombinedFit precision_weighted(const std::vector<BatchSummary>& summaries, Combiner combiner,
                               const CombineOptions& options) {
    if (summaries.empty()) throw std::invalid_argument("combine: no batch summaries");
    const Index p = summaries.front().p();
    for (const auto& s : summaries) {
        if (s.p() != p || s.precision.rows() != p || s.precision.cols() != p)
            throw std::invalid_argument("combine: batch " + std::to_string(s.batch_index) +
                                        " has dimension " + std::to_string(s.p()) +
                                        ", expected " + std::to_string(p));
        if (s.n < 1) throw std::invalid_argument("combine: batch with n < 1");
    }

    // Order-fixed reduction by batch index.
    std::vector<std::size_t> order(summaries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return summaries[a].batch_index < summaries[b].batch_index;
    });

    std::vector<double> rescale(summaries.size(), 1.0);
    CombinedFit out;
    if (options.common_phi) {
        double num = 0.0, den = 0.0;
        for (const auto& s : summaries) {
            num += static_cast<double>(s.n) * s.phi_hat;
            den += static_cast<double>(s.n);
        }
        const double pooled = num / den;
        for (std::size_t k = 0; k < summaries.size(); ++k)
            rescale[k] = summaries[k].phi_hat / pooled;
        out.diagnostics.push_back("common dispersion " + std::to_string(pooled));
    }

    MatrixXd pooled = MatrixXd::Zero(p, p);
    VectorXd rhs = VectorXd::Zero(p);
    for (std::size_t k : order) {
        const BatchSummary& s = summaries[k];
        if (rescale[k] == 1.0) {
            pooled += s.precision;
            rhs += s.precision * s.beta_c;
        } else {
            const MatrixXd pk = s.precision * rescale[k];
            pooled += pk;
            rhs += pk * s.beta_c;
        }
        out.N += s.n;
        out.included_batches.push_back(s.batch_index);
        if (s.ridge_tau > 0.0)
            out.diagnostics.push_back("batch " + std::to_string(s.batch_index) +
                                      " used ridge tau " + std::to_string(s.ridge_tau));
    }
    pooled = 0.5 * (pooled + pooled.transpose()).eval();
    const RidgedCholesky chol = ridged_cholesky(pooled, 0.0, options.auto_ridge);
    out.beta = chol.llt.solve(rhs);
    out.covariance = chol.llt.solve(MatrixXd::Identity(p, p));
    out.ridge_tau = chol.tau;
    if (chol.tau > 0.0)
        out.diagnostics.push_back("pooled precision ridged with tau " + std::to_string(chol.tau));
    out.K = static_cast<int>(summaries.size());
    out.combiner = combiner;
    out.has_inference.assign(static_cast<std::size_t>(p), true);
    out.column_names = summaries.front().column_names;
    return out;
}

}  // namespace

CombinedFit combine_dac(const std::vector<BatchSummary>& summaries,
                        const CombineOptions& options) {
    return precision_weighted(summaries, Combiner::dac, options);
}

CombinedFit combine_meta(const std::vector<BatchSummary>& summaries,
                         const CombineOptions& options) {
    for (const auto& s : summaries)
        if (s.lambda != 0.0)
            throw std::invalid_argument("combine_meta: batch " + std::to_string(s.batch_index) +
                                        " was fit with lambda != 0");
    return precision_weighted(summaries, Combiner::meta, options);
}

CombinedFit combine_outcomes(const std::vector<BatchOutcome>& outcomes, Combiner combiner,
                             const CombineOptions& options) {
    std::vector<BatchSummary> healthy;
    std::vector<std::string> failures;
    for (const auto& o : outcomes) {
        if (o.failed) failures.push_back("batch " + std::to_string(o.summary.batch_index) +
                                         " failed: " + o.error);
        else healthy.push_back(o.summary);
    }
    if (!failures.empty() && !options.allow_partial)
        throw std::runtime_error(failures.front() + " (use allow_partial to combine survivors)");
    if (healthy.empty()) throw std::runtime_error("combine: every batch failed");
    CombinedFit fit = combiner == Combiner::meta ? combine_meta(healthy, options)
                                                 : combine_dac(healthy, options);
    for (auto& f : failures) fit.diagnostics.push_back("partial combine: " + f);
    return fit;
}

std::vector<Index> vote_set(const std::vector<VotingInput>& inputs, int omega) {
    if (inputs.empty()) throw std::invalid_argument("combine_voting: no fits");
    const int K = static_cast<int>(inputs.size());
    if (omega < 0 || omega >= K)
        throw std::invalid_argument("combine_voting: omega must lie in [0, K)");
    const Index p = inputs.front().beta.size();
    std::vector<Index> chosen;
    for (Index j = 0; j < p; ++j) {
        int votes = 0;
        for (const auto& in : inputs) votes += in.beta(j) != 0.0;
        if (votes > omega) chosen.push_back(j);
    }
    return chosen;
}

CombinedFit combine_voting(const std::vector<VotingInput>& inputs, int omega,
                           const std::vector<std::string>& names) {
    const std::vector<Index> chosen = vote_set(inputs, omega);
    const Index p = inputs.front().beta.size();
    for (const auto& in : inputs)
        if (in.beta.size() != p || in.neg_hessian.rows() != p || in.neg_hessian.cols() != p)
            throw std::invalid_argument("combine_voting: inconsistent dimensions");

    CombinedFit out;
    out.combiner = Combiner::voting;
    out.omega = omega;
    out.K = static_cast<int>(inputs.size());
    for (int k = 0; k < out.K; ++k) {
        out.N += inputs[static_cast<std::size_t>(k)].n;
        out.included_batches.push_back(k);
    }
    out.beta = VectorXd::Zero(p);
    out.covariance = MatrixXd::Zero(p, p);
    out.has_inference.assign(static_cast<std::size_t>(p), false);
    out.column_names = names;
    if (chosen.empty()) {
        out.diagnostics.push_back("empty vote set; estimate is the zero vector");
        return out;
    }
    const Index m = static_cast<Index>(chosen.size());
    // Weights use the Fisher information -S_dot; the sign cancels in the estimate.
    MatrixXd wsum = MatrixXd::Zero(m, m);
    VectorXd rhs = VectorXd::Zero(m);
    for (const auto& in : inputs) {
        MatrixXd wk(m, m);
        VectorXd bk(m);
        for (Index a = 0; a < m; ++a) {
            bk(a) = in.beta(chosen[static_cast<std::size_t>(a)]);
            for (Index c = 0; c < m; ++c)
                wk(a, c) = in.neg_hessian(chosen[static_cast<std::size_t>(a)],
                                          chosen[static_cast<std::size_t>(c)]);
        }
        wk *= static_cast<double>(in.n);
        wsum += wk;
        rhs += wk * bk;
    }
    const RidgedCholesky chol = ridged_cholesky(wsum, 0.0, true);
    const VectorXd est = chol.llt.solve(rhs);
    const MatrixXd cov = chol.llt.solve(MatrixXd::Identity(m, m));
    out.ridge_tau = chol.tau;
    for (Index a = 0; a < m; ++a) {
        const Index ja = chosen[static_cast<std::size_t>(a)];
        out.beta(ja) = est(a);
        out.has_inference[static_cast<std::size_t>(ja)] = true;
        for (Index c = 0; c < m; ++c) out.covariance(ja, chosen[static_cast<std::size_t>(c)]) = cov(a, c);
    }
    return out;
}

std::vector<std::vector<Index>> random_partition(Index n_total, int K, std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("random_partition: K must be >= 1");
    if (n_total < K)
        throw std::invalid_argument("random_partition: K = " + std::to_string(K) +
                                    " exceeds n = " + std::to_string(n_total));
    std::vector<Index> perm(static_cast<std::size_t>(n_total));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(seed, seed_stream::partition, 0));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<Index>> parts(static_cast<std::size_t>(K));
    const Index base = n_total / K;
    const Index extra = n_total % K;
    auto it = perm.begin();
    for (int k = 0; k < K; ++k) {
        const Index size = base + (k < extra ? 1 : 0);
        auto& part = parts[static_cast<std::size_t>(k)];
        part.assign(it, it + size);
        std::sort(part.begin(), part.end());
        it += size;
    }
    return parts;
}

std::vector<WaldRow> wald_inference(const CombinedFit& fit, double level) {
    return wald_table(fit.beta, fit.covariance, level, fit.column_names, fit.has_inference);
}

}  // namespace dacglm
