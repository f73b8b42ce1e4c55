#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "dacglm/combine.hpp"
#include "helpers.hpp"

using namespace dacglm;
using testutil::random_glm;

namespace {

std::vector<BatchSummary> batch_summaries(const Dataset& d, FamilyKind k, int K, double frac,
                                          std::uint64_t seed) {
    std::vector<BatchSummary> out;
    const auto parts = random_partition(d.n(), K, seed);
    for (int b = 0; b < K; ++b) {
        const Dataset sub = d.subset(parts[static_cast<std::size_t>(b)]);
        const double lmax = lambda_max(sub, FamilySpec::of(k), VectorXd::Ones(d.p()));
        const LassoFit fit = fit_lasso(sub, FamilySpec::of(k), frac * lmax, {});
        BatchSummary s = debias(fit, sub, FamilySpec::of(k), 1.0);
        s.batch_index = b;
        out.push_back(s);
    }
    return out;
}

std::vector<VotingInput> voting_inputs(const Dataset& d, FamilyKind k, int K, double frac) {
    std::vector<VotingInput> out;
    const auto parts = random_partition(d.n(), K, 9);
    for (const auto& rows : parts) {
        const Dataset sub = d.subset(rows);
        const double lmax = lambda_max(sub, FamilySpec::of(k), VectorXd::Ones(d.p()));
        const LassoFit fit = fit_lasso(sub, FamilySpec::of(k), frac * lmax, {});
        out.push_back({fit.beta, neg_hessian(FamilySpec::of(k), sub, fit.beta, 1.0),
                       static_cast<long>(sub.n())});
    }
    return out;
}

}  // namespace

TEST_CASE("a single batch passes through") {
    const Dataset d = random_glm(FamilyKind::logistic, 300, 5, 61);
    const auto s = batch_summaries(d, FamilyKind::logistic, 1, 0.2, 1);
    const CombinedFit c = combine_dac(s);
    CHECK((c.beta - s[0].beta_c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c.covariance - covariance(s[0]) / 300.0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c.N == 300);
    CHECK(c.K == 1);
}

TEST_CASE("gaussian combination collapses to full-data least squares") {
    const Dataset d = random_glm(FamilyKind::gaussian, 600, 6, 62);
    const VectorXd ols = d.X.colPivHouseholderQr().solve(d.y);
    const auto s = batch_summaries(d, FamilyKind::gaussian, 4, 0.3, 2);
    const CombinedFit c = combine_dac(s);
    CHECK((c.beta - ols).cwiseAbs().maxCoeff() < 1e-9);
    const MatrixXd xtx_inv = (d.X.transpose() * d.X).inverse();
    CHECK((c.covariance - xtx_inv).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("combined covariance inverts the summed precision") {
    const Dataset d = random_glm(FamilyKind::poisson, 800, 5, 63);
    const auto s = batch_summaries(d, FamilyKind::poisson, 4, 0.2, 3);
    MatrixXd sum = MatrixXd::Zero(5, 5);
    VectorXd rhs = VectorXd::Zero(5);
    for (const auto& b : s) {
        sum += b.precision;
        rhs += b.precision * b.beta_c;
    }
    const CombinedFit c = combine_dac(s);
    CHECK((c.covariance * sum - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.beta - sum.inverse() * rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("combination ignores the order summaries arrive in") {
    const Dataset d = random_glm(FamilyKind::logistic, 800, 5, 64);
    auto s = batch_summaries(d, FamilyKind::logistic, 5, 0.2, 4);
    const CombinedFit a = combine_dac(s);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        std::shuffle(s.begin(), s.end(), rng);
        const CombinedFit b = combine_dac(s);
        CHECK(a.beta == b.beta);
        CHECK(a.covariance == b.covariance);
        CHECK(b.included_batches == std::vector<int>{0, 1, 2, 3, 4});
    }
}

TEST_CASE("meta equals dac on unpenalised summaries and refuses penalised ones") {
    const Dataset d = random_glm(FamilyKind::logistic, 600, 4, 65);
    const auto mle = batch_summaries(d, FamilyKind::logistic, 3, 0.0, 5);
    const CombinedFit a = combine_dac(mle);
    const CombinedFit b = combine_meta(mle);
    CHECK(a.beta == b.beta);
    CHECK(b.combiner == Combiner::meta);
    const auto pen = batch_summaries(d, FamilyKind::logistic, 3, 0.3, 5);
    CHECK_THROWS(combine_meta(pen));
}

TEST_CASE("mismatched dimensions are rejected") {
    const auto a = batch_summaries(random_glm(FamilyKind::gaussian, 100, 3, 66),
                                   FamilyKind::gaussian, 1, 0.0, 6);
    auto b = batch_summaries(random_glm(FamilyKind::gaussian, 100, 4, 67),
                             FamilyKind::gaussian, 1, 0.0, 6);
    b[0].batch_index = 1;
    CHECK_THROWS_WITH(combine_dac({a[0], b[0]}), doctest::Contains("batch 1"));
    CHECK_THROWS(combine_dac({}));
}

TEST_CASE("common dispersion pools by batch size") {
    const Dataset d = random_glm(FamilyKind::gaussian, 400, 3, 68);
    auto s = batch_summaries(d, FamilyKind::gaussian, 2, 0.0, 7);
    s[0].phi_hat = 1.0;
    s[1].phi_hat = 3.0;
    s[0].precision /= 1.0;
    s[1].precision /= 3.0;
    CombineOptions opt;
    opt.common_phi = true;
    const CombinedFit c = combine_dac(s, opt);
    const VectorXd ols = d.X.colPivHouseholderQr().solve(d.y);
    CHECK((c.beta - ols).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("failed batches need the partial policy") {
    const Dataset d = random_glm(FamilyKind::gaussian, 300, 3, 69);
    const auto s = batch_summaries(d, FamilyKind::gaussian, 3, 0.0, 8);
    std::vector<BatchOutcome> outs;
    for (const auto& b : s) outs.push_back({b, false, ""});
    outs[1].failed = true;
    outs[1].error = "boom";
    CHECK_THROWS_WITH(combine_outcomes(outs, Combiner::dac), doctest::Contains("batch 1"));
    CombineOptions opt;
    opt.allow_partial = true;
    const CombinedFit c = combine_outcomes(outs, Combiner::dac, opt);
    CHECK(c.included_batches == std::vector<int>{0, 2});
    CHECK(c.N == s[0].n + s[2].n);
    for (auto& o : outs) o.failed = true;
    CHECK_THROWS(combine_outcomes(outs, Combiner::dac, opt));
}

TEST_CASE("vote set matches a brute-force count and shrinks with omega") {
    const Dataset d = random_glm(FamilyKind::gaussian, 800, 12, 70);
    const auto in = voting_inputs(d, FamilyKind::gaussian, 4, 0.2);
    std::size_t previous = 13;
    for (int omega = 0; omega < 4; ++omega) {
        std::vector<Index> expect;
        for (Index j = 0; j < 12; ++j) {
            int v = 0;
            for (const auto& x : in) v += x.beta(j) != 0.0 ? 1 : 0;
            if (v > omega) expect.push_back(j);
        }
        const auto got = vote_set(in, omega);
        CHECK(got == expect);
        CHECK(got.size() <= previous);
        previous = got.size();
    }
    CHECK_THROWS(vote_set(in, 4));
    CHECK_THROWS(vote_set(in, -1));
}

TEST_CASE("voting estimate is the information-weighted average on the vote set") {
    const Dataset d = random_glm(FamilyKind::logistic, 1200, 6, 71);
    const auto in = voting_inputs(d, FamilyKind::logistic, 3, 0.1);
    const int omega = 1;
    const auto set = vote_set(in, omega);
    REQUIRE(!set.empty());
    const Index m = static_cast<Index>(set.size());
    MatrixXd w = MatrixXd::Zero(m, m);
    VectorXd r = VectorXd::Zero(m);
    for (const auto& x : in) {
        MatrixXd h(m, m);
        VectorXd b(m);
        for (Index a = 0; a < m; ++a) {
            b(a) = x.beta(set[static_cast<std::size_t>(a)]);
            for (Index c = 0; c < m; ++c)
                h(a, c) = x.n * x.neg_hessian(set[static_cast<std::size_t>(a)], set[static_cast<std::size_t>(c)]);
        }
        w += h;
        r += h * b;
    }
    const VectorXd oracle = w.inverse() * r;
    const CombinedFit c = combine_voting(in, omega);
    for (Index a = 0; a < m; ++a) CHECK(c.beta(set[static_cast<std::size_t>(a)]) == doctest::Approx(oracle(a)).epsilon(1e-10));
    for (Index j = 0; j < 6; ++j) {
        const bool in_set = std::find(set.begin(), set.end(), j) != set.end();
        CHECK(c.has_inference[static_cast<std::size_t>(j)] == in_set);
        if (!in_set) CHECK(c.beta(j) == 0.0);
    }
    const auto rows = wald_inference(c, 0.95);
    for (Index j = 0; j < 6; ++j) CHECK(rows[static_cast<std::size_t>(j)].available == c.has_inference[static_cast<std::size_t>(j)]);
}

TEST_CASE("empty vote set gives the zero vector") {
    std::vector<VotingInput> in(2, {VectorXd::Zero(3), MatrixXd::Identity(3, 3), 10});
    const CombinedFit c = combine_voting(in, 0);
    CHECK(c.beta.isZero(0.0));
    CHECK(c.diagnostics.size() == 1);
}

TEST_CASE("random partition is a seeded near-equal cover") {
    const auto parts = random_partition(103, 4, 7);
    REQUIRE(parts.size() == 4);
    std::set<Index> seen;
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(parts[k].size() == (k < 3 ? 26u : 25u));
        CHECK(std::is_sorted(parts[k].begin(), parts[k].end()));
        seen.insert(parts[k].begin(), parts[k].end());
    }
    CHECK(seen.size() == 103);
    CHECK(*seen.rbegin() == 102);
    CHECK(random_partition(103, 4, 7) == parts);
    CHECK(random_partition(103, 4, 8) != parts);
    CHECK_THROWS(random_partition(3, 4, 1));
    CHECK_THROWS(random_partition(3, 0, 1));
}
