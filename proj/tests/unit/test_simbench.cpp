#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "dacglm/simbench.hpp"

using namespace dacglm;

namespace {

SimConfig tiny(FamilySpec family = FamilySpec::gaussian()) {
    SimConfig c;
    c.family = family;
    c.N = 400;
    c.p = 8;
    c.K = 2;
    c.s0 = 3;
    c.n_reps = 3;
    c.penalty.grid_size = 15;
    return c;
}

}  // namespace

TEST_CASE("design rows have the compound-symmetry covariance") {
    const MatrixXd X = gen_design(20000, 4, 0.8, 11);
    const MatrixXd centered = X.rowwise() - X.colwise().mean();
    const MatrixXd cov = centered.transpose() * centered / 19999.0;
    for (Index a = 0; a < 4; ++a)
        for (Index b = 0; b < 4; ++b)
            CHECK(cov(a, b) == doctest::Approx(a == b ? 1.0 : 0.8).epsilon(0.03));
    CHECK(gen_design(5, 3, 0.5, 1) == gen_design(5, 3, 0.5, 1));
    CHECK_THROWS(gen_design(5, 3, 1.0, 1));
}

TEST_CASE("true coefficients have s0 signals of the given size") {
    const TrueCoefficients t = gen_coefficients(50, 10, 0.3, 7);
    CHECK(t.signal_set.size() == 10);
    CHECK(std::is_sorted(t.signal_set.begin(), t.signal_set.end()));
    CHECK((t.beta0.array() != 0.0).count() == 10);
    for (Index j : t.signal_set) CHECK(t.beta0(j) == 0.3);
    CHECK(gen_coefficients(50, 10, 0.3, 8).signal_set != t.signal_set);
    CHECK_THROWS(gen_coefficients(5, 6, 0.3, 1));
}

TEST_CASE("responses have the family's support and mean") {
    const MatrixXd X = gen_design(40000, 2, 0.0, 3);
    const VectorXd b = (VectorXd(2) << 0.3, 0.0).finished();
    const VectorXd yl = gen_response(X, b, FamilySpec::logistic(), 1.0, 4);
    CHECK(((yl.array() == 0.0) || (yl.array() == 1.0)).all());
    const VectorXd yp = gen_response(X, b, FamilySpec::poisson(), 1.0, 4);
    CHECK((yp.array() >= 0.0).all());
    CHECK(yp.mean() == doctest::Approx(std::exp(0.045)).epsilon(0.02));
    const VectorXd yg = gen_response(X, b, FamilySpec::gaussian(), 4.0, 4);
    CHECK((yg - X * b).array().square().mean() == doctest::Approx(4.0).epsilon(0.03));
    const VectorXd big = (VectorXd(2) << 800.0, 0.0).finished();
    CHECK_THROWS_WITH_AS(gen_response(X, big, FamilySpec::poisson(), 1.0, 4),
                         doctest::Contains("eta"), DataError);
}

TEST_CASE("evaluate without inference counts nonzeros") {
    VectorXd beta0(4), est(4);
    beta0 << 1, 1, 0, 0;
    est << 0.5, 0, 0.2, 0;
    const MetricsRow m = evaluate("LASSO", est, nullptr, beta0, {0, 1});
    CHECK(m.sensitivity == 0.5);
    CHECK(m.specificity == 0.5);
    CHECK(m.mse_signal == doctest::Approx((0.25 + 1.0) / 2));
    CHECK(m.mse_null == doctest::Approx(0.04 / 2));
    CHECK(m.abs_bias_signal == doctest::Approx(0.75));
    CHECK_FALSE(m.coverage_signal.has_value());
}

TEST_CASE("evaluate with inference uses the intervals") {
    VectorXd beta0(3), est(3);
    beta0 << 1, 0, 0;
    est << 0.9, 0.3, -0.1;
    std::vector<WaldRow> rows(3);
    rows[0] = {"a", 0.9, 0.1, 0.7, 1.1, 0.0};
    rows[1] = {"b", 0.3, 0.1, 0.1, 0.5, 0.0};
    rows[2] = {"c", -0.1, 0.1, -0.3, 0.1, 0.3};
    const MetricsRow m = evaluate("MODAC", est, &rows, beta0, {0});
    CHECK(m.sensitivity == 1.0);
    CHECK(m.specificity == 0.5);
    CHECK(*m.coverage_signal == 1.0);
    CHECK(*m.coverage_null == 0.5);
    CHECK(*m.asymp_se_signal == doctest::Approx(0.1));
    const MetricsRow all_null = evaluate("X", est, &rows, VectorXd::Zero(3), {});
    CHECK(all_null.sensitivity == 1.0);
}

TEST_CASE("method labels and presets") {
    CHECK(parse_sim_method("modac") == SimMethod::modac);
    CHECK(parse_sim_method("LassoInf") == SimMethod::lassoinf);
    CHECK_THROWS(parse_sim_method("x"));
    CHECK(default_signal(FamilyKind::poisson) == 0.1);
    const SimConfig t = preset("table1-logistic");
    CHECK(t.N == 10000);
    CHECK(t.p == 300);
    CHECK(t.K == 20);
    CHECK(t.n_reps == 500);
    CHECK(t.family.kind == FamilyKind::logistic);
    CHECK_THROWS(preset("nope"));
    SimConfig c;
    c.K = 5;
    CHECK(c.effective_omegas() == std::vector<int>{2});
    c.omega_sweep = true;
    CHECK(c.effective_omegas().size() == 5);
    MetricsRow r;
    r.method = "VOTING";
    r.omega = 2;
    CHECK(r.label() == "VOTING(w=2)");
}

TEST_CASE("a small study runs every method deterministically") {
    const SimConfig c = tiny();
    const StudyResult a = run_study(c);
    CHECK(a.summary.size() == 6);
    for (const auto& m : a.summary) {
        CAPTURE(m.label());
        CHECK(m.reps + m.failures == 3);
        CHECK(m.sensitivity >= 0.0);
        CHECK(m.sensitivity <= 1.0);
    }
    SimConfig parallel = c;
    parallel.workers = 3;
    const StudyResult b = run_study(parallel);
    REQUIRE(a.raw.size() == b.raw.size());
    for (std::size_t i = 0; i < a.raw.size(); ++i) {
        CHECK(a.raw[i].method == b.raw[i].method);
        CHECK(a.raw[i].metrics.mse_signal == b.raw[i].metrics.mse_signal);
    }
}

TEST_CASE("a method's results do not depend on which others run") {
    SimConfig c = tiny(FamilySpec::logistic());
    c.n_reps = 2;
    const StudyResult all = run_study(c);
    c.methods = {SimMethod::modac};
    const StudyResult one = run_study(c);
    for (const auto& r : all.raw)
        if (r.method == "MODAC")
            CHECK(r.metrics.mse_signal == one.raw[static_cast<std::size_t>(r.rep)].metrics.mse_signal);
}

TEST_CASE("omega sweep gives one voting row per threshold") {
    SimConfig c = tiny();
    c.K = 4;
    c.methods = {SimMethod::voting};
    c.omega_sweep = true;
    c.n_reps = 1;
    const StudyResult r = run_study(c);
    REQUIRE(r.summary.size() == 4);
    for (int w = 0; w < 4; ++w) CHECK(r.summary[static_cast<std::size_t>(w)].omega == w);
    for (int w = 1; w < 4; ++w)
        CHECK(r.summary[static_cast<std::size_t>(w)].sensitivity <=
              r.summary[static_cast<std::size_t>(w - 1)].sensitivity);
}

TEST_CASE("study output files") {
    SimConfig c = tiny();
    c.n_reps = 1;
    c.methods = {SimMethod::glm, SimMethod::modac};
    const StudyResult r = run_study(c);
    const std::string s = summary_csv(r.summary);
    CHECK(s.rfind("metric,GLM,MODAC\n", 0) == 0);
    CHECK(long_csv(r).find("family,N,p,K,n_k,s0,signal,rho,n_reps,method,omega,metric,value") == 0);
    const auto dir = std::filesystem::temp_directory_path() / "dacglm_study_test";
    write_study(r, dir);
    for (const char* f : {"study_summary.csv", "study_raw.jsonl", "study_long.csv", "study_config.json"})
        CHECK(std::filesystem::exists(dir / f));
    std::filesystem::remove_all(dir);
    SimConfig bad = c;
    bad.s0 = 20;
    CHECK_THROWS(validate(bad));
}
