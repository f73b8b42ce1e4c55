#include "dacglm/simbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "dacglm/rng.hpp"

namespace dacglm {

std::string_view to_string(SimMethod m) {
    switch (m) {
        case SimMethod::glm: return "GLM";
        case SimMethod::lasso: return "LASSO";
        case SimMethod::lassoinf: return "LASSOINF";
        case SimMethod::voting: return "VOTING";
        case SimMethod::meta: return "META";
        case SimMethod::modac: return "MODAC";
    }
    return "UNKNOWN";
}

const std::vector<SimMethod>& all_sim_methods() {
    static const std::vector<SimMethod> all{SimMethod::glm,    SimMethod::lasso,
                                            SimMethod::lassoinf, SimMethod::voting,
                                            SimMethod::meta,   SimMethod::modac};
    return all;
}

SimMethod parse_sim_method(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (SimMethod m : all_sim_methods())
        if (to_string(m) == upper) return m;
    throw std::invalid_argument("unknown simulation method '" + std::string(name) + "'");
}

double default_signal(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::gaussian: return 0.3;
        case FamilyKind::logistic: return 0.3;
        case FamilyKind::poisson: return 0.1;
    }
    return 0.3;
}

double SimConfig::effective_signal() const {
    return std::isnan(signal) ? default_signal(family.kind) : signal;
}

std::vector<int> SimConfig::effective_omegas() const {
    if (omega_sweep) {
        std::vector<int> all(static_cast<std::size_t>(K));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    if (!omegas.empty()) return omegas;
    return {K / 2};
}

SimConfig preset(std::string_view name, FamilySpec family) {
    SimConfig c;
    if (name == "desk") {
        c.family = family;
        return c;
    }
    c.N = 10000;
    c.p = 300;
    c.K = 20;
    c.s0 = 10;
    c.rho = 0.8;
    c.n_reps = 500;
    if (name == "table1-gaussian") c.family = FamilySpec::gaussian();
    else if (name == "table1-logistic") c.family = FamilySpec::logistic();
    else if (name == "table1-poisson") c.family = FamilySpec::poisson();
    else
        throw std::invalid_argument("unknown preset '" + std::string(name) +
                                    "' (expected desk, table1-gaussian, table1-logistic or "
                                    "table1-poisson)");
    return c;
}

void validate(const SimConfig& c) {
    if (c.N < 1 || c.p < 1) throw std::invalid_argument("N and p must be positive");
    if (c.K < 1 || c.K > c.N) throw std::invalid_argument("K must lie in [1, N]");
    if (c.s0 < 0 || c.s0 > c.p) throw std::invalid_argument("s0 must lie in [0, p]");
    if (!(c.rho >= 0.0 && c.rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
    if (c.n_reps < 1) throw std::invalid_argument("n_reps must be >= 1");
    if (!(c.level > 0.0 && c.level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
    if (!(c.phi > 0.0)) throw std::invalid_argument("phi must be positive");
    if (c.methods.empty()) throw std::invalid_argument("no methods selected");
    if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
    for (int w : c.effective_omegas())
        if (w < 0 || w >= c.K) throw std::invalid_argument("omega must lie in [0, K)");
}

MatrixXd gen_design(Index n, Index p, double rho, std::uint64_t seed) {
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("gen_design: rho must lie in [0, 1)");
    Rng rng(seed);
    std::normal_distribution<double> z;
    const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
    MatrixXd X(n, p);
    for (Index i = 0; i < n; ++i) {
        const double shared = a * z(rng);
        for (Index j = 0; j < p; ++j) X(i, j) = shared + b * z(rng);
    }
    return X;
}

TrueCoefficients gen_coefficients(Index p, Index s0, double signal, std::uint64_t seed) {
    if (s0 < 0 || s0 > p) throw std::invalid_argument("gen_coefficients: s0 must lie in [0, p]");
    std::vector<Index> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    TrueCoefficients t;
    t.signal_set.assign(idx.begin(), idx.begin() + s0);
    std::sort(t.signal_set.begin(), t.signal_set.end());
    t.beta0 = VectorXd::Zero(p);
    for (Index j : t.signal_set) t.beta0(j) = signal;
    return t;
}

VectorXd gen_response(const MatrixXd& X, const VectorXd& beta0, const FamilySpec& family,
                      double phi, std::uint64_t seed) {
    if (X.cols() != beta0.size()) throw std::invalid_argument("gen_response: dimension mismatch");
    const VectorXd eta = X * beta0;
    Rng rng(seed);
    VectorXd y(X.rows());
    switch (family.kind) {
        case FamilyKind::gaussian: {
            std::normal_distribution<double> e;
            const double sd = std::sqrt(phi);
            for (Index i = 0; i < y.size(); ++i) y(i) = eta(i) + sd * e(rng);
            break;
        }
        case FamilyKind::logistic: {
            std::uniform_real_distribution<double> u;
            for (Index i = 0; i < y.size(); ++i)
                y(i) = u(rng) < link_inverse(family, eta(i)) ? 1.0 : 0.0;
            break;
        }
        case FamilyKind::poisson: {
            for (Index i = 0; i < y.size(); ++i) {
                const double mu = std::exp(eta(i));
                if (!(mu <= kPoissonMeanCap))
                    throw DataError("gen_response: poisson mean overflows at row " +
                                    std::to_string(i + 1) + " (eta = " + std::to_string(eta(i)) +
                                    ")");
                std::poisson_distribution<long long> pois(mu);
                y(i) = static_cast<double>(pois(rng));
            }
            break;
        }
    }
    return y;
}

std::string MetricsRow::label() const {
    return omega >= 0 ? method + "(w=" + std::to_string(omega) + ")" : method;
}

MetricsRow evaluate(const std::string& method, const VectorXd& estimate,
                    const std::vector<WaldRow>* inference, const VectorXd& beta0,
                    const std::vector<Index>& signal_set) {
    const Index p = beta0.size();
    if (estimate.size() != p || (inference && static_cast<Index>(inference->size()) != p))
        throw std::invalid_argument("evaluate: dimension mismatch");
    std::vector<bool> in_signal(static_cast<std::size_t>(p), false);
    for (Index j : signal_set) in_signal[static_cast<std::size_t>(j)] = true;

    MetricsRow m;
    m.method = method;
    double sel_s = 0, unsel_n = 0, cnt_s = 0, cnt_n = 0;
    double cov_s = 0, cov_n = 0, se_s = 0, se_n = 0;
    for (Index j = 0; j < p; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        bool selected;
        if (inference) {
            const WaldRow& r = (*inference)[uj];
            selected = r.ci_lo > 0.0 || r.ci_hi < 0.0;
        } else {
            selected = estimate(j) != 0.0;
        }
        const double err = estimate(j) - beta0(j);
        const bool covered =
            inference && (*inference)[uj].ci_lo <= beta0(j) && beta0(j) <= (*inference)[uj].ci_hi;
        const double se = inference ? (*inference)[uj].std_error : 0.0;
        if (in_signal[uj]) {
            cnt_s += 1;
            sel_s += selected;
            m.mse_signal += err * err;
            m.abs_bias_signal += std::abs(err);
            cov_s += covered;
            se_s += se;
        } else {
            cnt_n += 1;
            unsel_n += !selected;
            m.mse_null += err * err;
            m.abs_bias_null += std::abs(err);
            cov_n += covered;
            se_n += se;
        }
    }
    // Empty sets are vacuously perfect.
    m.sensitivity = cnt_s > 0 ? sel_s / cnt_s : 1.0;
    m.specificity = cnt_n > 0 ? unsel_n / cnt_n : 1.0;
    if (cnt_s > 0) {
        m.mse_signal /= cnt_s;
        m.abs_bias_signal /= cnt_s;
    }
    if (cnt_n > 0) {
        m.mse_null /= cnt_n;
        m.abs_bias_null /= cnt_n;
    }
    if (inference) {
        m.coverage_signal = cnt_s > 0 ? cov_s / cnt_s : 1.0;
        m.coverage_null = cnt_n > 0 ? cov_n / cnt_n : 1.0;
        m.asymp_se_signal = cnt_s > 0 ? se_s / cnt_s : 0.0;
        m.asymp_se_null = cnt_n > 0 ? se_n / cnt_n : 0.0;
    }
    m.reps = 1;
    return m;
}

namespace {

VectorXd std_errors(const std::vector<WaldRow>& rows) {
    VectorXd se(static_cast<Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) se(static_cast<Index>(j)) = rows[j].std_error;
    return se;
}

}  // namespace

std::vector<RepRecord> run_replicate(const SimConfig& c, int rep) {
    const std::uint64_t rep_seed = derive_seed(c.seed, seed_stream::replicate,
                                               static_cast<std::uint64_t>(rep));
    const TrueCoefficients truth = gen_coefficients(
        c.p, c.s0, c.effective_signal(),
        c.fix_signal_positions ? derive_seed(c.seed, seed_stream::coefficients, 0)
                               : derive_seed(rep_seed, seed_stream::coefficients, 0));
    Dataset full;
    full.X = gen_design(c.N, c.p, c.rho, derive_seed(rep_seed, seed_stream::design, 0));
    full.y = gen_response(full.X, truth.beta0, c.family, c.phi,
                          derive_seed(rep_seed, seed_stream::response, 0));
    for (Index j = 0; j < c.p; ++j) full.column_names.push_back("x" + std::to_string(j + 1));

    BatchOptions base;
    base.family = c.family;
    base.penalty = c.penalty;
    base.lambda_mode = c.lambda_mode;
    base.lambda = c.lambda;
    base.diagnose = false;
    auto options = [&](Method m) {
        BatchOptions o = base;
        o.method = m;
        return o;
    };

    std::vector<Dataset> batches;
    auto batch_data = [&]() -> const std::vector<Dataset>& {
        if (batches.empty())
            for (const auto& idx : random_partition(c.N, c.K, rep_seed))
                batches.push_back(full.subset(idx));
        return batches;
    };
    std::optional<BatchResult> full_lasso;
    auto full_lasso_fit = [&]() -> const BatchResult& {
        if (!full_lasso) full_lasso = process_batch(full, 0, options(Method::lassoinf), rep_seed);
        return *full_lasso;
    };
    std::optional<std::vector<BatchResult>> batch_lasso;
    auto batch_lasso_fits = [&]() -> const std::vector<BatchResult>& {
        if (!batch_lasso) {
            batch_lasso.emplace();
            const auto& bs = batch_data();
            for (std::size_t k = 0; k < bs.size(); ++k)
                batch_lasso->push_back(
                    process_batch(bs[k], static_cast<int>(k), options(Method::modac), rep_seed));
        }
        return *batch_lasso;
    };

    std::vector<RepRecord> out;
    auto record = [&](const std::string& name, int omega) {
        RepRecord r;
        r.rep = rep;
        r.method = name;
        r.omega = omega;
        return r;
    };
    auto finish = [&](RepRecord& r, const VectorXd& est, const std::vector<WaldRow>* rows,
                      double wall) {
        r.metrics = evaluate(r.method, est, rows, truth.beta0, truth.signal_set);
        r.metrics.omega = r.omega;
        r.metrics.wall_time_s = wall;
        r.estimate = est;
        if (rows) r.std_error = std_errors(*rows);
    };
    auto fail = [&](RepRecord& r, const std::string& error) {
        r.failed = true;
        r.error = error;
        r.metrics.method = r.method;
        r.metrics.omega = r.omega;
        r.metrics.reps = 0;
        r.metrics.failures = 1;
    };
    auto first_failure = [](const std::vector<BatchResult>& bs) -> std::string {
        for (const auto& b : bs)
            if (b.failed) return "batch " + std::to_string(b.index) + ": " + b.error;
        return {};
    };

    for (SimMethod m : c.methods) {
        const std::string name(to_string(m));
        switch (m) {
            case SimMethod::glm:
            case SimMethod::lassoinf: {
                RepRecord r = record(name, -1);
                const BatchResult b = m == SimMethod::glm
                                          ? process_batch(full, 0, options(Method::glm), rep_seed)
                                          : full_lasso_fit();
                if (b.failed) {
                    fail(r, b.error);
                } else {
                    try {
                        const auto rows = wald_inference(b.summary, c.level);
                        finish(r, b.summary.beta_c, &rows, b.fit_seconds + b.debias_seconds);
                    } catch (const std::exception& e) {
                        fail(r, e.what());
                    }
                }
                out.push_back(std::move(r));
                break;
            }
            case SimMethod::lasso: {
                RepRecord r = record(name, -1);
                const BatchResult& b = full_lasso_fit();
                if (b.fit.beta.size() != c.p) fail(r, b.error);
                else finish(r, b.fit.beta, nullptr, b.fit_seconds);
                out.push_back(std::move(r));
                break;
            }
            case SimMethod::meta:
            case SimMethod::modac: {
                RepRecord r = record(name, -1);
                std::vector<BatchResult> meta_fits;
                if (m == SimMethod::meta) {
                    const auto& bs = batch_data();
                    for (std::size_t k = 0; k < bs.size(); ++k)
                        meta_fits.push_back(process_batch(bs[k], static_cast<int>(k),
                                                          options(Method::meta), rep_seed));
                }
                const auto& fits = m == SimMethod::meta ? meta_fits : batch_lasso_fits();
                const std::string err = first_failure(fits);
                if (!err.empty()) {
                    fail(r, err);
                } else {
                    try {
                        double slowest = 0.0;
                        std::vector<BatchSummary> summaries;
                        for (const auto& b : fits) {
                            slowest = std::max(slowest, b.fit_seconds + b.debias_seconds);
                            summaries.push_back(b.summary);
                        }
                        const double t0 = thread_cpu_seconds();
                        const CombinedFit cf = m == SimMethod::meta ? combine_meta(summaries)
                                                                    : combine_dac(summaries);
                        const auto rows = wald_inference(cf, c.level);
                        finish(r, cf.beta, &rows, slowest + thread_cpu_seconds() - t0);
                    } catch (const std::exception& e) {
                        fail(r, e.what());
                    }
                }
                out.push_back(std::move(r));
                break;
            }
            case SimMethod::voting: {
                const auto& fits = batch_lasso_fits();
                const auto& bs = batch_data();
                std::vector<VotingInput> inputs;
                double slowest = 0.0;
                std::string err;
                for (std::size_t k = 0; k < fits.size(); ++k) {
                    const BatchResult& b = fits[k];
                    if (b.fit.beta.size() != c.p) {
                        err = "batch " + std::to_string(k) + ": " + b.error;
                        break;
                    }
                    const double t0 = thread_cpu_seconds();
                    VotingInput in{b.fit.beta, neg_hessian(c.family, bs[k], b.fit.beta, b.phi_hat),
                                   b.n};
                    slowest = std::max(slowest, b.fit_seconds + thread_cpu_seconds() - t0);
                    inputs.push_back(std::move(in));
                }
                for (int omega : c.effective_omegas()) {
                    RepRecord r = record(name, omega);
                    if (!err.empty()) {
                        fail(r, err);
                    } else {
                        try {
                            const double t0 = thread_cpu_seconds();
                            const CombinedFit cf = combine_voting(inputs, omega);
                            finish(r, cf.beta, nullptr, slowest + thread_cpu_seconds() - t0);
                        } catch (const std::exception& e) {
                            fail(r, e.what());
                        }
                    }
                    out.push_back(std::move(r));
                }
                break;
            }
        }
    }
    return out;
}

std::vector<MetricsRow> aggregate(const std::vector<RepRecord>& raw) {
    std::vector<std::pair<std::string, int>> order;
    std::map<std::pair<std::string, int>, std::vector<const RepRecord*>> groups;
    for (const auto& r : raw) {
        const auto key = std::make_pair(r.method, r.omega);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&r);
    }
    std::vector<MetricsRow> rows;
    for (const auto& key : order) {
        MetricsRow m;
        m.method = key.first;
        m.omega = key.second;
        double n_cov = 0;
        for (const RepRecord* r : groups[key]) {
            if (r->failed) {
                ++m.failures;
                continue;
            }
            const MetricsRow& x = r->metrics;
            ++m.reps;
            m.sensitivity += x.sensitivity;
            m.specificity += x.specificity;
            m.mse_signal += x.mse_signal;
            m.mse_null += x.mse_null;
            m.abs_bias_signal += x.abs_bias_signal;
            m.abs_bias_null += x.abs_bias_null;
            m.wall_time_s += x.wall_time_s;
            if (x.coverage_signal) {
                n_cov += 1;
                m.coverage_signal = m.coverage_signal.value_or(0.0) + *x.coverage_signal;
                m.coverage_null = m.coverage_null.value_or(0.0) + *x.coverage_null;
                m.asymp_se_signal = m.asymp_se_signal.value_or(0.0) + *x.asymp_se_signal;
                m.asymp_se_null = m.asymp_se_null.value_or(0.0) + *x.asymp_se_null;
            }
        }
        if (m.reps > 0) {
            const double n = m.reps;
            m.sensitivity /= n;
            m.specificity /= n;
            m.mse_signal /= n;
            m.mse_null /= n;
            m.abs_bias_signal /= n;
            m.abs_bias_null /= n;
            m.wall_time_s /= n;
        }
        if (n_cov > 0) {
            *m.coverage_signal /= n_cov;
            *m.coverage_null /= n_cov;
            *m.asymp_se_signal /= n_cov;
            *m.asymp_se_null /= n_cov;
        }
        rows.push_back(m);
    }
    return rows;
}

StudyResult run_study(const SimConfig& config) {
    validate(config);
    std::vector<std::vector<RepRecord>> per_rep(static_cast<std::size_t>(config.n_reps));
    parallel_for(per_rep.size(), config.workers, [&](std::size_t r) {
        try {
            per_rep[r] = run_replicate(config, static_cast<int>(r));
        } catch (const std::exception& e) {
            // Data generation failed: every method misses this replicate.
            for (SimMethod m : config.methods) {
                const std::vector<int> omegas =
                    m == SimMethod::voting ? config.effective_omegas() : std::vector<int>{-1};
                for (int w : omegas) {
                    RepRecord rec;
                    rec.rep = static_cast<int>(r);
                    rec.method = std::string(to_string(m));
                    rec.omega = w;
                    rec.failed = true;
                    rec.error = e.what();
                    per_rep[r].push_back(rec);
                }
            }
        }
    });
    StudyResult out;
    out.config = config;
    for (auto& v : per_rep)
        for (auto& r : v) out.raw.push_back(std::move(r));
    out.summary = aggregate(out.raw);
    return out;
}

namespace {

struct MetricField {
    const char* name;
    std::optional<double> (*get)(const MetricsRow&);
};

const std::vector<MetricField>& metric_fields() {
    static const std::vector<MetricField> fields{
        {"sensitivity", [](const MetricsRow& m) -> std::optional<double> { return m.sensitivity; }},
        {"specificity", [](const MetricsRow& m) -> std::optional<double> { return m.specificity; }},
        {"mse_signal", [](const MetricsRow& m) -> std::optional<double> { return m.mse_signal; }},
        {"mse_null", [](const MetricsRow& m) -> std::optional<double> { return m.mse_null; }},
        {"abs_bias_signal",
         [](const MetricsRow& m) -> std::optional<double> { return m.abs_bias_signal; }},
        {"abs_bias_null",
         [](const MetricsRow& m) -> std::optional<double> { return m.abs_bias_null; }},
        {"coverage_signal", [](const MetricsRow& m) { return m.coverage_signal; }},
        {"coverage_null", [](const MetricsRow& m) { return m.coverage_null; }},
        {"asymp_se_signal", [](const MetricsRow& m) { return m.asymp_se_signal; }},
        {"asymp_se_null", [](const MetricsRow& m) { return m.asymp_se_null; }},
        {"wall_time_s", [](const MetricsRow& m) -> std::optional<double> { return m.wall_time_s; }},
        {"reps", [](const MetricsRow& m) -> std::optional<double> { return m.reps; }},
        {"failures", [](const MetricsRow& m) -> std::optional<double> { return m.failures; }},
    };
    return fields;
}

json metrics_json(const MetricsRow& m) {
    json j;
    for (const auto& f : metric_fields()) {
        const auto v = f.get(m);
        if (v && std::isfinite(*v)) j[f.name] = *v;
    }
    return j;
}

}  // namespace

std::string summary_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "metric";
    for (const auto& r : rows) os << ',' << r.label();
    os << '\n';
    for (const auto& f : metric_fields()) {
        os << f.name;
        for (const auto& r : rows) {
            os << ',';
            if (const auto v = f.get(r)) os << *v;
        }
        os << '\n';
    }
    return os.str();
}

std::string long_csv(const StudyResult& result) {
    const SimConfig& c = result.config;
    std::ostringstream os;
    os << std::setprecision(10);
    os << "family,N,p,K,n_k,s0,signal,rho,n_reps,method,omega,metric,value\n";
    for (const auto& r : result.summary)
        for (const auto& f : metric_fields()) {
            const auto v = f.get(r);
            if (!v) continue;
            os << to_string(c.family.kind) << ',' << c.N << ',' << c.p << ',' << c.K << ','
               << c.N / c.K << ',' << c.s0 << ',' << c.effective_signal() << ',' << c.rho << ','
               << c.n_reps << ',' << r.method << ',';
            if (r.omega >= 0) os << r.omega;
            os << ',' << f.name << ',' << *v << '\n';
        }
    return os.str();
}

json to_json(const SimConfig& c) {
    json j;
    j["N"] = c.N;
    j["p"] = c.p;
    j["K"] = c.K;
    j["s0"] = c.s0;
    j["signal"] = c.effective_signal();
    j["rho"] = c.rho;
    j["family"] = std::string(to_string(c.family.kind));
    j["phi"] = c.phi;
    j["n_reps"] = c.n_reps;
    j["seed"] = c.seed;
    j["methods"] = json::array();
    for (SimMethod m : c.methods) j["methods"].push_back(std::string(to_string(m)));
    j["level"] = c.level;
    j["omegas"] = c.effective_omegas();
    j["fix_signal_positions"] = c.fix_signal_positions;
    j["lambda_mode"] = std::string(to_string(c.lambda_mode));
    if (c.lambda_mode == LambdaMode::fixed) j["lambda"] = c.lambda;
    return j;
}

std::string raw_jsonl(const StudyResult& result) {
    std::ostringstream os;
    for (const auto& r : result.raw) {
        json j;
        j["rep"] = r.rep;
        j["method"] = r.method;
        if (r.omega >= 0) j["omega"] = r.omega;
        j["failed"] = r.failed;
        if (r.failed) j["error"] = r.error;
        else j["metrics"] = metrics_json(r.metrics);
        if (result.config.keep_estimates && !r.failed) {
            j["estimate"] = std::vector<double>(r.estimate.data(), r.estimate.data() + r.estimate.size());
            if (r.std_error.size())
                j["se"] = std::vector<double>(r.std_error.data(),
                                              r.std_error.data() + r.std_error.size());
        }
        os << j.dump() << '\n';
    }
    return os.str();
}

void write_study(const StudyResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        if (!out) throw DataError("cannot write '" + (dir / name).string() + "'");
        out << text;
    };
    put("study_summary.csv", summary_csv(result.summary));
    put("study_raw.jsonl", raw_jsonl(result));
    put("study_long.csv", long_csv(result));
    put("study_config.json", to_json(result.config).dump(2) + "\n");
}

}  // namespace dacglm
