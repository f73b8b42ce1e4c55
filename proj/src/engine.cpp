#include "dacglm/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "dacglm/rng.hpp"

namespace dacglm {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::modac: return "modac";
        case Method::meta: return "meta";
        case Method::voting: return "voting";
        case Method::lassoinf: return "lassoinf";
        case Method::glm: return "glm";
        case Method::lasso: return "lasso";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::modac, Method::meta, Method::voting, Method::lassoinf, Method::glm,
                     Method::lasso})
        if (to_string(m) == name) return m;
    throw std::invalid_argument("unknown method '" + std::string(name) +
                                "' (expected modac, meta, voting, lassoinf, glm or lasso)");
}

std::string_view to_string(LambdaMode m) {
    switch (m) {
        case LambdaMode::cv: return "cv";
        case LambdaMode::fixed: return "fixed";
        case LambdaMode::theory: return "theory";
    }
    return "unknown";
}

bool is_single_batch(Method m) {
    return m == Method::lassoinf || m == Method::glm || m == Method::lasso;
}

bool has_inference(Method m) { return m != Method::voting && m != Method::lasso; }

namespace {

bool unpenalized(Method m) { return m == Method::glm || m == Method::meta; }

}  // namespace

void validate(const PipelineConfig& c) {
    if (c.K < 1) throw std::invalid_argument("K must be >= 1");
    if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (!(c.level > 0.0 && c.level < 1.0))
        throw std::invalid_argument("level must lie in (0, 1)");
    if (c.lambda_mode == LambdaMode::fixed && !(c.lambda >= 0.0))
        throw std::invalid_argument("lambda must be >= 0");
    if (c.ridge_tau < 0.0) throw std::invalid_argument("ridge tau must be >= 0");
    if (c.penalty.n_folds < 2) throw std::invalid_argument("CV needs at least 2 folds");
    if (c.adaptive && !(c.adaptive_gamma > 0.0))
        throw std::invalid_argument("adaptive gamma must be positive");
}

json config_to_json(const PipelineConfig& c) {
    json j;
    if (!c.manifest.empty()) j["manifest"] = c.manifest;
    else if (!c.input.empty()) j["input"] = c.input;
    j["response"] = c.schema.response;
    j["features"] = c.schema.features;
    j["family"] = std::string(to_string(c.family.kind));
    j["intercept"] = c.intercept;
    j["K"] = is_single_batch(c.method) ? 1 : c.K;
    j["method"] = std::string(to_string(c.method));
    j["lambda_mode"] = unpenalized(c.method) ? "fixed" : std::string(to_string(c.lambda_mode));
    if (unpenalized(c.method)) j["lambda"] = 0.0;
    else if (c.lambda_mode == LambdaMode::fixed) j["lambda"] = c.lambda;
    j["adaptive"] = c.adaptive;
    if (c.adaptive) j["adaptive_gamma"] = c.adaptive_gamma;
    j["shared_lambda"] = c.shared_lambda;
    j["seed"] = c.seed;
    j["allow_partial"] = c.allow_partial;
    j["common_phi"] = c.common_phi;
    if (c.method == Method::voting) j["omega"] = c.omega;
    j["level"] = c.level;
    j["ridge_tau"] = c.ridge_tau;
    j["auto_ridge"] = c.auto_ridge;
    j["tol"] = c.penalty.tol;
    j["n_folds"] = c.penalty.n_folds;
    j["grid_size"] = c.penalty.grid_size;
    j["grid_min_ratio"] = c.penalty.grid_min_ratio;
    return j;
}

BatchCondition diagnose_batch(const Dataset& data, int index) {
    BatchCondition c;
    c.index = index;
    c.n = static_cast<long>(data.n());
    c.p = static_cast<long>(data.p());
    c.p_over_n = c.n > 0 ? static_cast<double>(c.p) / static_cast<double>(c.n) : INFINITY;
    c.theory_lambda = c.n > 0 && c.p > 1
                          ? std::sqrt(std::log(static_cast<double>(c.p)) / static_cast<double>(c.n))
                          : 0.0;
    c.high_dimension = c.p_over_n > kMaxDimensionRatio;
    if (c.n == 0 || c.p == 0) {
        c.rank_deficient = true;
        return c;
    }
    const MatrixXd scaled = data.X / std::sqrt(static_cast<double>(c.n));
    Eigen::BDCSVD<MatrixXd> svd(scaled);
    const VectorXd& sv = svd.singularValues();
    c.sigma_max = sv.size() ? sv(0) : 0.0;
    const double tol = static_cast<double>(std::max(c.n, c.p)) *
                       std::numeric_limits<double>::epsilon() * c.sigma_max;
    c.sigma_min = c.n < c.p ? 0.0 : sv(sv.size() - 1);
    if (c.sigma_min <= tol) {
        c.sigma_min = 0.0;
        c.rank_deficient = true;
    }
    return c;
}

ConditionReport diagnose_conditions(const std::vector<Dataset>& batches) {
    ConditionReport r;
    for (std::size_t k = 0; k < batches.size(); ++k)
        r.batches.push_back(diagnose_batch(batches[k], static_cast<int>(k)));
    for (const auto& c : r.batches) {
        if (c.high_dimension)
            r.warnings.push_back("batch " + std::to_string(c.index) + ": p/n_k = " +
                                 std::to_string(c.p_over_n) + " exceeds 0.5");
        if (c.rank_deficient)
            r.warnings.push_back("batch " + std::to_string(c.index) +
                                 ": design is rank deficient (sigma_min = 0)");
    }
    return r;
}

json to_json(const ConditionReport& report) {
    json j;
    j["batches"] = json::array();
    for (const auto& c : report.batches)
        j["batches"].push_back({{"index", c.index},
                                {"n", c.n},
                                {"p", c.p},
                                {"sigma_min", c.sigma_min},
                                {"sigma_max", c.sigma_max},
                                {"p_over_n", c.p_over_n},
                                {"theory_lambda", c.theory_lambda},
                                {"rank_deficient", c.rank_deficient},
                                {"high_dimension", c.high_dimension}});
    j["warnings"] = report.warnings;
    return j;
}

double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& f) {
    const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) f(i);
        });
}

namespace {

PenaltyConfig batch_penalty(const Dataset& data, const BatchOptions& options) {
    PenaltyConfig cfg = options.penalty;
    if (options.intercept) {
        VectorXd w(data.p());
        if (cfg.penalty_weights.size() == 0) w.setOnes();
        else if (cfg.penalty_weights.size() == data.p() - 1) w << 0.0, cfg.penalty_weights;
        else throw std::invalid_argument("penalty weights must have one entry per feature");
        w(0) = 0.0;
        cfg.penalty_weights = w;
    }
    if (!options.adaptive) return cfg;
    const VectorXd base = resolve_weights(cfg, data.p());
    PenaltyConfig mle = cfg;
    mle.penalty_weights = VectorXd();
    mle.lambda_grid.clear();
    const LassoFit init = fit_lasso(data, options.family, 0.0, mle);
    if (!init.converged)
        throw std::runtime_error("adaptive lasso: initial unpenalised fit did not converge");
    const VectorXd aw = adaptive_weights(init.beta, options.adaptive_gamma);
    VectorXd w(data.p());
    for (Index j = 0; j < data.p(); ++j) w(j) = base(j) == 0.0 ? 0.0 : base(j) * aw(j);
    cfg.penalty_weights = w;
    return cfg;
}

double tuned_lambda(const Dataset& data, const BatchOptions& options, const PenaltyConfig& cfg,
                    std::uint64_t seed, int index) {
    if (unpenalized(options.method)) return 0.0;
    switch (options.lambda_mode) {
        case LambdaMode::fixed: return options.lambda;
        case LambdaMode::theory:
            return std::sqrt(std::log(static_cast<double>(std::max<Index>(data.p(), 2))) /
                             static_cast<double>(data.n()));
        case LambdaMode::cv: break;
    }
    const CvResult cv = cv_tune(data, options.family, cfg,
                                derive_seed(seed, seed_stream::cv_folds,
                                            static_cast<std::uint64_t>(index)));
    return cv.lambda_star;
}

}  // namespace

double choose_lambda(const Dataset& data, const BatchOptions& options, std::uint64_t seed,
                     int index) {
    return tuned_lambda(data, options, batch_penalty(data, options), seed, index);
}

BatchResult process_batch(const Dataset& data, int index, const BatchOptions& options,
                          std::uint64_t seed, std::optional<double> lambda) {
    BatchResult r;
    r.index = index;
    r.n = static_cast<long>(data.n());
    const double t0 = thread_cpu_seconds();
    try {
        if (options.diagnose) {
            r.condition = diagnose_batch(data, index);
            if (r.condition.high_dimension)
                r.warnings.push_back("p/n_k = " + std::to_string(r.condition.p_over_n) +
                                     " exceeds 0.5");
        }
        const PenaltyConfig cfg = batch_penalty(data, options);
        r.lambda = unpenalized(options.method) ? 0.0
                   : lambda                    ? *lambda
                                               : tuned_lambda(data, options, cfg, seed, index);
        r.fit = fit_lasso(data, options.family, r.lambda, cfg);
        for (const auto& w : r.fit.warnings) r.warnings.push_back(w);
        const DispersionEstimate disp = dispersion_estimate(options.family, data, r.fit.beta);
        if (disp.degenerate) throw std::runtime_error("zero residual deviance; dispersion is degenerate");
        r.phi_hat = disp.value;
        const double t1 = thread_cpu_seconds();
        r.fit_seconds = t1 - t0;
        if (has_inference(options.method)) {
            r.summary = debias(r.fit, data, options.family, r.phi_hat, options.debias);
            r.summary.batch_index = index;
        } else {
            r.neg_hessian = neg_hessian(options.family, data, r.fit.beta, r.phi_hat);
        }
        r.debias_seconds = thread_cpu_seconds() - t1;
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
        if (r.fit_seconds == 0.0) r.fit_seconds = thread_cpu_seconds() - t0;
    }
    return r;
}

namespace {

using BatchLoader = std::function<Dataset(std::size_t)>;

Dataset prepare(Dataset d, const PipelineConfig& config) {
    validate(d, config.family);
    return config.intercept ? d.with_intercept() : d;
}

BatchOptions batch_options(const PipelineConfig& config) {
    BatchOptions o;
    o.family = config.family;
    o.method = config.method;
    o.penalty = config.penalty;
    o.intercept = config.intercept;
    o.lambda_mode = config.lambda_mode;
    o.lambda = config.lambda;
    o.adaptive = config.adaptive;
    o.adaptive_gamma = config.adaptive_gamma;
    o.debias.ridge_tau = config.ridge_tau;
    o.debias.auto_ridge = config.auto_ridge;
    o.debias.force = config.force_debias;
    return o;
}

PipelineResult execute(std::size_t count, const BatchLoader& load, const PipelineConfig& config) {
    validate(config);
    const auto wall0 = std::chrono::steady_clock::now();
    PipelineResult out;
    out.method = config.method;
    const BatchOptions options = batch_options(config);

    std::optional<double> shared;
    if (config.shared_lambda && !unpenalized(config.method) &&
        config.lambda_mode == LambdaMode::cv && count > 1) {
        std::vector<double> lambdas(count, 0.0);
        std::vector<std::string> errors(count);
        parallel_for(count, config.workers, [&](std::size_t k) {
            try {
                const Dataset d = load(k);
                lambdas[k] = choose_lambda(d, options, config.seed, static_cast<int>(k));
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        });
        for (std::size_t k = 0; k < count; ++k)
            if (!errors[k].empty())
                throw PipelineError("batch " + std::to_string(k) + ": " + errors[k]);
        shared = std::accumulate(lambdas.begin(), lambdas.end(), 0.0) / static_cast<double>(count);
        out.warnings.push_back("shared lambda " + std::to_string(*shared));
    }

    out.batches.resize(count);
    parallel_for(count, config.workers, [&](std::size_t k) {
        try {
            const Dataset d = load(k);
            out.batches[k] = process_batch(d, static_cast<int>(k), options, config.seed, shared);
        } catch (const std::exception& e) {
            out.batches[k].index = static_cast<int>(k);
            out.batches[k].failed = true;
            out.batches[k].error = e.what();
        }
    });

    std::vector<std::string> failures;
    for (const auto& b : out.batches) {
        out.max_batch_seconds = std::max(out.max_batch_seconds, b.fit_seconds + b.debias_seconds);
        for (const auto& w : b.warnings)
            out.warnings.push_back("batch " + std::to_string(b.index) + ": " + w);
        if (b.failed) failures.push_back("batch " + std::to_string(b.index) + ": " + b.error);
    }
    if (!failures.empty() && (!config.allow_partial || failures.size() == count))
        throw PipelineError(failures.front() +
                            (failures.size() == count ? "" : " (use allow_partial to combine the rest)"));
    out.partial = !failures.empty();

    const double c0 = thread_cpu_seconds();
    CombineOptions copts;
    copts.allow_partial = config.allow_partial;
    copts.common_phi = config.common_phi;
    copts.auto_ridge = config.auto_ridge;
    if (has_inference(config.method)) {
        std::vector<BatchOutcome> outcomes;
        for (const auto& b : out.batches) outcomes.push_back({b.summary, b.failed, b.error});
        const Combiner comb = unpenalized(config.method) ? Combiner::meta : Combiner::dac;
        out.combined = combine_outcomes(outcomes, comb, copts);
    } else if (config.method == Method::lasso) {
        const BatchResult& b = out.batches.front();
        CombinedFit& f = out.combined;
        f.beta = b.fit.beta;
        f.covariance = MatrixXd::Zero(b.fit.beta.size(), b.fit.beta.size());
        f.N = b.n;
        f.K = 1;
        f.combiner = Combiner::voting;
        f.omega = 0;
        f.has_inference.assign(static_cast<std::size_t>(b.fit.beta.size()), false);
        f.included_batches = {0};
    } else {
        std::vector<VotingInput> inputs;
        std::vector<int> ids;
        for (const auto& b : out.batches) {
            if (b.failed) continue;
            inputs.push_back({b.fit.beta, b.neg_hessian, b.n});
            ids.push_back(b.index);
        }
        const int omega = config.omega >= 0 ? config.omega : static_cast<int>(count) / 2;
        if (omega >= static_cast<int>(inputs.size()))
            throw PipelineError("omega = " + std::to_string(omega) + " needs more than " +
                                std::to_string(omega) + " healthy batches, have " +
                                std::to_string(inputs.size()));
        out.combined = combine_voting(inputs, omega);
        out.combined.included_batches = ids;
        for (const auto& f : failures) out.combined.diagnostics.push_back("partial combine: " + f);
    }
    out.combine_seconds = thread_cpu_seconds() - c0;

    // Column names come from the first healthy batch.
    for (const auto& b : out.batches)
        if (!b.failed) {
            out.combined.column_names = has_inference(config.method) ? b.summary.column_names
                                                                      : std::vector<std::string>{};
            break;
        }
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return out;
}

}  // namespace

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& config) {
    validate(config);
    const Dataset full = prepare(data, config);
    const int K = is_single_batch(config.method) ? 1 : config.K;
    const auto parts = random_partition(full.n(), K, config.seed);
    PipelineResult r = execute(parts.size(), [&](std::size_t k) {
        return full.subset(parts[k]);
    }, config);
    if (r.combined.column_names.empty()) {
        r.combined.column_names.resize(static_cast<std::size_t>(full.p()));
        for (Index j = 0; j < full.p(); ++j)
            r.combined.column_names[static_cast<std::size_t>(j)] = full.column_name(j);
    }
    return r;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    validate(config);
    if (config.manifest.empty()) {
        if (config.input.empty()) throw std::invalid_argument("no input file or manifest given");
        return run_pipeline(load_csv(config.input, config.schema), config);
    }
    const ShardManifest manifest = read_manifest(config.manifest);
    if (is_single_batch(config.method)) {
        // Single-batch estimators see the concatenated shards.
        std::vector<Dataset> parts;
        Index n = 0;
        for (std::size_t k = 0; k < manifest.shards.size(); ++k) {
            parts.push_back(load_shard(manifest, k));
            n += parts.back().n();
        }
        Dataset all;
        all.column_names = parts.front().column_names;
        all.X.resize(n, parts.front().p());
        all.y.resize(n);
        Index row = 0;
        for (const auto& d : parts) {
            if (d.p() != all.p()) throw DataError("shards disagree on the number of features");
            all.X.middleRows(row, d.n()) = d.X;
            all.y.segment(row, d.n()) = d.y;
            row += d.n();
        }
        return run_pipeline(all, config);
    }
    PipelineResult r = execute(manifest.shards.size(), [&](std::size_t k) {
        try {
            return prepare(load_shard(manifest, k), config);
        } catch (const DataError& e) {
            const std::string what = e.what();
            if (what.rfind("shard", 0) == 0) throw;
            throw DataError("shard " + std::to_string(k) + " ('" +
                            manifest.resolve(manifest.shards[k]).string() + "'): " + what);
        }
    }, config);
    if (r.combined.column_names.empty()) {
        if (config.intercept) r.combined.column_names.push_back("(Intercept)");
        for (const auto& f : manifest.schema.features) r.combined.column_names.push_back(f);
    }
    return r;
}

json to_json(const PipelineResult& result, const PipelineConfig& config) {
    json j = to_json(result.combined, config.level);
    j["method"] = std::string(to_string(result.method));
    if (result.method == Method::lasso) {
        j["combiner"] = "none";
        j.erase("omega");
    }
    j["partial"] = result.partial;
    j["batches"] = json::array();
    for (const auto& b : result.batches) {
        json e{{"index", b.index}, {"n", b.n}, {"failed", b.failed}};
        if (b.failed) {
            e["error"] = b.error;
        } else {
            e["lambda"] = b.lambda;
            e["phi_hat"] = b.phi_hat;
            e["nnz"] = b.fit.nnz();
            e["converged"] = b.fit.converged;
            e["kkt_violation"] = b.fit.kkt_violation;
            if (has_inference(result.method)) e["ridge_tau"] = b.summary.ridge_tau;
        }
        j["batches"].push_back(e);
    }
    j["warnings"] = result.warnings;
    j["config"] = config_to_json(config);
    return j;
}

}  // namespace dacglm
