#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dacglm/engine.hpp"
#include "dacglm/io.hpp"
#include "dacglm/simbench.hpp"

namespace py = pybind11;
using namespace dacglm;

namespace {

Dataset make_dataset(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names) {
    if (X.rows() != y.size()) throw DataError("X and y have different numbers of rows");
    if (!names.empty() && static_cast<Index>(names.size()) != X.cols())
        throw DataError("names must have one entry per column of X");
    Dataset d;
    d.X = X;
    d.y = y;
    d.column_names = names;
    return d;
}

LambdaMode lambda_mode_of(const std::string& mode) {
    if (mode == "cv") return LambdaMode::cv;
    if (mode == "fixed") return LambdaMode::fixed;
    if (mode == "theory") return LambdaMode::theory;
    throw std::invalid_argument("lambda_mode must be cv, fixed or theory");
}

std::string fit(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                const std::string& family, const std::string& method, int K,
                const std::string& lambda_mode, double lambda, std::uint64_t seed, bool intercept,
                int workers, double level, int omega, bool common_phi, bool allow_partial,
                bool adaptive, bool shared_lambda) {
    PipelineConfig c;
    c.family = FamilySpec::of(parse_family(family));
    c.method = parse_method(method);
    c.K = K;
    c.lambda_mode = lambda_mode_of(lambda_mode);
    c.lambda = lambda;
    c.seed = seed;
    c.intercept = intercept;
    c.workers = workers;
    c.level = level;
    c.omega = omega;
    c.common_phi = common_phi;
    c.allow_partial = allow_partial;
    c.adaptive = adaptive;
    c.shared_lambda = shared_lambda;
    PipelineResult r;
    {
        py::gil_scoped_release release;
        r = run_pipeline(make_dataset(X, y, names), c);
    }
    return to_json(r, c).dump();
}

py::dict lasso(const MatrixXd& X, const VectorXd& y, const std::string& family, double lambda,
               std::optional<VectorXd> weights, double tol) {
    PenaltyConfig cfg;
    cfg.tol = tol;
    if (weights) cfg.penalty_weights = *weights;
    const LassoFit f = fit_lasso(make_dataset(X, y, {}), FamilySpec::of(parse_family(family)), lambda, cfg);
    py::dict out;
    out["beta"] = f.beta;
    out["lambda"] = f.lambda;
    out["converged"] = f.converged;
    out["n_iter"] = f.n_iter;
    out["kkt_violation"] = f.kkt_violation;
    return out;
}

double cv_lambda(const MatrixXd& X, const VectorXd& y, const std::string& family,
                 std::uint64_t seed, int folds, int grid_size) {
    PenaltyConfig cfg;
    cfg.n_folds = folds;
    cfg.grid_size = grid_size;
    return cv_tune(make_dataset(X, y, {}), FamilySpec::of(parse_family(family)), cfg, seed).lambda_star;
}

std::string summarize(const MatrixXd& X, const VectorXd& y, const std::vector<std::string>& names,
                      const std::string& family, double lambda, int batch_index, double ridge_tau) {
    const Dataset d = make_dataset(X, y, names);
    const FamilySpec f = FamilySpec::of(parse_family(family));
    validate(d, f);
    const LassoFit fit = fit_lasso(d, f, lambda, {});
    const DispersionEstimate phi = dispersion_estimate(f, d, fit.beta);
    if (phi.degenerate) throw DataError("dispersion estimate is zero");
    DebiasOptions opt;
    opt.ridge_tau = ridge_tau;
    BatchSummary s = debias(fit, d, f, phi.value, opt);
    s.batch_index = batch_index;
    return to_json(s).dump();
}

std::string combine(const std::vector<std::string>& summaries, const std::string& method,
                    double level, bool common_phi) {
    std::vector<BatchSummary> parsed;
    for (const auto& s : summaries) parsed.push_back(batch_summary_from_json(json::parse(s)));
    CombineOptions opt;
    opt.common_phi = common_phi;
    CombinedFit f;
    if (method == "dac") f = combine_dac(parsed, opt);
    else if (method == "meta") f = combine_meta(parsed, opt);
    else throw std::invalid_argument("method must be dac or meta");
    return to_json(f, level).dump();
}

std::string simulate(const std::string& preset_name, const std::string& family, long N, long p,
                     int K, long s0, double rho, int n_reps, std::uint64_t seed,
                     const std::vector<std::string>& methods, int workers) {
    SimConfig c = preset(preset_name, FamilySpec::of(parse_family(family)));
    if (N > 0) c.N = N;
    if (p > 0) c.p = p;
    if (K > 0) c.K = K;
    if (s0 >= 0) c.s0 = s0;
    if (rho >= 0) c.rho = rho;
    if (n_reps > 0) c.n_reps = n_reps;
    c.seed = seed;
    c.workers = workers;
    if (!methods.empty()) {
        c.methods.clear();
        for (const auto& m : methods) c.methods.push_back(parse_sim_method(m));
    }
    StudyResult r;
    {
        py::gil_scoped_release release;
        r = run_study(c);
    }
    return summary_csv(r.summary);
}

std::string diagnose(const MatrixXd& X, const VectorXd& y, int K, std::uint64_t seed) {
    const Dataset d = make_dataset(X, y, {});
    std::vector<Dataset> batches;
    for (const auto& rows : random_partition(d.n(), K, seed)) batches.push_back(d.subset(rows));
    return to_json(diagnose_conditions(batches)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Divide-and-combine regularised GLM estimation";
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<SingularMatrixError>(m, "SingularMatrixError", PyExc_ArithmeticError);
    py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

    m.def("fit", &fit, py::arg("X"), py::arg("y"), py::arg("names"), py::arg("family"),
          py::arg("method"), py::arg("K"), py::arg("lambda_mode"), py::arg("lam"), py::arg("seed"),
          py::arg("intercept"), py::arg("workers"), py::arg("level"), py::arg("omega"),
          py::arg("common_phi"), py::arg("allow_partial"), py::arg("adaptive"),
          py::arg("shared_lambda"));
    m.def("fit_lasso", &lasso, py::arg("X"), py::arg("y"), py::arg("family"), py::arg("lam"),
          py::arg("weights") = py::none(), py::arg("tol") = 1e-7);
    m.def("cv_lambda", &cv_lambda, py::arg("X"), py::arg("y"), py::arg("family"),
          py::arg("seed") = 1, py::arg("folds") = 5, py::arg("grid_size") = 100);
    m.def("summarize", &summarize, py::arg("X"), py::arg("y"), py::arg("names"), py::arg("family"),
          py::arg("lam"), py::arg("batch_index"), py::arg("ridge_tau"));
    m.def("combine", &combine, py::arg("summaries"), py::arg("method"), py::arg("level"),
          py::arg("common_phi"));
    m.def("partition", &random_partition, py::arg("n"), py::arg("K"), py::arg("seed"));
    m.def("simulate", &simulate);
    m.def("diagnose", &diagnose, py::arg("X"), py::arg("y"), py::arg("K"), py::arg("seed"));
}
