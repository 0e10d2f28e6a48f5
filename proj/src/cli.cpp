#include "dirfdr/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dirfdr/data_io.hpp"
#include "dirfdr/errors.hpp"
#include "dirfdr/inference.hpp"
#include "dirfdr/lasso.hpp"
#include "dirfdr/precision.hpp"
#include "dirfdr/rng.hpp"
#include "dirfdr/simulation.hpp"

namespace dirfdr {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataArgs {
    std::string design;
    std::string response;
    std::string response_col;
    std::string family = "logistic";
};

void add_data_flags(CLI::App* cmd, DataArgs& a, const std::string& suffix = "") {
    cmd->add_option("--design" + suffix, a.design, "Design matrix CSV (n rows x p columns)")->required();
    auto* resp = cmd->add_option("--response" + suffix, a.response, "Response CSV (n rows x 1 column)");
    auto* col = cmd->add_option("--response-col" + suffix, a.response_col,
                                "Name of the response column inside the design file");
    resp->excludes(col);
    col->excludes(resp);
}

GlmFamily family_or_throw(const std::string& name) {
    const auto fam = parse_family(name);
    if (!fam) throw UsageError("unknown family '" + name + "' (expected linear, logistic, poisson or exponential)");
    return *fam;
}

Dataset load(const DataArgs& a, GlmFamily family) {
    if (a.response.empty() == a.response_col.empty()) {
        throw UsageError("exactly one of --response or --response-col is required");
    }
    const ResponseSource src = a.response.empty() ? ResponseSource::from_column(a.response_col)
                                                  : ResponseSource::from_file(a.response);
    return load_dataset(a.design, src, family);
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// Resolved configuration, one key=value per line, so the run can be replayed from the log.
void print_config(std::ostream& err, const std::string& command,
                  const std::vector<std::pair<std::string, std::string>>& items) {
    err << "dirfdr " << command << '\n';
    for (const auto& [k, v] : items) err << "  " << k << " = " << v << '\n';
}

std::string response_desc(const DataArgs& a) {
    return a.response.empty() ? "column:" + a.response_col : a.response;
}

struct SelectionArgs {
    std::optional<double> alpha;
    std::optional<double> fdv;
    std::optional<double> fwer;
};

void add_selection_flags(CLI::App* cmd, SelectionArgs& s) {
    auto* a = cmd->add_option("--alpha", s.alpha, "Directional FDR level (default 0.2)");
    auto* f = cmd->add_option("--fdv", s.fdv, "Tolerated number of directional false discoveries");
    auto* w = cmd->add_option("--fwer", s.fwer, "Directional FWER level in (0, 1)");
    a->excludes(f)->excludes(w);
    f->excludes(a)->excludes(w);
    w->excludes(a)->excludes(f);
}

std::string selection_desc(const SelectionArgs& s) {
    if (s.fdv) return "fdv u=" + format_double(*s.fdv);
    if (s.fwer) return "fwer u=" + format_double(*s.fwer);
    return "fdr alpha=" + format_double(s.alpha.value_or(0.2));
}

SelectionResult apply_selection(const SelectionArgs& s, const Eigen::VectorXd& stats) {
    const auto p = static_cast<std::size_t>(stats.size());
    if (s.fwer && !(*s.fwer > 0.0 && *s.fwer < 1.0)) throw UsageError("--fwer must lie in (0, 1)");
    if (s.fdv || s.fwer) {
        const double u = s.fdv ? *s.fdv : *s.fwer;
        if (!(u > 0.0 && u < static_cast<double>(p))) throw UsageError("--fdv must lie in (0, p)");
        return select_at_threshold(stats, fdv_threshold(u, p));
    }
    const double alpha = s.alpha.value_or(0.2);
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    const Threshold t = gmt_threshold(stats, alpha);
    SelectionResult sel = select_at_threshold(stats, t.value);
    sel.fallback_used = t.fallback_used;
    return sel;
}

void report_selection(std::ostream& err, const SelectionResult& sel) {
    err << "threshold = " << format_double(sel.threshold) << (sel.fallback_used ? " (fallback)" : "")
        << ", selected " << sel.selected.size() << '\n';
    if (sel.zero_sign_convention_used) err << "warning: a zero statistic was selected and given sign +1\n";
}

// Per-coordinate selected flag and sign columns.
std::pair<std::vector<int>, std::vector<int>> selection_columns(const SelectionResult& sel, Eigen::Index p) {
    std::vector<int> chosen(static_cast<std::size_t>(p), 0), sign(static_cast<std::size_t>(p), 0);
    for (std::size_t k = 0; k < sel.selected.size(); ++k) {
        chosen[static_cast<std::size_t>(sel.selected[k])] = 1;
        sign[static_cast<std::size_t>(sel.selected[k])] = sel.signs[k];
    }
    return {chosen, sign};
}

std::string sign_text(int chosen, int sign) {
    if (!chosen) return "";
    return sign > 0 ? "+1" : "-1";
}

SampleFit fit_pipeline(const Dataset& data, GlmFamily family, std::size_t folds, std::uint64_t seed) {
    return fit_sample(data, family, folds, 100, default_clime_grid(),
                      derive_seed(seed, 0, StreamRole::LassoFolds),
                      derive_seed(seed, 0, StreamRole::ClimeFolds));
}

int run_fit(std::ostream& err, const DataArgs& d, std::optional<double> lambda, std::size_t folds,
            std::uint64_t seed, const std::string& init_path, const std::string& out_path) {
    const GlmFamily family = family_or_throw(d.family);
    print_config(err, "fit",
                 {{"design", d.design}, {"response", response_desc(d)}, {"family", d.family},
                  {"lambda", lambda ? format_double(*lambda) : "cv"},
                  {"cv_folds", std::to_string(folds)}, {"seed", std::to_string(seed)},
                  {"init", init_path.empty() ? "zero" : init_path}, {"out", out_path}});
    if (lambda && !(*lambda >= 0.0)) throw UsageError("--lambda must be nonnegative");
    const Dataset data = load(d, family);
    std::optional<Eigen::VectorXd> init;
    if (!init_path.empty()) init = read_coefficients(init_path);

    LassoFit fit;
    if (lambda) {
        fit = fit_lasso(data, family, *lambda, init);
    } else {
        CvLassoOptions opt;
        opt.folds = folds;
        opt.seed = derive_seed(seed, 0, StreamRole::LassoFolds);
        auto [cv, f] = cv_lasso(data, family, opt);
        print_warnings(err, cv.warnings);
        err << "selected lambda = " << format_double(cv.selected_lambda) << '\n';
        fit = std::move(f);
    }
    print_warnings(err, fit.warnings);
    err << "kkt residual = " << format_double(fit.kkt_violation) << ", iterations = " << fit.iterations
        << '\n';

    AtomicFile file(out_path);
    file.stream() << "index,beta_hat\n";
    for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j) {
        file.stream() << (j + 1) << ',' << format_double(fit.beta_hat[j]) << '\n';
    }
    file.commit();
    return fit.converged ? kExitSuccess : kExitNumerical;
}

int run_precision(std::ostream& err, const DataArgs& d, const std::string& beta_path,
                  std::optional<double> lambda_n, bool use_cv, std::uint64_t seed,
                  const std::string& out_path) {
    const GlmFamily family = family_or_throw(d.family);
    print_config(err, "precision",
                 {{"design", d.design}, {"response", response_desc(d)}, {"family", d.family},
                  {"beta", beta_path}, {"lambda_n", lambda_n ? format_double(*lambda_n) : "cv"},
                  {"seed", std::to_string(seed)}, {"out", out_path}});
    if (lambda_n.has_value() == use_cv) throw UsageError("exactly one of --lambda-n or --cv is required");
    if (lambda_n && !(*lambda_n > 0.0)) throw UsageError("--lambda-n must be positive");
    const Dataset data = load(d, family);
    const Eigen::VectorXd beta = read_coefficients(beta_path);
    if (beta.size() != data.p()) throw DataError("coefficient file length does not match the design");

    PrecisionEstimate est;
    if (use_cv) {
        ClimeCvResult cv = cv_clime(data, family, beta, default_clime_grid(),
                                    derive_seed(seed, 0, StreamRole::ClimeFolds));
        print_warnings(err, cv.warnings);
        err << "selected lambda_n = " << format_double(cv.selected_lambda) << '\n';
        est = std::move(cv.estimate);
    } else {
        est = clime(neg_hessian(data, beta, family), *lambda_n);
        print_warnings(err, est.warnings);
    }
    err << "max constraint violation = " << format_double(est.max_constraint_violation) << '\n';
    write_matrix_csv(out_path, est.theta_hat);
    return kExitSuccess;
}

int run_infer(std::ostream& err, const DataArgs& d, const SelectionArgs& s, std::size_t folds,
              std::uint64_t seed, const std::string& out_path) {
    const GlmFamily family = family_or_throw(d.family);
    print_config(err, "infer",
                 {{"design", d.design}, {"response", response_desc(d)}, {"family", d.family},
                  {"selection", selection_desc(s)}, {"cv_folds", std::to_string(folds)},
                  {"seed", std::to_string(seed)}, {"out", out_path}});
    const Dataset data = load(d, family);
    const SampleFit fit = fit_pipeline(data, family, folds, seed);
    print_warnings(err, fit.lasso_cv.warnings);
    print_warnings(err, fit.lasso.warnings);
    print_warnings(err, fit.clime.warnings);
    err << "lambda = " << format_double(fit.lasso.lambda)
        << ", lambda_n = " << format_double(fit.clime.selected_lambda) << '\n';
    const SelectionResult sel = apply_selection(s, fit.debiased.statistics);
    report_selection(err, sel);

    const auto [chosen, sign] = selection_columns(sel, data.p());
    AtomicFile file(out_path);
    auto& out = file.stream();
    out << "index,beta_hat,beta_debiased,theta_jj,statistic,selected,sign\n";
    const auto& deb = fit.debiased;
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        out << (j + 1) << ',' << format_double(deb.beta_hat[j]) << ',' << format_double(deb.beta_debiased[j])
            << ',' << format_double(deb.theta_diag[j]) << ',' << format_double(deb.statistics[j]) << ','
            << chosen[k] << ',' << sign_text(chosen[k], sign[k]) << '\n';
    }
    file.commit();
    return kExitSuccess;
}

int run_two_sample(std::ostream& err, const DataArgs& d1, const DataArgs& d2, const std::string& family_name_arg,
                   const SelectionArgs& s, std::size_t folds, std::uint64_t seed,
                   const std::string& out_path) {
    const GlmFamily family = family_or_throw(family_name_arg);
    print_config(err, "two-sample",
                 {{"design1", d1.design}, {"response1", response_desc(d1)}, {"design2", d2.design},
                  {"response2", response_desc(d2)}, {"family", family_name_arg},
                  {"selection", selection_desc(s)}, {"cv_folds", std::to_string(folds)},
                  {"seed", std::to_string(seed)}, {"out", out_path}});
    const Dataset data1 = load(d1, family);
    const Dataset data2 = load(d2, family);
    if (data1.p() != data2.p()) throw DataError("the two designs have different numbers of columns");
    const SampleFit fit1 = fit_sample(data1, family, folds, 100, default_clime_grid(),
                                      derive_seed(seed, 0, StreamRole::LassoFolds),
                                      derive_seed(seed, 0, StreamRole::ClimeFolds));
    const SampleFit fit2 = fit_sample(data2, family, folds, 100, default_clime_grid(),
                                      derive_seed(seed, 0, StreamRole::SecondLassoFolds),
                                      derive_seed(seed, 0, StreamRole::SecondClimeFolds));
    for (const auto* f : {&fit1, &fit2}) {
        print_warnings(err, f->lasso_cv.warnings);
        print_warnings(err, f->lasso.warnings);
        print_warnings(err, f->clime.warnings);
    }
    const TwoSampleStatistics m = two_sample_statistics(fit1.debiased, fit2.debiased);
    const SelectionResult sel = apply_selection(s, m.m_statistics);
    report_selection(err, sel);

    const auto [chosen, sign] = selection_columns(sel, data1.p());
    AtomicFile file(out_path);
    auto& out = file.stream();
    out << "index,beta_debiased_1,beta_debiased_2,theta_jj_1,theta_jj_2,m_statistic,selected,sign\n";
    for (Eigen::Index j = 0; j < data1.p(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        out << (j + 1) << ',' << format_double(fit1.debiased.beta_debiased[j]) << ','
            << format_double(fit2.debiased.beta_debiased[j]) << ','
            << format_double(fit1.debiased.theta_diag[j]) << ','
            << format_double(fit2.debiased.theta_diag[j]) << ',' << format_double(m.m_statistics[j])
            << ',' << chosen[k] << ',' << sign_text(chosen[k], sign[k]) << '\n';
    }
    file.commit();
    return kExitSuccess;
}

int run_simulate(std::ostream& err, const std::string& config_path, unsigned jobs, bool full,
                 const std::string& out_dir) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw DataError("cannot open config '" + config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    SimConfig config = sim_config_from_json(buf.str());
    if (full) config = full_scale(config);
    print_config(err, "simulate",
                 {{"config", config_path}, {"resolved", sim_config_to_json(config)},
                  {"jobs", jobs == 0 ? "auto" : std::to_string(jobs)},
                  {"full_scale", full ? "true" : "false"}, {"out_dir", out_dir}});
    std::filesystem::create_directories(out_dir);
    const Experiment ex = run_experiment(config, jobs);
    for (const auto& t : ex.trials) {
        if (t.failed) err << "warning: trial " << t.trial_index << " failed: " << t.error << '\n';
    }
    const auto dir = std::filesystem::path(out_dir);
    write_trials_csv(dir / "trials.csv", ex.trials);
    write_summary_csv(dir / "summary.csv", config, ex.summary);
    err << "mean_fdr_d = " << format_double(ex.summary.mean_fdr_d)
        << ", mean_power_d = " << format_double(ex.summary.mean_power_d)
        << ", trials_completed = " << ex.summary.trials_completed << '\n';
    return kExitSuccess;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Debiased-Lasso inference for sparse GLMs with directional FDR control", "dirfdr"};
    app.require_subcommand(1);

    DataArgs fit_data;
    std::optional<double> fit_lambda;
    std::size_t fit_folds = 5;
    std::uint64_t fit_seed = 0;
    std::string fit_init, fit_out;
    auto* fit_cmd = app.add_subcommand("fit", "l1-penalized GLM fit (fixed lambda or K-fold CV)");
    add_data_flags(fit_cmd, fit_data);
    fit_cmd->add_option("--family", fit_data.family, "linear, logistic, poisson or exponential")->required();
    auto* lam = fit_cmd->add_option("--lambda", fit_lambda, "Fixed penalty level");
    auto* folds = fit_cmd->add_option("--cv-folds", fit_folds, "Cross-validation folds (default 5)");
    lam->excludes(folds);
    fit_cmd->add_option("--seed", fit_seed, "Seed for fold assignment (default 0)");
    fit_cmd->add_option("--init", fit_init, "Starting coefficients CSV (needed for exponential)");
    fit_cmd->add_option("--out", fit_out, "Output CSV: index,beta_hat")->required();

    DataArgs prec_data;
    std::string prec_beta, prec_out;
    std::optional<double> prec_lambda;
    bool prec_cv = false;
    std::uint64_t prec_seed = 0;
    auto* prec_cmd = app.add_subcommand("precision", "CLIME estimate of the inverse negative Hessian");
    add_data_flags(prec_cmd, prec_data);
    prec_cmd->add_option("--family", prec_data.family, "GLM family")->required();
    prec_cmd->add_option("--beta", prec_beta, "Coefficient CSV (output of `fit`)")->required();
    auto* ln = prec_cmd->add_option("--lambda-n", prec_lambda, "Fixed CLIME constraint level");
    auto* cvf = prec_cmd->add_flag("--cv", prec_cv, "Select lambda_n by 2-fold cross-validation");
    ln->excludes(cvf);
    prec_cmd->add_option("--seed", prec_seed, "Seed for fold assignment (default 0)");
    prec_cmd->add_option("--out", prec_out, "Output p x p CSV")->required();

    DataArgs inf_data;
    SelectionArgs inf_sel;
    std::size_t inf_folds = 5;
    std::uint64_t inf_seed = 0;
    std::string inf_out;
    auto* inf_cmd = app.add_subcommand("infer", "Lasso, CLIME, debiasing and GMT selection");
    add_data_flags(inf_cmd, inf_data);
    inf_cmd->add_option("--family", inf_data.family, "GLM family")->required();
    add_selection_flags(inf_cmd, inf_sel);
    inf_cmd->add_option("--cv-folds", inf_folds, "Lasso cross-validation folds (default 5)");
    inf_cmd->add_option("--seed", inf_seed, "Seed (default 0)");
    inf_cmd->add_option("--out", inf_out, "Output results CSV")->required();

    DataArgs ts1, ts2;
    std::string ts_family;
    SelectionArgs ts_sel;
    std::size_t ts_folds = 5;
    std::uint64_t ts_seed = 0;
    std::string ts_out;
    auto* ts_cmd = app.add_subcommand("two-sample", "GMT2 test of coefficient differences between two samples");
    add_data_flags(ts_cmd, ts1, "1");
    add_data_flags(ts_cmd, ts2, "2");
    ts_cmd->add_option("--family", ts_family, "GLM family")->required();
    add_selection_flags(ts_cmd, ts_sel);
    ts_cmd->add_option("--cv-folds", ts_folds, "Lasso cross-validation folds (default 5)");
    ts_cmd->add_option("--seed", ts_seed, "Seed (default 0)");
    ts_cmd->add_option("--out", ts_out, "Output results CSV")->required();

    std::string sim_config, sim_out;
    unsigned sim_jobs = 0;
    bool sim_full = false;
    auto* sim_cmd = app.add_subcommand("simulate", "Seeded Monte-Carlo FDR/power experiment");
    sim_cmd->add_option("--config", sim_config, "JSON experiment configuration")->required();
    sim_cmd->add_option("--jobs", sim_jobs, "Concurrent trials (default: all cores)");
    sim_cmd->add_flag("--full-scale", sim_full, "Use the large logistic design (p=600, s0=50)");
    sim_cmd->add_option("--out-dir", sim_out, "Directory for trials.csv and summary.csv")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitSuccess : kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(err, fit_data, fit_lambda, fit_folds, fit_seed, fit_init, fit_out);
        if (prec_cmd->parsed()) {
            return run_precision(err, prec_data, prec_beta, prec_lambda, prec_cv, prec_seed, prec_out);
        }
        if (inf_cmd->parsed()) return run_infer(err, inf_data, inf_sel, inf_folds, inf_seed, inf_out);
        if (ts_cmd->parsed()) {
            return run_two_sample(err, ts1, ts2, ts_family, ts_sel, ts_folds, ts_seed, ts_out);
        }
        if (sim_cmd->parsed()) return run_simulate(err, sim_config, sim_jobs, sim_full, sim_out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DomainError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace dirfdr
