#include "dirfdr/simulation.hpp"

#include <cmath>
#include <json.hpp>
#include <set>
#include <string>

#include "dirfdr/data_io.hpp"
#include "dirfdr/errors.hpp"
#include "dirfdr/parallel.hpp"

namespace dirfdr {

namespace {

using json = nlohmann::json;

std::string_view mode_name(TestMode mode) {
    return mode == TestMode::Fdr ? "fdr" : "fdv";
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

void SimConfig::validate() const {
    if (n < 2) throw DomainError("config: n must be at least 2");
    if (p < 3) throw DomainError("config: p must be at least 3");
    if (s0 > p) throw DomainError("config: s0 exceeds p");
    if (!(signal >= 0.0) || !std::isfinite(signal)) throw DomainError("config: signal must be >= 0");
    if (!(design_low < design_high)) throw DomainError("config: design_low must be below design_high");
    if (trials < 1) throw DomainError("config: trials must be at least 1");
    if (mode == TestMode::Fdr && !(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("config: alpha must lie in (0, 1)");
    }
    if (mode == TestMode::Fdv && !(u > 0.0 && u < static_cast<double>(p))) {
        throw DomainError("config: u must lie in (0, p)");
    }
    if (cv_folds_lasso < 2 || cv_folds_lasso > n) throw DomainError("config: invalid cv_folds_lasso");
    if (lasso_grid_size < 1) throw DomainError("config: lasso_grid_size must be positive");
    if (clime_grid.empty()) throw DomainError("config: clime_grid is empty");
    for (double v : clime_grid) {
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("config: clime_grid values must be positive");
    }
    if (family == GlmFamily::Exponential) {
        throw DomainError("config: response generation is not available for the exponential family");
    }
}

SimConfig sim_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("config: top level must be a JSON object");
    static const std::set<std::string> known = {
        "family", "n", "p", "s0", "signal", "design_low", "design_high", "mode", "alpha", "u",
        "trials", "master_seed", "cv_folds_lasso", "lasso_grid_size", "clime_grid", "two_sample"};
    for (const auto& item : doc.items()) {
        if (!known.count(item.key())) throw DataError("config: unknown key '" + item.key() + "'");
    }
    SimConfig c;
    try {
        if (doc.contains("family")) {
            const auto name = doc.at("family").get<std::string>();
            const auto fam = parse_family(name);
            if (!fam) throw DataError("config: unknown family '" + name + "'");
            c.family = *fam;
        }
        auto read = [&](const char* key, auto& field) {
            if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
        };
        read("n", c.n);
        read("p", c.p);
        read("s0", c.s0);
        read("signal", c.signal);
        read("design_low", c.design_low);
        read("design_high", c.design_high);
        read("alpha", c.alpha);
        read("u", c.u);
        read("trials", c.trials);
        read("master_seed", c.master_seed);
        read("cv_folds_lasso", c.cv_folds_lasso);
        read("lasso_grid_size", c.lasso_grid_size);
        read("clime_grid", c.clime_grid);
        read("two_sample", c.two_sample);
        if (doc.contains("mode")) {
            const auto m = doc.at("mode").get<std::string>();
            if (m == "fdr") {
                c.mode = TestMode::Fdr;
            } else if (m == "fdv" || m == "fwer") {
                c.mode = TestMode::Fdv;
            } else {
                throw DataError("config: mode must be 'fdr' or 'fdv'");
            }
        } else if (doc.contains("u") && !doc.contains("alpha")) {
            c.mode = TestMode::Fdv;
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw DataError(e.what());
    }
    return c;
}

std::string sim_config_to_json(const SimConfig& c) {
    json doc = {
        {"family", std::string(family_name(c.family))},
        {"n", c.n},
        {"p", c.p},
        {"s0", c.s0},
        {"signal", c.signal},
        {"design_low", c.design_low},
        {"design_high", c.design_high},
        {"mode", std::string(mode_name(c.mode))},
        {"alpha", c.alpha},
        {"u", c.u},
        {"trials", c.trials},
        {"master_seed", c.master_seed},
        {"cv_folds_lasso", c.cv_folds_lasso},
        {"lasso_grid_size", c.lasso_grid_size},
        {"clime_grid", c.clime_grid},
        {"two_sample", c.two_sample},
    };
    return doc.dump();
}

SimConfig full_scale(SimConfig config) {
    config.family = GlmFamily::Logistic;
    config.p = 600;
    config.s0 = 50;
    config.signal = 0.5;
    config.design_low = -1.0;
    config.design_high = 1.0;
    config.trials = 100;
    return config;
}

Eigen::MatrixXd generate_design(std::size_t n, std::size_t p, double low, double high, Philox& stream) {
    if (!(low < high)) throw DomainError("generate_design: low must be below high");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = stream.uniform(low, high);
    }
    return x;
}

GroundTruth generate_coefficients(std::size_t p, std::size_t s0, double signal) {
    if (s0 > p) throw DomainError("generate_coefficients: s0 exceeds p");
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    const std::size_t positive = (s0 + 1) / 2;
    for (std::size_t j = 0; j < s0; ++j) {
        beta[static_cast<Eigen::Index>(j)] = j < positive ? signal : -signal;
    }
    return GroundTruth(std::move(beta));
}

Eigen::VectorXd sample_responses(const Eigen::MatrixXd& design, const GroundTruth& truth,
                                 GlmFamily family, Philox& stream) {
    if (design.cols() != truth.beta_true.size()) {
        throw DataError("sample_responses: design and coefficients disagree in dimension");
    }
    const Eigen::VectorXd eta = design * truth.beta_true;
    Eigen::VectorXd y(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        switch (family) {
            case GlmFamily::Linear: y[i] = eta[i] + stream.normal(); break;
            case GlmFamily::Logistic: y[i] = stream.bernoulli(family_bdot(family, eta[i])) ? 1.0 : 0.0; break;
            case GlmFamily::Poisson: y[i] = static_cast<double>(stream.poisson(std::exp(eta[i]))); break;
            case GlmFamily::Exponential:
                throw DomainError("sample_responses: exponential responses are not simulated");
        }
    }
    return y;
}

SampleFit fit_sample(const Dataset& data, GlmFamily family, std::size_t lasso_folds,
                     std::size_t lasso_grid_size, const std::vector<double>& clime_grid,
                     std::uint64_t lasso_seed, std::uint64_t clime_seed, unsigned jobs) {
    CvLassoOptions lo;
    lo.folds = lasso_folds;
    lo.grid_size = lasso_grid_size;
    lo.seed = lasso_seed;
    lo.jobs = jobs;
    auto [cv, fit] = cv_lasso(data, family, lo);
    ClimeOptions co;
    co.jobs = jobs;
    ClimeCvResult clime_cv = cv_clime(data, family, fit.beta_hat, clime_grid, clime_seed, co);
    DebiasedFit deb = debias(fit, clime_cv.estimate, data, family);
    return SampleFit{std::move(cv), std::move(fit), std::move(clime_cv), std::move(deb)};
}

TrialStatistics compute_trial_statistics(const SimConfig& config, std::size_t trial_index) {
    config.validate();
    const std::uint64_t seed = config.master_seed;
    TrialStatistics out;
    out.trial_index = trial_index;
    out.seed = derive_seed(seed, trial_index, StreamRole::Generic);
    const GroundTruth truth = generate_coefficients(config.p, config.s0, config.signal);

    auto one_sample = [&](StreamRole design_role, StreamRole response_role, StreamRole lasso_role,
                          StreamRole clime_role) {
        Philox design_stream(seed, trial_index, design_role);
        Eigen::MatrixXd x = generate_design(config.n, config.p, config.design_low,
                                            config.design_high, design_stream);
        Philox response_stream(seed, trial_index, response_role);
        Eigen::VectorXd y = sample_responses(x, truth, config.family, response_stream);
        const Dataset data(std::move(x), std::move(y));
        SampleFit fit = fit_sample(data, config.family, config.cv_folds_lasso, config.lasso_grid_size,
                                   config.clime_grid, derive_seed(seed, trial_index, lasso_role),
                                   derive_seed(seed, trial_index, clime_role));
        for (const auto& w : fit.lasso_cv.warnings) out.warnings.push_back(w);
        for (const auto& w : fit.clime.warnings) out.warnings.push_back(w);
        return fit;
    };

    SampleFit first = one_sample(StreamRole::Design, StreamRole::Responses, StreamRole::LassoFolds,
                                 StreamRole::ClimeFolds);
    out.beta_hat = first.lasso.beta_hat;
    out.lasso_lambda = first.lasso.lambda;
    out.clime_lambda = first.clime.selected_lambda;
    if (!config.two_sample) {
        out.truth = truth;
        out.statistics = first.debiased.statistics;
        return out;
    }
    SampleFit second = one_sample(StreamRole::SecondDesign, StreamRole::SecondResponses,
                                  StreamRole::SecondLassoFolds, StreamRole::SecondClimeFolds);
    // Both samples share beta, so every difference is a true zero.
    out.truth = GroundTruth(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.p)));
    out.statistics = two_sample_statistics(first.debiased, second.debiased).m_statistics;
    return out;
}

TrialResult score_trial(const SimConfig& config, const TrialStatistics& stats) {
    SelectionResult sel;
    if (config.mode == TestMode::Fdr) {
        const Threshold t = gmt_threshold(stats.statistics, config.alpha);
        sel = select_at_threshold(stats.statistics, t.value);
        sel.fallback_used = t.fallback_used;
    } else {
        sel = select_at_threshold(stats.statistics,
                                  fdv_threshold(config.u, static_cast<std::size_t>(stats.statistics.size())));
    }
    TrialResult r;
    r.trial_index = stats.trial_index;
    r.seed = stats.seed;
    r.fdp_d = directional_fdp(sel, stats.truth);
    r.power_d = directional_power(sel, stats.truth);
    r.fdv_count = directional_fdv_count(sel, stats.truth);
    r.threshold = sel.threshold;
    r.fallback_used = sel.fallback_used;
    r.rejections = sel.selected.size();
    r.lasso_lambda = stats.lasso_lambda;
    r.clime_lambda = stats.clime_lambda;
    const GroundTruth coefficients = generate_coefficients(config.p, config.s0, config.signal);
    r.l2_error = (stats.beta_hat - coefficients.beta_true).norm();
    return r;
}

TrialResult run_trial(const SimConfig& config, std::size_t trial_index) {
    try {
        return score_trial(config, compute_trial_statistics(config, trial_index));
    } catch (const std::exception& e) {
        TrialResult r;
        r.trial_index = trial_index;
        r.seed = derive_seed(config.master_seed, trial_index, StreamRole::Generic);
        r.failed = true;
        r.error = e.what();
        return r;
    }
}

ExperimentSummary summarize(const std::vector<TrialResult>& trials) {
    ExperimentSummary s;
    std::vector<double> fdp, power, fdv, rejections;
    for (const auto& t : trials) {
        if (t.failed) {
            ++s.trials_failed;
            continue;
        }
        fdp.push_back(t.fdp_d);
        power.push_back(t.power_d);
        fdv.push_back(static_cast<double>(t.fdv_count));
        rejections.push_back(static_cast<double>(t.rejections));
    }
    s.trials_completed = fdp.size();
    if (trials.empty() || 5 * s.trials_failed > trials.size()) {
        throw NumericalError("experiment failed: " + std::to_string(s.trials_failed) + " of " +
                             std::to_string(trials.size()) + " trials did not complete");
    }
    s.mean_fdr_d = mean_of(fdp);
    s.se_fdr_d = standard_error(fdp, s.mean_fdr_d);
    s.mean_power_d = mean_of(power);
    s.se_power_d = standard_error(power, s.mean_power_d);
    s.mean_fdv = mean_of(fdv);
    s.se_fdv = standard_error(fdv, s.mean_fdv);
    s.mean_rejections = mean_of(rejections);
    return s;
}

Experiment run_experiment(const SimConfig& config, unsigned jobs) {
    config.validate();
    Experiment ex;
    ex.trials.resize(config.trials);
    parallel_for(config.trials, jobs, [&](std::size_t t) { ex.trials[t] = run_trial(config, t); });
    ex.summary = summarize(ex.trials);
    return ex;
}

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << "trial,seed,status,fdp_d,power_d,fdv_count,threshold,fallback_used,rejections,"
           "lasso_lambda,clime_lambda,l2_error\n";
    for (const auto& t : trials) {
        out << t.trial_index << ',' << t.seed << ',';
        if (t.failed) {
            out << "failed,,,,,,,,,\n";
            continue;
        }
        out << "ok," << format_double(t.fdp_d) << ',' << format_double(t.power_d) << ','
            << t.fdv_count << ',' << format_double(t.threshold) << ',' << (t.fallback_used ? 1 : 0)
            << ',' << t.rejections << ',' << format_double(t.lasso_lambda) << ','
            << format_double(t.clime_lambda) << ',' << format_double(t.l2_error) << '\n';
    }
    file.commit();
}

void write_summary_csv(const std::filesystem::path& path, const SimConfig& c,
                       const ExperimentSummary& s) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << "family,n,p,s0,signal,mode,level,two_sample,trials_completed,trials_failed,mean_fdr_d,"
           "se_fdr_d,mean_power_d,se_power_d,mean_fdv,se_fdv,mean_rejections\n";
    out << family_name(c.family) << ',' << c.n << ',' << c.p << ',' << c.s0 << ','
        << format_double(c.signal) << ',' << mode_name(c.mode) << ','
        << format_double(c.mode == TestMode::Fdr ? c.alpha : c.u) << ',' << (c.two_sample ? 1 : 0)
        << ',' << s.trials_completed << ',' << s.trials_failed << ',' << format_double(s.mean_fdr_d)
        << ',' << format_double(s.se_fdr_d) << ',' << format_double(s.mean_power_d) << ','
        << format_double(s.se_power_d) << ',' << format_double(s.mean_fdv) << ','
        << format_double(s.se_fdv) << ',' << format_double(s.mean_rejections) << '\n';
    file.commit();
}

}  // namespace dirfdr
