// Acceptance suite: one PASS/FAIL line per criterion.
//
// Every run is executed twice (different worker counts) into run1/ and run2/;
// criterion 9 compares the two trees byte for byte. Verdicts 1-8 use run1.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dirfdr/data_io.hpp"
#include "dirfdr/inference.hpp"
#include "dirfdr/lasso.hpp"
#include "dirfdr/numerics.hpp"
#include "dirfdr/parallel.hpp"
#include "dirfdr/precision.hpp"
#include "dirfdr/rng.hpp"
#include "dirfdr/simulation.hpp"
#include "glm_instances.hpp"
#include "kkt_check.hpp"
#include "lp_oracle.hpp"
#include "threshold_oracle.hpp"

namespace fs = std::filesystem;
using namespace dirfdr;

namespace {

// Tolerances and sizes fixed by the acceptance criteria.
constexpr double kAlpha = 0.2;
constexpr double kFdvU = 3.0;
constexpr double kMaxNullRejections = 1.0;
constexpr double kKktTol = 1e-7;
constexpr double kLpGapTol = 1e-6;
constexpr double kThresholdTol = 1e-5;
constexpr double kRoundtripTol = 1e-12;
constexpr double kKsLevel = 0.01;
constexpr double kRateRatio = 0.75;
constexpr double kMinPower = 0.5;

struct Options {
    fs::path out_dir = "acceptance_out";
    unsigned jobs = 0;
    std::set<int> only;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_line(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    AtomicFile f(path);
    f.stream() << text;
    f.commit();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SimConfig logistic_config(std::size_t n) {
    SimConfig c;
    c.family = GlmFamily::Logistic;
    c.n = n;
    c.p = 200;
    c.s0 = 20;
    c.signal = 0.6;
    c.design_low = -1.0;
    c.design_high = 1.0;
    c.alpha = kAlpha;
    c.trials = 100;
    c.master_seed = 1;
    return c;
}

SimConfig poisson_config() {
    SimConfig c;
    c.family = GlmFamily::Poisson;
    c.n = 1000;
    c.p = 100;
    c.s0 = 10;
    c.signal = 0.3;
    c.design_low = -0.6;
    c.design_high = 0.6;
    c.alpha = kAlpha;
    c.trials = 100;
    c.master_seed = 3;
    return c;
}

// Measurements of one full pass; only run1's are used for verdicts.
struct PassResults {
    std::map<std::string, ExperimentSummary> summaries;
    double kkt_worst = 0.0;
    std::size_t kkt_unconverged = 0;
    std::size_t kkt_count = 0;
    double lp_worst = 0.0;
    std::size_t lp_mismatch = 0;
    std::size_t lp_count = 0;
    double threshold_worst = 0.0;
    std::size_t threshold_fallback_mismatch = 0;
    double roundtrip_worst = 0.0;
    double ks_statistic = 0.0;
    double ks_pvalue = 0.0;
    std::size_t ks_count = 0;
    double l2_small = 0.0;
    double l2_large = 0.0;
};

void experiment_files(const fs::path& dir, const std::string& stem, const SimConfig& c,
                      const std::vector<TrialResult>& trials, const ExperimentSummary& s) {
    write_trials_csv(dir / (stem + "_trials.csv"), trials);
    write_summary_csv(dir / (stem + "_summary.csv"), c, s);
}

// Criteria 1 and 3: plain experiments.
void run_simulation(const std::string& stem, const SimConfig& c, unsigned jobs, const fs::path& dir,
                    PassResults& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const Experiment ex = run_experiment(c, jobs);
    experiment_files(dir, stem, c, ex.trials, ex.summary);
    res.summaries[stem] = ex.summary;
    log_line(stem + ": " + fmt(seconds_since(t0)) + "s, mean_fdr_d=" + fmt(ex.summary.mean_fdr_d) +
             " mean_power_d=" + fmt(ex.summary.mean_power_d) +
             " failed=" + std::to_string(ex.summary.trials_failed));
}

// n=800 logistic statistics scored both in FDR mode (criteria 1-2) and FDV mode (criterion 4).
void run_logistic_800(unsigned jobs, const fs::path& dir, PassResults& res) {
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig fdr = logistic_config(800);
    SimConfig fdv = fdr;
    fdv.mode = TestMode::Fdv;
    fdv.u = kFdvU;
    std::vector<TrialResult> fdr_trials(fdr.trials), fdv_trials(fdr.trials);
    parallel_for(fdr.trials, jobs, [&](std::size_t t) {
        try {
            const TrialStatistics stats = compute_trial_statistics(fdr, t);
            fdr_trials[t] = score_trial(fdr, stats);
            fdv_trials[t] = score_trial(fdv, stats);
        } catch (const std::exception&) {
            fdr_trials[t] = run_trial(fdr, t);
            fdv_trials[t] = fdr_trials[t];
        }
    });
    const ExperimentSummary s_fdr = summarize(fdr_trials);
    const ExperimentSummary s_fdv = summarize(fdv_trials);
    experiment_files(dir, "c1_logistic_n800", fdr, fdr_trials, s_fdr);
    experiment_files(dir, "c4_logistic_n800_fdv", fdv, fdv_trials, s_fdv);
    res.summaries["c1_logistic_n800"] = s_fdr;
    res.summaries["c4_logistic_n800_fdv"] = s_fdv;
    log_line("c1_logistic_n800: " + fmt(seconds_since(t0)) + "s, mean_fdr_d=" + fmt(s_fdr.mean_fdr_d) +
             " mean_power_d=" + fmt(s_fdr.mean_power_d) + " mean_fdv(u=3)=" + fmt(s_fdv.mean_fdv));
}

// Criterion 5: two independent samples with identical coefficients.
void run_two_sample(unsigned jobs, const fs::path& dir, PassResults& res) {
    SimConfig c = logistic_config(800);
    c.two_sample = true;
    c.trials = 50;
    c.master_seed = 5;
    run_simulation("c5_two_sample_n800", c, jobs, dir, res);
}

Eigen::MatrixXd random_spd(int p, std::uint64_t seed) {
    Philox rng(seed, 0, StreamRole::Generic);
    const int rows = seed % 2 ? p + 2 : 3 * p;
    Eigen::MatrixXd a(rows, p);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    const double ridge = seed % 2 ? 0.01 : 0.1;
    return a.transpose() * a / double(rows) + ridge * Eigen::MatrixXd::Identity(p, p);
}

// Kolmogorov distribution tail P(K > x).
double kolmogorov_tail(double x) {
    if (x <= 0.0) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Criterion 6: oracle equivalences.
void run_properties(unsigned jobs, const fs::path& dir, PassResults& res) {
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream kkt_csv;
    kkt_csv << "instance,family,n,p,lambda,kkt_residual,converged\n";
    const GlmFamily families[] = {GlmFamily::Linear, GlmFamily::Logistic, GlmFamily::Poisson,
                                  GlmFamily::Exponential};
    const int shapes[][2] = {{60, 10}, {120, 40}, {80, 150}, {200, 30}, {50, 80}};
    const double fracs[] = {0.3, 0.1, 0.03};
    for (int inst = 0; inst < 50; ++inst) {
        const GlmFamily fam = families[inst % 4];
        const int n = shapes[(inst / 4) % 5][0];
        const int p = shapes[(inst / 4) % 5][1];
        const auto data = oracle::glm_instance(fam, n, p, 600 + static_cast<std::uint64_t>(inst));
        const double frac = fracs[(inst / 20) % 3];
        const double lambda = fam == GlmFamily::Exponential ? frac
                                                            : frac * lambda_max(data.data, fam);
        const LassoFit fit = fit_lasso(data.data, fam, lambda, data.init);
        const double r = oracle::kkt_residual(data.data, fam, fit.beta_hat, lambda);
        res.kkt_worst = std::max(res.kkt_worst, r);
        res.kkt_unconverged += !fit.converged;
        ++res.kkt_count;
        kkt_csv << inst << ',' << family_name(fam) << ',' << n << ',' << p << ',' << format_double(lambda)
                << ',' << format_double(r) << ',' << (fit.converged ? 1 : 0) << '\n';
    }
    write_text(dir / "c6a_kkt.csv", kkt_csv.str());

    std::ostringstream lp_csv;
    lp_csv << "instance,p,lambda,column,clime_l1,lp_l1,gap\n";
    for (int inst = 0; inst < 20; ++inst) {
        const int p = 2 + inst % 9;
        const Eigen::MatrixXd sigma = random_spd(p, 900 + static_cast<std::uint64_t>(inst));
        for (double lambda : {0.02, 0.1, 0.3}) {
            ClimeOptions co;
            co.jobs = jobs;
            const PrecisionEstimate est = clime(sigma, lambda, co);
            for (int j = 0; j < p; ++j) {
                const auto lp = oracle::clime_column_lp(sigma, j, lambda);
                const double mine = est.theta_hat.col(j).lpNorm<1>();
                double gap = INFINITY;
                if (lp.status == oracle::LpStatus::Optimal) gap = std::abs(mine - lp.objective);
                if (!(gap <= kLpGapTol)) ++res.lp_mismatch;
                res.lp_worst = std::max(res.lp_worst, gap);
                ++res.lp_count;
                lp_csv << inst << ',' << p << ',' << format_double(lambda) << ',' << j << ','
                       << format_double(mine) << ',' << format_double(lp.objective) << ','
                       << format_double(gap) << '\n';
            }
        }
    }
    write_text(dir / "c6b_clime_lp.csv", lp_csv.str());

    const oracle::ThresholdScan scan;
    Philox rng(606, 0, StreamRole::Generic);
    const double levels[] = {0.05, 0.1, 0.2, 0.3};
    std::ostringstream th_csv;
    th_csv << "vector,p,alpha,threshold,grid_threshold,difference,fallback\n";
    for (int v = 0; v < 1000; ++v) {
        const auto p = static_cast<Eigen::Index>(3 + rng.uniform_index(48));
        Eigen::VectorXd t(p);
        const double signal_frac = rng.uniform();
        for (Eigen::Index j = 0; j < p; ++j) {
            t[j] = rng.normal();
            if (rng.uniform() < signal_frac) t[j] += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.0, 6.0);
        }
        const double alpha = levels[v % 4];
        const Threshold got = gmt_threshold(t, alpha);
        bool fallback = false;
        const double expect = scan(t, alpha, &fallback);
        const double diff = std::abs(got.value - expect);
        res.threshold_worst = std::max(res.threshold_worst, diff);
        res.threshold_fallback_mismatch += got.fallback_used != fallback;
        th_csv << v << ',' << p << ',' << format_double(alpha) << ',' << format_double(got.value) << ','
               << format_double(expect) << ',' << format_double(diff) << ',' << (got.fallback_used ? 1 : 0)
               << '\n';
    }
    write_text(dir / "c6c_threshold.csv", th_csv.str());

    std::ostringstream rt_csv;
    rt_csv << "q,roundtrip_error\n";
    for (int k = 0; k <= 1500; ++k) {
        const double q = std::pow(10.0, -15.0 * k / 1500.0);
        const double err = std::abs(gaussian_tail(gaussian_tail_inverse(q)) - q);
        res.roundtrip_worst = std::max(res.roundtrip_worst, err);
        rt_csv << format_double(q) << ',' << format_double(err) << '\n';
    }
    write_text(dir / "c6d_roundtrip.csv", rt_csv.str());
    log_line("properties: " + fmt(seconds_since(t0)) + "s");
}

// Criterion 7: pooled null statistics of the linear model with an orthonormalized design.
void run_null_calibration(unsigned jobs, const fs::path& dir, PassResults& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t trials = 200, n = 500, p = 50;
    const std::uint64_t master = 7;
    std::vector<Eigen::VectorXd> stats(trials);
    parallel_for(trials, jobs, [&](std::size_t t) {
        Philox ds(master, t, StreamRole::Design);
        Eigen::MatrixXd raw(n, p);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) raw(i, j) = ds.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
        const Eigen::MatrixXd x = std::sqrt(double(n)) * (qr.householderQ() * Eigen::MatrixXd::Identity(n, p));
        Philox rs(master, t, StreamRole::Responses);
        const GroundTruth truth(Eigen::VectorXd::Zero(p));
        const Dataset data(x, sample_responses(x, truth, GlmFamily::Linear, rs));
        CvLassoOptions lo;
        lo.seed = derive_seed(master, t, StreamRole::LassoFolds);
        const auto [cv, fit] = cv_lasso(data, GlmFamily::Linear, lo);
        const Eigen::MatrixXd sigma = neg_hessian(data, fit.beta_hat, GlmFamily::Linear);
        const Eigen::MatrixXd theta = sigma.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
        stats[t] = debias(fit.beta_hat, theta, data, GlmFamily::Linear).statistics;
    });
    std::vector<double> pooled;
    std::ostringstream csv;
    csv << "trial,index,statistic\n";
    for (std::size_t t = 0; t < trials; ++t) {
        for (Eigen::Index j = 0; j < stats[t].size(); ++j) {
            pooled.push_back(stats[t][j]);
            csv << t << ',' << j << ',' << format_double(stats[t][j]) << '\n';
        }
    }
    std::sort(pooled.begin(), pooled.end());
    const double count = static_cast<double>(pooled.size());
    double d = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const double f = 0.5 * std::erfc(-pooled[i] / std::sqrt(2.0));
        d = std::max({d, f - double(i) / count, double(i + 1) / count - f});
    }
    res.ks_statistic = d;
    res.ks_count = pooled.size();
    const double root = std::sqrt(count);
    res.ks_pvalue = kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
    csv << "ks_statistic," << format_double(d) << ",\nks_pvalue," << format_double(res.ks_pvalue) << ",\n";
    write_text(dir / "c7_null_statistics.csv", csv.str());
    log_line("null calibration: " + fmt(seconds_since(t0)) + "s, D=" + fmt(d) + " p=" + fmt(res.ks_pvalue));
}

// Criterion 8: Lasso l2 error at two sample sizes.
void run_rate(unsigned jobs, const fs::path& dir, PassResults& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t seeds = 20, p = 200;
    const std::size_t sizes[] = {500, 2000};
    const std::uint64_t master = 8;
    const GroundTruth truth = generate_coefficients(p, 10, 0.5);
    std::vector<double> err(2 * seeds);
    parallel_for(2 * seeds, jobs, [&](std::size_t k) {
        const std::size_t s = k % seeds, n = sizes[k / seeds];
        const std::uint64_t stream = 1000 * n + s;
        Philox ds(master, stream, StreamRole::Design), rs(master, stream, StreamRole::Responses);
        Eigen::MatrixXd x = generate_design(n, p, -1.0, 1.0, ds);
        Eigen::VectorXd y = sample_responses(x, truth, GlmFamily::Logistic, rs);
        const Dataset data(std::move(x), std::move(y));
        CvLassoOptions lo;
        lo.seed = derive_seed(master, stream, StreamRole::LassoFolds);
        const auto [cv, fit] = cv_lasso(data, GlmFamily::Logistic, lo);
        err[k] = (fit.beta_hat - truth.beta_true).norm();
    });
    std::ostringstream csv;
    csv << "n,seed,l2_error\n";
    double sum[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < 2 * seeds; ++k) {
        sum[k / seeds] += err[k];
        csv << sizes[k / seeds] << ',' << k % seeds << ',' << format_double(err[k]) << '\n';
    }
    res.l2_small = sum[0] / double(seeds);
    res.l2_large = sum[1] / double(seeds);
    write_text(dir / "c8_l2_error.csv", csv.str());
    log_line("rate: " + fmt(seconds_since(t0)) + "s, l2(500)=" + fmt(res.l2_small) +
             " l2(2000)=" + fmt(res.l2_large));
}

bool wants(const Options& opt, int c) { return opt.only.empty() || opt.only.count(c); }

PassResults run_pass(const Options& opt, unsigned jobs, const fs::path& dir) {
    fs::create_directories(dir);
    PassResults res;
    if (wants(opt, 6)) run_properties(jobs, dir, res);
    if (wants(opt, 7)) run_null_calibration(jobs, dir, res);
    if (wants(opt, 8)) run_rate(jobs, dir, res);
    if (wants(opt, 3)) run_simulation("c3_poisson_n1000", poisson_config(), jobs, dir, res);
    if (wants(opt, 1) || wants(opt, 2) || wants(opt, 4)) run_logistic_800(jobs, dir, res);
    if (wants(opt, 5)) run_two_sample(jobs, dir, res);
    if (wants(opt, 1) || wants(opt, 2)) run_simulation("c1_logistic_n400", logistic_config(400), jobs, dir, res);
    return res;
}

struct Verdict {
    int id;
    bool pass;
    std::string text;
};

void report(const Verdict& v, std::ostream& out) {
    out << (v.pass ? "PASS" : "FAIL") << " criterion " << v.id << ": " << v.text << std::endl;
}

Options parse(int argc, char** argv) {
    Options opt;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--out-dir" && i + 1 < argc) {
            opt.out_dir = argv[++i];
        } else if (a == "--jobs" && i + 1 < argc) {
            opt.jobs = static_cast<unsigned>(std::stoul(argv[++i]));
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string item; std::getline(ss, item, ',');) opt.only.insert(std::stoi(item));
        } else {
            std::cerr << "usage: acceptance [--out-dir DIR] [--jobs N] [--only 1,2,...]\n";
            std::exit(2);
        }
    }
    return opt;
}

}  // namespace

int main(int argc, char** argv) {
    const Options opt = parse(argc, argv);
    const unsigned jobs1 = opt.jobs == 0 ? default_jobs() : opt.jobs;
    const unsigned jobs2 = jobs1 == 1 ? 2 : 1;
    const auto t0 = std::chrono::steady_clock::now();

    std::cerr << "pass 1 (" << jobs1 << " workers)" << std::endl;
    const PassResults r = run_pass(opt, jobs1, opt.out_dir / "run1");
    std::vector<Verdict> verdicts;

    auto bound_fdr = [](const ExperimentSummary& s) { return kAlpha + 2.0 * s.se_fdr_d; };
    auto completed = [](const ExperimentSummary& s) {
        return "completed=" + std::to_string(s.trials_completed) + " failed=" + std::to_string(s.trials_failed);
    };

    if (wants(opt, 1)) {
        const auto& a = r.summaries.at("c1_logistic_n400");
        const auto& b = r.summaries.at("c1_logistic_n800");
        const bool ok = a.mean_fdr_d <= bound_fdr(a) && b.mean_fdr_d <= bound_fdr(b);
        verdicts.push_back({1, ok,
                            "logistic p=200 s0=20 A=0.6: n=400 mean_fdr_d=" + fmt(a.mean_fdr_d) + " <= " +
                                fmt(bound_fdr(a)) + " (" + completed(a) + "); n=800 mean_fdr_d=" +
                                fmt(b.mean_fdr_d) + " <= " + fmt(bound_fdr(b)) + " (" + completed(b) + ")"});
    }
    if (wants(opt, 2)) {
        const auto& a = r.summaries.at("c1_logistic_n400");
        const auto& b = r.summaries.at("c1_logistic_n800");
        const bool ok = b.mean_power_d >= a.mean_power_d && b.mean_power_d >= kMinPower;
        verdicts.push_back({2, ok,
                            "power n=800 " + fmt(b.mean_power_d) + " >= power n=400 " + fmt(a.mean_power_d) +
                                " and >= " + fmt(kMinPower)});
    }
    if (wants(opt, 3)) {
        const auto& s = r.summaries.at("c3_poisson_n1000");
        verdicts.push_back({3, s.mean_fdr_d <= bound_fdr(s),
                            "poisson p=100 s0=10 A=0.3 n=1000: mean_fdr_d=" + fmt(s.mean_fdr_d) + " <= " +
                                fmt(bound_fdr(s)) + " (" + completed(s) + ")"});
    }
    if (wants(opt, 4)) {
        const auto& s = r.summaries.at("c4_logistic_n800_fdv");
        const double bound = kFdvU + 2.0 * s.se_fdv;
        verdicts.push_back({4, s.mean_fdv <= bound,
                            "FDV u=3 n=800: mean fdv_count=" + fmt(s.mean_fdv) + " <= " + fmt(bound)});
    }
    if (wants(opt, 5)) {
        const auto& s = r.summaries.at("c5_two_sample_n800");
        verdicts.push_back({5, s.mean_rejections <= kMaxNullRejections,
                            "two-sample global null, 50 trials: mean rejections=" + fmt(s.mean_rejections) +
                                " <= 1 (" + completed(s) + ")"});
    }
    if (wants(opt, 6)) {
        const bool a = r.kkt_worst <= kKktTol && r.kkt_unconverged == 0 && r.kkt_count == 50;
        const bool b = r.lp_mismatch == 0 && r.lp_count > 0;
        const bool c = r.threshold_worst <= kThresholdTol && r.threshold_fallback_mismatch == 0;
        const bool d = r.roundtrip_worst <= kRoundtripTol;
        verdicts.push_back({6, a && b && c && d,
                            "(a) KKT worst=" + fmt(r.kkt_worst) + " over " + std::to_string(r.kkt_count) +
                                " fits, unconverged=" + std::to_string(r.kkt_unconverged) +
                                "; (b) LP gap worst=" + fmt(r.lp_worst) + " over " + std::to_string(r.lp_count) +
                                " columns; (c) threshold diff worst=" + fmt(r.threshold_worst) +
                                " fallback mismatches=" + std::to_string(r.threshold_fallback_mismatch) +
                                "; (d) roundtrip worst=" + fmt(r.roundtrip_worst)});
    }
    if (wants(opt, 7)) {
        verdicts.push_back({7, r.ks_pvalue >= kKsLevel,
                            "KS of " + std::to_string(r.ks_count) + " pooled null T vs N(0,1): D=" +
                                fmt(r.ks_statistic) + " p=" + fmt(r.ks_pvalue) + " >= " + fmt(kKsLevel)});
    }
    if (wants(opt, 8)) {
        verdicts.push_back({8, r.l2_large <= kRateRatio * r.l2_small,
                            "mean l2 error n=2000 " + fmt(r.l2_large) + " <= 0.75 x n=500 " + fmt(r.l2_small) +
                                " (ratio " + fmt(r.l2_large / r.l2_small) + ")"});
    }

    if (wants(opt, 9)) {
        std::cerr << "pass 2 (" << jobs2 << " workers)" << std::endl;
        run_pass(opt, jobs2, opt.out_dir / "run2");
        std::size_t files = 0, differing = 0;
        std::string first_diff;
        for (const auto& entry : fs::directory_iterator(opt.out_dir / "run1")) {
            ++files;
            const fs::path other = opt.out_dir / "run2" / entry.path().filename();
            if (!fs::exists(other) || read_text(entry.path()) != read_text(other)) {
                ++differing;
                if (first_diff.empty()) first_diff = entry.path().filename().string();
            }
        }
        verdicts.push_back({9, differing == 0 && files > 0,
                            std::to_string(files) + " CSV files re-executed with " + std::to_string(jobs2) +
                                " vs " + std::to_string(jobs1) + " workers, " + std::to_string(differing) +
                                " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")")});
    }

    bool all = true;
    std::ofstream summary(opt.out_dir / "verdicts.txt");
    for (const auto& v : verdicts) {
        report(v, std::cout);
        report(v, summary);
        all = all && v.pass;
    }
    std::cerr << "total " << fmt(seconds_since(t0)) << "s" << std::endl;
    return all ? 0 : 1;
}
