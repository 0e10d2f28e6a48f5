#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirfdr/families.hpp"
#include "dirfdr/inference.hpp"
#include "dirfdr/lasso.hpp"
#include "dirfdr/metrics.hpp"
#include "dirfdr/precision.hpp"
#include "dirfdr/rng.hpp"

namespace dirfdr {

enum class TestMode { Fdr, Fdv };

struct SimConfig {
    GlmFamily family = GlmFamily::Logistic;
    std::size_t n = 400;
    std::size_t p = 200;
    std::size_t s0 = 20;
    double signal = 0.6;
    double design_low = -1.0;
    double design_high = 1.0;
    TestMode mode = TestMode::Fdr;
    double alpha = 0.2;  // FDR level (mode Fdr)
    double u = 1.0;      // tolerated false discoveries / FWER level (mode Fdv)
    std::size_t trials = 100;
    std::uint64_t master_seed = 0;
    std::size_t cv_folds_lasso = 5;
    std::size_t lasso_grid_size = 100;
    std::vector<double> clime_grid = default_clime_grid();
    /// Two independent samples sharing the same coefficients, tested with GMT2.
    bool two_sample = false;

    /// Throws DomainError on inconsistent settings.
    void validate() const;
};

/// JSON object with snake_case keys; unknown keys are rejected.
SimConfig sim_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& config);

/// Replaces sizes with the large logistic design (p=600, s0=50, A=0.5, U(-1,1), 100 trials).
SimConfig full_scale(SimConfig config);

/// n x p entries i.i.d. uniform on [low, high], drawn in row-major order.
Eigen::MatrixXd generate_design(std::size_t n, std::size_t p, double low, double high, Philox& stream);

/// ceil(s0/2) entries +A, then floor(s0/2) entries -A, then zeros.
GroundTruth generate_coefficients(std::size_t p, std::size_t s0, double signal);

/// Logistic: Bernoulli(expit(x'b)); Poisson: Poisson(exp(x'b)); Linear: N(x'b, 1).
Eigen::VectorXd sample_responses(const Eigen::MatrixXd& design, const GroundTruth& truth,
                                 GlmFamily family, Philox& stream);

/// Lasso (K-fold CV), CLIME (2-fold CV) and debiasing on one dataset.
struct SampleFit {
    CvResult lasso_cv;
    LassoFit lasso;
    ClimeCvResult clime;
    DebiasedFit debiased;
};

SampleFit fit_sample(const Dataset& data, GlmFamily family, std::size_t lasso_folds,
                     std::size_t lasso_grid_size, const std::vector<double>& clime_grid,
                     std::uint64_t lasso_seed, std::uint64_t clime_seed, unsigned jobs = 1);

/// Everything a trial produces before a selection rule is applied.
struct TrialStatistics {
    std::size_t trial_index = 0;
    std::uint64_t seed = 0;
    GroundTruth truth{Eigen::VectorXd()};
    Eigen::VectorXd statistics;  // T (one sample) or M (two samples)
    Eigen::VectorXd beta_hat;    // first sample
    double lasso_lambda = 0.0;
    double clime_lambda = 0.0;
    std::vector<std::string> warnings;
};

TrialStatistics compute_trial_statistics(const SimConfig& config, std::size_t trial_index);

struct TrialResult {
    std::size_t trial_index = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double fdp_d = 0.0;
    double power_d = 0.0;
    std::size_t fdv_count = 0;
    double threshold = 0.0;
    bool fallback_used = false;
    std::size_t rejections = 0;
    double lasso_lambda = 0.0;
    double clime_lambda = 0.0;
    double l2_error = 0.0;
};

/// Applies the configured selection rule and evaluates it against the truth.
TrialResult score_trial(const SimConfig& config, const TrialStatistics& stats);

/// Never throws for stage failures: the result is marked failed instead.
TrialResult run_trial(const SimConfig& config, std::size_t trial_index);

struct ExperimentSummary {
    double mean_fdr_d = 0.0;
    double se_fdr_d = 0.0;
    double mean_power_d = 0.0;
    double se_power_d = 0.0;
    double mean_fdv = 0.0;
    double se_fdv = 0.0;
    double mean_rejections = 0.0;
    std::size_t trials_completed = 0;
    std::size_t trials_failed = 0;
};

/// Aggregates in trial-index order. SE = sample SD / sqrt(completed), 0 for a
/// single trial. Throws NumericalError when more than 20% of trials failed.
ExperimentSummary summarize(const std::vector<TrialResult>& trials);

struct Experiment {
    std::vector<TrialResult> trials;
    ExperimentSummary summary;
};

Experiment run_experiment(const SimConfig& config, unsigned jobs = 0);

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialResult>& trials);
void write_summary_csv(const std::filesystem::path& path, const SimConfig& config,
                       const ExperimentSummary& summary);

}  // namespace dirfdr
