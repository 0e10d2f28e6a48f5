#include "dirfdr/families.hpp"

#include <cmath>
#include <string>

#include "dirfdr/errors.hpp"

namespace dirfdr {

namespace {

// exp(t) overflows beyond ~709.78; keep a margin so b(t) and its products stay finite.
constexpr double kPoissonMaxEta = 700.0;

void require_domain(GlmFamily family, double t) {
    if (!in_domain(family, t)) {
        throw DomainError("linear predictor " + std::to_string(t) + " outside the domain of the " +
                          std::string(family_name(family)) + " family");
    }
}

double expit(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

void check_beta(const Dataset& data, const Eigen::VectorXd& beta) {
    if (beta.size() != data.p()) {
        throw DataError("coefficient vector has length " + std::to_string(beta.size()) +
                        ", expected " + std::to_string(data.p()));
    }
}

Eigen::VectorXd linear_predictor(const Dataset& data, const Eigen::VectorXd& beta,
                                 GlmFamily family) {
    check_beta(data, beta);
    Eigen::VectorXd eta = data.design() * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) require_domain(family, eta[i]);
    return eta;
}

}  // namespace

std::string_view family_name(GlmFamily family) {
    switch (family) {
        case GlmFamily::Linear: return "linear";
        case GlmFamily::Logistic: return "logistic";
        case GlmFamily::Poisson: return "poisson";
        case GlmFamily::Exponential: return "exponential";
    }
    return "unknown";
}

std::optional<GlmFamily> parse_family(std::string_view name) {
    if (name == "linear") return GlmFamily::Linear;
    if (name == "logistic") return GlmFamily::Logistic;
    if (name == "poisson") return GlmFamily::Poisson;
    if (name == "exponential") return GlmFamily::Exponential;
    return std::nullopt;
}

bool in_domain(GlmFamily family, double t) {
    if (!std::isfinite(t)) return false;
    switch (family) {
        case GlmFamily::Linear:
        case GlmFamily::Logistic: return true;
        case GlmFamily::Poisson: return t <= kPoissonMaxEta;
        case GlmFamily::Exponential: return t < 0.0;
    }
    return false;
}

double family_b(GlmFamily family, double t) {
    require_domain(family, t);
    switch (family) {
        case GlmFamily::Linear: return 0.5 * t * t;
        case GlmFamily::Logistic:
            // log(1 + e^t) = max(t, 0) + log1p(e^{-|t|})
            return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
        case GlmFamily::Poisson: return std::exp(t);
        case GlmFamily::Exponential: return -std::log(-t);
    }
    return 0.0;
}

double family_bdot(GlmFamily family, double t) {
    require_domain(family, t);
    switch (family) {
        case GlmFamily::Linear: return t;
        case GlmFamily::Logistic: return expit(t);
        case GlmFamily::Poisson: return std::exp(t);
        case GlmFamily::Exponential: return -1.0 / t;
    }
    return 0.0;
}

double family_bddot(GlmFamily family, double t) {
    require_domain(family, t);
    switch (family) {
        case GlmFamily::Linear: return 1.0;
        case GlmFamily::Logistic: {
            // e^{-|t|} / (1 + e^{-|t|})^2 is symmetric and never cancels.
            const double e = std::exp(-std::abs(t));
            return e / ((1.0 + e) * (1.0 + e));
        }
        case GlmFamily::Poisson: return std::exp(t);
        case GlmFamily::Exponential: return 1.0 / (t * t);
    }
    return 0.0;
}

FamilyValues family_eval(GlmFamily family, double t) {
    return {family_b(family, t), family_bdot(family, t), family_bddot(family, t)};
}

Dataset::Dataset(Eigen::MatrixXd design, Eigen::VectorXd response)
    : design_(std::move(design)), response_(std::move(response)) {
    if (response_.size() != design_.rows()) {
        throw DataError("response has " + std::to_string(response_.size()) +
                        " rows but design has " + std::to_string(design_.rows()));
    }
    if (!design_.allFinite()) throw DataError("design matrix contains non-finite values");
    if (!response_.allFinite()) throw DataError("response contains non-finite values");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), p());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = rows[k];
        if (i < 0 || i >= n()) throw DataError("row index out of range in Dataset::subset");
        x.row(static_cast<Eigen::Index>(k)) = design_.row(i);
        y[static_cast<Eigen::Index>(k)] = response_[i];
    }
    return Dataset(std::move(x), std::move(y));
}

void validate_response(const Dataset& data, GlmFamily family) {
    const auto& y = data.response();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double v = y[i];
        bool ok = true;
        switch (family) {
            case GlmFamily::Linear: break;
            case GlmFamily::Logistic: ok = (v == 0.0 || v == 1.0); break;
            case GlmFamily::Poisson: ok = (v >= 0.0 && v == std::floor(v)); break;
            case GlmFamily::Exponential: ok = (v > 0.0); break;
        }
        if (!ok) {
            throw DataError("response row " + std::to_string(i + 1) + " value " +
                            std::to_string(v) + " is outside the support of the " +
                            std::string(family_name(family)) + " family");
        }
    }
}

double log_likelihood(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family) {
    const Eigen::VectorXd eta = linear_predictor(data, beta, family);
    const auto& y = data.response();
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        total += y[i] * eta[i] - family_b(family, eta[i]);
    }
    return total / static_cast<double>(data.n());
}

Eigen::VectorXd score(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family) {
    const Eigen::VectorXd eta = linear_predictor(data, beta, family);
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        resid[i] = data.response()[i] - family_bdot(family, eta[i]);
    }
    return data.design().transpose() * resid / static_cast<double>(data.n());
}

Eigen::MatrixXd neg_hessian(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family) {
    const Eigen::VectorXd eta = linear_predictor(data, beta, family);
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) w[i] = std::sqrt(family_bddot(family, eta[i]));
    const Eigen::MatrixXd wx = w.asDiagonal() * data.design();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(data.p(), data.p());
    h.selfadjointView<Eigen::Lower>().rankUpdate(wx.transpose(), 1.0 / static_cast<double>(data.n()));
    // Mirror the lower triangle so the result is symmetric to exact equality.
    return h.selfadjointView<Eigen::Lower>();
}

}  // namespace dirfdr
