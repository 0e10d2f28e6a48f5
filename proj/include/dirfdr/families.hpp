#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>

namespace dirfdr {

enum class GlmFamily { Linear, Logistic, Poisson, Exponential };

std::string_view family_name(GlmFamily family);
std::optional<GlmFamily> parse_family(std::string_view name);

/// Log-partition b(t) and its first two derivatives.
struct FamilyValues {
    double b;
    double bdot;
    double bddot;
};

FamilyValues family_eval(GlmFamily family, double t);

// Individual evaluators; same domain rules as family_eval.
double family_b(GlmFamily family, double t);
double family_bdot(GlmFamily family, double t);
double family_bddot(GlmFamily family, double t);

/// True when t lies in the natural domain of b for this family.
bool in_domain(GlmFamily family, double t);

/// Design matrix and response. Immutable once constructed; all entries finite.
class Dataset {
public:
    Dataset(Eigen::MatrixXd design, Eigen::VectorXd response);

    const Eigen::MatrixXd& design() const { return design_; }
    const Eigen::VectorXd& response() const { return response_; }
    Eigen::Index n() const { return design_.rows(); }
    Eigen::Index p() const { return design_.cols(); }

    /// Rows selected by index, in the given order.
    Dataset subset(const std::vector<Eigen::Index>& rows) const;

private:
    Eigen::MatrixXd design_;
    Eigen::VectorXd response_;
};

/// Throws DataError when the response is outside the support of the family
/// (Logistic: {0,1}; Poisson: nonnegative integers; Exponential: positive).
void validate_response(const Dataset& data, GlmFamily family);

/// (1/n) sum_i [y_i x_i'beta - b(x_i'beta)].
double log_likelihood(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family);

/// Gradient of log_likelihood: (1/n) sum_i x_i [y_i - bdot(x_i'beta)].
Eigen::VectorXd score(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family);

/// Negative Hessian of log_likelihood: (1/n) sum_i x_i x_i' bddot(x_i'beta).
Eigen::MatrixXd neg_hessian(const Dataset& data, const Eigen::VectorXd& beta, GlmFamily family);

}  // namespace dirfdr
