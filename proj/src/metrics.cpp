#include "dirfdr/metrics.hpp"

#include <algorithm>
#include <string>

#include "dirfdr/errors.hpp"

namespace dirfdr {

namespace {

int sign_of(double v) {
    return (v > 0.0) - (v < 0.0);
}

void check(const SelectionResult& sel, const GroundTruth& truth) {
    if (sel.selected.size() != sel.signs.size()) {
        throw DataError("selection has mismatched index and sign lists");
    }
    for (auto j : sel.selected) {
        if (j < 0 || j >= truth.beta_true.size()) {
            throw DataError("selected index " + std::to_string(j) + " outside the ground truth");
        }
    }
}

std::size_t correct_count(const SelectionResult& sel, const GroundTruth& truth) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < sel.selected.size(); ++k) {
        if (sel.signs[k] == truth.signs_true[static_cast<std::size_t>(sel.selected[k])]) ++count;
    }
    return count;
}

}  // namespace

GroundTruth::GroundTruth(Eigen::VectorXd beta) : beta_true(std::move(beta)) {
    signs_true.resize(static_cast<std::size_t>(beta_true.size()));
    for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
        signs_true[static_cast<std::size_t>(j)] = sign_of(beta_true[j]);
        if (beta_true[j] != 0.0) support.push_back(j);
    }
}

double directional_fdp(const SelectionResult& sel, const GroundTruth& truth) {
    check(sel, truth);
    const auto wrong = sel.selected.size() - correct_count(sel, truth);
    return static_cast<double>(wrong) / static_cast<double>(std::max<std::size_t>(sel.selected.size(), 1));
}

std::size_t directional_fdv_count(const SelectionResult& sel, const GroundTruth& truth) {
    check(sel, truth);
    return sel.selected.size() - correct_count(sel, truth);
}

double directional_power(const SelectionResult& sel, const GroundTruth& truth) {
    check(sel, truth);
    return static_cast<double>(correct_count(sel, truth)) /
           static_cast<double>(std::max<std::size_t>(truth.s0(), 1));
}

}  // namespace dirfdr
