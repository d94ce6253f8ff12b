#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paee/csv.hpp"
#include "paee/error.hpp"

namespace paee::linear {

/// Fitted least-squares regression: one weight per regressor plus intercept.
struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
    bool rank_deficient = false;  // set when the design needed a minimum-norm solve
};

/// Ordinary least squares with an internally appended intercept column,
/// solved by complete orthogonal decomposition. Rank-deficient designs get
/// the minimum-norm solution and are flagged rather than rejected.
inline LinearModel fit_ols(const std::vector<double>& x_rowmajor, std::size_t n, std::size_t p,
                           const std::vector<double>& y) {
    if (n <= p) throw Error(errc::too_few_samples, "need more samples than regressors");
    if (x_rowmajor.size() != n * p || y.size() != n)
        throw Error(errc::dimension_mismatch, "design matrix shape mismatch");

    Eigen::MatrixXd design(n, p + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x_rowmajor[r * p + c];
        design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = 1.0;
    }
    Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(n));

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd beta = cod.solve(target);

    LinearModel m;
    m.weights.assign(beta.data(), beta.data() + p);
    m.intercept = beta(static_cast<Eigen::Index>(p));
    m.rank_deficient = cod.rank() < static_cast<Eigen::Index>(p + 1);
    return m;
}

inline double predict_one(const LinearModel& m, const double* features) {
    double s = m.intercept;
    for (std::size_t c = 0; c < m.weights.size(); ++c) s += m.weights[c] * features[c];
    return s;
}

/// Row-wise X w + d.
inline std::vector<double> predict_linear(const LinearModel& m, const std::vector<double>& x_rowmajor,
                                          std::size_t n, std::size_t p) {
    if (p != m.weights.size())
        throw Error(errc::dimension_mismatch, "feature count does not match fitted weights");
    if (x_rowmajor.size() != n * p)
        throw Error(errc::dimension_mismatch, "design matrix shape mismatch");
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) out[r] = predict_one(m, x_rowmajor.data() + r * p);
    return out;
}

// Artifact format: line-oriented text, doubles printed with %.17g so a
// reload reproduces the exact bit pattern.
inline std::string to_text(const LinearModel& m) {
    std::string out = "paee-model v1\nkind linear\n";
    out += "rank_deficient " + std::to_string(m.rank_deficient ? 1 : 0) + "\n";
    out += "weights " + std::to_string(m.weights.size()) + "\n";
    for (double w : m.weights) out += csv::format_full(w) + "\n";
    out += "intercept " + csv::format_full(m.intercept) + "\n";
    return out;
}

inline LinearModel linear_from_text(const std::string& text) {
    const auto lines = csv::split_lines(text);
    if (lines.size() < 4 || lines[0] != "paee-model v1" || lines[1] != "kind linear")
        throw Error(errc::malformed_row, "not a linear model artifact");
    LinearModel m;
    std::size_t i = 2;
    auto field = [&](const char* key) -> std::string {
        const std::string_view line = lines.at(i++);
        const std::size_t sp = line.find(' ');
        if (sp == std::string_view::npos || line.substr(0, sp) != key)
            throw Error(errc::malformed_row, std::string("expected field ") + key);
        return std::string(line.substr(sp + 1));
    };
    m.rank_deficient = field("rank_deficient") == "1";
    const std::size_t nw = std::stoul(field("weights"));
    m.weights.resize(nw);
    for (std::size_t k = 0; k < nw; ++k) m.weights[k] = csv::parse_double(lines.at(i++), i);
    m.intercept = csv::parse_double(field("intercept"), i);
    return m;
}

} // namespace paee::linear
