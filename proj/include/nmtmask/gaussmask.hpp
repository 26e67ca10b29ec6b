#pragma once

// The Gaussian positional mask that stands in for attention, plus the
// fitting routine that checks how Gaussian the learned attention rows are.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/election.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

inline Vec gaussian_weights(int p, int j, double sigma) {
    if (sigma <= 0.0) throw DomainError("gaussian_weights: sigma must be positive");
    if (j < 0 || j >= p) throw DomainError("gaussian_weights: center out of range");
    Vec w(p);
    for (int i = 0; i < p; ++i) {
        double d = static_cast<double>(i - j);
        w(i) = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return w;
}

// Default mask width: half the log2 window radius, floored at 0.5, so ~95%
// of the curve's mass falls inside the +-window_radius(p,2) band.
inline double default_sigma(int p) {
    return std::max(0.5, window_radius(p, 2) / 2.0);
}

struct MaskedStates {
    std::vector<Vec> masked;  // w_i * h_i
    Vec context;              // sum of masked states
};

inline MaskedStates apply_mask(const EncoderStates& enc, const Vec& weights) {
    if (static_cast<size_t>(weights.size()) != enc.states.size())
        throw DomainError("apply_mask: weight/state length mismatch");
    MaskedStates out;
    out.masked.reserve(enc.states.size());
    out.context = Vec::Zero(enc.states.empty() ? 0 : enc.states[0].size());
    for (size_t i = 0; i < enc.states.size(); ++i) {
        out.masked.push_back(weights(static_cast<Eigen::Index>(i)) * enc.states[i]);
        out.context += out.masked.back();
    }
    return out;
}

struct GaussianFit {
    double mu = 0.0;
    double sigma = 0.0;
    double rmse = 0.0;
};

inline constexpr double kGaussianRmseThreshold = 0.15;  // "Gaussian-like" cutoff

// Fit exp(-(i-mu)^2 / 2 sigma^2) to a max-normalized row. A Gaussian is an
// exact parabola in log space, so a weighted least-squares parabola through
// (i, ln w_i) recovers (mu, sigma) exactly even when the row truncates at the
// sentence boundary — where plain weighted moments understate sigma badly.
// Rows with too few usable points (spikes) or an upward-curving log profile
// (anti-Gaussian) fall back to weighted moments with the 0.25 sigma floor.
inline GaussianFit fit_gaussian(const Vec& row) {
    const auto p = row.size();
    if (p < 3) throw DomainError("fit_gaussian: need at least 3 entries");
    double mass = row.sum();
    if (!(mass > 0.0) || row.maxCoeff() <= 0.0)
        throw DomainError("fit_gaussian: degenerate (all-zero) row");

    GaussianFit fit;
    bool solved = false;
    std::vector<Eigen::Index> usable;
    for (Eigen::Index i = 0; i < p; ++i)
        if (row(i) > 1e-12) usable.push_back(i);

    if (usable.size() >= 3) {
        Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (Eigen::Index i : usable) {
            double x = static_cast<double>(i), wi = row(i), ln = std::log(row(i));
            Eigen::Vector3d phi(1.0, x, x * x);
            A += wi * phi * phi.transpose();
            rhs += wi * ln * phi;
        }
        Eigen::Vector3d c = A.ldlt().solve(rhs);
        if (c(2) < -1e-12 && std::isfinite(c(0)) && std::isfinite(c(1)) &&
            std::isfinite(c(2))) {
            fit.mu = -c(1) / (2.0 * c(2));
            fit.sigma = std::max(std::sqrt(-1.0 / (2.0 * c(2))), 0.25);
            solved = true;
        }
    }
    if (!solved) {
        double mu = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) mu += row(i) * static_cast<double>(i);
        mu /= mass;
        double var = 0.0;
        for (Eigen::Index i = 0; i < p; ++i) {
            double d = static_cast<double>(i) - mu;
            var += row(i) * d * d;
        }
        var /= mass;
        fit.mu = mu;
        fit.sigma = std::max(std::sqrt(var), 0.25);
    }

    double se = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        double d = static_cast<double>(i) - fit.mu;
        double model = std::exp(-d * d / (2.0 * fit.sigma * fit.sigma));
        se += (row(i) - model) * (row(i) - model);
    }
    fit.rmse = std::sqrt(se / static_cast<double>(p));
    return fit;
}

}  // namespace nmtmask
