// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.
//
// Brute-force reference implementations used to cross-check the library.
// Everything here is written as directly as possible from the defining
// formulas, independent of the production code paths.

#pragma once

#include "chromaforge/image.hpp"
#include "chromaforge/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

using chromaforge::BoolMat;

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b) / (a.norm() * b.norm() + 1e-12);
}

inline double cos_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return 0.5 * (1.0 - cosine(a, b));
}

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            d(i, j) = i == j ? 0.0 : cos_distance(y.row(i), y.row(j));
    return d;
}

struct Histograms {
    Eigen::VectorXd nodes, h_plus, h_minus;
};

// Direct per-pair linear interpolation onto the nodes.
inline Histograms soft_histograms(const Eigen::VectorXd& sims, const std::vector<bool>& dissim,
                                  int r_nodes) {
    Histograms h;
    h.nodes = Eigen::VectorXd::LinSpaced(r_nodes, -1.0, 1.0);
    h.h_plus = Eigen::VectorXd::Zero(r_nodes);
    h.h_minus = Eigen::VectorXd::Zero(r_nodes);
    const double step = 2.0 / (r_nodes - 1);
    double n_plus = 0, n_minus = 0;
    for (Eigen::Index p = 0; p < sims.size(); ++p) {
        double s = std::clamp(sims[p], -1.0, 1.0);
        int r = std::clamp(static_cast<int>(std::floor((s + 1.0) / step)), 0, r_nodes - 2);
        const double w = (s - h.nodes[r]) / step;
        auto& target = dissim[static_cast<std::size_t>(p)] ? h.h_minus : h.h_plus;
        target[r] += 1.0 - w;
        target[r + 1] += w;
        (dissim[static_cast<std::size_t>(p)] ? n_minus : n_plus) += 1.0;
    }
    h.h_plus /= n_plus;
    h.h_minus /= n_minus;
    return h;
}

// Independent cumulative-sum route for the loss.
inline double histogram_loss(const Histograms& h) {
    double loss = 0.0;
    for (Eigen::Index r = 0; r < h.h_minus.size(); ++r) {
        double phi = 0.0;
        for (Eigen::Index q = 0; q <= r; ++q)
            phi += h.h_plus[q];
        loss += h.h_minus[r] * phi;
    }
    return loss;
}

inline std::pair<double, double> moments(const Eigen::MatrixXd& y, const BoolMat& gt) {
    double m1 = 0, m2 = 0, count = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (gt(i, j)) {
                const double s = cosine(y.row(i), y.row(j));
                m1 += s;
                m2 += s * s;
                count += 1;
            }
    return {m1 / count, m2 / count};
}

inline Eigen::Index medoid_index(const Eigen::MatrixXd& y) {
    Eigen::Index best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            sum += cos_distance(y.row(i), y.row(j));
        if (sum < best_sum) {
            best_sum = sum;
            best = i;
        }
    }
    return best;
}

inline double mcc(const BoolMat& pred, const BoolMat& gt) {
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        if (pred(i) && gt(i)) tp++;
        else if (pred(i)) fp++;
        else if (gt(i)) fn++;
        else tn++;
    }
    const double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    return denom == 0.0 ? 0.0 : (tp * tn - fp * fn) / denom;
}

// O(n^2) pair counting with half-credit ties.
inline double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& pos) {
    double wins = 0, pairs = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (!pos[static_cast<std::size_t>(i)])
            continue;
        for (Eigen::Index j = 0; j < scores.size(); ++j) {
            if (pos[static_cast<std::size_t>(j)])
                continue;
            pairs += 1;
            if (scores[i] > scores[j])
                wins += 1;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    if (pairs == 0)
        throw std::invalid_argument("oracle::roc_auc: one class empty");
    return wins / pairs;
}

// Exhaustive threshold sweep: best TPR subject to FAR <= far with the
// positive-if-greater rule.
inline double tpr_at_far(const Eigen::VectorXd& scores, const std::vector<bool>& pos, double far) {
    std::vector<double> thresholds(scores.data(), scores.data() + scores.size());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());

    double n_pos = 0, n_neg = 0;
    for (bool p : pos)
        (p ? n_pos : n_neg) += 1;
    double best = 0.0;
    for (double t : thresholds) {
        double tp = 0, fp = 0;
        for (Eigen::Index i = 0; i < scores.size(); ++i) {
            if (scores[i] > t)
                (pos[static_cast<std::size_t>(i)] ? tp : fp) += 1;
        }
        if (fp / n_neg <= far)
            best = std::max(best, tp / n_pos);
    }
    return best;
}

inline std::pair<double, double> precision_recall(const Eigen::VectorXd& scores,
                                                  const std::vector<bool>& pos, double t,
                                                  bool& prec_defined, bool& rec_defined) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const bool p = scores[i] > t;
        if (p && pos[static_cast<std::size_t>(i)]) tp++;
        else if (p) fp++;
        else if (pos[static_cast<std::size_t>(i)]) fn++;
    }
    prec_defined = tp + fp > 0;
    rec_defined = tp + fn > 0;
    return {prec_defined ? tp / (tp + fp) : 0.0, rec_defined ? tp / (tp + fn) : 0.0};
}

// Exhaustive best-MCC: every distinct heatmap value as a threshold, for the
// map and its inverse, recounting the confusion table from scratch.
inline double best_mcc(const Eigen::ArrayXXd& heat, const BoolMat& gt) {
    double best = -2.0;
    for (int orientation = 0; orientation < 2; ++orientation) {
        Eigen::ArrayXXd h = orientation == 0 ? heat : (1.0 - heat).eval();
        std::vector<double> values(h.data(), h.data() + h.size());
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (double t : values) {
            BoolMat pred = h > t;
            best = std::max(best, mcc(pred, gt));
        }
    }
    return best;
}

inline Eigen::MatrixXd random_embeddings(chromaforge::Rng& rng, int n, int q) {
    Eigen::MatrixXd y(n, q);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) = rng.normal();
    return y;
}

// One-sided Mann-Whitney rank-sum p-value (normal approximation with tie
// correction) for the hypothesis "xs stochastically greater than ys".
inline double rank_sum_p_greater(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double nx = static_cast<double>(xs.size());
    const double ny = static_cast<double>(ys.size());
    std::vector<std::pair<double, int>> all;
    for (double v : xs)
        all.push_back({v, 0});
    for (double v : ys)
        all.push_back({v, 1});
    std::sort(all.begin(), all.end());
    const double n = nx + ny;

    double rank_sum_x = 0.0, tie_term = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first)
            ++j;
        const double midrank = 0.5 * static_cast<double>(i + j - 1) + 1.0;
        const double ties = static_cast<double>(j - i);
        tie_term += ties * (ties * ties - 1.0);
        for (std::size_t k = i; k < j; ++k)
            if (all[k].second == 0)
                rank_sum_x += midrank;
        i = j;
    }
    const double u = rank_sum_x - nx * (nx + 1.0) / 2.0;
    const double mean_u = nx * ny / 2.0;
    const double var_u = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var_u <= 0.0)
        return u > mean_u ? 0.0 : 1.0;
    const double z = (u - mean_u - 0.5) / std::sqrt(var_u);  // continuity-corrected
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace oracle
