// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/ranking.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace chromaforge::ranking {

double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& positive) {
    if (static_cast<std::size_t>(scores.size()) != positive.size())
        throw std::invalid_argument("roc_auc: label count mismatch");
    const Eigen::Index n = scores.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

    // Midranks over tie groups, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    double n_pos = 0.0, n_neg = 0.0;
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j < n && scores[order[j]] == scores[order[i]])
            ++j;
        const double midrank = 0.5 * static_cast<double>(i + j - 1) + 1.0;  // 1-based
        for (Eigen::Index k = i; k < j; ++k) {
            if (positive[static_cast<std::size_t>(order[k])]) {
                rank_sum_pos += midrank;
                n_pos += 1.0;
            } else {
                n_neg += 1.0;
            }
        }
        i = j;
    }
    if (n_pos == 0.0 || n_neg == 0.0)
        throw std::invalid_argument("roc_auc: both classes must be present");
    const double u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

double tpr_at_far(const Eigen::VectorXd& scores, const std::vector<bool>& positive, double far) {
    if (static_cast<std::size_t>(scores.size()) != positive.size())
        throw std::invalid_argument("tpr_at_far: label count mismatch");
    const Eigen::Index n = scores.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] > scores[b]; });

    double n_pos = 0.0, n_neg = 0.0;
    for (bool p : positive)
        (p ? n_pos : n_neg) += 1.0;
    if (n_pos == 0.0 || n_neg == 0.0)
        throw std::invalid_argument("tpr_at_far: both classes must be present");

    // Walk thresholds from strict (+inf) downward; each distinct score value
    // is one candidate threshold (prediction: score > threshold).
    double best_tpr = 0.0;
    double tp = 0.0, fp = 0.0;
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j < n && scores[order[j]] == scores[order[i]])
            ++j;
        for (Eigen::Index k = i; k < j; ++k)
            (positive[static_cast<std::size_t>(order[k])] ? tp : fp) += 1.0;
        // Threshold just below this score group: everything seen so far is
        // classified positive.
        if (fp / n_neg <= far)
            best_tpr = tp / n_pos;
        i = j;
    }
    return best_tpr;
}

}  // namespace chromaforge::ranking
