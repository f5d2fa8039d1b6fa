// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include <Eigen/Core>

#include <vector>

namespace chromaforge::ranking {

/// Rank-based ROC AUC with ties counted one half: the probability that a
/// random positive outranks a random negative. Both classes must be present.
double roc_auc(const Eigen::VectorXd& scores, const std::vector<bool>& positive);

/// True positive rate at the most permissive decision threshold whose false
/// alarm rate stays conservative (FAR <= far); positives are predicted by
/// score > threshold on the step-function ROC, no interpolation.
double tpr_at_far(const Eigen::VectorXd& scores, const std::vector<bool>& positive,
                  double far = 0.05);

}  // namespace chromaforge::ranking
