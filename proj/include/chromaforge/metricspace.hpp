// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#pragma once

#include "chromaforge/image.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>
#include <vector>

namespace chromaforge::metricspace {

inline constexpr int kEmbeddingDim = 64;
inline constexpr int kHistogramNodes = 26;

/// Guard added to the norm product inside the cosine similarity so that
/// near-zero embeddings stay finite during optimization.
inline constexpr double kNormEpsilon = 1e-12;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Embedding = Vec<double>;

/// Cosine similarity a.b / (|a||b| + eps). Exact zero vectors are rejected.
template <typename T>
T cosine_similarity(const Vec<T>& a, const Vec<T>& b) {
    const T na = a.norm();
    const T nb = b.norm();
    if (na == T(0) || nb == T(0))
        throw std::invalid_argument("cosine_similarity: zero vector");
    return a.dot(b) / (na * nb + T(kNormEpsilon));
}

/// Cosine distance d = (1 - s) / 2 in [0, 1].
template <typename T>
T distance(const Vec<T>& a, const Vec<T>& b) {
    return (T(1) - cosine_similarity(a, b)) / T(2);
}

/// Symmetric zero-diagonal matrix of pairwise cosine distances. Embeddings
/// are the rows of Y.
template <typename T>
Mat<T> pairwise_distances(const Mat<T>& embeddings);

/// Soft histograms of pairwise similarities at R equidistant nodes spanning
/// [-1, 1]. h_plus collects similar pairs, h_minus dissimilar pairs; each
/// histogram is normalized by its own pair count.
struct HistogramPair {
    Eigen::VectorXd nodes;
    Eigen::VectorXd h_plus;
    Eigen::VectorXd h_minus;

    double node_spacing() const { return nodes[1] - nodes[0]; }
};

/// `dissimilar[i]` labels similarities[i]; both classes must be nonempty.
HistogramPair soft_histograms(const Eigen::VectorXd& similarities,
                              const std::vector<bool>& dissimilar,
                              int nodes = kHistogramNodes);

/// Probability-of-reverse estimate: sum_r h_minus[r] * Phi_plus[r] where
/// Phi_plus is the cumulative sum of h_plus. Zero for perfectly separated
/// classes (similar mass at +1), one when fully reversed.
double histogram_loss(const HistogramPair& histograms);

/// Mean and mean square of cosine similarities over dissimilar pairs
/// (row index i0 > i1 with gt true).
std::pair<double, double> moments(const Mat<double>& embeddings, const BoolMat& gt);

/// M1^2 + max(0, M2 - 1/q): zero at the moments of a uniform distribution
/// on the unit sphere in R^q.
double orthogonal_regularizer(double m1, double m2, int q = kEmbeddingDim);

/// Histogram loss plus eta times the orthogonal regularizer.
double total_loss(const Mat<double>& embeddings, const BoolMat& gt, double eta = 0.5);

struct LossWithGrad {
    double loss = 0.0;
    Mat<double> grad;  // d loss / d embeddings, same shape as the input
};

/// total_loss together with its analytic gradient. Subgradient conventions:
/// inside a histogram bin the interpolation formula applies verbatim, and
/// the regularizer hinge has derivative zero at M2 == 1/q.
LossWithGrad total_loss_with_grad(const Mat<double>& embeddings, const BoolMat& gt,
                                  double eta = 0.5);

/// Similarities and labels for all pairs i0 > i1 of a batch.
struct PairSet {
    Eigen::VectorXd similarities;
    std::vector<bool> dissimilar;
};

PairSet pair_similarities(const Mat<double>& embeddings, const BoolMat& gt);

}  // namespace chromaforge::metricspace
