// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/metricspace.hpp"

namespace chromaforge::metricspace {

namespace {

// Node index r with t_r <= s <= t_{r+1}, clamped into [0, R-2].
inline int bin_of(double s, double spacing, int nodes) {
    int r = static_cast<int>(std::floor((s + 1.0) / spacing));
    return std::min(std::max(r, 0), nodes - 2);
}

void check_gt(const Mat<double>& embeddings, const BoolMat& gt) {
    if (gt.rows() != embeddings.rows() || gt.cols() != embeddings.rows())
        throw std::invalid_argument("ground-truth matrix shape does not match batch");
}

}  // namespace

template <typename T>
Mat<T> pairwise_distances(const Mat<T>& embeddings) {
    const Eigen::Index n = embeddings.rows();
    Mat<T> d = Mat<T>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec<T> yi = embeddings.row(i);
        for (Eigen::Index j = 0; j < i; ++j) {
            const Vec<T> yj = embeddings.row(j);
            const T dij = distance<T>(yi, yj);
            d(i, j) = dij;
            d(j, i) = dij;
        }
    }
    return d;
}

template Mat<double> pairwise_distances(const Mat<double>&);
template Mat<float> pairwise_distances(const Mat<float>&);

HistogramPair soft_histograms(const Eigen::VectorXd& similarities,
                              const std::vector<bool>& dissimilar, int nodes) {
    if (nodes < 2)
        throw std::invalid_argument("soft_histograms: need at least two nodes");
    if (static_cast<std::size_t>(similarities.size()) != dissimilar.size())
        throw std::invalid_argument("soft_histograms: label count mismatch");

    HistogramPair out;
    out.nodes = Eigen::VectorXd::LinSpaced(nodes, -1.0, 1.0);
    out.h_plus = Eigen::VectorXd::Zero(nodes);
    out.h_minus = Eigen::VectorXd::Zero(nodes);
    const double spacing = 2.0 / (nodes - 1);

    Eigen::Index n_plus = 0, n_minus = 0;
    for (Eigen::Index i = 0; i < similarities.size(); ++i) {
        const double s = std::min(1.0, std::max(-1.0, similarities[i]));
        const int r = bin_of(s, spacing, nodes);
        const double w_hi = (s - out.nodes[r]) / spacing;
        auto& h = dissimilar[static_cast<std::size_t>(i)] ? out.h_minus : out.h_plus;
        h[r] += 1.0 - w_hi;
        h[r + 1] += w_hi;
        (dissimilar[static_cast<std::size_t>(i)] ? n_minus : n_plus) += 1;
    }
    if (n_plus == 0 || n_minus == 0)
        throw std::invalid_argument("soft_histograms: both pair classes must be present");
    out.h_plus /= static_cast<double>(n_plus);
    out.h_minus /= static_cast<double>(n_minus);
    return out;
}

double histogram_loss(const HistogramPair& histograms) {
    double loss = 0.0;
    double phi = 0.0;
    for (Eigen::Index r = 0; r < histograms.h_plus.size(); ++r) {
        phi += histograms.h_plus[r];
        loss += histograms.h_minus[r] * phi;
    }
    return loss;
}

PairSet pair_similarities(const Mat<double>& embeddings, const BoolMat& gt) {
    check_gt(embeddings, gt);
    const Eigen::Index n = embeddings.rows();
    PairSet set;
    set.similarities.resize(n * (n - 1) / 2);
    set.dissimilar.reserve(static_cast<std::size_t>(set.similarities.size()));
    Eigen::Index idx = 0;
    for (Eigen::Index i0 = 0; i0 < n; ++i0) {
        const Embedding yi = embeddings.row(i0);
        for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
            const Embedding yj = embeddings.row(i1);
            set.similarities[idx++] = cosine_similarity<double>(yi, yj);
            set.dissimilar.push_back(gt(i0, i1));
        }
    }
    return set;
}

std::pair<double, double> moments(const Mat<double>& embeddings, const BoolMat& gt) {
    check_gt(embeddings, gt);
    const Eigen::Index n = embeddings.rows();
    double m1 = 0.0, m2 = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i0 = 0; i0 < n; ++i0) {
        const Embedding yi = embeddings.row(i0);
        for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
            if (!gt(i0, i1))
                continue;
            const double s = cosine_similarity<double>(yi, embeddings.row(i1));
            m1 += s;
            m2 += s * s;
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("moments: no dissimilar pairs");
    return {m1 / static_cast<double>(count), m2 / static_cast<double>(count)};
}

double orthogonal_regularizer(double m1, double m2, int q) {
    return m1 * m1 + std::max(0.0, m2 - 1.0 / static_cast<double>(q));
}

double total_loss(const Mat<double>& embeddings, const BoolMat& gt, double eta) {
    const PairSet pairs = pair_similarities(embeddings, gt);
    const double hist = histogram_loss(soft_histograms(pairs.similarities, pairs.dissimilar));
    const auto [m1, m2] = moments(embeddings, gt);
    return hist + eta * orthogonal_regularizer(m1, m2, static_cast<int>(embeddings.cols()));
}

LossWithGrad total_loss_with_grad(const Mat<double>& embeddings, const BoolMat& gt, double eta) {
    check_gt(embeddings, gt);
    const Eigen::Index n = embeddings.rows();
    const int q = static_cast<int>(embeddings.cols());
    const int nodes = kHistogramNodes;
    const double spacing = 2.0 / (nodes - 1);

    // Pass 1: similarities, class counts, histograms, moments.
    Mat<double> sim = Mat<double>::Zero(n, n);
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        norms[i] = embeddings.row(i).norm();
        if (norms[i] == 0.0)
            throw std::invalid_argument("total_loss_with_grad: zero embedding");
    }
    Eigen::VectorXd h_plus = Eigen::VectorXd::Zero(nodes);
    Eigen::VectorXd h_minus = Eigen::VectorXd::Zero(nodes);
    double n_plus = 0.0, n_minus = 0.0;
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index i0 = 0; i0 < n; ++i0) {
        for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
            const double s = embeddings.row(i0).dot(embeddings.row(i1)) /
                             (norms[i0] * norms[i1] + kNormEpsilon);
            sim(i0, i1) = s;
            const double sc = std::min(1.0, std::max(-1.0, s));
            const int r = bin_of(sc, spacing, nodes);
            const double w_hi = (sc - (-1.0 + r * spacing)) / spacing;
            if (gt(i0, i1)) {
                h_minus[r] += 1.0 - w_hi;
                h_minus[r + 1] += w_hi;
                n_minus += 1.0;
                m1 += s;
                m2 += s * s;
            } else {
                h_plus[r] += 1.0 - w_hi;
                h_plus[r + 1] += w_hi;
                n_plus += 1.0;
            }
        }
    }
    if (n_plus == 0.0 || n_minus == 0.0)
        throw std::invalid_argument("total_loss_with_grad: both pair classes must be present");
    h_plus /= n_plus;
    h_minus /= n_minus;
    m1 /= n_minus;
    m2 /= n_minus;

    // Loss pieces and the histogram adjoints: Phi is the cumulative sum of
    // h_plus, Psi the suffix sum of h_minus.
    Eigen::VectorXd phi(nodes), psi(nodes);
    double acc = 0.0;
    for (int r = 0; r < nodes; ++r) {
        acc += h_plus[r];
        phi[r] = acc;
    }
    acc = 0.0;
    for (int r = nodes - 1; r >= 0; --r) {
        acc += h_minus[r];
        psi[r] = acc;
    }
    double hist = 0.0;
    for (int r = 0; r < nodes; ++r)
        hist += h_minus[r] * phi[r];

    const double inv_q = 1.0 / static_cast<double>(q);
    const bool hinge_active = m2 > inv_q;
    const double loss = hist + eta * (m1 * m1 + std::max(0.0, m2 - inv_q));

    // Pass 2: dL/ds per pair, chained through ds/dy.
    Mat<double> grad = Mat<double>::Zero(n, q);
    for (Eigen::Index i0 = 0; i0 < n; ++i0) {
        for (Eigen::Index i1 = 0; i1 < i0; ++i1) {
            const double s = sim(i0, i1);
            const double sc = std::min(1.0, std::max(-1.0, s));
            const int r = bin_of(sc, spacing, nodes);
            double dl_ds;
            if (gt(i0, i1)) {
                dl_ds = (phi[r + 1] - phi[r]) / (n_minus * spacing);
                dl_ds += eta * (2.0 * m1 / n_minus);
                if (hinge_active)
                    dl_ds += eta * (2.0 * s / n_minus);
            } else {
                dl_ds = (psi[r + 1] - psi[r]) / (n_plus * spacing);
            }
            if (dl_ds == 0.0)
                continue;
            const double denom = norms[i0] * norms[i1] + kNormEpsilon;
            const Eigen::RowVectorXd yi = embeddings.row(i0);
            const Eigen::RowVectorXd yj = embeddings.row(i1);
            const double p = yi.dot(yj);
            // ds/dyi = yj/denom - p * |yj| * yi / (|yi| * denom^2)
            grad.row(i0) += dl_ds * (yj / denom - (p * norms[i1] / (norms[i0] * denom * denom)) * yi);
            grad.row(i1) += dl_ds * (yi / denom - (p * norms[i0] / (norms[i1] * denom * denom)) * yj);
        }
    }

    LossWithGrad out;
    out.loss = loss;
    out.grad = std::move(grad);
    return out;
}

}  // namespace chromaforge::metricspace
