// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the chromaforge Project.

#include "chromaforge/felzenszwalb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace chromaforge::segmentation {

namespace {

struct Edge {
    int a, b;
    float weight;
};

class DisjointSet {
public:
    explicit DisjointSet(int n) : parent_(n), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void join(int a, int b) {
        if (size_[a] < size_[b])
            std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
    }

    int size(int root) const { return size_[static_cast<std::size_t>(root)]; }

private:
    std::vector<int> parent_;
    std::vector<int> size_;
};

Eigen::ArrayXXf gaussian_smooth(const Eigen::ArrayXXf& src, double sigma) {
    if (sigma <= 0.0)
        return src;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
        norm += v;
    }
    for (auto& k : kernel)
        k = static_cast<float>(k / norm);

    const Eigen::Index rows = src.rows(), cols = src.cols();
    Eigen::ArrayXXf tmp(rows, cols), out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       src(reflect_index(r + i, rows), c);
            tmp(r, c) = acc;
        }
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       tmp(r, reflect_index(c + i, cols));
            out(r, c) = acc;
        }
    return out;
}

}  // namespace

Eigen::ArrayXXi felzenszwalb_segment(const Image3u8& image, const FelzenszwalbParams& params) {
    const Eigen::Index rows = image.rows(), cols = image.cols();
    const int n = static_cast<int>(rows * cols);

    std::array<Eigen::ArrayXXf, 3> smooth;
    for (int k = 0; k < 3; ++k)
        smooth[static_cast<std::size_t>(k)] =
            gaussian_smooth(image.plane[k].cast<float>() / 255.0f, params.sigma);

    auto vertex = [cols](Eigen::Index r, Eigen::Index c) {
        return static_cast<int>(r * cols + c);
    };
    auto diff = [&](Eigen::Index r0, Eigen::Index c0, Eigen::Index r1, Eigen::Index c1) {
        float acc = 0.0f;
        for (int k = 0; k < 3; ++k) {
            const float d = smooth[static_cast<std::size_t>(k)](r0, c0) -
                            smooth[static_cast<std::size_t>(k)](r1, c1);
            acc += d * d;
        }
        return std::sqrt(acc);
    };

    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(4 * n));
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (c + 1 < cols)
                edges.push_back({vertex(r, c), vertex(r, c + 1), diff(r, c, r, c + 1)});
            if (r + 1 < rows)
                edges.push_back({vertex(r, c), vertex(r + 1, c), diff(r, c, r + 1, c)});
            if (r + 1 < rows && c + 1 < cols)
                edges.push_back({vertex(r, c), vertex(r + 1, c + 1), diff(r, c, r + 1, c + 1)});
            if (r + 1 < rows && c > 0)
                edges.push_back({vertex(r, c), vertex(r + 1, c - 1), diff(r, c, r + 1, c - 1)});
        }

    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        if (x.weight != y.weight)
            return x.weight < y.weight;
        if (x.a != y.a)
            return x.a < y.a;
        return x.b < y.b;
    });

    DisjointSet forest(n);
    std::vector<float> threshold(static_cast<std::size_t>(n),
                                 static_cast<float>(params.scale));
    for (const Edge& e : edges) {
        const int a = forest.find(e.a);
        const int b = forest.find(e.b);
        if (a == b)
            continue;
        if (e.weight <= threshold[static_cast<std::size_t>(a)] &&
            e.weight <= threshold[static_cast<std::size_t>(b)]) {
            forest.join(a, b);
            const int root = forest.find(a);
            threshold[static_cast<std::size_t>(root)] =
                e.weight + static_cast<float>(params.scale / forest.size(root));
        }
    }

    // Merge small components.
    for (const Edge& e : edges) {
        const int a = forest.find(e.a);
        const int b = forest.find(e.b);
        if (a != b && (forest.size(a) < params.min_size || forest.size(b) < params.min_size))
            forest.join(a, b);
    }

    Eigen::ArrayXXi labels(rows, cols);
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    int next_label = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const int root = forest.find(vertex(r, c));
            if (remap[static_cast<std::size_t>(root)] < 0)
                remap[static_cast<std::size_t>(root)] = next_label++;
            labels(r, c) = remap[static_cast<std::size_t>(root)];
        }
    return labels;
}

}  // namespace chromaforge::segmentation
