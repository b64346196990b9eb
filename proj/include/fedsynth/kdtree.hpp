#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsynth/tensor.hpp"

namespace fedsynth {

struct Neighbor {
    double dist2 = 0.0;
    std::size_t index = 0;

    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
        return a.index < b.index;
    }
    bool operator==(const Neighbor&) const = default;
};

/// Exact k-nearest-neighbour index over a fixed point set. Distance ties break
/// toward the lower point index, so results are fully deterministic. The tree
/// references `points`; the caller keeps the tensor alive.
class KdTree {
public:
    explicit KdTree(const Tensor2& points);

    std::size_t size() const { return points_->rows(); }
    std::size_t dim() const { return points_->cols(); }

    /// The k nearest points, sorted ascending by (squared distance, index).
    /// Requires 1 <= k <= size().
    std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k) const;

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    static constexpr std::size_t leaf_size = 16;

    struct Node {
        double split = 0.0;
        std::size_t axis = 0;
        std::size_t left = npos;
        std::size_t right = npos;
        std::size_t begin = 0;  // leaf range into order_ when left == npos
        std::size_t end = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end);
    void search(std::size_t node_id, std::span<const double> query, std::size_t k,
                std::vector<Neighbor>& heap) const;

    const Tensor2* points_ = nullptr;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t root_ = npos;
};

/// Linear-scan reference with the same ordering contract as KdTree::nearest.
std::vector<Neighbor> brute_force_nearest(const Tensor2& points, std::span<const double> query,
                                          std::size_t k);

}  // namespace fedsynth
