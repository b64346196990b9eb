#include "fedsynth/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedsynth {
namespace {

// Max-heap on (dist2, index) keeps the current worst candidate at the front.
void heap_push(std::vector<Neighbor>& heap, Neighbor n) {
    heap.push_back(n);
    std::push_heap(heap.begin(), heap.end());
}

void heap_replace_top(std::vector<Neighbor>& heap, Neighbor n) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = n;
    std::push_heap(heap.begin(), heap.end());
}

}  // namespace

KdTree::KdTree(const Tensor2& points) : points_(&points) {
    if (points.rows() == 0) throw std::invalid_argument("KdTree: empty point set");
    if (points.cols() == 0) throw std::invalid_argument("KdTree: zero-dimensional points");
    if (!points.all_finite()) throw std::invalid_argument("KdTree: non-finite coordinate");
    order_.resize(points.rows());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * points.rows() / leaf_size + 2);
    root_ = build(0, order_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    if (end - begin <= leaf_size) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    // Split on the axis with the widest spread over this range.
    const std::size_t d = dim();
    std::size_t axis = 0;
    double best_spread = -1.0;
    for (std::size_t a = 0; a < d; ++a) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = begin; i < end; ++i) {
            const double v = points_->at(order_[i], a);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            axis = a;
        }
    }
    if (best_spread == 0.0) {
        // All points in the range coincide; keep them as one leaf.
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         const double va = points_->at(a, axis);
                         const double vb = points_->at(b, axis);
                         if (va != vb) return va < vb;
                         return a < b;
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = points_->at(order_[mid], axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(std::size_t node_id, std::span<const double> query, std::size_t k,
                    std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.left == npos) {
        const std::size_t d = dim();
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = order_[i];
            auto point = points_->row(idx);
            double dist2 = 0.0;
            if (heap.size() == k) {
                const double bound = heap.front().dist2;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = query[j] - point[j];
                    dist2 += diff * diff;
                    if (dist2 > bound) break;
                }
                const Neighbor cand{dist2, idx};
                if (cand < heap.front()) heap_replace_top(heap, cand);
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = query[j] - point[j];
                    dist2 += diff * diff;
                }
                heap_push(heap, Neighbor{dist2, idx});
            }
        }
        return;
    }
    const double diff = query[node.axis] - node.split;
    const std::size_t near_child = diff < 0.0 ? node.left : node.right;
    const std::size_t far_child = diff < 0.0 ? node.right : node.left;
    search(near_child, query, k, heap);
    // Equal plane distance still descends: an equidistant point with a lower
    // index beats the current worst under the tie-break.
    if (heap.size() < k || diff * diff <= heap.front().dist2) {
        search(far_child, query, k, heap);
    }
}

std::vector<Neighbor> KdTree::nearest(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim()) {
        throw std::invalid_argument("KdTree::nearest: query dim " + std::to_string(query.size()) +
                                    " vs points dim " + std::to_string(dim()));
    }
    if (k == 0 || k > size()) {
        throw std::invalid_argument("KdTree::nearest: k=" + std::to_string(k) +
                                    " outside [1, " + std::to_string(size()) + "]");
    }
    std::vector<Neighbor> heap;
    heap.reserve(k);
    search(root_, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
}

std::vector<Neighbor> brute_force_nearest(const Tensor2& points, std::span<const double> query,
                                          std::size_t k) {
    if (query.size() != points.cols()) {
        throw std::invalid_argument("brute_force_nearest: query dim mismatch");
    }
    if (k == 0 || k > points.rows()) {
        throw std::invalid_argument("brute_force_nearest: k outside [1, point count]");
    }
    std::vector<Neighbor> all(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        all[i] = Neighbor{squared_distance(points.row(i), query), i};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
    return all;
}

}  // namespace fedsynth
