#include "artipg/kdtree.hpp"

#include <algorithm>

namespace artipg {

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()), 0);
    }
}

std::uint32_t KdTree3::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const std::uint32_t self = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0.0, 0});
    if (end - begin <= kLeafSize) return self;

    const int axis = depth % 3;
    const std::uint32_t mid = begin + (end - begin) / 2;
    // Deterministic median: order by (coordinate, original index).
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const Scalar ca = points_[a][axis], cb = points_[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const Scalar split = points_[order_[mid]][axis];

    build(begin, mid, depth + 1);
    const std::uint32_t right = build(mid, end, depth + 1);
    nodes_[self].right_child = right;
    nodes_[self].split = split;
    nodes_[self].axis = static_cast<std::uint8_t>(axis);
    return self;
}

void KdTree3::search(std::uint32_t node_id, const Vec3& query, Hit& best) const {
    const Node& node = nodes_[node_id];
    if (node.right_child == 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            const Scalar d2 = (points_[idx] - query).squaredNorm();
            if (d2 < best.squared_distance ||
                (d2 == best.squared_distance && idx < best.index)) {
                best.squared_distance = d2;
                best.index = idx;
            }
        }
        return;
    }
    const Scalar delta = query[node.axis] - node.split;
    const std::uint32_t near = (delta < 0.0) ? node_id + 1 : node.right_child;
    const std::uint32_t far = (delta < 0.0) ? node.right_child : node_id + 1;
    search(near, query, best);
    // Descend on equality: an equal-distance point with a lower index may sit
    // exactly on the splitting plane's far side.
    if (delta * delta <= best.squared_distance) search(far, query, best);
}

KdTree3::Hit KdTree3::nearest(const Vec3& query) const {
    if (points_.empty()) fail(Errc::EmptyInput, "nearest neighbor on empty point set");
    Hit best{0, std::numeric_limits<Scalar>::infinity()};
    best.index = static_cast<std::uint32_t>(points_.size()); // sentinel above all indices
    search(0, query, best);
    return best;
}

} // namespace artipg
