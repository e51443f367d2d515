#pragma once

#include "artipg/types.hpp"

#include <cstdint>
#include <vector>

namespace artipg {

// Exact nearest-neighbor search over a fixed 3D point set. Results match a
// brute-force ascending-index scan bit-for-bit, ties included (lowest index
// wins): subtrees are only pruned when the splitting plane is strictly
// farther than the best hit, and equal distances never displace a lower
// index. The deformation solver's determinism contract rests on this.
class KdTree3 {
public:
    explicit KdTree3(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    struct Hit {
        std::uint32_t index;
        Scalar squared_distance;
    };

    Hit nearest(const Vec3& query) const; // throws EmptyInput on an empty set

private:
    struct Node {
        // Leaf when right_child == 0; inner nodes split `order_[begin, end)`
        // at `split` along `axis`.
        std::uint32_t begin, end;
        std::uint32_t right_child; // left child is this + 1
        Scalar split;
        std::uint8_t axis;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end, int depth);
    void search(std::uint32_t node, const Vec3& query, Hit& best) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace artipg
