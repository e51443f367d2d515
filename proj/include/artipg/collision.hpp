#pragma once

#include "artipg/primitive.hpp"
#include "artipg/structure.hpp"

#include <string>
#include <vector>

namespace artipg {

// Conservative overlap test between two posed primitives: separating-axis
// test of the convex hulls over a fixed 26-direction set (axes, edge and
// corner diagonals), preceded by an AABB reject and overridden by exact
// tests where the hull is too coarse (sphere-sphere, parallel-axis
// cylinder-cylinder, sphere-torus). Contact within `tol` is not a collision.
bool primitivesCollide(const PrimitiveInstance& a, const PrimitiveInstance& b,
                       Scalar tol = 1e-6);

struct Violation {
    std::string a;
    std::string b;
};

// Exhaustive pairwise collision list over non-adjacent instance pairs, in
// deterministic (index-ordered) sequence.
std::vector<Violation> checkValidity(const Structure& s, Scalar tol = 1e-6);

} // namespace artipg
