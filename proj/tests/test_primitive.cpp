#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "artipg/primitive.hpp"
#include "artipg/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

using namespace artipg;

namespace {

constexpr double kPi = std::numbers::pi;

Quat randomQuat(Rng& rng) {
    Quat q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (q.norm() < 1e-3)
        q = Quat(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    q.normalize();
    return q;
}

Pose randomPose(Rng& rng) {
    return Pose{randomQuat(rng),
                Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
}

ParamMap randomParams(Rng& rng, PrimitiveTemplateId tmpl) {
    switch (tmpl) {
    case PrimitiveTemplateId::Cuboid:
        return {{"size_x", rng.uniform(0.05, 2.0)},
                {"size_y", rng.uniform(0.05, 2.0)},
                {"size_z", rng.uniform(0.05, 2.0)}};
    case PrimitiveTemplateId::Cylinder:
        return {{"radius", rng.uniform(0.05, 1.0)}, {"height", rng.uniform(0.05, 2.0)}};
    case PrimitiveTemplateId::Sphere:
        return {{"radius", rng.uniform(0.05, 1.0)}};
    case PrimitiveTemplateId::Torus: {
        const double R = rng.uniform(0.2, 1.0);
        return {{"major_radius", R}, {"minor_radius", rng.uniform(0.2 * R, 0.8 * R)}};
    }
    case PrimitiveTemplateId::PrismN:
        return {{"side_count", static_cast<double>(rng.uniformInt(3, 12))},
                {"circumradius", rng.uniform(0.05, 1.0)},
                {"height", rng.uniform(0.05, 2.0)}};
    }
    return {};
}

const PrimitiveTemplateId kAllTemplates[] = {
    PrimitiveTemplateId::Cuboid, PrimitiveTemplateId::Cylinder, PrimitiveTemplateId::Sphere,
    PrimitiveTemplateId::Torus, PrimitiveTemplateId::PrismN};

// uv that keeps finite differences inside the domain, away from chart
// singularities and away from prism vertex creases.
Vec2 smoothUv(Rng& rng, PrimitiveTemplateId tmpl, const ParamMap& params) {
    const double u0 = rng.uniform(0.02, 0.98);
    const double v0 = rng.uniform(0.05, 0.95);
    if (tmpl != PrimitiveTemplateId::PrismN) return {u0, v0};
    const int n = static_cast<int>(std::llround(params.at("side_count")));
    // Keep u in the middle 60% of one side.
    const int k = static_cast<int>(u0 * n) % n;
    const double f = rng.uniform(0.2, 0.8);
    return {(k + f) / n, v0};
}

Errc codeOf(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::IoError;
}

} // namespace

TEST_CASE("instantiate validates parameters and pose") {
    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 0.1}, {"height", 0.3}}, Pose::identity());
    CHECK(patchCount(cyl.tmpl) == 3);
    CHECK(patchName(cyl.tmpl, 0) == std::string("lateral"));
    CHECK(patchName(cyl.tmpl, 1) == std::string("top_cap"));
    CHECK(patchName(cyl.tmpl, 2) == std::string("bottom_cap"));

    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                   {{"radius", -1.0}, {"height", 0.3}}, Pose::identity());
          }) == Errc::OutOfRange);
    try {
        instantiatePrimitive(PrimitiveTemplateId::Cylinder, {{"radius", -1.0}, {"height", 0.3}},
                             Pose::identity());
    } catch (const Error& e) {
        CHECK(e.detail().find("radius") != std::string::npos);
    }

    // Torus minor must stay under major.
    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::Torus,
                                   {{"major_radius", 0.05}, {"minor_radius", 0.06}},
                                   Pose::identity());
          }) == Errc::OutOfRange);
    try {
        instantiatePrimitive(PrimitiveTemplateId::Torus,
                             {{"major_radius", 0.05}, {"minor_radius", 0.06}}, Pose::identity());
    } catch (const Error& e) {
        CHECK(e.detail().find("minor_radius") != std::string::npos);
    }

    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::Cylinder, {{"radius", 0.1}},
                                   Pose::identity());
          }) == Errc::MissingParameter);
    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                   {{"radius", 0.1}, {"height", 0.3}, {"depth", 1.0}},
                                   Pose::identity());
          }) == Errc::OutOfRange);
    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::PrismN,
                                   {{"side_count", 4.5}, {"circumradius", 0.1}, {"height", 0.1}},
                                   Pose::identity());
          }) == Errc::OutOfRange);
    CHECK(codeOf([] {
              instantiatePrimitive(PrimitiveTemplateId::PrismN,
                                   {{"side_count", 65.0}, {"circumradius", 0.1}, {"height", 0.1}},
                                   Pose::identity());
          }) == Errc::OutOfRange);

    Pose bad;
    bad.rotation = Quat(1.0, 0.0, 0.1, 0.0); // unnormalized
    CHECK(codeOf([&] {
              instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}}, bad);
          }) == Errc::NonUnitQuaternion);

    CHECK(codeOf([] { templateFromName("pyramid"); }) == Errc::UnknownTemplate);
    CHECK(templateFromName("prism_n") == PrimitiveTemplateId::PrismN);
}

TEST_CASE("surface points match pinned formulas") {
    const auto s1 = instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}},
                                         Pose::identity());
    // Pole: theta = 0 (v = 0).
    CHECK((surfacePoint(s1, 0, 0.3, 0.0) - Vec3(0, 0, 1)).norm() == doctest::Approx(0).epsilon(1e-15));

    const auto s2 = instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 2.0}},
                                         Pose::identity());
    // theta = pi/2, phi = 0  ->  (2, 0, 0).
    CHECK((surfacePoint(s2, 0, 0.0, 0.5) - Vec3(2, 0, 0)).norm() < 1e-15);

    const auto box = instantiatePrimitive(
        PrimitiveTemplateId::Cuboid, {{"size_x", 1.0}, {"size_y", 1.0}, {"size_z", 1.0}},
        Pose::identity());
    CHECK((surfacePoint(box, patchIndex(box.tmpl, "pz"), 0.5, 0.5) - Vec3(0, 0, 0.5)).norm() ==
          0.0);

    // Cylinder lateral at phi = 0: radial normal +x.
    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 0.5}, {"height", 1.0}}, Pose::identity());
    const SurfaceFrame f = surfaceFrame(cyl, 0, 0.0, 0.5);
    CHECK((f.normal - Vec3(1, 0, 0)).norm() < 1e-15);

    // Torus outer equator (v = 0) at u = 0 sits at x = R + r.
    const auto tor = instantiatePrimitive(PrimitiveTemplateId::Torus,
                                          {{"major_radius", 0.5}, {"minor_radius", 0.2}},
                                          Pose::identity());
    CHECK((surfacePoint(tor, 0, 0.0, 0.0) - Vec3(0.7, 0, 0)).norm() < 1e-15);

    // Prism vertex 0 lies on +x.
    const auto pri = instantiatePrimitive(
        PrimitiveTemplateId::PrismN,
        {{"side_count", 6.0}, {"circumradius", 0.4}, {"height", 0.3}}, Pose::identity());
    CHECK((surfacePoint(pri, 0, 0.0, 0.5) - Vec3(0.4, 0, 0)).norm() < 1e-12);

    CHECK(codeOf([&] { surfacePoint(box, 6, 0.5, 0.5); }) == Errc::UnknownPatch);
    CHECK(codeOf([&] { surfacePoint(box, 0, 1.5, 0.5); }) == Errc::ParameterOutOfDomain);
    CHECK(codeOf([&] { patchIndex(box.tmpl, "lateral"); }) == Errc::UnknownPatch);
}

TEST_CASE("analytic normals agree with finite differences") {
    // Oracle: central differences of surface_point give the tangent plane; the
    // cross product fixes the normal line, and an exact containment probe
    // fixes the outward sign (charts are not all positively oriented).
    Rng rng(0x11223344ull);
    const double h = 1e-5;
    for (PrimitiveTemplateId tmpl : kAllTemplates) {
        for (int trial = 0; trial < 40; ++trial) {
            const ParamMap params = randomParams(rng, tmpl);
            const Pose pose = (trial % 2) ? randomPose(rng) : Pose::identity();
            const auto inst = instantiatePrimitive(tmpl, params, pose);
            for (int patch = 0; patch < patchCount(tmpl); ++patch) {
                const Vec2 uv = smoothUv(rng, tmpl, params);
                const Vec3 du = (surfacePoint(inst, patch, uv.x() + h, uv.y()) -
                                 surfacePoint(inst, patch, uv.x() - h, uv.y())) /
                                (2 * h);
                const Vec3 dv = (surfacePoint(inst, patch, uv.x(), uv.y() + h) -
                                 surfacePoint(inst, patch, uv.x(), uv.y() - h)) /
                                (2 * h);
                Vec3 n_fd = du.cross(dv);
                REQUIRE(n_fd.norm() > 1e-12);
                n_fd.normalize();

                const Vec3 p = surfacePoint(inst, patch, uv.x(), uv.y());
                const double probe = 1e-6;
                const bool plus_in = containsPoint(inst, p + probe * n_fd);
                const bool minus_in = containsPoint(inst, p - probe * n_fd);
                REQUIRE(plus_in != minus_in);
                if (plus_in) n_fd = -n_fd; // orient outward

                const SurfaceFrame frame = surfaceFrame(inst, patch, uv.x(), uv.y());
                const double angle =
                    std::acos(std::clamp(frame.normal.dot(n_fd), -1.0, 1.0));
                CAPTURE(templateName(tmpl));
                CAPTURE(patch);
                CHECK(angle < 1e-5);

                // Tangent convention: direction of d(position)/du.
                const double tangent_angle =
                    std::acos(std::clamp(frame.tangent.dot(du.normalized()), -1.0, 1.0));
                CHECK(tangent_angle < 1e-5);
            }
        }
    }
}

TEST_CASE("frames are right-handed orthonormal") {
    Rng rng(0xA5A5A5A5ull);
    for (PrimitiveTemplateId tmpl : kAllTemplates) {
        for (int trial = 0; trial < 60; ++trial) {
            const ParamMap params = randomParams(rng, tmpl);
            const auto inst = instantiatePrimitive(tmpl, params, randomPose(rng));
            const int patch = static_cast<int>(rng.uniformInt(0, patchCount(tmpl) - 1));
            const Vec2 uv{rng.uniform(), rng.uniform()};
            const SurfaceFrame f = surfaceFrame(inst, patch, uv.x(), uv.y());
            CHECK(std::abs(f.normal.norm() - 1.0) < 1e-9);
            CHECK(std::abs(f.tangent.norm() - 1.0) < 1e-9);
            CHECK(std::abs(f.normal.dot(f.tangent)) < 1e-9);
            Mat3 m;
            m.col(0) = f.normal;
            m.col(1) = f.tangent;
            m.col(2) = f.bitangent;
            CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    // Singular points carry the fixed-meridian limit tangent and a flag.
    const auto sph = instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}},
                                          Pose::identity());
    const SurfaceFrame pole = surfaceFrame(sph, 0, 0.25, 0.0);
    CHECK(pole.degenerate);
    const double phi = 2 * kPi * 0.25;
    CHECK((pole.tangent - Vec3(-std::sin(phi), std::cos(phi), 0)).norm() < 1e-12);
    CHECK((pole.normal - Vec3(0, 0, 1)).norm() < 1e-12);

    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 0.2}, {"height", 0.4}}, Pose::identity());
    CHECK(surfaceFrame(cyl, 1, 0.1, 0.0).degenerate);
    CHECK_FALSE(surfaceFrame(cyl, 1, 0.1, 0.5).degenerate);
}

TEST_CASE("closed-form areas") {
    const auto sph = instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}},
                                          Pose::identity());
    CHECK(surfaceArea(sph, 0) == doctest::Approx(4 * kPi).epsilon(1e-12));

    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 1.0}, {"height", 2.0}}, Pose::identity());
    CHECK(surfaceArea(cyl, 0) == doctest::Approx(4 * kPi).epsilon(1e-12));

    // 2(ab + bc + ca) for 0.2 x 0.3 x 0.4.
    const auto box = instantiatePrimitive(
        PrimitiveTemplateId::Cuboid, {{"size_x", 0.2}, {"size_y", 0.3}, {"size_z", 0.4}},
        Pose::identity());
    CHECK(surfaceArea(box) == doctest::Approx(0.52).epsilon(1e-12));

    // Square prism with circumradius sqrt(2): side 2, apothem 1, cap area 4.
    const auto pri = instantiatePrimitive(
        PrimitiveTemplateId::PrismN,
        {{"side_count", 4.0}, {"circumradius", std::sqrt(2.0)}, {"height", 0.5}},
        Pose::identity());
    CHECK(surfaceArea(pri, 1) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(surfaceArea(pri, 0) == doctest::Approx(8.0 * 0.5).epsilon(1e-12));

    const auto tor = instantiatePrimitive(PrimitiveTemplateId::Torus,
                                          {{"major_radius", 0.5}, {"minor_radius", 0.2}},
                                          Pose::identity());
    CHECK(surfaceArea(tor, 0) == doctest::Approx(4 * kPi * kPi * 0.1).epsilon(1e-12));
}

TEST_CASE("areas match quadrature of the surface metric") {
    // Oracle: midpoint-rule integration of |dP/du x dP/dv| over the chart,
    // derivatives by central differences. Grid midpoints never straddle prism
    // vertex creases ((2i+1)*n = 2*N*k has no solution for n <= 64, N = 256).
    Rng rng(0x600DCAFEull);
    const int N = 256;
    const double h = 1e-6;
    for (PrimitiveTemplateId tmpl : kAllTemplates) {
        const ParamMap params = randomParams(rng, tmpl);
        const auto inst = instantiatePrimitive(tmpl, params, Pose::identity());
        for (int patch = 0; patch < patchCount(tmpl); ++patch) {
            double sum = 0.0;
            for (int i = 0; i < N; ++i) {
                const double u = (i + 0.5) / N;
                for (int j = 0; j < N; ++j) {
                    const double v = (j + 0.5) / N;
                    const Vec3 du = (surfacePoint(inst, patch, u + h, v) -
                                     surfacePoint(inst, patch, u - h, v)) /
                                    (2 * h);
                    const Vec3 dv = (surfacePoint(inst, patch, u, v + h) -
                                     surfacePoint(inst, patch, u, v - h)) /
                                    (2 * h);
                    sum += du.cross(dv).norm();
                }
            }
            sum /= static_cast<double>(N) * N;
            CAPTURE(templateName(tmpl));
            CAPTURE(patch);
            CHECK(sum == doctest::Approx(surfaceArea(inst, patch)).epsilon(0.005));
        }
    }
}

TEST_CASE("support function and bounding box") {
    Rng rng(0x0DDBA11ull);
    for (PrimitiveTemplateId tmpl : kAllTemplates) {
        for (int trial = 0; trial < 8; ++trial) {
            const ParamMap params = randomParams(rng, tmpl);
            const Pose pose = randomPose(rng);
            const auto inst = instantiatePrimitive(tmpl, params, pose);
            const auto samples =
                sampleSurface(std::span(&inst, 1), VisibilityMask(std::span(&inst, 1)), 4000,
                              rng.next());
            const Eigen::AlignedBox3d box = boundingBox(inst);
            for (int d = 0; d < 12; ++d) {
                Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
                if (dir.norm() < 1e-6) dir = Vec3::UnitX();
                dir.normalize();
                const double s = support(inst, dir);
                double reached = -1e300;
                for (const auto& sample : samples) {
                    CHECK(dir.dot(sample.position) <= s + 1e-9);
                    reached = std::max(reached, dir.dot(sample.position));
                }
                // The hull support must be approached by dense surface samples
                // (all five solids have extreme points on the sampled surface).
                const double diameter = box.diagonal().norm();
                CHECK(reached > s - 0.05 * diameter);
            }
            for (const auto& sample : samples) {
                CHECK(box.contains(sample.position));
                CHECK(containsPoint(inst, sample.position, 1e-9));
                CHECK(containsPoint(inst, sample.position, 1e-9));
            }
            // Pose equivariance: support in a rotated frame equals local
            // support along the back-rotated direction plus the offset term.
            const Vec3 dir = Vec3(0.3, -0.5, 0.81).normalized();
            const auto local_inst = instantiatePrimitive(tmpl, params, Pose::identity());
            const double expect =
                support(local_inst, pose.rotation.conjugate() * dir) + dir.dot(pose.translation);
            CHECK(support(inst, dir) == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    // Torus support is exact on the surface: the witness point is analytic.
    const auto tor = instantiatePrimitive(PrimitiveTemplateId::Torus,
                                          {{"major_radius", 0.6}, {"minor_radius", 0.25}},
                                          Pose::identity());
    Rng rng2(42);
    for (int i = 0; i < 50; ++i) {
        Vec3 d(rng2.uniform(-1, 1), rng2.uniform(-1, 1), rng2.uniform(-1, 1));
        if (d.head<2>().norm() < 1e-6) d.x() += 0.5;
        d.normalize();
        const Vec3 c = Vec3(d.x(), d.y(), 0).normalized();
        const Vec3 witness = 0.6 * c + 0.25 * d;
        CHECK(std::abs(d.dot(witness) - support(tor, d)) < 1e-12);
        // The witness lies on the torus surface.
        const double ring = std::hypot(std::hypot(witness.x(), witness.y()) - 0.6, witness.z());
        CHECK(ring == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("containment rejects points just outside") {
    Rng rng(0x7777ull);
    for (PrimitiveTemplateId tmpl : kAllTemplates) {
        const ParamMap params = randomParams(rng, tmpl);
        const auto inst = instantiatePrimitive(tmpl, params, randomPose(rng));
        for (int patch = 0; patch < patchCount(tmpl); ++patch) {
            const Vec2 uv = smoothUv(rng, tmpl, params);
            const Vec3 p = surfacePoint(inst, patch, uv.x(), uv.y());
            const Vec3 n = surfaceFrame(inst, patch, uv.x(), uv.y()).normal;
            CHECK(containsPoint(inst, p - 1e-5 * n));
            CHECK_FALSE(containsPoint(inst, p + 1e-5 * n));
        }
    }
}

TEST_CASE("area-uniform maps invert their CDFs exactly") {
    // Sphere: cos(v*pi) must equal 1 - 2b.
    for (double b : {0.0, 0.1, 0.25, 0.5, 0.75, 0.99}) {
        const Vec2 uv = areaUniformUv(PrimitiveTemplateId::Sphere, {{"radius", 1.0}}, 0, 0.3, b);
        CHECK(std::cos(uv.y() * kPi) == doctest::Approx(1 - 2 * b).epsilon(1e-12));
    }
    // Torus: forward CDF (R*psi + r*sin(psi)) / (2*pi*R) recovers b.
    const ParamMap tp{{"major_radius", 0.6}, {"minor_radius", 0.25}};
    for (double b : {0.0, 0.05, 0.3, 0.5, 0.77, 0.999}) {
        const Vec2 uv = areaUniformUv(PrimitiveTemplateId::Torus, tp, 0, 0.0, b);
        const double psi = uv.y() * 2 * kPi;
        CHECK((0.6 * psi + 0.25 * std::sin(psi)) / (2 * kPi * 0.6) ==
              doctest::Approx(b).epsilon(1e-10));
    }
    // Caps: v = sqrt(b) flattens the linear density.
    const Vec2 cap = areaUniformUv(PrimitiveTemplateId::Cylinder,
                                   {{"radius", 1.0}, {"height", 1.0}}, 1, 0.5, 0.49);
    CHECK(cap.y() == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic and area-proportional") {
    const auto box = instantiatePrimitive(
        PrimitiveTemplateId::Cuboid, {{"size_x", 1.0}, {"size_y", 1.0}, {"size_z", 1.0}},
        Pose::identity());
    const VisibilityMask all(std::span(&box, 1));

    const auto a = sampleSurface(std::span(&box, 1), all, 6000, 99);
    const auto b = sampleSurface(std::span(&box, 1), all, 6000, 99);
    REQUIRE(a.size() == 6000);
    REQUIRE(b.size() == 6000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::memcmp(a[i].uv.data(), b[i].uv.data(), sizeof(double) * 2) == 0);
        CHECK(std::memcmp(a[i].position.data(), b[i].position.data(), sizeof(double) * 3) == 0);
        CHECK(a[i].patch == b[i].patch);
    }
    const auto c = sampleSurface(std::span(&box, 1), all, 6000, 100);
    bool any_diff = false;
    for (std::size_t i = 0; i < c.size() && !any_diff; ++i)
        any_diff = (a[i].uv != c[i].uv);
    CHECK(any_diff);

    // Equal faces: each expects 1000 with multinomial sigma = sqrt(n p (1-p)).
    int per_face[6] = {0, 0, 0, 0, 0, 0};
    for (const auto& s : a) ++per_face[s.patch];
    const double sigma = std::sqrt(6000.0 * (1.0 / 6) * (5.0 / 6));
    for (int face = 0; face < 6; ++face) {
        CAPTURE(face);
        CHECK(std::abs(per_face[face] - 1000.0) <= 3 * sigma);
    }

    // Analytic binding: cached position reproduces exactly from (patch, uv).
    for (const auto& s : a) {
        const Vec3 p = surfacePoint(box, s.patch, s.uv.x(), s.uv.y());
        CHECK(std::memcmp(p.data(), s.position.data(), sizeof(double) * 3) == 0);
    }
}

TEST_CASE("sphere sampling is area-uniform") {
    const auto sph = instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}},
                                          Pose::identity());
    const VisibilityMask all(std::span(&sph, 1));
    const int n = 20000;
    const auto samples = sampleSurface(std::span(&sph, 1), all, n, 2024);
    REQUIRE(static_cast<int>(samples.size()) == n);

    // z is uniform on [-1, 1] under area-uniform sampling: Var(z) = 1/3.
    double mean_z = 0.0;
    for (const auto& s : samples) mean_z += s.position.z();
    mean_z /= n;
    CHECK(std::abs(mean_z) <= 3.0 / std::sqrt(3.0 * n));

    // Ten equal-area z-bands each expect n/10.
    int bands[10] = {};
    for (const auto& s : samples) {
        int band = static_cast<int>((s.position.z() + 1.0) / 0.2);
        band = std::clamp(band, 0, 9);
        ++bands[band];
    }
    const double sigma = std::sqrt(n * 0.1 * 0.9);
    for (int i = 0; i < 10; ++i) {
        CAPTURE(i);
        CHECK(std::abs(bands[i] - n / 10.0) <= 3 * sigma);
    }
}

TEST_CASE("cylinder patch allocation follows area ratios") {
    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 0.5}, {"height", 2.0}}, Pose::identity());
    const VisibilityMask all(std::span(&cyl, 1));
    const int n = 10000;
    const auto samples = sampleSurface(std::span(&cyl, 1), all, n, 7);
    int counts[3] = {};
    for (const auto& s : samples) ++counts[s.patch];
    // Areas: lateral 2*pi*0.5*2 = 2pi, caps pi/4 each -> fractions 0.8/0.1/0.1.
    CHECK(std::abs(counts[0] - 8000.0) <= 3 * std::sqrt(n * 0.8 * 0.2));
    CHECK(std::abs(counts[1] - 1000.0) <= 3 * std::sqrt(n * 0.1 * 0.9));
    CHECK(std::abs(counts[2] - 1000.0) <= 3 * std::sqrt(n * 0.1 * 0.9));
}

TEST_CASE("visibility masks and failure modes") {
    const auto cyl = instantiatePrimitive(PrimitiveTemplateId::Cylinder,
                                          {{"radius", 0.5}, {"height", 2.0}}, Pose::identity());
    VisibilityMask mask(std::span(&cyl, 1));
    mask.setVisible(0, 0, false); // hide the lateral patch
    const auto samples = sampleSurface(std::span(&cyl, 1), mask, 500, 3);
    for (const auto& s : samples) CHECK(s.patch != 0);

    mask.setVisible(0, 1, false);
    mask.setVisible(0, 2, false);
    CHECK(codeOf([&] { sampleSurface(std::span(&cyl, 1), mask, 10, 3); }) ==
          Errc::NoVisibleSurface);
    CHECK(codeOf([&] {
              const VisibilityMask all(std::span(&cyl, 1));
              sampleSurface(std::span(&cyl, 1), all, 0, 3);
          }) == Errc::OutOfRange);
}

TEST_CASE("multi-instance sampling respects per-instance areas") {
    std::vector<PrimitiveInstance> set;
    set.push_back(instantiatePrimitive(PrimitiveTemplateId::Sphere, {{"radius", 1.0}},
                                       Pose::identity(), "big"));
    set.push_back(instantiatePrimitive(
        PrimitiveTemplateId::Sphere, {{"radius", 0.5}},
        Pose{Quat::Identity(), Vec3(3, 0, 0)}, "small"));
    const VisibilityMask all(set);
    const int n = 8000;
    const auto samples = sampleSurface(set, all, n, 11);
    int counts[2] = {};
    for (const auto& s : samples) ++counts[s.instance];
    // Areas 4pi vs pi -> 0.8 / 0.2 split.
    CHECK(std::abs(counts[0] - 6400.0) <= 3 * std::sqrt(n * 0.8 * 0.2));
    CHECK(std::abs(counts[1] - 1600.0) <= 3 * std::sqrt(n * 0.8 * 0.2));
}
