#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "artipg/manipulate.hpp"
#include "artipg/mapping.hpp"
#include "artipg/structure.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace artipg;

namespace {

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open ", path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string assetPath(const char* name) {
    return std::string(ARTIPG_ASSET_DIR) + "/" + name;
}

StructureProgram loadAsset(const char* name) { return parseProgram(readFile(assetPath(name))); }

Rng stageRng(std::uint64_t seed) { return Rng(mixSeed(seed, rng_stage::kManipulate)); }

Errc codeOf(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::IoError;
}

PrimitiveInstance makeInst(PrimitiveTemplateId tmpl, ParamMap params) {
    return instantiatePrimitive(tmpl, params, Pose{});
}

// Minimal one-instance structure for hand-built mapping fixtures.
Structure singleton(PrimitiveInstance inst, const std::string& decl) {
    Structure s;
    s.instances.push_back(std::move(inst));
    s.rest_poses = {s.instances[0].pose};
    s.provenance = {{decl, decl, 0}};
    s.visibility = VisibilityMask(s.instances);
    s.semantic_vocab = {decl};
    s.semantic_of = {0};
    return s;
}

// Surface-relative field with a uv grid on every patch of every instance and
// a per-instance constant vector.
DetailField gridField(std::span<const PrimitiveInstance> instances,
                      const std::function<Vec3(std::uint32_t)>& vector_of, int res = 5) {
    DetailField f;
    f.frame = DetailField::Frame::SurfaceRelative;
    for (std::uint32_t i = 0; i < instances.size(); ++i)
        for (int p = 0; p < patchCount(instances[i].tmpl); ++p)
            for (int a = 0; a < res; ++a)
                for (int b = 0; b < res; ++b) {
                    f.bindings.push_back(
                        {i, static_cast<std::uint16_t>(p), Vec2((a + 0.5) / res, (b + 0.5) / res)});
                    f.vectors.push_back(vector_of(i));
                }
    return f;
}

Alteration setParamEntry(const std::string& decl, const std::string& param, Scalar oldv,
                         Scalar newv) {
    Alteration a;
    a.kind = Alteration::Kind::SetParam;
    a.decl = decl;
    a.param = param;
    a.old_value = oldv;
    a.new_value = newv;
    return a;
}

} // namespace

TEST_CASE("cross-template projection matches hand-computed band values") {
    const PrimitiveInstance box = makeInst(
        PrimitiveTemplateId::Cuboid, {{"size_x", 0.4}, {"size_y", 0.2}, {"size_z", 0.5}});
    const PrimitiveInstance cyl =
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.1}, {"height", 0.5}});
    // Patch order: cuboid px=0 nx=1 py=2 ny=3 pz=4 nz=5; cylinder lateral=0
    // top=1 bottom=2. Perimeter 2(sx+sy) = 1.2.

    SUBCASE("same template is the identity") {
        const PatchPoint p = projectAcrossTemplates(box, box, 3, Vec2(0.3, 0.4));
        CHECK(p.patch == 3);
        CHECK(p.uv.x() == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(p.uv.y() == doctest::Approx(0.4).epsilon(1e-15));
    }
    SUBCASE("cylinder angle 0 lands on the px face center") {
        const PatchPoint p = projectAcrossTemplates(box, cyl, 0, Vec2(0.0, 0.3));
        CHECK(p.patch == 0);
        CHECK(p.uv.x() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p.uv.y() == doctest::Approx(0.3).epsilon(1e-15));
    }
    SUBCASE("cylinder angle pi/2 lands on the py face center") {
        const PatchPoint p = projectAcrossTemplates(box, cyl, 0, Vec2(0.25, 0.3));
        CHECK(p.patch == 2);
        CHECK(p.uv.x() == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("corners sit at their perimeter fractions") {
        // (+sx/2, +sy/2) corner: walk length sy from the px center origin
        // minus the half-face offset = 0.1, fraction 1/12.
        const PatchPoint seam = projectAcrossTemplates(box, cyl, 0, Vec2(1.0 / 12.0, 0.3));
        CHECK(seam.patch == 2); // lands on the py side of the seam
        CHECK(seam.uv.x() == doctest::Approx(0.0).epsilon(1e-12));
        const PatchPoint back = projectAcrossTemplates(cyl, box, 0, Vec2(1.0, 0.3));
        CHECK(back.patch == 0);
        CHECK(back.uv.x() == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
        // -y face center sits at angle 3pi/2.
        const PatchPoint ny = projectAcrossTemplates(cyl, box, 3, Vec2(0.5, 0.7));
        CHECK(ny.patch == 0);
        CHECK(ny.uv.x() == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(ny.uv.y() == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("caps transfer by boundary fraction and radius fraction") {
        const PatchPoint top = projectAcrossTemplates(box, cyl, 1, Vec2(0.0, 0.5));
        CHECK(top.patch == 4);
        CHECK(top.uv.x() == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(top.uv.y() == doctest::Approx(0.5).epsilon(1e-12));
        const PatchPoint back = projectAcrossTemplates(cyl, box, 4, Vec2(0.75, 0.5));
        CHECK(back.patch == 1);
        CHECK(back.uv.x() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(back.uv.y() == doctest::Approx(0.5).epsilon(1e-12));
        // Bottom caps share the section-plane convention: angle pi/2 at full
        // radius is the +y rim point, nz native v = 0.
        const PatchPoint bot = projectAcrossTemplates(box, cyl, 2, Vec2(0.25, 1.0));
        CHECK(bot.patch == 5);
        CHECK(bot.uv.x() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(bot.uv.y() == doctest::Approx(0.0).epsilon(1e-12));
        const PatchPoint bot_back = projectAcrossTemplates(cyl, box, 5, Vec2(0.5, 0.0));
        CHECK(bot_back.patch == 2);
        CHECK(bot_back.uv.x() == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(bot_back.uv.y() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("unknown destination patch is rejected") {
        CHECK(codeOf([&] { projectAcrossTemplates(box, cyl, 3, Vec2(0.5, 0.5)); }) ==
              Errc::UnknownPatch);
    }
}

TEST_CASE("sphere transfers are equirectangular; missing caps fall back to the poles") {
    const PrimitiveInstance cyl =
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.1}, {"height", 0.5}});
    const PrimitiveInstance sph = makeInst(PrimitiveTemplateId::Sphere, {{"radius", 0.1}});
    const PrimitiveInstance tor = makeInst(
        PrimitiveTemplateId::Torus, {{"major_radius", 0.2}, {"minor_radius", 0.05}});

    // Lateral <-> sphere: u and v transfer raw, so the cylinder height
    // fraction equals the sphere polar angle over pi.
    bool fb = true;
    PatchPoint p = projectAcrossTemplates(sph, cyl, 0, Vec2(0.3, 0.25), &fb);
    CHECK_FALSE(fb);
    CHECK(p.patch == 0);
    CHECK(p.uv.x() == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p.uv.y() == doctest::Approx(0.25).epsilon(1e-15)); // theta = 0.25*pi
    p = projectAcrossTemplates(cyl, sph, 0, Vec2(0.3, 0.25), &fb);
    CHECK_FALSE(fb);
    CHECK(p.patch == 0);
    CHECK(p.uv.y() == doctest::Approx(0.25).epsilon(1e-15));

    // Caps have no sphere band: nearest-band fallback onto the poles, flagged.
    p = projectAcrossTemplates(sph, cyl, 1, Vec2(0.3, 0.6), &fb);
    CHECK(fb);
    CHECK(p.patch == 0);
    CHECK(p.uv.x() == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p.uv.y() == doctest::Approx(0.3).epsilon(1e-12)); // center->pole, rim->equator
    p = projectAcrossTemplates(sph, cyl, 2, Vec2(0.3, 0.6), &fb);
    CHECK(fb);
    CHECK(p.uv.y() == doctest::Approx(0.7).epsilon(1e-12));

    // Torus fallback: caps onto the tube's top/bottom circles, rim at the
    // outer equator.
    p = projectAcrossTemplates(tor, cyl, 1, Vec2(0.3, 0.6), &fb);
    CHECK(fb);
    CHECK(p.patch == 0);
    CHECK(p.uv.y() == doctest::Approx(0.25 * (1.0 - 0.6)).epsilon(1e-12));
    p = projectAcrossTemplates(tor, cyl, 2, Vec2(0.3, 0.6), &fb);
    CHECK(fb);
    CHECK(p.uv.y() == doctest::Approx(0.75 + 0.25 * 0.6).epsilon(1e-12));
}

TEST_CASE("projection round-trips return to the same surface point") {
    const PrimitiveInstance box = makeInst(
        PrimitiveTemplateId::Cuboid, {{"size_x", 0.4}, {"size_y", 0.2}, {"size_z", 0.5}});
    const PrimitiveInstance cyl =
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.1}, {"height", 0.5}});
    const PrimitiveInstance prism = makeInst(
        PrimitiveTemplateId::PrismN, {{"circumradius", 0.1}, {"height", 0.5}, {"side_count", 6}});

    // The map is bijective up to seam relabeling, so compare the cuboid
    // surface positions, not raw (patch, uv).
    auto roundTrip = [](const PrimitiveInstance& home, const PrimitiveInstance& via,
                        std::initializer_list<int> patches) {
        Scalar worst = 0.0;
        for (int patch : patches)
            for (int iu = 0; iu <= 24; ++iu)
                for (int iv = 0; iv <= 12; ++iv) {
                    const Vec2 uv(iu / 24.0, iv / 12.0);
                    const PatchPoint there = projectAcrossTemplates(via, home, patch, uv);
                    const PatchPoint back =
                        projectAcrossTemplates(home, via, there.patch, there.uv);
                    const Vec3 a = surfacePoint(home, patch, uv.x(), uv.y());
                    const Vec3 b = surfacePoint(home, back.patch, back.uv.x(), back.uv.y());
                    worst = std::max(worst, (a - b).norm());
                }
        return worst;
    };
    CHECK(roundTrip(box, cyl, {0, 1, 2, 3}) <= 1e-12);
    CHECK(roundTrip(box, cyl, {4, 5}) <= 1e-12);
    CHECK(roundTrip(box, prism, {0, 1, 2, 3, 4, 5}) <= 1e-12);
    CHECK(roundTrip(cyl, prism, {0, 1, 2}) <= 1e-12);
}

TEST_CASE("identity manipulation maps every sample parametrically and round-trips details") {
    const StructureProgram usb = loadAsset("usb.sp.json");
    const Structure s = elaborate(usb, {});
    const auto samples = sampleSurface(s.instances, s.visibility, 600, 9);

    // Bump every sample along its normal and run the full detail pipeline.
    std::vector<Vec3> target;
    target.reserve(samples.size());
    for (const SurfaceSample& sm : samples)
        target.push_back(sm.position + 0.0007 * sm.normal);
    const DetailField world = computeDeformation(samples, target);
    const DetailField relative = encodeRelative(world, s.instances);
    const DetailField completed = completeInvisible(s.instances, s.visibility, relative);

    const SampleMapping mapping = buildMapping(s, s, {});
    for (std::size_t i = 0; i < samples.size(); i += 37) {
        const SampleSource src = mapping.resolve(samples[i]);
        CHECK(src.kind == MapKind::Parametric);
        CHECK(src.instance == samples[i].instance);
        CHECK(src.patch == samples[i].patch);
        CHECK(src.uv.x() == samples[i].uv.x());
        CHECK(src.uv.y() == samples[i].uv.y());
    }
    const MappingStats st = mapping.stats(samples);
    CHECK(st.parametric == samples.size());
    CHECK(st.noSourceFraction() == 0.0);
    CHECK(st.fallback_band == 0);

    const std::vector<Vec3> out = migrateDetails(completed, mapping, samples);
    REQUIRE(out.size() == samples.size());
    Scalar worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i)
        worst = std::max(worst, (out[i] - target[i]).norm());
    CHECK(worst <= 1e-9);
}

TEST_CASE("migrate handles zero fields, frame misuse, and missing coverage") {
    const StructureProgram usb = loadAsset("usb.sp.json");
    const Structure s = elaborate(usb, {});
    const auto samples = sampleSurface(s.instances, s.visibility, 300, 4);
    const SampleMapping mapping = buildMapping(s, s, {});

    SUBCASE("zero detail returns the bare samples bitwise") {
        const DetailField zero =
            gridField(s.instances, [](std::uint32_t) { return Vec3::Zero(); });
        const std::vector<Vec3> out = migrateDetails(zero, mapping, samples);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == samples[i].position);
    }
    SUBCASE("world-frame fields are rejected") {
        DetailField world = gridField(s.instances, [](std::uint32_t) { return Vec3::Zero(); });
        world.frame = DetailField::Frame::World;
        CHECK(codeOf([&] { migrateDetails(world, mapping, samples); }) ==
              Errc::ParameterOutOfDomain);
    }
    SUBCASE("a field that misses a resolved patch is incomplete") {
        DetailField sparse;
        sparse.frame = DetailField::Frame::SurfaceRelative;
        sparse.bindings.push_back({samples[0].instance, samples[0].patch, samples[0].uv});
        sparse.vectors.push_back(Vec3::Zero());
        CHECK(codeOf([&] { migrateDetails(sparse, mapping, samples); }) == Errc::IncompleteField);
    }
}

TEST_CASE("replicas map to their recorded sources and inherit their fields") {
    const StructureProgram globe = loadAsset("globe.sp.json");
    ManipulationConfig cfg;
    Rng rng = stageRng(0);
    const ManipulationResult r = alterDiscrete(globe, rng, cfg);
    // Frozen stream: column_sides 8->9, leg_count 4->6 (sources 0, 1),
    // collar_count 1->2 (source 0).
    REQUIRE(r.trace.size() == 3);

    const Structure orig = elaborate(globe, {});
    const Structure manip = elaborate(r.program, {});
    const SampleMapping mapping = buildMapping(orig, manip, r.trace);

    const int leg0 = orig.findInstance("base", "leg", 0);
    const int leg1 = orig.findInstance("base", "leg", 1);
    const int collar0 = orig.findInstance("bracket", "collar", 0);
    REQUIRE(leg0 >= 0);
    CHECK(mapping.sourceInstance(manip.findInstance("base", "leg", 4)) == leg0);
    CHECK(mapping.sourceInstance(manip.findInstance("base", "leg", 5)) == leg1);
    CHECK(mapping.sourceInstance(manip.findInstance("bracket", "collar", 1)) == collar0);
    // The resized column keeps its template, so it stays parametric.
    const int column = manip.findInstance("base", "column", 0);
    CHECK(mapping.resolve(column, 0, Vec2(0.4, 0.4)).kind == MapKind::Parametric);
    const SampleSource rep =
        mapping.resolve(manip.findInstance("base", "leg", 4), 2, Vec2(0.3, 0.8));
    CHECK(rep.kind == MapKind::Replicated);
    CHECK(rep.patch == 2);
    CHECK(rep.uv.x() == doctest::Approx(0.3).epsilon(1e-15));

    // Distinct constant detail per original instance: every replica must
    // carry its source's field, not its own repetition's.
    const DetailField field = gridField(orig.instances, [](std::uint32_t i) {
        return Vec3(0.001 * (i + 1), 0.0, 0.0);
    });
    const auto samples = sampleSurface(manip.instances, manip.visibility, 2500, 11);
    const MappingStats st = mapping.stats(samples);
    CHECK(st.replicated > 0);
    CHECK(st.projected == 0);
    CHECK(st.no_source == 0); // DPA never creates unmatched surface
    const std::vector<Vec3> out = migrateDetails(field, mapping, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int si = mapping.sourceInstance(samples[i].instance);
        REQUIRE(si >= 0);
        const Scalar expected = 0.001 * (si + 1);
        CHECK((out[i] - samples[i].position).norm() == doctest::Approx(expected).epsilon(1e-12));
    }

    // Count reductions leave the survivors parametric.
    Rng rng14 = stageRng(14);
    const ManipulationResult fewer = alterDiscrete(globe, rng14, cfg);
    const Structure manip14 = elaborate(fewer.program, {});
    const SampleMapping m14 = buildMapping(orig, manip14, fewer.trace);
    const auto s14 = sampleSurface(manip14.instances, manip14.visibility, 800, 5);
    const MappingStats st14 = m14.stats(s14);
    CHECK(st14.no_source == 0);
    CHECK(st14.projected == 0);
}

TEST_CASE("template swaps pair parts by name, project changed templates, and keep magnitudes") {
    const StructureProgram globe = loadAsset("globe.sp.json");
    ManipulationConfig cfg;
    cfg.apa_drop_prob = 0.0;
    Rng rng = stageRng(0);
    const ManipulationResult r = alterAdvanced(globe, rng, cfg);
    // Frozen stream: base legged_base -> ring_base, bracket simple_bracket ->
    // complex_bracket (collar count carried to 2, stem becomes a prism).
    bool base_swapped = false, bracket_swapped = false;
    for (const Alteration& a : r.trace) {
        if (a.kind != Alteration::Kind::SwapTemplate) continue;
        if (a.decl == "base") {
            base_swapped = true;
            CHECK(a.new_template == "ring_base");
        } else if (a.decl == "bracket") {
            bracket_swapped = true;
            CHECK(a.new_template == "complex_bracket");
        }
    }
    REQUIRE(base_swapped);
    REQUIRE(bracket_swapped);

    const Structure orig = elaborate(globe, {});
    const Structure manip = elaborate(r.program, {});
    const SampleMapping mapping = buildMapping(orig, manip, r.trace);

    // Name-matched parts with the same template stay parametric even inside
    // a swapped declaration; changed templates project; unmatched parts have
    // no source.
    const auto kindAt = [&](const char* decl, const char* part, int rep) {
        const int idx = manip.findInstance(decl, part, rep);
        REQUIRE(idx >= 0);
        return mapping.resolve(idx, 0, Vec2(0.4, 0.6)).kind;
    };
    CHECK(kindAt("base", "column", 0) == MapKind::Parametric);
    CHECK(kindAt("base", "crown", 0) == MapKind::Parametric);
    CHECK(kindAt("base", "ring", 0) == MapKind::NoSource);
    CHECK(kindAt("base", "spoke", 0) == MapKind::NoSource);
    CHECK(kindAt("bracket", "ring", 0) == MapKind::Parametric);
    CHECK(kindAt("bracket", "boss", 0) == MapKind::NoSource);
    CHECK(kindAt("bracket", "collar", 0) == MapKind::Parametric);
    // Carried collar count exceeds the original: wraps onto repetition 0.
    CHECK(kindAt("bracket", "collar", 1) == MapKind::Replicated);
    CHECK(mapping.sourceInstance(manip.findInstance("bracket", "collar", 1)) ==
          orig.findInstance("bracket", "collar", 0));

    const int stem = manip.findInstance("bracket", "stem", 0);
    const int stem_src = orig.findInstance("bracket", "stem", 0);
    CHECK(manip.instances[stem].tmpl == PrimitiveTemplateId::PrismN);
    CHECK(orig.instances[stem_src].tmpl == PrimitiveTemplateId::Cylinder);
    const SampleSource proj = mapping.resolve(stem, 0, Vec2(0.37, 0.41));
    CHECK(proj.kind == MapKind::Projected);
    CHECK(proj.instance == static_cast<std::uint32_t>(stem_src));
    CHECK(proj.patch == 0);
    CHECK(proj.uv.y() == doctest::Approx(0.41).epsilon(1e-15));

    // Migration moves bindings but never rescales vectors: a constant-length
    // relative field keeps its exact length through every mapping kind.
    const Vec3 rel(0.0006, -0.0004, 0.0008);
    const DetailField field = gridField(orig.instances, [&](std::uint32_t) { return rel; });
    const auto samples = sampleSurface(manip.instances, manip.visibility, 2500, 7);
    const MappingStats st = mapping.stats(samples);
    CHECK(st.projected > 0);
    CHECK(st.no_source > 0);
    CHECK(st.fallback_band == 0); // prism has every band a cylinder has
    CHECK(st.total() == samples.size());
    const std::vector<Vec3> out = migrateDetails(field, mapping, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Scalar len = (out[i] - samples[i].position).norm();
        if (mapping.sourceInstance(samples[i].instance) < 0)
            CHECK(len == 0.0); // NoSource migrates as zero detail
        else
            CHECK(len == doctest::Approx(rel.norm()).epsilon(1e-12));
    }
}

TEST_CASE("resized cylinders keep bump height along the new normals") {
    const Structure orig = singleton(
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.05}, {"height", 0.2}}), "c");
    const Structure grown = singleton(
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.1}, {"height", 0.4}}), "c");
    const AlterationTrace trace = {setParamEntry("c", "radius", 0.05, 0.1),
                                   setParamEntry("c", "height", 0.2, 0.4)};
    const SampleMapping mapping = buildMapping(orig, grown, trace);

    const Scalar bump = 0.003;
    const DetailField field =
        gridField(orig.instances, [&](std::uint32_t) { return Vec3(bump, 0.0, 0.0); });
    const auto samples = sampleSurface(grown.instances, grown.visibility, 400, 3);
    CHECK(mapping.stats(samples).parametric == samples.size());

    const std::vector<Vec3> out = migrateDetails(field, mapping, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Vec3 delta = out[i] - samples[i].position;
        CHECK(delta.norm() == doctest::Approx(bump).epsilon(1e-9));
        CHECK(delta.dot(samples[i].normal) == doctest::Approx(bump).epsilon(1e-6));
    }

    // Proportional mode scales with the square root of the area ratio; the
    // doubled radius and height make that exactly 2 on every patch.
    const std::vector<Vec3> prop =
        migrateDetails(field, mapping, samples, DetailScale::Proportional);
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK((prop[i] - samples[i].position).norm() ==
              doctest::Approx(2.0 * bump).epsilon(1e-9));
}

TEST_CASE("surface bared by a drop resolves through symmetry completion") {
    const StructureProgram usb = loadAsset("usb.sp.json");
    Alteration drop;
    drop.kind = Alteration::Kind::DropDeclaration;
    drop.decl = "cap";
    const AlterationTrace trace = {drop};
    const StructureProgram bare = replayTrace(usb, trace);

    const Structure orig = elaborate(usb, {});
    const Structure manip = elaborate(bare, {});
    const SampleMapping mapping = buildMapping(orig, manip, trace);

    const auto samples = sampleSurface(manip.instances, manip.visibility, 1500, 21);
    const MappingStats st = mapping.stats(samples);
    CHECK(st.no_source == 0); // dropping only removes surface, never adds
    CHECK(st.symmetry_completed > 0); // the tip the cap covered is bare now

    // The raw relative field only covers originally visible patches, so
    // migration demands symmetry completion first.
    std::vector<Vec3> target;
    const auto orig_samples = sampleSurface(orig.instances, orig.visibility, 1200, 9);
    for (const SurfaceSample& sm : orig_samples)
        target.push_back(sm.position + 0.0005 * sm.normal);
    const DetailField relative =
        encodeRelative(computeDeformation(orig_samples, target), orig.instances);
    CHECK(codeOf([&] { migrateDetails(relative, mapping, samples); }) == Errc::IncompleteField);

    const DetailField completed = completeInvisible(orig.instances, orig.visibility, relative);
    const std::vector<Vec3> out = migrateDetails(completed, mapping, samples);
    REQUIRE(out.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK((out[i] - samples[i].position).norm() <= 0.0005 + 1e-9);
}

TEST_CASE("mapping rejects traces that do not belong to the original") {
    const StructureProgram globe = loadAsset("globe.sp.json");
    const Structure s = elaborate(globe, {});

    SUBCASE("unknown declaration") {
        const AlterationTrace trace = {setParamEntry("zap", "width", 0.1, 0.2)};
        CHECK(codeOf([&] { buildMapping(s, s, trace); }) == Errc::TraceMismatch);
    }
    SUBCASE("replica sources shorter than the growth they claim") {
        ManipulationConfig cfg;
        Rng rng = stageRng(0);
        const ManipulationResult r = alterDiscrete(globe, rng, cfg); // legs 4 -> 6
        const Structure manip = elaborate(r.program, {});
        AlterationTrace corrupt;
        for (const Alteration& a : r.trace)
            if (a.kind == Alteration::Kind::SetCount && a.part == "leg") {
                Alteration c = a;
                c.replica_sources = {0}; // two replicas were added
                corrupt.push_back(c);
            }
        REQUIRE(corrupt.size() == 1);
        CHECK(codeOf([&] { buildMapping(s, manip, corrupt); }) == Errc::TraceMismatch);
    }
    SUBCASE("out-of-range sample instance") {
        const SampleMapping mapping = buildMapping(s, s, {});
        CHECK(codeOf([&] { mapping.resolve(10000, 0, Vec2(0.5, 0.5)); }) == Errc::OutOfRange);
    }
}

TEST_CASE("cap samples onto capless templates are counted as fallback transfers") {
    // Hand-built swap: a cylinder replaces a sphere under the same part name.
    const Structure orig =
        singleton(makeInst(PrimitiveTemplateId::Sphere, {{"radius", 0.1}}), "k");
    const Structure manip = singleton(
        makeInst(PrimitiveTemplateId::Cylinder, {{"radius", 0.08}, {"height", 0.2}}), "k");
    Alteration swap;
    swap.kind = Alteration::Kind::SwapTemplate;
    swap.decl = "k";
    swap.old_template = "sphere";
    swap.new_template = "cylinder";
    const SampleMapping mapping = buildMapping(orig, manip, {swap});

    const auto samples = sampleSurface(manip.instances, manip.visibility, 1000, 13);
    const MappingStats st = mapping.stats(samples);
    CHECK(st.projected == samples.size());
    CHECK(st.no_source == 0);
    CHECK(st.fallback_band > 0); // the caps have no sphere counterpart
    std::size_t caps = 0;
    for (const SurfaceSample& sm : samples)
        if (sm.patch != 0) ++caps;
    CHECK(st.fallback_band == caps);

    // Fallback samples still migrate: constant field, exact magnitudes.
    const DetailField field =
        gridField(orig.instances, [](std::uint32_t) { return Vec3(0.002, 0.0, 0.0); });
    const std::vector<Vec3> out = migrateDetails(field, mapping, samples);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK((out[i] - samples[i].position).norm() == doctest::Approx(0.002).epsilon(1e-12));
}

TEST_CASE("manipulated exemplars migrate cleanly across seeds") {
    for (const char* asset : {"usb.sp.json", "globe.sp.json", "washing_machine.sp.json"}) {
        CAPTURE(asset);
        const StructureProgram prog = loadAsset(asset);
        const Structure orig = elaborate(prog, {});
        const auto orig_samples = sampleSurface(orig.instances, orig.visibility, 900, 2);
        std::vector<Vec3> target;
        for (const SurfaceSample& sm : orig_samples)
            target.push_back(sm.position + 0.0004 * sm.normal);
        const DetailField completed = completeInvisible(
            orig.instances, orig.visibility,
            encodeRelative(computeDeformation(orig_samples, target), orig.instances));

        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            CAPTURE(seed);
            ManipulationConfig cfg;
            cfg.seed = seed;
            const ManipulationResult r = manipulate(prog, cfg);
            const Structure manip = elaborate(r.program, {});
            const SampleMapping mapping = buildMapping(orig, manip, r.trace);
            const auto samples = sampleSurface(manip.instances, manip.visibility, 500, seed);
            const MappingStats st = mapping.stats(samples);
            REQUIRE(st.total() == samples.size());
            const std::vector<Vec3> out = migrateDetails(completed, mapping, samples);
            REQUIRE(out.size() == samples.size());
            for (std::size_t i = 0; i < out.size(); ++i) {
                REQUIRE(out[i].allFinite());
                // Bounded by the bump magnitude wherever a source exists.
                REQUIRE((out[i] - samples[i].position).norm() <= 0.0004 + 1e-9);
            }
        }
    }
}

TEST_CASE("no-source fraction is zero without structural alterations") {
    for (const char* asset : {"usb.sp.json", "globe.sp.json", "washing_machine.sp.json"}) {
        CAPTURE(asset);
        const StructureProgram prog = loadAsset(asset);
        const Structure orig = elaborate(prog, {});
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            ManipulationConfig cpa_only;
            cpa_only.seed = seed;
            cpa_only.apa_enabled = false;
            cpa_only.dpa_enabled = false;
            ManipulationConfig dpa_only;
            dpa_only.seed = seed;
            dpa_only.apa_enabled = false;
            dpa_only.cpa_scale = 0.0;
            for (const ManipulationConfig& cfg : {cpa_only, dpa_only}) {
                const ManipulationResult r = manipulate(prog, cfg);
                const Structure manip = elaborate(r.program, {});
                const SampleMapping mapping = buildMapping(orig, manip, r.trace);
                const auto samples =
                    sampleSurface(manip.instances, manip.visibility, 400, seed + 1);
                CHECK(mapping.stats(samples).noSourceFraction() == 0.0);
            }
        }
    }
}
