#include <doctest.h>

#include <fervor/models.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

using namespace fervor;

namespace {

struct TwoCells
{
    std::shared_ptr<const Mesh> mesh;
    GridGeometry gg;
    int interiorScvf = -1;

    TwoCells(Scheme scheme = Scheme::tpfa)
    : mesh(std::make_shared<const Mesh>(buildStructuredQuad(2, 1, Vec(0, 0, 0), Vec(2, 1, 0))))
    , gg(mesh, scheme)
    {
        for (const auto& scvf : gg.elementScvfs(0))
            if (!scvf.boundary)
                interiorScvf = scvf.index;
    }

    FluxContext context(const EqVector& left, const EqVector& right,
                        const ElementParams& pl, const ElementParams& pr, int scvfIndex = -1) const
    {
        const auto& scvf = gg.scvf(scvfIndex < 0 ? interiorScvf : scvfIndex);
        const auto& in = gg.scv(scvf.insideScv);
        const auto& out = gg.scv(scvf.outsideScvs[0]);
        const bool leftInside = in.elementIndex == 0;
        FluxContext ctx;
        ctx.scvf = &scvf;
        ctx.inside = {leftInside ? left : right, leftInside ? &pl : &pr, in.center,
                      tpfaGeometricFactor(scvf, in.center, 1.0)};
        ctx.outside.push_back({leftInside ? right : left, leftInside ? &pr : &pl, out.center,
                               tpfaGeometricFactor(scvf, out.center, 1.0)});
        return ctx;
    }
};

EqVector eq1(double a) { EqVector v(1); v << a; return v; }
EqVector eq2(double a, double b) { EqVector v(2); v << a, b; return v; }

ElementParams isotropic(double k, double porosity = 0.4)
{
    ElementParams p;
    p.permeability = k*Tensor::Identity();
    p.porosity = porosity;
    return p;
}

} // end anonymous namespace

TEST_CASE("storage terms")
{
    const auto water = fluids::water();
    ElementParams p = isotropic(1e-12, 0.15);
    p.vg = {1e-2, 2.0};

    const TwoPModel twoP(water, fluids::nitrogenViscosity);
    const auto s = twoP.storage(p, eq2(1e5, 0.0));
    CHECK(s[0] == doctest::Approx(0.15*1000.0).epsilon(1e-15));
    CHECK(s[1] == 0.0);

    const TracerModel tracer(water, [](const Vec&) { return Vec::Zero(); });
    CHECK(tracer.storage(p, eq1(0.0))[0] == 0.0);

    ElementParams soil = isotropic(1e-12, 0.4);
    soil.vg = {2.956e-4, 2.0, 0.1};
    const RichardsModel richards(water, 1e5);
    const auto r = richards.storage(soil, eq2(1e5, 0.0));
    CHECK(r[0] == doctest::Approx(0.4*5.55e4).epsilon(1e-15));
    CHECK(r[1] == 0.0);
}

TEST_CASE("tpfa transmissibility kernels")
{
    const double t1 = 1.0*2e-12/0.5, t2 = 1.0*1e-12/0.5;
    CHECK(t1 == doctest::Approx(4e-12));
    CHECK(t2 == doctest::Approx(2e-12));
    CHECK(harmonicTransmissibility(t1, t2) == doctest::Approx(4.0/3.0*1e-12).epsilon(1e-14));
    CHECK(harmonicTransmissibility(t1, std::numeric_limits<double>::infinity()) == t1);

    TwoCells cells;
    const auto& scvf = cells.gg.scvf(cells.interiorScvf);
    CHECK(tpfaGeometricFactor(scvf, cells.gg.scv(0).center, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("single phase tpfa flux")
{
    const auto water = fluids::water();
    const OnePModel model(water);
    TwoCells cells;
    const auto pk = isotropic(1e-12);

    auto ctx = cells.context(eq1(2e5), eq1(2e5), pk, pk);
    CHECK(model.flux(ctx)[0] == 0.0);

    ctx = cells.context(eq1(2e5), eq1(1e5), pk, pk);
    // T = 1e-12, volumetric flux T dp / mu = 1e-4 m^3/s
    CHECK(model.flux(ctx)[0]/water.density == doctest::Approx(1e-4).epsilon(1e-12));

    // heterogeneous: harmonic transmissibility 4/3e-12
    const auto k2 = isotropic(2e-12), k1 = isotropic(1e-12);
    ctx = cells.context(eq1(2e5), eq1(1e5), k2, k1);
    CHECK(model.flux(ctx)[0]/water.density == doctest::Approx(4.0/3.0*1e-12*1e5/1e-3).epsilon(1e-12));
}

TEST_CASE("box flux is exact for affine pressure")
{
    const auto water = fluids::water();
    const OnePModel model(water);
    const auto mesh = std::make_shared<const Mesh>(
        perturbInteriorVertices(buildStructuredQuad(3, 3, Vec(0, 0, 0), Vec(1, 1, 0)), 0.25, 4u));
    const GridGeometry gg(mesh, Scheme::box);
    const double k = 3e-12;
    const auto params = isotropic(k);

    for (int e = 0; e < mesh->numElements(); ++e)
    {
        std::vector<EqVector> p, c;
        for (const auto& scv : gg.elementScvs(e))
        {
            p.push_back(eq1(scv.dofPosition.x()));
            c.push_back(eq1(5.0));
        }
        for (const auto& scvf : gg.elementScvfs(e))
        {
            if (scvf.boundary)
                continue;
            FluxContext ctx;
            ctx.scheme = Scheme::box;
            ctx.scvf = &scvf;
            ctx.elementParams = &params;
            ctx.insideLocal = gg.scv(scvf.insideScv).localIndex;
            ctx.outsideLocal = gg.scv(scvf.outsideScvs[0]).localIndex;
            ctx.elementValues = p;
            const double expected = -k/water.viscosity*scvf.unitOuterNormal.x()*scvf.area*water.density;
            CHECK(std::abs(model.flux(ctx)[0] - expected) <= 1e-12*std::abs(expected) + 1e-24);
            ctx.elementValues = c;
            // round-off of the basis gradient sum only
            CHECK(std::abs(model.flux(ctx)[0]) <= 1e-12*k/water.viscosity*water.density*scvf.area*5.0);
        }
    }
}

TEST_CASE("tracer fluxes")
{
    auto water = fluids::water();
    water.diffusion = 2e-9;
    TwoCells cells;
    const auto pk = isotropic(1e-12, 0.4);

    const TracerModel still(water, [](const Vec&) { return Vec::Zero(); });
    CHECK(still.flux(cells.context(eq1(0.3), eq1(0.3), pk, pk))[0] == 0.0);

    // pure diffusion between unit cells, geometric transmissibility harmonic(2, 2) = 1
    const double expected = water.molarDensity*0.4*2e-9*1.0;
    CHECK(still.flux(cells.context(eq1(1.0), eq1(0.0), pk, pk))[0] == doctest::Approx(expected).epsilon(1e-14));

    // upwinding: the inside (left) value is used for flow in +x, the outside for flow in -x
    water.diffusion = 0.0;
    const TracerModel right(water, [](const Vec&) { return Vec(1e-6, 0, 0); });
    const TracerModel left(water, [](const Vec&) { return Vec(-1e-6, 0, 0); });
    const auto ctx = cells.context(eq1(0.7), eq1(0.2), pk, pk);
    const double n = cells.gg.scvf(cells.interiorScvf).unitOuterNormal.x();
    const double q = 1e-6*n*water.molarDensity;
    CHECK(right.flux(ctx)[0] == doctest::Approx((n > 0 ? 0.7 : 0.2)*q));
    CHECK(left.flux(ctx)[0] == doctest::Approx(-(n > 0 ? 0.2 : 0.7)*q));
}

TEST_CASE("two-phase upwinding and antisymmetry")
{
    const auto water = fluids::water();
    const TwoPModel model(water, fluids::nitrogenViscosity);
    TwoCells cells;
    auto pa = isotropic(1e-12, 0.15);
    pa.vg = {1e-2, 2.0};
    auto pb = pa;
    pb.permeability *= 3.0;

    // water flows left to right: mobility of the left cell
    const auto ctx = cells.context(eq2(2e5, 0.6), eq2(1e5, 0.1), pa, pb);
    const double sw = 0.4;
    const double t = harmonicTransmissibility(2.0*1e-12, 2.0*3e-12);
    const double expectedWater = t*water.density*krw(pa.vg, sw)/water.viscosity*1e5;
    const double n = cells.gg.scvf(cells.interiorScvf).unitOuterNormal.x();
    CHECK(n > 0.0);
    CHECK(model.flux(ctx)[0] == doctest::Approx(expectedWater).epsilon(1e-12));

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> pDist(1e5, 3e5), sDist(0.0, 1.0);
    const Vec g(0, -9.81, 0);
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto a = eq2(pDist(rng), sDist(rng));
        const auto b = eq2(pDist(rng), sDist(rng));
        auto c0 = cells.context(a, b, pa, pb, cells.interiorScvf);
        c0.gravity = g;
        // the paired face seen from the right cell
        int paired = -1;
        for (const auto& scvf : cells.gg.elementScvfs(1))
            if (!scvf.boundary)
                paired = scvf.index;
        auto c1 = cells.context(a, b, pa, pb, paired);
        c1.gravity = g;
        const auto f0 = model.flux(c0), f1 = model.flux(c1);
        for (int eq = 0; eq < 2; ++eq)
            CHECK(std::abs(f0[eq] + f1[eq]) <= 1e-12*std::abs(f0[eq]) + 1e-20);
    }
}

TEST_CASE("xylem flux and root uptake")
{
    CHECK(xylemFlux(5.1e-17, 0.01, 1e4, 0.0, 1000.0, Vec::Zero(), Vec::Zero(), Vec(0, 0, -9.81))
          == doctest::Approx(5.1e-11).epsilon(1e-14));
    CHECK(xylemFlux(5.1e-17, 0.01, 1e5, 1e5, 1000.0, Vec(1, 0, 0), Vec(1.01, 0, 0), Vec(0, 0, -9.81)) == 0.0);
    // hydrostatic column: p_in - p_out = -rho g dz, upper point in
    const double dz = 0.02;
    const double pLow = 1e5, pHigh = pLow - 1000.0*9.81*dz;
    CHECK(std::abs(xylemFlux(5.1e-17, dz, pHigh, pLow, 1000.0, Vec(0, 0, 0), Vec(0, 0, -dz), Vec(0, 0, -9.81)))
          < 1e-25);

    CHECK(rootUptake(1e5, 1e5, 1e-3, 1.0, 2.04e-11, 5.55e4) == 0.0);
    const double q = rootUptake(1e5 + 1e4, 1e5, 1e-3, 1.0, 2.04e-11, 5.55e4);
    CHECK(q == doctest::Approx(-2.0*std::numbers::pi*1.1322e-5).epsilon(1e-12));
    CHECK(q == doctest::Approx(-7.114e-5).epsilon(1e-4));
    CHECK(rootUptake(2e5, 1e5, 1e-3, 0.5, 2.04e-11, 5.55e4) < 0.0);
}

TEST_CASE("missing boundary condition is an error")
{
    const auto problem = ProblemDefinition::withMarkers(1, {{0, BoundaryTypes::allDirichlet()}});
    CHECK_NOTHROW(problem.boundaryTypesAt(0, Vec::Zero()));
    try
    {
        problem.boundaryTypesAt(3, Vec::Zero());
        FAIL("expected an error");
    }
    catch (const ParameterError& e)
    {
        CHECK(std::string(e.what()).find("marker 3") != std::string::npos);
    }
}
