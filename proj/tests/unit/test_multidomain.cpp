#include <doctest.h>

#include <fervor/multidomain.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>

using namespace fervor;

namespace {

std::shared_ptr<const Mesh> unitQuads(int nx, int ny, double lx = 1.0, double ly = 1.0)
{
    return std::make_shared<const Mesh>(buildStructuredQuad(nx, ny, Vec(0, 0, 0), Vec(lx, ly, 0)));
}

Mesh segments(std::vector<Vec> points, std::vector<std::vector<int>> elements)
{
    return Mesh(2, 1, std::move(points), std::move(elements));
}

int vertexAt(const Mesh& mesh, const Vec& x)
{
    for (int v = 0; v < mesh.numVertices(); ++v)
        if ((mesh.vertex(v) - x).norm() < 1e-12)
            return v;
    return -1;
}

bool sameGlue(const Glue& a, const Glue& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        const auto& x = a.intersections[i];
        const auto& y = b.intersections[i];
        if (x.domainElement != y.domainElement || x.targetElements != y.targetElements)
            return false;
        if (std::abs(x.measure - y.measure) > 1e-12)
            return false;
    }
    return true;
}

ElementParams soilParams()
{
    ElementParams p;
    p.porosity = 0.4;
    p.permeability = 2.57e-12*Tensor::Identity();
    p.vg = {2.956e-4, 2.0, 0.1};
    return p;
}

ElementParams rootParams()
{
    ElementParams p;
    p.porosity = 1.0;
    p.permeability = 5.1e-17*Tensor::Identity();
    p.radius = 1e-3;
    return p;
}

} // end anonymous namespace

TEST_CASE("bounding box tree")
{
    const Mesh single(2, 2, {Vec(0, 0, 0), Vec(1, 0, 0), Vec(0, 1, 0)}, {{0, 1, 2}});
    const BoundingBoxTree one(single);
    CHECK(one.numNodes() == 1);
    CHECK(one.node(0).leaf());

    const auto mesh = perturbInteriorVertices(buildStructuredQuad(10, 10, Vec(0, 0, 0), Vec(1, 1, 0)), 0.2, 5u);
    const BoundingBoxTree tree(mesh);

    // every element in exactly one leaf, parents contain children, small leaves
    std::vector<int> count(mesh.numElements(), 0);
    for (int i = 0; i < tree.numNodes(); ++i)
    {
        const auto& node = tree.node(i);
        if (node.leaf())
        {
            CHECK(node.end - node.begin <= BoundingBoxTree::maxLeafSize);
            CHECK(node.end > node.begin);
            for (int k = node.begin; k < node.end; ++k)
            {
                const int e = tree.elementOrder()[k];
                ++count[e];
                CHECK(node.box.contains(tree.elementBox(e)));
            }
        }
        else
        {
            CHECK(node.box.contains(tree.node(node.left).box));
            CHECK(node.box.contains(tree.node(node.right).box));
        }
    }
    for (int c : count)
        CHECK(c == 1);

    Aabb far;
    far.expand(Vec(5, 5, 0));
    far.expand(Vec(6, 6, 0));
    CHECK(tree.query(far).empty());

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    for (int trial = 0; trial < 200; ++trial)
    {
        Aabb box;
        box.expand(Vec(u(rng), u(rng), 0));
        box.expand(Vec(u(rng), u(rng), 0));
        std::vector<int> brute;
        for (int e = 0; e < mesh.numElements(); ++e)
            if (elementBoundingBox(mesh, e).overlaps(box))
                brute.push_back(e);
        CHECK(tree.query(box) == brute);
    }
}

TEST_CASE("segment clipping against a convex polygon")
{
    const std::vector<Vec> square{Vec(0, 0, 0), Vec(1, 0, 0), Vec(1, 1, 0), Vec(0, 1, 0)};
    auto t = clipSegment(Vec(-1, 0.5, 0), Vec(2, 0.5, 0), square);
    REQUIRE(t);
    CHECK((*t)[0] == doctest::Approx(1.0/3.0));
    CHECK((*t)[1] == doctest::Approx(2.0/3.0));
    CHECK_FALSE(clipSegment(Vec(2, 0, 0), Vec(3, 1, 0), square));
    // touching a corner only
    CHECK_FALSE(clipSegment(Vec(1, 1, 0), Vec(2, 2, 0), square));
    // lying on an edge counts as inside
    t = clipSegment(Vec(1, 0.2, 0), Vec(1, 0.7, 0), square);
    REQUIRE(t);
    CHECK((*t)[1] - (*t)[0] == doctest::Approx(1.0));
}

TEST_CASE("glue examples")
{
    const auto bulk = unitQuads(2, 1);
    const auto net = segments({Vec(0.25, 0.5, 0), Vec(0.75, 0.5, 0)}, {{0, 1}});
    const auto glue = computeGlue(net, *bulk);
    REQUIRE(glue.size() == 2);
    CHECK(glue.intersections[0].measure == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(glue.intersections[1].measure == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(glue.intersections[0].targetElements == std::vector<int>{0});
    CHECK(glue.intersections[1].targetElements == std::vector<int>{1});

    const auto netMesh = std::make_shared<const Mesh>(net);
    const GridGeometry ggNet(netMesh, Scheme::tpfa), ggBulk(bulk, Scheme::tpfa);
    const auto st = couplingStencilsFromGlue(glue, ggNet, ggBulk);
    CHECK(st.networkToBulk[0] == std::vector<int>{0, 1});
    CHECK(st.bulkToNetwork[0] == std::vector<int>{0});
    CHECK(st.bulkToNetwork[1] == std::vector<int>{0});

    const auto onFacet = segments({Vec(0.5, 0.2, 0), Vec(0.5, 0.8, 0)}, {{0, 1}});
    const auto g2 = computeGlue(onFacet, *bulk);
    REQUIRE(g2.size() == 1);
    CHECK(g2.intersections[0].numTargetNeighbors() == 2);
    CHECK(g2.intersections[0].targetElements == std::vector<int>{0, 1});
    CHECK(g2.intersections[0].measure == doctest::Approx(0.6).epsilon(1e-14));

    const auto disjoint = segments({Vec(3, 3, 0), Vec(4, 3, 0)}, {{0, 1}});
    const auto g3 = computeGlue(disjoint, *bulk);
    CHECK(g3.empty());
    const auto empty = couplingStencilsFromGlue(g3, GridGeometry(std::make_shared<const Mesh>(disjoint), Scheme::tpfa),
                                                ggBulk);
    for (const auto& v : empty.bulkToNetwork)
        CHECK(v.empty());
    CHECK(empty.networkToBulk[0].empty());

    const auto box1 = unitQuads(1, 1);
    const auto g4 = computeGlue(net, *box1);
    const auto stBox = couplingStencilsFromGlue(g4, ggNet, GridGeometry(box1, Scheme::box));
    CHECK(stBox.networkToBulk[0] == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("bvh glue equals brute force glue")
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.1, 1.1);
    std::uniform_int_distribution<int> grid(0, 8);
    for (int trial = 0; trial < 30; ++trial)
    {
        const bool perturbed = trial % 2 == 0;
        auto mesh = buildStructuredQuad(8, 8, Vec(0, 0, 0), Vec(1, 1, 0));
        if (perturbed)
            mesh = perturbInteriorVertices(mesh, 0.15, static_cast<unsigned>(trial));
        std::vector<Vec> pts;
        std::vector<std::vector<int>> elems;
        for (int s = 0; s < 12; ++s)
        {
            if (!perturbed && s % 3 == 0)
            {
                // along grid lines to hit shared facets
                const double c = grid(rng)/8.0;
                pts.push_back(Vec(c, u(rng), 0));
                pts.push_back(Vec(c, u(rng), 0));
            }
            else
            {
                pts.push_back(Vec(u(rng), u(rng), 0));
                pts.push_back(Vec(u(rng), u(rng), 0));
            }
            elems.push_back({2*s, 2*s + 1});
        }
        const auto net = segments(pts, elems);
        const auto a = computeGlue(net, mesh);
        const auto b = computeGlueBruteForce(net, mesh);
        CHECK(sameGlue(a, b));

        // clipped lengths add up to the part of each segment inside [0,1]^2
        std::vector<double> covered(net.numElements(), 0.0);
        for (const auto& is : a.intersections)
            covered[is.domainElement] += is.measure;
        const std::vector<Vec> square{Vec(0, 0, 0), Vec(1, 0, 0), Vec(1, 1, 0), Vec(0, 1, 0)};
        for (int s = 0; s < net.numElements(); ++s)
        {
            const Vec& p = net.vertex(2*s);
            const Vec& q = net.vertex(2*s + 1);
            const auto t = clipSegment(p, q, square);
            const double inside = t ? ((*t)[1] - (*t)[0])*(q - p).norm() : 0.0;
            CHECK(std::abs(covered[s] - inside) < 1e-12);
        }
    }
}

TEST_CASE("stencil reciprocity")
{
    const auto bulk = std::make_shared<const Mesh>(
        perturbInteriorVertices(buildStructuredQuad(6, 6, Vec(0, 0, 0), Vec(1, 1, 0)), 0.2, 8u));
    const auto net = std::make_shared<const Mesh>(
        segments({Vec(0.1, 0.1, 0), Vec(0.5, 0.55, 0), Vec(0.9, 0.3, 0), Vec(0.45, 0.95, 0)},
                 {{0, 1}, {1, 2}, {1, 3}}));
    const auto glue = computeGlue(*net, *bulk);
    const GridGeometry ggNet(net, Scheme::tpfa);
    for (Scheme scheme : {Scheme::tpfa, Scheme::box})
    {
        const GridGeometry ggBulk(bulk, scheme);
        const auto st = couplingStencilsFromGlue(glue, ggNet, ggBulk);
        std::set<std::pair<int, int>> a, b;
        for (int s = 0; s < net->numElements(); ++s)
        {
            CHECK(std::is_sorted(st.networkToBulk[s].begin(), st.networkToBulk[s].end()));
            for (int d : st.networkToBulk[s])
                a.insert({s, d});
        }
        for (int e = 0; e < bulk->numElements(); ++e)
            for (int s : st.bulkToNetwork[e])
                for (const auto& scv : ggBulk.elementScvs(e))
                    b.insert({s, scv.dofIndex});
        CHECK(a == b);
    }
}

TEST_CASE("facet coupling fluxes")
{
    const auto bulkMesh = unitQuads(2, 1, 2.0, 1.0);
    const GridGeometry bulk(bulkMesh, Scheme::tpfa);
    const auto fracMesh = std::make_shared<const Mesh>(segments({Vec(1, 0, 0), Vec(1, 1, 0)}, {{0, 1}}));
    const GridGeometry frac(fracMesh, Scheme::tpfa);
    const std::array<int, 2> fv{vertexAt(*bulkMesh, Vec(1, 0, 0)), vertexAt(*bulkMesh, Vec(1, 1, 0))};
    const int facet = *bulkMesh->findFacet(fv);

    ElementParams pb;
    pb.porosity = 0.15;
    pb.permeability = 1e-12*Tensor::Identity();
    pb.vg = {5e-4, 2.0};
    ElementParams pf = pb;
    pf.permeability = 1e-16*Tensor::Identity();
    pf.vg = {1e-2, 2.0};
    pf.extrusion = 0.05;
    const SpatialParams bulkParams(2, pb), fracParams(1, pf);
    const TwoPModel model(fluids::water(), fluids::nitrogenViscosity);

    FacetCouplingManager blocking(bulk, bulkParams, frac, fracParams, model, {facet},
                                        {FractureMode::blocking}, Vec::Zero());
    Vector ub(4), uf(2);
    ub << 2e5, 0.3, 1e5, 0.1;
    uf << 1.5e5, 0.2;
    blocking.setSolution({&ub, &uf});

    std::vector<int> coupled;
    for (int i = 0; i < bulk.numScvf(); ++i)
        if (bulk.scvf(i).facetIndex == facet)
            coupled.push_back(i);
    REQUIRE(coupled.size() == 2);
    const auto& scvf = bulk.scvf(coupled[0]);
    CHECK(blocking.interfaceTransmissibility(scvf)/(scvf.area*pb.extrusion)
          == doctest::Approx(4e-15).epsilon(1e-14));

    // matched phase pressures, no gravity: no flux
    ElementParams pfSame = pf;
    pfSame.vg = pb.vg;
    const SpatialParams sameParams(1, pfSame);
    FacetCouplingManager matched(bulk, bulkParams, frac, sameParams, model, {facet}, {FractureMode::blocking},
                                 Vec::Zero());
    Vector same(4), sameF(2);
    same << 1.5e5, 0.2, 1.5e5, 0.2;
    sameF << 1.5e5, 0.2;
    for (int i : coupled)
        CHECK(matched.interfaceFlux(bulk.scvf(i), same, sameF).norm() == 0.0);

    for (const auto* mode : {&blocking})
    {
        std::vector<EqVector> res{zeroEq(2)};
        mode->addCouplingResidual(1, 0, uf, res, {});
        EqVector sum = zeroEq(2);
        for (int i : coupled)
            sum += *mode->couplingFlux(0, bulk.scvf(i), ub, {});
        for (int eq = 0; eq < 2; ++eq)
            CHECK(std::abs(res[0][eq] + sum[eq]) <= 1e-12*std::abs(sum[eq]));
    }

    // conductive interface is much stiffer than the bulk half transmissibility
    const FacetCouplingManager conductive(bulk, bulkParams, frac, fracParams, model, {facet},
                                          {FractureMode::conductive}, Vec::Zero());
    const double tb = tpfaGeometricFactor(scvf, bulk.scv(scvf.insideScv).center, 1.0)*1e-12;
    CHECK(conductive.interfaceTransmissibility(scvf) == doctest::Approx(1e4*tb).epsilon(1e-14));

    CHECK(blocking.couplingStencil(0, 0, 1).size() == 1);
    CHECK(blocking.couplingStencil(1, 0, 0).size() == 2);
    CHECK(blocking.couplingStencil(0, 0, 0).empty());

    CHECK_THROWS_AS(FacetCouplingManager(bulk, bulkParams, frac, fracParams, model, {-1}, {}, Vec::Zero()),
                    GeometryError);
}

TEST_CASE("embedded exchange")
{
    const auto water = fluids::water();
    const RichardsModel richards(water);
    const auto soilMesh = unitQuads(2, 1);
    const SpatialParams soilP(2, soilParams());

    for (Scheme scheme : {Scheme::tpfa, Scheme::box})
    {
        const GridGeometry soil(soilMesh, scheme);
        const auto rootMesh = std::make_shared<const Mesh>(
            segments({Vec(0.1, 0.5, 0), Vec(0.3, 0.5, 0), Vec(0.9, 0.5, 0)}, {{0, 1}, {1, 2}}));
        const GridGeometry root(rootMesh, Scheme::tpfa);
        const SpatialParams rootP(2, rootParams());
        EmbeddedCouplingManager mgr(soil, soilP, richards, root, rootP, 2.04e-11,
                                          computeGlue(*rootMesh, *soilMesh));
        CHECK(mgr.segmentsOutsideBulk().empty());

        Vector us = Vector::Constant(2*soil.numDofs(), 0.0);
        for (int d = 0; d < soil.numDofs(); ++d)
            us[2*d] = 9e4;
        Vector ur(4);
        ur << 9e4, 0.0, 9e4, 0.0;
        mgr.setSolution({&us, &ur});
        CHECK(mgr.totalExchange(us, ur) == 0.0);

        ur << 5e4, 0.0, 5e4, 0.0;
        const double sw = richards.saturation(soilParams(), 9e4);
        const double qLine = rootUptake(9e4, 5e4, 1e-3, krw(soilParams().vg, sw), 2.04e-11, water.molarDensity);
        const auto seg = mgr.segmentExchanges(us, ur);
        // segment 0 inside cell 0; segment 1 split 0.2 / 0.4 between the cells
        CHECK(seg[0] == doctest::Approx(qLine*0.2).epsilon(1e-12));
        CHECK(seg[1] == doctest::Approx(qLine*0.6).epsilon(1e-12));
        const auto pairs = mgr.pairExchanges(us, ur);
        REQUIRE(pairs.size() == 3);
        CHECK(pairs[2]/pairs[1] == doctest::Approx(2.0).epsilon(1e-12));

        // antisymmetry of the assembled coupling sources
        double soilTotal = 0.0, rootTotal = 0.0;
        for (int e = 0; e < 2; ++e)
        {
            std::vector<EqVector> res(soil.elementScvs(e).size(), zeroEq(2));
            mgr.addCouplingResidual(0, e, us, res, {});
            for (const auto& r : res)
            {
                soilTotal -= r[0];
                CHECK(r[1] == 0.0);
            }
            std::vector<EqVector> rr{zeroEq(2)};
            mgr.addCouplingResidual(1, e, ur, rr, {});
            rootTotal -= rr[0][0];
            CHECK(rr[0][1] == 0.0);
        }
        CHECK(std::abs(soilTotal - qLine*0.8) <= 1e-12*std::abs(qLine*0.8));
        CHECK(std::abs(soilTotal + rootTotal) <= 1e-12*std::abs(soilTotal));
    }

    // part of the network outside the soil is reported and dropped
    const GridGeometry soil(soilMesh, Scheme::tpfa);
    const auto outMesh = std::make_shared<const Mesh>(segments({Vec(0.5, 0.5, 0), Vec(1.5, 0.5, 0)}, {{0, 1}}));
    const GridGeometry root(outMesh, Scheme::tpfa);
    const SpatialParams rootP(1, rootParams());
    const EmbeddedCouplingManager mgr(soil, soilP, richards, root, rootP, 2.04e-11, computeGlue(*outMesh, *soilMesh));
    CHECK(mgr.segmentsOutsideBulk() == std::vector<int>{0});
    CHECK(mgr.droppedLength() == doctest::Approx(0.5).epsilon(1e-12));
}

namespace {

//! 1D single-phase column [0,1] with a Dirichlet condition on one end
struct Column
{
    std::shared_ptr<const Mesh> mesh;
    GridGeometry gg;
    SpatialParams params;
    ProblemDefinition problem;

    Column(double pD, bool left, int n = 10)
    : mesh(std::make_shared<const Mesh>(Mesh(2, 1, line(n), cells(n), {},
                                             [](const Vec& x, std::span<const int>) { return x.x() < 0.5 ? 0 : 1; })))
    , gg(mesh, Scheme::tpfa)
    , params(n, ElementParams{0.2, 1e-12*Tensor::Identity()})
    {
        problem = ProblemDefinition::withMarkers(1, {{left ? 0 : 1, BoundaryTypes::allDirichlet()},
                                                     {left ? 1 : 0, BoundaryTypes::allNeumann()}});
        problem.dirichlet = [pD](const Vec&, double) { EqVector v(1); v << pD; return v; };
        problem.initial = [](const Vec&) { EqVector v(1); v << 1.5e5; return v; };
    }

    static std::vector<Vec> line(int n)
    {
        std::vector<Vec> p;
        for (int i = 0; i <= n; ++i)
            p.push_back(Vec(static_cast<double>(i)/n, 0, 0));
        return p;
    }
    static std::vector<std::vector<int>> cells(int n)
    {
        std::vector<std::vector<int>> c;
        for (int i = 0; i < n; ++i)
            c.push_back({i, i + 1});
        return c;
    }
};

} // end anonymous namespace

TEST_CASE("uncoupled block system equals independent solves")
{
    const OnePModel model(fluids::water(), 4.5e-10);
    Column a(2e5, true), b(1e5, false);
    Assembler aa(a.gg, model, a.problem, a.params), ab(b.gg, model, b.problem, b.params);

    Vector ua = aa.initialSolution(), ub = ab.initialSolution();
    {
        const Vector none;
        DomainSystem sa(aa, ua, {}), sb(ab, ub, {});
        REQUIRE(newtonSolve(sa, ua).converged);
        REQUIRE(newtonSolve(sb, ub).converged);
    }

    UncoupledManager none(2);
    MultiDomainAssembler md({&aa, &ab}, none);
    Vector u = md.join({aa.initialSolution(), ab.initialSolution()});
    const Vector old = u;
    const auto sys = md.assemble(u, md.split(old), {});
    CHECK(sys.blocks[0][1].nonZeros() == 0);
    CHECK(sys.blocks[1][0].nonZeros() == 0);
    MultiDomainSystem system(md, old, {});
    REQUIRE(newtonSolve(system, u).converged);
    const auto blocks = md.split(u);
    CHECK((blocks[0] - ua).cwiseAbs().maxCoeff() <= 1e-12*ua.cwiseAbs().maxCoeff());
    CHECK((blocks[1] - ub).cwiseAbs().maxCoeff() <= 1e-12*ub.cwiseAbs().maxCoeff());
}

TEST_CASE("point coupled columns")
{
    const OnePModel model(fluids::water(), 4.5e-10);
    Column a(2e5, true), b(1e5, false);
    Assembler aa(a.gg, model, a.problem, a.params), ab(b.gg, model, b.problem, b.params);
    const double c = 1e-4, vol = 0.1;
    PointExchangeManager mgr(5, 4, c, vol);
    MultiDomainAssembler md({&aa, &ab}, mgr);

    Vector u = md.join({aa.initialSolution(), ab.initialSolution()});
    u[5] = 1.7e5;
    u[10 + 4] = 1.2e5;
    const auto sys = md.assemble(u, md.split(u), {});
    CHECK(sys.blocks[0][0].rows() == 10);
    CHECK(sys.blocks[0][1].rows() == 10);
    CHECK(sys.blocks[0][1].cols() == 10);
    REQUIRE(sys.blocks[0][1].nonZeros() == 1);
    REQUIRE(sys.blocks[1][0].nonZeros() == 1);
    CHECK(std::abs(sys.blocks[0][1].coeff(5, 4) - (-c*vol)) <= 1e-5*c*vol);
    CHECK(std::abs(sys.blocks[1][0].coeff(4, 5) - (-c*vol)) <= 1e-5*c*vol);
    const auto m = sys.monolithicMatrix();
    CHECK(m.rows() == 20);
    CHECK(m.coeff(5, 14) != 0.0);
    CHECK(m.coeff(14, 5) != 0.0);

    // the manager sees the block state after assembly, not a perturbed copy
    CHECK(mgr.exchange() == doctest::Approx(c*vol*(1.7e5 - 1.2e5)).epsilon(1e-14));

    MultiDomainSystem system(md, u, {});
    const auto report = newtonSolve(system, u);
    CHECK(report.converged);
    CHECK(report.iterations <= 8);
    CHECK(system.residual(u).cwiseAbs().maxCoeff() < 1e-10);
    // exchange balances: what leaves column a enters column b
    md.setState(u);
    CHECK(mgr.exchange() > 0.0);
}

TEST_CASE("embedded coupled jacobian blocks")
{
    const auto water = fluids::water();
    const RichardsModel richards(water);
    const XylemModel xylem(water);
    const auto soilMesh = std::make_shared<const Mesh>(
        perturbInteriorVertices(buildStructuredQuad(4, 4, Vec(0, 0, 0), Vec(0.1, 0.1, 0)), 0.15, 4u));
    const auto rootMesh = std::make_shared<const Mesh>(
        segments({Vec(0.05, 0.1, 0), Vec(0.05, 0.06, 0), Vec(0.03, 0.02, 0), Vec(0.08, 0.03, 0)},
                 {{0, 1}, {1, 2}, {1, 3}}));
    const SpatialParams soilP(soilMesh->numElements(), soilParams());
    const SpatialParams rootP(rootMesh->numElements(), rootParams());
    auto soilProblem = ProblemDefinition::withMarkers(2, {{0, BoundaryTypes::allNeumann()},
                                                          {1, BoundaryTypes::allNeumann()},
                                                          {2, BoundaryTypes::allNeumann()},
                                                          {3, BoundaryTypes::allNeumann()}});
    soilProblem.initial = [](const Vec& x) { EqVector v(2); v << 9e4 - 1e4*x.y(), 0.0; return v; };
    auto rootProblem = ProblemDefinition::withMarkers(2, {});
    rootProblem.boundaryTypes = [](int, const Vec&) { return std::optional(BoundaryTypes::allNeumann()); };
    rootProblem.initial = [](const Vec&) { EqVector v(2); v << 3e4, 0.0; return v; };

    for (Scheme scheme : {Scheme::tpfa, Scheme::box})
    {
        const GridGeometry soil(soilMesh, scheme);
        const GridGeometry root(rootMesh, Scheme::tpfa);
        const Vec g(0, -9.81, 0);
        Assembler as(soil, richards, soilProblem, soilP, g), ar(root, xylem, rootProblem, rootP, g);
        EmbeddedCouplingManager mgr(soil, soilP, richards, root, rootP, 2.04e-11, computeGlue(*rootMesh, *soilMesh));
        MultiDomainAssembler md({&as, &ar}, mgr);

        Vector u = md.join({as.initialSolution(), ar.initialSolution()});
        const auto oldBlocks = md.split(u);
        const TimeContext tc{60.0, 60.0};
        const auto sys = md.assemble(u, oldBlocks, tc);

        // pattern of C_ij within the coupling stencil
        for (int i = 0; i < 2; ++i)
        {
            const int j = 1 - i;
            const auto& c = sys.blocks[i][j];
            const auto& ai = md.assembler(i);
            const int neqI = ai.numEq(), neqJ = md.assembler(j).numEq();
            std::set<std::pair<int, int>> allowed;
            for (int e = 0; e < ai.gridGeometry().mesh().numElements(); ++e)
                for (int row : ai.elementDofs(e))
                    for (int col : mgr.couplingStencil(i, e, j))
                        allowed.insert({row, col});
            for (int row = 0; row < c.outerSize(); ++row)
                for (SparseMatrix::InnerIterator it(c, row); it; ++it)
                    if (it.value() != 0.0)
                        CHECK(allowed.count({row/neqI, static_cast<int>(it.col())/neqJ}) == 1);
            CHECK(c.nonZeros() > 0);
        }

        // C_ij against a central difference of the full residual
        const Vector r0 = md.residual(u, oldBlocks, tc);
        const SparseMatrix m = sys.monolithicMatrix();
        const int col = md.offset(1) + 2*1;
        Vector up = u, dn = u;
        const double h = 1.0;
        up[col] += h;
        dn[col] -= h;
        const Vector dr = (md.residual(up, oldBlocks, tc) - md.residual(dn, oldBlocks, tc))/(2*h);
        const Vector fromMatrix = m.col(col);
        CHECK((dr - fromMatrix).cwiseAbs().maxCoeff() <= 1e-5*dr.cwiseAbs().maxCoeff());
        CHECK(r0.allFinite());

        // total coupled water source over both domains vanishes
        md.setState(u);
        const auto blocks = md.split(u);
        double total = 0.0, scale = 0.0;
        for (int e = 0; e < soilMesh->numElements(); ++e)
        {
            std::vector<EqVector> res(soil.elementScvs(e).size(), zeroEq(2));
            mgr.addCouplingResidual(0, e, blocks[0], res, tc);
            for (const auto& r : res)
            {
                total += r[0];
                scale += std::abs(r[0]);
            }
        }
        for (int s = 0; s < rootMesh->numElements(); ++s)
        {
            std::vector<EqVector> res{zeroEq(2)};
            mgr.addCouplingResidual(1, s, blocks[1], res, tc);
            total += res[0][0];
        }
        CHECK(scale > 0.0);
        CHECK(std::abs(total) <= 1e-12*scale);

        // one coupled implicit step converges
        MultiDomainSystem system(md, u, tc);
        const auto report = newtonSolve(system, u);
        CHECK(report.converged);
        CHECK(report.iterations <= 8);
    }
}
