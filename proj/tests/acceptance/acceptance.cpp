#include <fervor/scenarios.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

using namespace fervor;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string sci(double v)
{
    std::ostringstream s;
    s << std::setprecision(3) << std::scientific << v;
    return s.str();
}

// ---------------------------------------------------------------------------
// 1: scv partition and scvf closure

Outcome geometryInvariants()
{
    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> cells(2, 12), kind(0, 2);
    std::uniform_real_distribution<double> extent(0.5, 20.0);
    double worstPartition = 0.0, worstClosure = 0.0;
    for (int trial = 0; trial < 50; ++trial)
    {
        const int nx = cells(rng), ny = cells(rng);
        const Vec upper(extent(rng), extent(rng), 0.0);
        const int k = kind(rng);
        Mesh mesh = k == 2 ? buildStructuredTriangles(nx, ny, Vec::Zero(), upper)
                           : buildStructuredQuad(nx, ny, Vec::Zero(), upper);
        if (k >= 1)
            mesh = perturbInteriorVertices(mesh, 0.2, static_cast<unsigned>(trial));
        const auto ptr = std::make_shared<const Mesh>(std::move(mesh));
        const double domain = upper.x()*upper.y();

        for (const Scheme scheme : {Scheme::tpfa, Scheme::box})
        {
            const GridGeometry gg(ptr, scheme);
            double total = 0.0;
            for (int e = 0; e < ptr->numElements(); ++e)
            {
                double vol = 0.0;
                for (const auto& scv : gg.elementScvs(e))
                    vol += scv.volume;
                total += vol;
                worstPartition = std::max(worstPartition, std::abs(vol - ptr->elementMeasure(e))/ptr->elementMeasure(e));
            }
            worstPartition = std::max(worstPartition, std::abs(total - domain)/domain);

            std::vector<Vec> closure(gg.numDofs(), Vec::Zero());
            std::vector<double> scale(gg.numDofs(), 0.0);
            for (int f = 0; f < gg.numScvf(); ++f)
            {
                const auto& scvf = gg.scvf(f);
                const int in = gg.scv(scvf.insideScv).dofIndex;
                closure[in] += scvf.area*scvf.unitOuterNormal;
                scale[in] += scvf.area;
                if (scheme == Scheme::box && !scvf.boundary)
                {
                    const int out = gg.scv(scvf.outsideScvs[0]).dofIndex;
                    closure[out] -= scvf.area*scvf.unitOuterNormal;
                    scale[out] += scvf.area;
                }
            }
            for (int d = 0; d < gg.numDofs(); ++d)
                worstClosure = std::max(worstClosure, closure[d].norm()/scale[d]);
        }
    }
    return {worstPartition <= 1e-12 && worstClosure <= 1e-12,
            "max partition error " + sci(worstPartition) + ", max closure error " + sci(worstClosure)};
}

// ---------------------------------------------------------------------------
// 2: numeric Jacobian against a central-difference oracle

Outcome jacobianOracle()
{
    const TwoPModel model(fluids::water(), fluids::nitrogenViscosity);
    auto problem = ProblemDefinition::withMarkers(2, {{0, BoundaryTypes::allDirichlet()},
                                                     {1, BoundaryTypes::allNeumann()},
                                                     {2, BoundaryTypes::allNeumann()},
                                                     {3, BoundaryTypes::allNeumann()}});
    problem.dirichlet = [](const Vec&, double) { EqVector v(2); v << 2e5, 0.3; return v; };
    const Vec gravity(0, -9.81, 0);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pDist(1.5e5, 2.5e5), sDist(0.05, 0.9);
    double worst = 0.0;
    for (const Scheme scheme : {Scheme::tpfa, Scheme::box})
    {
        const auto mesh = std::make_shared<const Mesh>(buildStructuredQuad(4, 4, Vec::Zero(), Vec(4, 4, 0)));
        const GridGeometry gg(mesh, scheme);
        ElementParams p;
        p.porosity = 0.15;
        p.permeability = rotatedPermeability(1e-12, 0.15, -25.0).toWorld();
        p.vg = {1e-3, 3.0};
        const SpatialParams params(mesh->numElements(), p);
        const Assembler assembler(gg, model, problem, params, gravity);
        Assembler oracle(gg, model, problem, params, gravity);
        oracle.setDifferencing({Differencing::central, 1e-6});

        for (int state = 0; state < 20; ++state)
        {
            Vector u(assembler.size());
            for (int dof = 0; dof < assembler.numDofs(); ++dof)
            {
                u[2*dof] = pDist(rng);
                u[2*dof + 1] = sDist(rng);
            }
            const Vector uOld = u + Vector::Constant(u.size(), 1e-3);
            const TimeContext tc{10.0, 10.0};
            Vector w = u;
            const Eigen::MatrixXd forward(assembler.jacobian(w, uOld, tc));
            const Eigen::MatrixXd central(oracle.jacobian(w, uOld, tc));
            // entries relative to the largest entry of their column
            for (int j = 0; j < central.cols(); ++j)
            {
                const double scale = central.col(j).cwiseAbs().maxCoeff();
                if (scale > 0.0)
                    worst = std::max(worst, (forward.col(j) - central.col(j)).cwiseAbs().maxCoeff()/scale);
            }
        }
    }
    return {worst < 1e-5, "max relative entry error " + sci(worst) + " over 2 x 20 states"};
}

// ---------------------------------------------------------------------------
// 3, 4: convergence study

Outcome convergenceOrders()
{
    ParameterTree p;
    p.set("Convergence.Case", "structured");
    p.set("Output.Enabled", "false");
    bool pass = true;
    std::string detail;
    for (const auto& r : runConvergence(p))
    {
        double minOrder = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < r.levels.size(); ++i)
            minOrder = std::min(minOrder, r.levels[i].order);
        pass = pass && r.levels.size() == 4 && minOrder >= 1.9;
        detail += std::string(detail.empty() ? "" : ", ") + toString(r.scheme) + " min order " + sci(minOrder);
    }
    return {pass, detail};
}

Outcome schemeContrast()
{
    ParameterTree p;
    p.set("Convergence.Case", "rotated");
    p.set("Convergence.Levels", "16 32 64");
    p.set("Output.Enabled", "false");
    bool boxDecreasing = false;
    double tpfaRatio = 0.0;
    for (const auto& r : runConvergence(p))
    {
        if (r.scheme == Scheme::box)
        {
            boxDecreasing = r.levels.size() == 3;
            for (std::size_t i = 1; i < r.levels.size(); ++i)
                boxDecreasing = boxDecreasing && r.levels[i].error < r.levels[i - 1].error;
        }
        else
            tpfaRatio = r.levels.back().error/r.levels[r.levels.size() - 2].error;
    }
    return {boxDecreasing && tpfaRatio > 0.7,
            std::string("box error decreasing: ") + (boxDecreasing ? "yes" : "no") + ", tpfa finest ratio "
                + sci(tpfaRatio)};
}

// ---------------------------------------------------------------------------
// 5: bvh glue against brute force

Outcome glueEquivalence()
{
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> cells(3, 10), numSegments(5, 40), kind(0, 2);
    std::uniform_real_distribution<double> coord(-0.2, 1.2), unit(0.0, 1.0);
    int mismatches = 0, total = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial)
    {
        const int nx = cells(rng), ny = cells(rng);
        const int k = kind(rng);
        Mesh bulk = k == 2 ? buildStructuredTriangles(nx, ny, Vec::Zero(), Vec(1, 1, 0))
                           : buildStructuredQuad(nx, ny, Vec::Zero(), Vec(1, 1, 0));
        if (k == 1)
            bulk = perturbInteriorVertices(bulk, 0.15, static_cast<unsigned>(trial));

        std::vector<Vec> pts;
        std::vector<std::vector<int>> elems;
        const int ns = numSegments(rng);
        for (int s = 0; s < ns; ++s)
        {
            if (k == 0 && s % 4 == 0)
            {
                // on a grid line so that shared facets are hit
                const double x = std::floor(unit(rng)*nx)/nx;
                pts.push_back(Vec(x, coord(rng), 0));
                pts.push_back(Vec(x, coord(rng), 0));
            }
            else
            {
                pts.push_back(Vec(coord(rng), coord(rng), 0));
                pts.push_back(Vec(coord(rng), coord(rng), 0));
            }
            elems.push_back({2*s, 2*s + 1});
        }
        const Mesh network(2, 1, std::move(pts), std::move(elems));
        const auto a = computeGlue(network, bulk);
        const auto b = computeGlueBruteForce(network, bulk);
        ++total;
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
        {
            const auto& x = a.intersections[i];
            const auto& y = b.intersections[i];
            same = x.domainElement == y.domainElement && x.targetElements == y.targetElements
                   && x.corners.size() == y.corners.size();
            worst = std::max(worst, std::abs(x.measure - y.measure));
            same = same && std::abs(x.measure - y.measure) <= 1e-12;
        }
        mismatches += !same;
    }
    return {mismatches == 0, std::to_string(total - mismatches) + "/" + std::to_string(total)
                                 + " identical, max measure difference " + sci(worst)};
}

// ---------------------------------------------------------------------------
// 6: conservation audits

double tracerBalance(Scheme scheme)
{
    auto water = fluids::water();
    water.diffusion = 1e-9;
    const Vec velocity(1e-5, 2e-6, 0.0);
    const TracerModel model(water, [velocity](const Vec&) { return velocity; });
    const double rhoM = water.molarDensity;

    ProblemDefinition problem;
    if (scheme == Scheme::tpfa)
    {
        // all faces enter the boundary flux audit
        problem = ProblemDefinition::withMarkers(1, {{0, BoundaryTypes::allDirichlet()},
                                                    {1, BoundaryTypes::allDirichlet()},
                                                    {2, BoundaryTypes::allDirichlet()},
                                                    {3, BoundaryTypes::allDirichlet()}});
        problem.dirichlet = [](const Vec& x, double) { return EqVector::Constant(1, x.x() < 1e-12 ? 1.0 : 0.0); };
    }
    else
    {
        // box: Neumann faces only, inflow x = 1 on the left, advective outflow elsewhere
        problem = ProblemDefinition::withMarkers(1, {{0, BoundaryTypes::allNeumann()},
                                                    {1, BoundaryTypes::allNeumann()},
                                                    {2, BoundaryTypes::allNeumann()},
                                                    {3, BoundaryTypes::allNeumann()}});
        problem.neumann = [=](int marker, const Vec&, double, const EqVector& inside) {
            switch (marker)
            {
                case 0: return EqVector::Constant(1, -velocity.x()*rhoM);
                case 1: return EqVector::Constant(1, inside[0]*velocity.x()*rhoM);
                case 3: return EqVector::Constant(1, inside[0]*velocity.y()*rhoM);
                default: return EqVector::Constant(1, 0.0);
            }
        };
    }
    problem.source = [](const Vec& x, double, const EqVector&) {
        return EqVector::Constant(1, x.x() < 0.5 && x.y() > 0.5 ? 1e-3 : 0.0);
    };
    problem.initial = [](const Vec&) { return EqVector::Constant(1, 0.0); };

    const auto mesh = std::make_shared<const Mesh>(
        perturbInteriorVertices(buildStructuredQuad(12, 12, Vec::Zero(), Vec(1, 1, 0)), 0.2, 9u));
    const GridGeometry gg(mesh, scheme);
    ElementParams p;
    p.porosity = 0.3;
    const SpatialParams params(mesh->numElements(), p);
    const Assembler assembler(gg, model, problem, params);

    Vector u = assembler.initialSolution();
    TimeLoopOptions opt;
    opt.tEnd = 2e4;
    opt.dtInitial = 500.0;
    opt.dtMax = 2000.0;
    double worst = 0.0;
    runTransient(assembler, u, opt, {}, [&](const StepReport& rep, const Vector& oldU, const Vector& newU) {
        const double dm = (assembler.totalStorage(newU) - assembler.totalStorage(oldU))[0];
        const double out = rep.dt*assembler.boundaryOutflow(newU, rep.time)[0];
        const double src = rep.dt*assembler.totalSource(newU, rep.time)[0];
        const double scale = std::max({std::abs(dm), std::abs(out), std::abs(src)});
        worst = std::max(worst, std::abs(dm + out - src)/scale);
    });
    return worst;
}

double embeddedExchangeSum(Scheme scheme)
{
    auto water = fluids::water();
    const RichardsModel soilModel(water);
    const XylemModel rootModel(water);
    const auto soilMesh = std::make_shared<const Mesh>(
        buildStructuredQuad(16, 16, Vec(0, -0.1, 0), Vec(0.1, 0, 0)));
    const auto network = buildRootNetwork(0.1, 0.1, 4);
    const auto rootMesh = std::make_shared<const Mesh>(network.mesh);
    const GridGeometry soilGG(soilMesh, scheme), rootGG(rootMesh, Scheme::tpfa);

    ElementParams soil;
    soil.porosity = 0.4;
    soil.permeability = 2.57e-12*Tensor::Identity();
    soil.vg = {2.956e-4, 2.0, 0.1};
    soil.extrusion = 0.1;
    ElementParams root;
    root.porosity = 0.4;
    root.permeability = 5.1e-17*Tensor::Identity();
    root.radius = 5e-4;
    const SpatialParams soilParams(soilMesh->numElements(), soil), rootParams(rootMesh->numElements(), root);

    const auto soilProblem = ProblemDefinition::withMarkers(2, {{0, BoundaryTypes::allNeumann()},
                                                               {1, BoundaryTypes::allNeumann()},
                                                               {2, BoundaryTypes::allNeumann()},
                                                               {3, BoundaryTypes::allNeumann()}});
    const auto rootProblem = ProblemDefinition::withMarkers(2, {{0, BoundaryTypes::allNeumann()},
                                                               {1, BoundaryTypes::allNeumann()}});
    EmbeddedCouplingManager manager(soilGG, soilParams, soilModel, rootGG, rootParams, 2.04e-11,
                                    computeGlue(*rootMesh, *soilMesh));
    Assembler soilA(soilGG, soilModel, soilProblem, soilParams);
    Assembler rootA(rootGG, rootModel, rootProblem, rootParams);
    MultiDomainAssembler md({&soilA, &rootA}, manager);

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pSoil(6e4, 1e5), pRoot(-5e5, 1e5), x(0.0, 1e-6);
    double worst = 0.0;
    for (int state = 0; state < 20; ++state)
    {
        std::vector<Vector> blocks{Vector(soilA.size()), Vector(rootA.size())};
        for (int b = 0; b < 2; ++b)
            for (int d = 0; d < static_cast<int>(blocks[b].size())/2; ++d)
            {
                blocks[b][2*d] = b == 0 ? pSoil(rng) : pRoot(rng);
                blocks[b][2*d + 1] = x(rng);
            }
        md.setState(md.join(blocks));
        double sum = 0.0, scale = 0.0;
        for (int domain = 0; domain < 2; ++domain)
        {
            const auto& gg = domain == 0 ? soilGG : rootGG;
            for (int e = 0; e < gg.mesh().numElements(); ++e)
            {
                std::vector<EqVector> res(gg.elementScvs(e).size(), EqVector::Zero(2));
                manager.addCouplingResidual(domain, e, blocks[domain], res, {});
                for (const auto& r : res)
                {
                    sum += r[0];
                    scale += std::abs(r[0]);
                    // no solute crosses the root surface
                    if (r[1] != 0.0)
                        return std::numeric_limits<double>::infinity();
                }
            }
        }
        worst = std::max(worst, std::abs(sum)/scale);
    }
    return worst;
}

Outcome conservationAudits()
{
    const double tpfa = tracerBalance(Scheme::tpfa), box = tracerBalance(Scheme::box);
    const double exchangeTpfa = embeddedExchangeSum(Scheme::tpfa), exchangeBox = embeddedExchangeSum(Scheme::box);
    const double tracer = std::max(tpfa, box), exchange = std::max(exchangeTpfa, exchangeBox);
    return {tracer <= 1e-10 && exchange <= 1e-12,
            "tracer step balance " + sci(tracer) + ", embedded exchange sum " + sci(exchange)};
}

// ---------------------------------------------------------------------------
// 7: fractured two-phase flow

Outcome fracturedOrdering()
{
    std::map<std::string, Fractured2pResult> runs;
    for (const std::string mode : {"conductive", "none", "blocking"})
    {
        ParameterTree p;
        p.set("Fracture.Mode", mode);
        p.set("Grid.File", std::string(FERVOR_DATA_DIR) + "/fractured2p.msh");
        p.set("Output.Enabled", "false");
        runs[mode] = runFractured2p(p);
    }
    const double tc = runs["conductive"].arrivalTime, tn = runs["none"].arrivalTime, tb = runs["blocking"].arrivalTime;
    int retries = 0;
    for (const auto& [mode, r] : runs)
        retries += r.totalRetries;
    const auto& blocking = runs["blocking"];
    const bool barrier = blocking.gasBelowHorizontal > blocking.gasAboveHorizontal;
    std::ostringstream d;
    d << "arrival conductive " << tc << " s, none " << tn << " s, blocking " << tb << " s; retries " << retries
      << "; blocking Sn below/above " << sci(blocking.gasBelowHorizontal) << "/" << sci(blocking.gasAboveHorizontal);
    return {std::isfinite(tb) && tc < tn && tn < tb && retries == 0 && barrier, d.str()};
}

// ---------------------------------------------------------------------------
// 8: root-soil mass balance

Outcome rootSoilBalance()
{
    ParameterTree p;
    p.set("Output.Enabled", "false");
    const auto r = runRootSoil(p);
    const double rate = 2.15e-8;
    double worstRate = 0.0, worstTracer = 0.0, maxDt = 0.0;
    int unconstrained = 0;
    for (const auto& s : r.steps)
    {
        maxDt = std::max(maxDt, s.dt);
        worstTracer = std::max(worstTracer, std::abs(s.soilTracer - r.initialTracer)/r.initialTracer);
        if (s.collarDirichlet)
            continue;
        ++unconstrained;
        worstRate = std::max(worstRate, std::abs(-s.soilWaterRate - rate)/rate);
    }
    const bool reachedEnd = !r.steps.empty() && std::abs(r.steps.back().time - 259200.0) < 1e-6;

    // the largest mole fraction sits next to the segments with the largest uptake
    bool nearUptake = false;
    for (int k = 0; k < 3 && k < static_cast<int>(r.segmentsByUptake.size()); ++k)
    {
        const auto& dofs = r.segmentSoilDofs[r.segmentsByUptake[k]];
        nearUptake = nearUptake || std::find(dofs.begin(), dofs.end(), r.maxTracerDof) != dofs.end();
    }

    std::ostringstream d;
    d << r.steps.size() << " steps (" << unconstrained << " unconstrained), max dt " << maxDt
      << " s; water rate error " << sci(worstRate) << ", tracer drift " << sci(worstTracer)
      << "; max mole fraction next to a top-3 uptake segment: " << (nearUptake ? "yes" : "no");
    return {reachedEnd && maxDt <= 3600.0 && unconstrained > 0 && worstRate <= 1e-8 && worstTracer <= 1e-10
                && nearUptake,
            d.str()};
}

// ---------------------------------------------------------------------------
// 9: point-coupled monolithic Newton

Mesh column(int n)
{
    std::vector<Vec> points;
    std::vector<std::vector<int>> cells;
    for (int i = 0; i <= n; ++i)
        points.push_back(Vec(static_cast<double>(i)/n, 0, 0));
    for (int i = 0; i < n; ++i)
        cells.push_back({i, i + 1});
    return Mesh(2, 1, std::move(points), std::move(cells), {},
                [](const Vec& x, std::span<const int>) { return x.x() < 0.5 ? 0 : 1; });
}

Outcome pointCoupledNewton()
{
    const auto mesh = std::make_shared<const Mesh>(column(10));
    const GridGeometry gg(mesh, Scheme::tpfa);
    const SpatialParams params(10, ElementParams{0.2, 1e-12*Tensor::Identity()});
    const OnePModel model(fluids::water(), 4.5e-10);
    auto columnProblem = [](double pD, bool left) {
        auto problem = ProblemDefinition::withMarkers(1, {{left ? 0 : 1, BoundaryTypes::allDirichlet()},
                                                         {left ? 1 : 0, BoundaryTypes::allNeumann()}});
        problem.dirichlet = [pD](const Vec&, double) { return EqVector::Constant(1, pD); };
        problem.initial = [](const Vec&) { return EqVector::Constant(1, 1.5e5); };
        return problem;
    };
    const auto pa = columnProblem(2e5, true), pb = columnProblem(1e5, false);
    Assembler a(gg, model, pa, params), b(gg, model, pb, params);
    const double c = 1e-4, vol = 0.1;
    PointExchangeManager manager(5, 4, c, vol);
    MultiDomainAssembler md({&a, &b}, manager);

    Vector u = md.join({a.initialSolution(), b.initialSolution()});
    const auto sys = md.assemble(u, md.split(u), {});
    const double analytic = -c*vol;
    const double c12 = std::abs(sys.blocks[0][1].coeff(5, 4) - analytic)/std::abs(analytic);
    const double c21 = std::abs(sys.blocks[1][0].coeff(4, 5) - analytic)/std::abs(analytic);

    MultiDomainSystem system(md, u, {});
    const auto report = newtonSolve(system, u);
    const double residual = system.residual(u).cwiseAbs().maxCoeff();
    std::ostringstream d;
    d << "Newton " << (report.converged ? "converged" : "failed") << " in " << report.iterations
      << " iterations, residual " << sci(residual) << "; C_12 error " << sci(c12) << ", C_21 error " << sci(c21);
    return {report.converged && report.iterations <= 8 && residual < 1e-10 && c12 <= 1e-5 && c21 <= 1e-5
                && sys.blocks[0][1].nonZeros() == 1,
            d.str()};
}

} // end anonymous namespace

int main()
{
    struct Criterion
    {
        int id;
        double limit; //!< seconds
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, 5.0, geometryInvariants},
        {2, 10.0, jacobianOracle},
        {3, 30.0, convergenceOrders},
        {4, 60.0, schemeContrast},
        {5, 10.0, glueEquivalence},
        {6, 30.0, conservationAudits},
        {7, 300.0, fracturedOrdering},
        {8, 300.0, rootSoilBalance},
        {9, 10.0, pointCoupledNewton},
    };

    int failed = 0;
    for (const auto& c : criteria)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try
        {
            outcome = c.run();
        }
        catch (const std::exception& e)
        {
            outcome = {false, std::string("error: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = outcome.pass && seconds < c.limit;
        failed += !pass;
        std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " (" << outcome.detail << "; "
                  << std::fixed << std::setprecision(2) << seconds << " s of " << c.limit << " s)" << std::defaultfloat
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
