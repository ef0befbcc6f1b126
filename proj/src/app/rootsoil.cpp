#include <fervor/scenarios.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

namespace fervor {

SegmentNetwork buildRootNetwork(double width, double depth, int lateralSegments)
{
    if (lateralSegments < 1)
        throw ParameterError("Root.LateralSegments must be positive");
    const double length = 0.01*depth/0.1;
    // taproot slightly off the soil grid lines, collar at the surface y = 0
    const Vec collar(0.51*width, 0.0, 0.0);
    const int tapSegments = 8;

    std::vector<Vec> points{collar};
    std::vector<std::vector<int>> segments;
    std::vector<int> markers;
    for (int k = 1; k <= tapSegments; ++k)
    {
        points.push_back(collar - Vec(0, k*length, 0));
        segments.push_back({k - 1, k});
        markers.push_back(1);
    }

    // pairs of laterals branching at 2, 4 and 6 segment lengths below the collar, 20 degrees downward
    const double angle = 20.0*std::numbers::pi/180.0;
    for (int branch : {2, 4, 6})
        for (double side : {-1.0, 1.0})
        {
            const Vec dir(side*std::cos(angle), -std::sin(angle), 0.0);
            int previous = branch;
            for (int k = 1; k <= lateralSegments; ++k)
            {
                points.push_back(points[branch] + k*length*dir);
                const int v = static_cast<int>(points.size()) - 1;
                segments.push_back({previous, v});
                markers.push_back(2);
                previous = v;
            }
        }

    SegmentNetwork network;
    network.mesh = Mesh(2, 1, std::move(points), std::move(segments), std::move(markers),
                        [collar](const Vec& x, std::span<const int>) { return (x - collar).norm() < 1e-12 ? 1 : 0; });
    network.radius.assign(network.numSegments(), 5e-4);
    network.aperture.assign(network.numSegments(), 1e-3);
    return network;
}

RootSoilResult runRootSoil(const ParameterTree& params, std::ostream* log)
{
    RootSoilResult result;
    auto water = fluids::water();
    water.diffusion = params.get<double>("Soil.Diffusion", 2.3e-9);
    const Vec gravity(0, -params.get<double>("Problem.Gravity", 9.81), 0);
    const double patm = params.get<double>("Problem.AtmosphericPressure", 1e5);

    // soil slab below y = 0
    const double width = params.get<double>("Soil.Width", 0.1);
    const double depth = params.get<double>("Soil.Depth", 0.1);
    const int cells = params.get<int>("Soil.Cells", 16);
    const std::string schemeName = params.get<std::string>("Soil.Scheme", "box");
    if (schemeName != "box" && schemeName != "tpfa")
        throw ParameterError("Soil.Scheme must be box or tpfa; got '" + schemeName + "'");
    const Scheme soilScheme = schemeName == "box" ? Scheme::box : Scheme::tpfa;
    const auto soilMesh = std::make_shared<const Mesh>(
        buildStructuredQuad(cells, cells, Vec(0, -depth, 0), Vec(width, 0, 0)));

    ElementParams soilElement;
    soilElement.porosity = params.get<double>("Soil.Porosity", 0.4);
    soilElement.permeability = params.get<double>("Soil.Permeability", 2.57e-12)*Tensor::Identity();
    soilElement.vg = {params.get<double>("Soil.VgAlpha", 2.956e-4), params.get<double>("Soil.VgN", 2.0),
                      params.get<double>("Soil.Swr", 0.1)};
    soilElement.extrusion = params.get<double>("Soil.Thickness", 0.1);

    auto network = buildRootNetwork(width, depth, params.get<int>("Root.LateralSegments", 4));
    const auto rootMesh = std::make_shared<const Mesh>(network.mesh);
    result.numSegments = network.numSegments();
    ElementParams rootElement;
    rootElement.porosity = params.get<double>("Root.Porosity", 0.4);
    rootElement.permeability = params.get<double>("Root.AxialConductivity", 5.1e-17)*Tensor::Identity();
    rootElement.radius = params.get<double>("Root.Radius", 5e-4);
    const double radialConductivity = params.get<double>("Root.RadialConductivity", 2.04e-11);

    const SpatialParams soilParams(soilMesh->numElements(), soilElement);
    const SpatialParams rootParams(rootMesh->numElements(), rootElement);
    soilParams.validate();
    rootParams.validate();

    // hydrostatic initial state, root in equilibrium with the soil
    const double pTop = patm + params.get<double>("Problem.InitialTopPressureHead", -3000.0);
    const double x0 = params.get<double>("Problem.InitialMoleFraction", 3e-7);
    const auto phs = [=](const Vec& x) { return pTop + water.density*gravity.y()*x.y(); };
    const auto state = [](double p, double x) { EqVector v(2); v << p, x; return v; };

    auto soilProblem = ProblemDefinition::withMarkers(2, {{0, BoundaryTypes::allNeumann()},
                                                          {1, BoundaryTypes::allNeumann()},
                                                          {2, BoundaryTypes::allNeumann()},
                                                          {3, BoundaryTypes::allNeumann()}});
    soilProblem.initial = [=](const Vec& x) { return state(phs(x), x0); };

    // transpiration at the collar, switched to the wilting pressure when that binds
    const double transpiration = params.get<double>("Problem.Transpiration", 2.15e-8);
    const double transpirationMol = transpiration*water.molarDensity/water.density;
    const double wiltingPressure = patm + params.get<double>("Problem.WiltingPressure", -1.4e6);
    bool collarDirichlet = false;
    auto rootProblem = ProblemDefinition::withMarkers(2, {});
    rootProblem.boundaryTypes = [&collarDirichlet](int marker, const Vec&) -> std::optional<BoundaryTypes> {
        if (marker == 1 && collarDirichlet)
            return BoundaryTypes::allDirichlet();
        if (marker == 0 || marker == 1)
            return BoundaryTypes::allNeumann();
        return std::nullopt;
    };
    rootProblem.neumann = [=](int marker, const Vec&, double, const EqVector&) {
        return state(marker == 1 ? transpirationMol : 0.0, 0.0);
    };
    rootProblem.dirichlet = [=](const Vec&, double) { return state(wiltingPressure, 0.0); };
    rootProblem.initial = [=](const Vec& x) { return state(phs(x), 0.0); };

    const RichardsModel soilModel(water, patm);
    const XylemModel rootModel(water);
    const GridGeometry soilGG(soilMesh, soilScheme);
    const GridGeometry rootGG(rootMesh, Scheme::tpfa);

    auto glue = computeGlue(*rootMesh, *soilMesh);
    EmbeddedCouplingManager manager(soilGG, soilParams, soilModel, rootGG, rootParams, radialConductivity, glue);
    result.droppedLength = manager.droppedLength();

    Assembler soil(soilGG, soilModel, soilProblem, soilParams, gravity);
    Assembler root(rootGG, rootModel, rootProblem, rootParams, gravity);
    MultiDomainAssembler md({&soil, &root}, manager);

    // soil dofs coupled to each segment
    result.segmentSoilDofs.resize(network.numSegments());
    for (const auto& is : manager.glue().intersections)
    {
        auto& dofs = result.segmentSoilDofs[is.domainElement];
        for (int e : is.targetElements)
            for (const auto& scv : soilGG.elementScvs(e))
                dofs.push_back(scv.dofIndex);
    }
    for (auto& dofs : result.segmentSoilDofs)
    {
        std::sort(dofs.begin(), dofs.end());
        dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    }

    // collar face pressure from the collar segment value and the face flux
    int collarScvf = -1;
    for (int f = 0; f < rootGG.numScvf(); ++f)
        if (rootGG.scvf(f).boundary && rootGG.scvf(f).boundaryMarker == 1)
            collarScvf = f;
    if (collarScvf < 0)
        throw GeometryError("root network has no collar face (boundary marker 1)");
    const auto collarPressure = [&](const Vector& rootU, double time) {
        if (collarDirichlet)
            return wiltingPressure;
        const auto& scvf = rootGG.scvf(collarScvf);
        const auto& scv = rootGG.scv(scvf.insideScv);
        const auto& p = rootParams[scvf.elementIndex];
        const double t = tpfaGeometricFactor(scvf, scv.center, p.extrusion, false)
                         *normalPermeability(p.permeability, scvf.unitOuterNormal);
        const double flux = rootProblem.neumann(1, scvf.center, time, root.dofValues(rootU, scv.dofIndex))[0]
                            *scvf.area*p.extrusion;
        const double pCell = rootU[2*scv.dofIndex];
        return pCell - water.density*gravity.dot(scv.center - scvf.center) - flux/(t*water.molarDensity);
    };

    Vector u = md.join({soil.initialSolution(), root.initialSolution()});
    {
        const auto blocks = md.split(u);
        result.initialWater = soil.totalStorage(blocks[0])[0]*water.density/water.molarDensity;
        result.initialTracer = soil.totalStorage(blocks[0])[1];
    }

    TimeLoopOptions timeOptions;
    timeOptions.tEnd = params.get<double>("TimeLoop.TEnd", 259200.0);
    timeOptions.dtInitial = params.get<double>("TimeLoop.DtInitial", 60.0);
    timeOptions.dtMax = params.get<double>("TimeLoop.DtMax", 3600.0);
    timeOptions.dtMin = params.get<double>("TimeLoop.DtMin", 1e-3);
    timeOptions.maxSteps = params.get<int>("TimeLoop.MaxSteps", 100000);
    NewtonOptions newton;
    newton.maxIterations = params.get<int>("Newton.MaxIterations", newton.maxIterations);
    // tight defaults: the mass balance audits resolve the per-step change to 1e-8
    newton.maxRelativeShift = params.get<double>("Newton.MaxRelativeShift", 1e-13);
    newton.residualReduction = params.get<double>("Newton.ResidualReduction", 1e-14);

    const bool output = params.get<bool>("Output.Enabled", true);
    const int interval = std::max(1, params.get<int>("Output.Interval", 6));
    OutputSeries series(params.get<std::string>("Output.Directory", "."),
                        params.get<std::string>("Output.Name", "rootsoil"), output);
    std::unique_ptr<CsvWriter> csv;
    if (output)
    {
        writeGlueVtk(series.file("_glue.vtk"), manager.glue());
        csv = std::make_unique<CsvWriter>(series.file("_audit.csv"),
            std::vector<std::string>{"t", "dt", "newton_iterations", "collar_dirichlet", "collar_flux",
                                     "collar_pressure", "soil_water", "soil_water_rate", "exchange", "soil_tracer"});
    }
    const auto writeFields = [&](const Vector& x) {
        const auto blocks = md.split(x);
        std::vector<double> sw;
        for (int d = 0; d < soilGG.numDofs(); ++d)
            sw.push_back(soilModel.saturation(soilElement, blocks[0][2*d]));
        series.write(soilGG, {{"pw", extractEquation(blocks[0], 2, 0)}, {"x", extractEquation(blocks[0], 2, 1)},
                              {"Sw", sw}});
        const auto q = manager.segmentExchanges(blocks[0], blocks[1]);
        series.write(rootGG, {{"pr", extractEquation(blocks[1], 2, 0)}, {"x", extractEquation(blocks[1], 2, 1)},
                              {"q", q}}, "_root");
        series.advance();
    };
    if (output)
        writeFields(u);

    std::vector<double> uptake(network.numSegments(), 0.0);
    const double molToKg = water.density/water.molarDensity;

    TimeLoop loop(timeOptions);
    loop.run(u, [&](double timeNew, double dt, Vector& x) {
        const Vector old = x;
        const TimeContext tc{timeNew, dt};
        collarDirichlet = false;
        {
            MultiDomainSystem trialSystem(md, old, tc);
            Vector trial = old;
            const auto report = newtonSolve(trialSystem, trial, newton);
            if (!report.converged || collarPressure(md.split(trial)[1], timeNew) >= wiltingPressure)
            {
                if (report.converged)
                    x = trial;
                return report;
            }
        }
        collarDirichlet = true;
        MultiDomainSystem system(md, old, tc);
        return newtonSolve(system, x, newton);
    }, [&](const StepReport& r, const Vector& xOld, const Vector& x) {
        const auto blocks = md.split(x);
        const auto oldBlocks = md.split(xOld);
        RootSoilStep step{};
        step.time = r.time;
        step.dt = r.dt;
        step.newtonIterations = r.newtonIterations;
        step.collarDirichlet = collarDirichlet;
        step.collarFlux = root.boundaryOutflow(blocks[1], r.time)[0]*molToKg;
        step.collarPressure = collarPressure(blocks[1], r.time);
        const auto storage = soil.totalStorage(blocks[0]);
        step.soilWater = storage[0]*molToKg;
        step.soilWaterRate = (storage[0] - soil.totalStorage(oldBlocks[0])[0])*molToKg/r.dt;
        const double exchange = manager.totalExchange(blocks[0], blocks[1]);
        step.exchange = -exchange*molToKg;
        step.soilTracer = storage[1];

        const auto q = manager.segmentExchanges(blocks[0], blocks[1]);
        for (std::size_t s = 0; s < q.size(); ++s)
            uptake[s] += std::abs(q[s])*r.dt;

        // coupling contributions of both domains must cancel
        md.setState(x);
        double sum = 0.0, scale = 0.0;
        for (int d = 0; d < 2; ++d)
        {
            const auto& gg = d == 0 ? soilGG : rootGG;
            for (int e = 0; e < gg.mesh().numElements(); ++e)
            {
                std::vector<EqVector> res(gg.elementScvs(e).size(), EqVector::Zero(2));
                manager.addCouplingResidual(d, e, blocks[d], res, TimeContext{r.time, r.dt});
                for (const auto& v : res)
                {
                    sum += v[0];
                    scale += std::abs(v[0]);
                }
            }
        }
        if (scale > 0.0)
            result.exchangeImbalance = std::max(result.exchangeImbalance, std::abs(sum)/scale);

        result.steps.push_back(step);
        if (csv)
            csv->row({step.time, step.dt, static_cast<double>(step.newtonIterations),
                      step.collarDirichlet ? 1.0 : 0.0, step.collarFlux, step.collarPressure, step.soilWater,
                      step.soilWaterRate, step.exchange, step.soilTracer});
        if (output && (r.step % interval == 0 || loop.finished()))
            writeFields(x);
    }, log);

    const auto blocks = md.split(u);
    for (int d = 0; d < soilGG.numDofs(); ++d)
        if (result.maxTracerDof < 0 || blocks[0][2*d + 1] > result.maxTracer)
        {
            result.maxTracerDof = d;
            result.maxTracer = blocks[0][2*d + 1];
        }
    result.segmentsByUptake.resize(network.numSegments());
    std::iota(result.segmentsByUptake.begin(), result.segmentsByUptake.end(), 0);
    std::stable_sort(result.segmentsByUptake.begin(), result.segmentsByUptake.end(),
                     [&](int a, int b) { return uptake[a] > uptake[b]; });
    return result;
}

} // namespace fervor
