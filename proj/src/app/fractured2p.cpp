#include <fervor/scenarios.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>

namespace fervor {

namespace {

int gridVertex(const Mesh& mesh, const Vec& x)
{
    for (int v = 0; v < mesh.numVertices(); ++v)
        if ((mesh.vertex(v) - x).norm() < 1e-9)
            return v;
    throw GeometryError("no grid vertex at the requested fracture point");
}

struct MaterialRow
{
    double porosity, kh, xi, phiDeg, alpha, n;
};

MaterialRow readMaterial(const ParameterTree& params, const std::string& group, const MaterialRow& defaults)
{
    return {params.get<double>(group + ".Porosity", defaults.porosity),
            params.get<double>(group + ".Kh", defaults.kh),
            params.get<double>(group + ".Xi", defaults.xi),
            params.get<double>(group + ".PhiDeg", defaults.phiDeg),
            params.get<double>(group + ".VgAlpha", defaults.alpha),
            params.get<double>(group + ".VgN", defaults.n)};
}

ElementParams elementParams(const MaterialRow& m, double extrusion)
{
    ElementParams p;
    p.porosity = m.porosity;
    p.permeability = rotatedPermeability(m.kh, m.xi, m.phiDeg).toWorld();
    p.vg = {m.alpha, m.n};
    p.extrusion = extrusion;
    return p;
}

} // end anonymous namespace

FracturedDomain buildFracturedDomain(int cells, double size, const std::string& layout)
{
    if (layout != "both" && layout != "vertical" && layout != "horizontal")
        throw ParameterError("Fracture.Layout must be both, vertical or horizontal; got '" + layout + "'");
    if (cells < 8 || cells % 8 != 0)
        throw ParameterError("Grid.Cells must be a positive multiple of 8");
    FracturedDomain d;
    d.bulk = buildStructuredQuad(cells, cells, Vec(0, 0, 0), Vec(size, size, 0));
    d.width = d.height = size;
    const double h = size/cells;

    std::vector<Vec> points;
    std::vector<std::vector<int>> segments;
    std::vector<int> markers;
    std::map<int, int> local;
    const auto addSegment = [&](const Vec& a, const Vec& b, int marker) {
        const int va = gridVertex(d.bulk, a), vb = gridVertex(d.bulk, b);
        std::array<int, 2> seg{};
        int k = 0;
        for (int v : {va, vb})
        {
            auto [it, inserted] = local.emplace(v, static_cast<int>(points.size()));
            if (inserted)
                points.push_back(d.bulk.vertex(v));
            seg[k++] = it->second;
        }
        segments.push_back({seg[0], seg[1]});
        markers.push_back(marker);
        const std::array<int, 2> fv{va, vb};
        d.facetOfFracture.push_back(*d.bulk.findFacet(fv));
    };

    // vertical fracture on the middle grid line, horizontal one crossing it
    const int mid = cells/2;
    if (layout != "horizontal")
        for (int j = cells/4; j < 7*cells/8; ++j)
            addSegment(Vec(mid*h, j*h, 0), Vec(mid*h, (j + 1)*h, 0), 1);
    if (layout != "vertical")
        for (int i = cells/8; i < 7*cells/8; ++i)
            addSegment(Vec(i*h, mid*h, 0), Vec((i + 1)*h, mid*h, 0), 2);

    d.fracture = Mesh(2, 1, std::move(points), std::move(segments), std::move(markers));
    return d;
}

FracturedDomain readFracturedDomain(const std::filesystem::path& file)
{
    auto data = readMsh(file.string());
    if (!data.network)
        throw GeometryError("'" + file.string() + "' contains no fracture line elements");
    FracturedDomain d;
    d.bulk = std::move(data.bulk);
    d.fracture = std::move(data.network->mesh);
    d.facetOfFracture = std::move(data.networkToBulkFacet);
    for (std::size_t s = 0; s < d.facetOfFracture.size(); ++s)
        if (d.facetOfFracture[s] < 0)
            throw GeometryError("fracture segment " + std::to_string(s) + " does not coincide with a bulk facet");
    Aabb box;
    for (const auto& x : d.bulk.vertices())
        box.expand(x);
    d.width = box.upper.x() - box.lower.x();
    d.height = box.upper.y() - box.lower.y();
    return d;
}

Fractured2pResult runFractured2p(const ParameterTree& params, std::ostream* log)
{
    Fractured2pResult result;
    result.mode = params.get<std::string>("Fracture.Mode", "markers");
    const auto& mode = result.mode;
    if (mode != "markers" && mode != "conductive" && mode != "blocking" && mode != "none")
        throw ParameterError("Fracture.Mode must be one of markers, conductive, blocking, none; got '" + mode + "'");

    const auto domain = params.hasKey("Grid.File")
        ? readFracturedDomain(params.baseDirectory()/params.get<std::string>("Grid.File"))
        : buildFracturedDomain(params.get<int>("Grid.Cells", 16), params.get<double>("Grid.Size", 100.0),
                                 params.get<std::string>("Fracture.Layout", "both"));
    const auto bulkMesh = std::make_shared<const Mesh>(domain.bulk);
    const auto fracMesh = std::make_shared<const Mesh>(domain.fracture);

    const Vec gravity(0, -params.get<double>("Problem.Gravity", 9.81), 0);
    const auto water = fluids::water();
    const TwoPModel model(water, fluids::nitrogenViscosity);

    const auto matrix = readMaterial(params, "Matrix", {0.15, 1e-12, 0.15, -25.0, 1e-3, 3.0});
    const auto conductive = readMaterial(params, "Conductive", {0.85, 1e-9, 1.0, 0.0, 1e-4, 23.0});
    const auto blocking = readMaterial(params, "Blocking", {0.15, 1e-16, 1.0, 0.0, 1e-2, 2.0});
    const double aperture = params.get<double>("Fracture.Aperture", 0.05);

    // hydrostatic water pressure, gas enters through a patch at the bottom
    const double pTop = params.get<double>("Problem.TopPressure", 1e5);
    const double height = domain.height;
    const double width = domain.width;
    const auto phs = [=](const Vec& x) { return pTop - water.density*gravity.y()*(height - x.y()); };
    const double gasSaturation = params.get<double>("Problem.GasSaturation", 0.3);
    const double patchWidth = params.get<double>("Problem.PatchWidth", 0.25*width);
    const double patchCenter = params.get<double>("Problem.PatchCenter", 0.5*width);
    const auto inPatch = [=](const Vec& x) {
        return x.y() < 1e-9*height && std::abs(x.x() - patchCenter) <= 0.5*patchWidth + 1e-9*width;
    };
    const auto state = [](double pw, double sn) { EqVector v(2); v << pw, sn; return v; };

    auto bulkProblem = ProblemDefinition::withMarkers(2, {});
    bulkProblem.boundaryTypes = [inPatch](int marker, const Vec& x) -> std::optional<BoundaryTypes> {
        switch (marker)
        {
            case 0: case 1: return BoundaryTypes::allDirichlet();
            case 2: return inPatch(x) ? BoundaryTypes::allDirichlet() : BoundaryTypes::allNeumann();
            case 3: return BoundaryTypes::allNeumann();
            default: return std::nullopt;
        }
    };
    bulkProblem.dirichlet = [=](const Vec& x, double) { return state(phs(x), inPatch(x) ? gasSaturation : 0.0); };
    bulkProblem.initial = [=](const Vec& x) { return state(phs(x), 0.0); };

    auto fracProblem = ProblemDefinition::withMarkers(2, {});
    fracProblem.boundaryTypes = [](int, const Vec&) { return std::optional(BoundaryTypes::allNeumann()); };
    fracProblem.initial = bulkProblem.initial;

    const GridGeometry bulkGG(bulkMesh, Scheme::tpfa);
    const GridGeometry fracGG(fracMesh, Scheme::tpfa);
    const SpatialParams bulkParams(bulkMesh->numElements(), elementParams(matrix, 1.0));

    std::vector<FractureMode> modes;
    std::vector<ElementParams> fracElementParams;
    for (int s = 0; s < fracMesh->numElements(); ++s)
    {
        FractureMode m = mode == "blocking" ? FractureMode::blocking : FractureMode::conductive;
        if (mode == "markers")
        {
            const int marker = fracMesh->elementMarker(s);
            if (marker != 1 && marker != 2)
                throw ParameterError("fracture element " + std::to_string(s) + " has marker "
                                     + std::to_string(marker) + " (1 = conductive, 2 = blocking)");
            m = marker == 1 ? FractureMode::conductive : FractureMode::blocking;
        }
        modes.push_back(m);
        fracElementParams.push_back(elementParams(m == FractureMode::conductive ? conductive : blocking, aperture));
    }
    const SpatialParams fracParams(fracElementParams);
    bulkParams.validate();
    fracParams.validate();

    Assembler bulk(bulkGG, model, bulkProblem, bulkParams, gravity);
    Assembler frac(fracGG, model, fracProblem, fracParams, gravity);

    std::unique_ptr<CouplingManager> manager;
    std::vector<Assembler*> assemblers{&bulk};
    if (mode == "none")
        manager = std::make_unique<UncoupledManager>(1);
    else
    {
        manager = std::make_unique<FacetCouplingManager>(bulkGG, bulkParams, fracGG, fracParams, model,
                                                         domain.facetOfFracture, modes, gravity,
                                                         params.get<double>("Fracture.PenaltyFactor", 1e4));
        assemblers.push_back(&frac);
    }
    MultiDomainAssembler md(assemblers, *manager);

    std::vector<Vector> initialBlocks{bulk.initialSolution()};
    if (mode != "none")
        initialBlocks.push_back(frac.initialSolution());
    Vector u = md.join(initialBlocks);
    const Vector u0 = u;

    // monitoring sets
    std::vector<int> topRow, below, above;
    for (int e = 0; e < bulkMesh->numElements(); ++e)
        for (int f : bulkMesh->elementFacets(e))
            if (bulkMesh->facet(f).boundary() && bulkMesh->facet(f).marker == 3)
                topRow.push_back(e);
    for (int s = 0; s < fracMesh->numElements(); ++s)
    {
        if (fracMesh->elementMarker(s) != 2)
            continue;
        const auto& facet = bulkMesh->facet(domain.facetOfFracture[s]);
        const double y = bulkMesh->facetCenter(domain.facetOfFracture[s]).y();
        for (int e : facet.elements)
            (bulkMesh->elementCenter(e).y() < y ? below : above).push_back(e);
    }

    TimeLoopOptions timeOptions;
    timeOptions.tEnd = params.get<double>("TimeLoop.TEnd", 75000.0);
    timeOptions.dtInitial = params.get<double>("TimeLoop.DtInitial", 10.0);
    timeOptions.dtMax = params.get<double>("TimeLoop.DtMax", 500.0);
    timeOptions.dtMin = params.get<double>("TimeLoop.DtMin", 1e-3);
    timeOptions.maxSteps = params.get<int>("TimeLoop.MaxSteps", 100000);
    NewtonOptions newton;
    newton.maxIterations = params.get<int>("Newton.MaxIterations", newton.maxIterations);
    newton.maxRelativeShift = params.get<double>("Newton.MaxRelativeShift", newton.maxRelativeShift);
    newton.lineSearch = params.get<bool>("Newton.LineSearch", false);
    const double threshold = params.get<double>("Monitor.Threshold", 0.01);

    const bool output = params.get<bool>("Output.Enabled", true);
    const int interval = std::max(1, params.get<int>("Output.Interval", 10));
    const std::filesystem::path outDir = params.get<std::string>("Output.Directory", ".");
    OutputSeries series(outDir, params.get<std::string>("Output.Name", "fractured2p_" + mode), output);
    std::unique_ptr<CsvWriter> csv;
    if (output)
        csv = std::make_unique<CsvWriter>(series.file("_audit.csv"),
            std::vector<std::string>{"t", "dt", "newton_iterations", "retries", "gas_mass_matrix",
                                     "gas_mass_fracture", "max_top_sn"});

    const auto writeFields = [&](const Vector& x) {
        const auto blocks = md.split(x);
        series.write(bulkGG, {{"pw", extractEquation(blocks[0], 2, 0)}, {"Sn", extractEquation(blocks[0], 2, 1)}});
        if (mode != "none")
            series.write(fracGG, {{"pw", extractEquation(blocks[1], 2, 0)}, {"Sn", extractEquation(blocks[1], 2, 1)}},
                         "_fracture");
        series.advance();
    };
    if (output)
        writeFields(u);

    TimeLoop loop(timeOptions);
    loop.run(u, [&](double timeNew, double dt, Vector& x) {
        MultiDomainSystem system(md, x, TimeContext{timeNew, dt});
        return newtonSolve(system, x, newton);
    }, [&](const StepReport& r, const Vector&, const Vector& x) {
        const auto blocks = md.split(x);
        Fractured2pStep step{r.time, r.dt, r.newtonIterations, r.retries,
                             bulk.totalStorage(blocks[0])[1],
                             mode == "none" ? 0.0 : frac.totalStorage(blocks[1])[1], 0.0};
        for (int e : topRow)
            step.maxTopSaturation = std::max(step.maxTopSaturation, blocks[0][2*e + 1]);
        // linear interpolation of the threshold crossing within the step
        const double previous = result.steps.empty() ? 0.0 : result.steps.back().maxTopSaturation;
        if (std::isinf(result.arrivalTime) && step.maxTopSaturation >= threshold)
            result.arrivalTime = r.time - r.dt*(step.maxTopSaturation - threshold)
                                          /std::max(step.maxTopSaturation - previous, 1e-300);
        result.totalRetries += r.retries;
        result.steps.push_back(step);
        if (csv)
            csv->row({step.time, step.dt, static_cast<double>(step.newtonIterations), static_cast<double>(step.retries),
                      step.gasMassMatrix, step.gasMassFracture, step.maxTopSaturation});
        if (output && (r.step % interval == 0 || loop.finished()))
            writeFields(x);
    }, log);

    const auto blocks = md.split(u);
    const auto meanSn = [&](const std::vector<int>& cells) {
        double s = 0.0;
        for (int e : cells)
            s += blocks[0][2*e + 1];
        return cells.empty() ? 0.0 : s/cells.size();
    };
    result.gasBelowHorizontal = meanSn(below);
    result.gasAboveHorizontal = meanSn(above);
    result.relativeChange = relativeShift(u0, u);
    return result;
}

} // namespace fervor
