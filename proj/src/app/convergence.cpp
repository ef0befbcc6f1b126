#include <fervor/scenarios.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

namespace fervor {

ConvergenceLevel solveManufactured(Scheme scheme, const Mesh& mesh, const Tensor& k,
                                   const std::filesystem::path& vtkFile)
{
    constexpr double pi = std::numbers::pi;
    const auto meshPtr = std::make_shared<const Mesh>(mesh);
    const GridGeometry gg(meshPtr, scheme);
    ElementParams ep;
    ep.permeability = k;
    const SpatialParams params(mesh.numElements(), ep);
    // unit density and viscosity: the flux is -K grad p . n
    const OnePModel model(FluidProperties{1.0, 1.0, 1.0});

    auto problem = ProblemDefinition::withMarkers(1, {{0, BoundaryTypes::allDirichlet()},
                                                     {1, BoundaryTypes::allDirichlet()},
                                                     {2, BoundaryTypes::allDirichlet()},
                                                     {3, BoundaryTypes::allDirichlet()}});
    const auto exact = [](const Vec& x) { return std::sin(pi*x.x())*std::sin(pi*x.y()); };
    problem.dirichlet = [exact](const Vec& x, double) { return EqVector::Constant(1, exact(x)); };
    problem.source = [k](const Vec& x, double, const EqVector&) {
        const double s = std::sin(pi*x.x())*std::sin(pi*x.y());
        const double c = std::cos(pi*x.x())*std::cos(pi*x.y());
        return EqVector::Constant(1, pi*pi*((k(0, 0) + k(1, 1))*s - 2.0*k(0, 1)*c));
    };

    const Assembler assembler(gg, model, problem, params);
    Vector u = Vector::Zero(assembler.size());
    const Vector uOld = u;
    DomainSystem system(assembler, uOld, TimeContext{});
    if (!newtonSolve(system, u).converged)
        throw NumericalProblem("manufactured problem did not converge");

    double e2 = 0.0, area = 0.0;
    for (int s = 0; s < gg.numScv(); ++s)
    {
        const auto& scv = gg.scv(s);
        const double diff = u[scv.dofIndex] - exact(scv.dofPosition);
        e2 += diff*diff*scv.volume;
        area += scv.volume;
    }
    if (!vtkFile.empty())
    {
        VtkField p{"p", extractEquation(u, 1, 0)}, exactField{"p_exact", {}};
        for (int d = 0; d < gg.numDofs(); ++d)
            exactField.values.push_back(exact(gg.dofPosition(d)));
        writeVtk(vtkFile, gg, {p, exactField});
    }

    ConvergenceLevel level;
    level.cells = mesh.numElements();
    level.h = std::sqrt(area/mesh.numElements());
    level.error = std::sqrt(e2);
    return level;
}

std::vector<ConvergenceResult> runConvergence(const ParameterTree& params, std::ostream* log)
{
    const auto schemes = params.getVector<std::string>("Convergence.Schemes", {"tpfa", "box"});
    const auto levels = params.getVector<int>("Convergence.Levels", {8, 16, 32, 64});
    const auto gridCase = params.get<std::string>("Convergence.Case", "structured");
    if (gridCase != "structured" && gridCase != "rotated")
        throw ParameterError("Convergence.Case must be 'structured' or 'rotated', got '" + gridCase + "'");
    const double perturbation = params.get<double>("Convergence.Perturbation", 0.2);
    const int seed = params.get<int>("Convergence.Seed", 1);

    const double kh = params.get<double>("Convergence.Kh", 1e-12);
    const double xi = params.get<double>("Convergence.Xi", 0.15);
    const double phiDeg = params.get<double>("Convergence.PhiDeg", -25.0);
    // the structured case uses the unit tensor
    const Tensor k = gridCase == "rotated" ? rotatedPermeability(kh, xi, phiDeg).toWorld() : Tensor::Identity();

    const bool output = params.get<bool>("Output.Enabled", true);
    const std::filesystem::path dir = params.get<std::string>("Output.Directory", ".");
    const auto name = params.get<std::string>("Output.Name", "convergence");

    std::vector<ConvergenceResult> results;
    for (const auto& schemeName : schemes)
    {
        ConvergenceResult r;
        if (schemeName == "tpfa")
            r.scheme = Scheme::tpfa;
        else if (schemeName == "box")
            r.scheme = Scheme::box;
        else
            throw ParameterError("Convergence.Schemes: unknown scheme '" + schemeName + "'");
        r.gridCase = gridCase;
        for (int n : levels)
        {
            auto mesh = buildStructuredQuad(n, n, Vec(0, 0, 0), Vec(1, 1, 0));
            if (gridCase == "rotated")
                mesh = perturbInteriorVertices(mesh, perturbation, static_cast<unsigned>(seed + n));
            std::filesystem::path vtk;
            if (output && n == levels.back())
                vtk = dir/(name + "_" + toString(r.scheme) + "_" + std::to_string(n) + ".vtk");
            auto level = solveManufactured(r.scheme, mesh, k, vtk);
            level.h = 1.0/n;
            if (!r.levels.empty())
            {
                const auto& prev = r.levels.back();
                level.order = std::log(prev.error/level.error)/std::log(prev.h/level.h);
            }
            if (log)
                *log << toString(r.scheme) << " " << gridCase << " N=" << n << " error=" << level.error
                     << " order=" << level.order << "\n";
            r.levels.push_back(level);
        }
        results.push_back(std::move(r));
    }

    if (output)
    {
        CsvWriter csv(dir/(name + "_audit.csv"), {"scheme", "case", "cells_per_side", "h", "l2_error", "order"});
        for (const auto& r : results)
            for (std::size_t i = 0; i < r.levels.size(); ++i)
                csv.row({r.scheme == Scheme::tpfa ? 0.0 : 1.0, gridCase == "structured" ? 0.0 : 1.0,
                         static_cast<double>(levels[i]), r.levels[i].h, r.levels[i].error, r.levels[i].order});
    }
    return results;
}

} // namespace fervor
