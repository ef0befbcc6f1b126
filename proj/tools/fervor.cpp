#include <fervor/scenarios.hpp>

#include <cmath>
#include <exception>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr const char* usage =
    "usage: fervor <scenario> [params.input] [-Group.Key value]...\n"
    "scenarios:\n"
    "  convergence   manufactured Darcy problem, L2 errors and observed orders\n"
    "  fractured2p   gas migration through a fractured domain\n"
    "  rootsoil      root water uptake with solute transport\n";

int convergence(const fervor::ParameterTree& params)
{
    const auto results = fervor::runConvergence(params, &std::cout);
    for (const auto& r : results)
    {
        std::cout << "\n" << fervor::toString(r.scheme) << " (" << r.gridCase << ")\n"
                  << std::setw(8) << "elements" << std::setw(14) << "h" << std::setw(14) << "L2 error"
                  << std::setw(10) << "order\n";
        for (const auto& l : r.levels)
            std::cout << std::setw(8) << l.cells << std::setw(14) << std::setprecision(5) << l.h
                      << std::setw(14) << l.error << std::setw(9) << std::setprecision(3) << l.order << "\n";
    }
    return 0;
}

int fractured2p(const fervor::ParameterTree& params)
{
    const auto r = fervor::runFractured2p(params, &std::cout);
    std::cout << "\nmode " << r.mode << ": " << r.steps.size() << " steps, " << r.totalRetries << " retries\n"
              << "gas arrival at the top row: ";
    if (std::isinf(r.arrivalTime))
        std::cout << "none\n";
    else
        std::cout << r.arrivalTime << " s\n";
    std::cout << "mean Sn below / above the horizontal fracture: " << r.gasBelowHorizontal << " / "
              << r.gasAboveHorizontal << "\n";
    return 0;
}

int rootsoil(const fervor::ParameterTree& params)
{
    const auto r = fervor::runRootSoil(params, &std::cout);
    std::cout << "\n" << r.numSegments << " root segments, uncovered length " << r.droppedLength << " m\n";
    if (!r.steps.empty())
    {
        const auto& last = r.steps.back();
        std::cout << "soil water " << r.initialWater << " -> " << last.soilWater << " kg\n"
                  << "soil tracer " << r.initialTracer << " -> " << last.soilTracer << " mol\n"
                  << "collar flux " << last.collarFlux << " kg/s, collar pressure " << last.collarPressure
                  << " Pa" << (last.collarDirichlet ? " (wilting)" : "") << "\n";
    }
    std::cout << "max mole fraction " << r.maxTracer << " at soil dof " << r.maxTracerDof << "\n";
    return 0;
}

} // end anonymous namespace

int main(int argc, char** argv)
{
    if (argc < 2 || std::string(argv[1]) == "-h" || std::string(argv[1]) == "--help")
    {
        std::cerr << usage;
        return argc < 2 ? 1 : 0;
    }
    const std::string scenario = argv[1];
    const std::vector<std::string> args(argv + 2, argv + argc);

    try
    {
        fervor::ParameterTree params;
        params.parseArguments(args);

        int status = 0;
        if (scenario == "convergence")
            status = convergence(params);
        else if (scenario == "fractured2p")
            status = fractured2p(params);
        else if (scenario == "rootsoil")
            status = rootsoil(params);
        else
        {
            std::cerr << "unknown scenario '" << scenario << "'\n" << usage;
            return 1;
        }

        for (const auto& key : params.unusedKeys())
            std::cerr << "warning: parameter '" << key << "' was never used\n";
        return status;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
