#pragma once

#include <fervor/app.hpp>
#include <fervor/multidomain.hpp>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace fervor {

// ---------------------------------------------------------------------------
// convergence study: -div(K grad p) = f, p = sin(pi x) sin(pi y) on the unit square

struct ConvergenceLevel
{
    int cells = 0;      //!< number of elements
    double h = 0.0;
    double error = 0.0; //!< discrete L2 error over the control volumes
    double order = std::numeric_limits<double>::quiet_NaN(); //!< observed order w.r.t. the previous level
};

struct ConvergenceResult
{
    Scheme scheme = Scheme::tpfa;
    std::string gridCase; //!< "structured" or "rotated" (anisotropic K on perturbed grids)
    std::vector<ConvergenceLevel> levels;
};

/*!
 * \brief Keys (group Convergence): Schemes, Levels, Case, Perturbation, Seed, Kh, Xi, PhiDeg.
 */
std::vector<ConvergenceResult> runConvergence(const ParameterTree& params, std::ostream* log = nullptr);

//! one level of the study; exposed for tests
ConvergenceLevel solveManufactured(Scheme scheme, const Mesh& mesh, const Tensor& k,
                                   const std::filesystem::path& vtkFile = {});

// ---------------------------------------------------------------------------
// two-phase flow with facet-coupled fractures

struct FracturedDomain
{
    Mesh bulk;
    Mesh fracture;
    std::vector<int> facetOfFracture;
    double width = 10.0;
    double height = 10.0;
};

//! the bundled layout: vertical fracture (marker 1) and horizontal fracture (marker 2) on grid lines
FracturedDomain buildFracturedDomain(int cells, double size, const std::string& layout = "both");
//! read a Gmsh file whose interior line elements are the fractures
FracturedDomain readFracturedDomain(const std::filesystem::path& file);

struct Fractured2pStep
{
    double time, dt;
    int newtonIterations, retries;
    double gasMassMatrix, gasMassFracture, maxTopSaturation;
};

struct Fractured2pResult
{
    std::string mode;
    std::vector<Fractured2pStep> steps;
    //! first time the top cell row exceeds the saturation threshold; +inf if never
    double arrivalTime = std::numeric_limits<double>::infinity();
    int totalRetries = 0;
    //! mean gas saturation in the cell rows directly below / above the horizontal fracture at the end
    double gasBelowHorizontal = 0.0;
    double gasAboveHorizontal = 0.0;
    //! max relative change of the state w.r.t. the initial state at the end
    double relativeChange = 0.0;
};

/*!
 * \brief Keys: Fracture.Mode (markers|conductive|blocking|none), Grid.File or Grid.Cells/Grid.Size,
 *        Problem.GasSaturation, Problem.PatchWidth, TimeLoop.*, Monitor.Threshold, Output.*.
 */
Fractured2pResult runFractured2p(const ParameterTree& params, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// root water uptake with solute transport

struct RootSoilStep
{
    double time, dt;
    int newtonIterations;
    bool collarDirichlet;
    double collarFlux;     //!< kg/s leaving the root collar
    double collarPressure; //!< Pa
    double soilWater;      //!< kg
    double soilWaterRate;  //!< kg/s over the step
    double exchange;       //!< kg/s from soil into roots (positive = uptake)
    double soilTracer;     //!< mol
};

struct RootSoilResult
{
    std::vector<RootSoilStep> steps;
    double initialTracer = 0.0;
    double initialWater = 0.0;
    int numSegments = 0;
    double droppedLength = 0.0;
    //! soil dof with the largest tracer mole fraction at the end
    int maxTracerDof = -1;
    double maxTracer = 0.0;
    //! root segments sorted by decreasing |q_w| integrated over the run
    std::vector<int> segmentsByUptake;
    //! soil dofs coupled to each root segment
    std::vector<std::vector<int>> segmentSoilDofs;
    //! largest |soil + root| water exchange imbalance seen in any step, relative to the exchange scale
    double exchangeImbalance = 0.0;
};

//! synthetic branched root network in the 2D soil slab; collar vertex carries boundary marker 1
SegmentNetwork buildRootNetwork(double width, double depth, int lateralSegments);

/*!
 * \brief Keys: Soil.*, Root.*, Problem.Transpiration, Problem.WiltingPressure, TimeLoop.*, Output.*.
 */
RootSoilResult runRootSoil(const ParameterTree& params, std::ostream* log = nullptr);

} // namespace fervor
