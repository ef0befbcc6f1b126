#pragma once

#include <fervor/common.hpp>
#include <fervor/fvgeom.hpp>
#include <fervor/material.hpp>

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fervor {

enum class BcKind { dirichlet, neumann };

struct BoundaryTypes
{
    std::array<BcKind, maxNumEq> kind{BcKind::neumann, BcKind::neumann};

    static BoundaryTypes allDirichlet() { return {{BcKind::dirichlet, BcKind::dirichlet}}; }
    static BoundaryTypes allNeumann() { return {{BcKind::neumann, BcKind::neumann}}; }
    bool isDirichlet(int eq) const { return kind[eq] == BcKind::dirichlet; }
    bool hasDirichlet(int numEq) const;
};

/*!
 * \brief Boundary and initial conditions and sources of one (sub)domain.
 *
 * Neumann values are normal fluxes per unit face area, positive outward.
 * Sources are amounts per unit volume and time.
 */
struct ProblemDefinition
{
    //! boundary types for a boundary face with marker at position; nullopt = no condition given
    std::function<std::optional<BoundaryTypes>(int marker, const Vec& pos)> boundaryTypes;
    std::function<EqVector(const Vec& pos, double time)> dirichlet;
    std::function<EqVector(int marker, const Vec& pos, double time, const EqVector& insideValues)> neumann;
    std::function<EqVector(const Vec& pos)> initial;
    std::function<EqVector(const Vec& pos, double time, const EqVector& values)> source;

    //! boundary types and zero Neumann/source defaults for a fixed marker table
    static ProblemDefinition withMarkers(int numEq, std::map<int, BoundaryTypes> markerTypes);

    BoundaryTypes boundaryTypesAt(int marker, const Vec& pos) const;
};

//! state of one TPFA control volume (or Dirichlet face) entering a flux
struct DofState
{
    EqVector values;
    const ElementParams* params;
    Vec position;
    //! extruded face area divided by the center-to-face distance; +inf for Dirichlet faces
    double geometricFactor;
};

/*!
 * \brief Everything a model needs to evaluate the flux across one scvf.
 *
 * TPFA fills inside/outside (several outside states at network branching
 * points, a single Dirichlet face state on boundaries). The box scheme fills
 * the element corner values and the inside/outside local corner indices.
 */
struct FluxContext
{
    const SubControlVolumeFace* scvf = nullptr;
    Vec gravity = Vec::Zero();
    Scheme scheme = Scheme::tpfa;

    DofState inside;
    std::vector<DofState> outside;

    std::span<const EqVector> elementValues;
    const ElementParams* elementParams = nullptr;
    double extrusion = 1.0;
    int insideLocal = -1;
    int outsideLocal = -1;
};

//! Local residual terms of a conservation model.
class Model
{
public:
    virtual ~Model() = default;

    virtual int numEq() const = 0;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> primaryVariableNames() const = 0;

    //! conserved amount per unit (extruded) volume
    virtual EqVector storage(const ElementParams& params, const EqVector& values) const = 0;
    //! amount per time leaving the inside control volume through the scvf
    virtual EqVector flux(const FluxContext& ctx) const = 0;
};

// ---------------------------------------------------------------------------
// flux kernels

/*!
 * \brief Half transmissibility geometric factor: extruded area over center-to-face distance.
 *
 * The distance is measured along the face normal, or as the Euclidean distance
 * for segment networks where the neighbor's segment need not be collinear.
 */
double tpfaGeometricFactor(const SubControlVolumeFace& scvf, const Vec& cellCenter, double extrusion,
                           bool alongNormal = true);

//! n^T K n
double normalPermeability(const Tensor& k, const Vec& normal);

//! harmonic two-point transmissibility from two half transmissibilities
double harmonicTransmissibility(double tInside, double tOutside);

/*!
 * \brief One neighbor's contribution to a TPFA phase flux.
 */
struct PhasePoint
{
    double pressure;
    double density;      //!< used in the gravity potential
    double upwindTerm;   //!< mobility-like factor used when this point is upwind
    Vec position;
    double halfTransmissibility; //!< +inf for a Dirichlet face
};

/*!
 * \brief TPFA phase flux out of `inside`, phase-potential upwinded.
 *
 * F = sum_o T_io * upwind_io * (Psi_in - Psi_o) with
 * Psi_in - Psi_o = p_in - p_o - rho_avg g.(x_in - x_o). With one neighbor
 * T is the harmonic mean of the two half transmissibilities; at branching
 * points T_io = t_i t_o / sum_k t_k.
 */
double tpfaPhaseFlux(const PhasePoint& inside, std::span<const PhasePoint> outside, const Vec& gravity);

//! potential difference between two points, gravity with averaged density
double potentialDifference(const PhasePoint& a, const PhasePoint& b, const Vec& gravity);

/*!
 * \brief Box phase flux: -(K (grad p - rho g)).n A times upwinded mobility term.
 *
 * grad p from the element basis at the face center, density interpolated with
 * the basis values, upwind decided by the sign of the potential flux.
 */
double boxPhaseFlux(const SubControlVolumeFace& scvf, const Tensor& k, double extrusion,
                    std::span<const double> pressures, std::span<const double> densities,
                    double upwindInside, double upwindOutside, const Vec& gravity);

//! extruded-area-weighted normal gradient n.grad(u) A for a box face
double boxNormalGradient(const SubControlVolumeFace& scvf, double extrusion, std::span<const double> values);

/*!
 * \brief Root water uptake line density (mol/(m s)), positive into the soil.
 *
 * q_w = -2 pi R krw K_rad (p_soil - p_root) rho_m
 */
double rootUptake(double soilPressure, double rootPressure, double radius, double krw,
                  double radialConductivity, double molarDensity);

// ---------------------------------------------------------------------------
// models

/*!
 * \brief Single-phase Darcy flow, primary variable p.
 *
 * Mass balance with rho(p) = rho0 (1 + c (p - pRef)); c = 0 gives an
 * incompressible (steady in time) model.
 */
class OnePModel : public Model
{
public:
    explicit OnePModel(FluidProperties fluid, double compressibility = 0.0, double referencePressure = 1e5)
    : fluid_(fluid), compressibility_(compressibility), referencePressure_(referencePressure) {}

    int numEq() const override { return 1; }
    std::string name() const override { return "1p"; }
    std::vector<std::string> primaryVariableNames() const override { return {"p"}; }

    double density(double p) const { return fluid_.density*(1.0 + compressibility_*(p - referencePressure_)); }

    EqVector storage(const ElementParams& params, const EqVector& values) const override;
    EqVector flux(const FluxContext& ctx) const override;

private:
    FluidProperties fluid_;
    double compressibility_;
    double referencePressure_;
};

/*!
 * \brief Passive tracer in a prescribed Darcy velocity field, primary variable x.
 *
 * Storage phi rho_m x, advective flux x_up rho_m (v.n) A, Fickian diffusion
 * with D_eff = phi D.
 */
class TracerModel : public Model
{
public:
    TracerModel(FluidProperties fluid, std::function<Vec(const Vec&)> velocity)
    : fluid_(fluid), velocity_(std::move(velocity)) {}

    int numEq() const override { return 1; }
    std::string name() const override { return "tracer"; }
    std::vector<std::string> primaryVariableNames() const override { return {"x"}; }

    EqVector storage(const ElementParams& params, const EqVector& values) const override;
    EqVector flux(const FluxContext& ctx) const override;

    //! volumetric flux v.n A through the face
    double volumeFlux(const SubControlVolumeFace& scvf, double extrusion) const;

private:
    FluidProperties fluid_;
    std::function<Vec(const Vec&)> velocity_;
};

/*!
 * \brief Immiscible two-phase flow (water, gas), primary variables (p_w, S_n).
 *
 * p_n = p_w + pc(1 - S_n). Gas density from the ideal gas law unless a
 * constant gas density is configured.
 */
class TwoPModel : public Model
{
public:
    struct Phases
    {
        double sw, sn, pw, pn, rhoW, rhoN, mobW, mobN;
    };

    TwoPModel(FluidProperties water, double gasViscosity, std::optional<double> constantGasDensity = std::nullopt)
    : water_(water), gasViscosity_(gasViscosity), constantGasDensity_(constantGasDensity) {}

    int numEq() const override { return 2; }
    std::string name() const override { return "2p"; }
    std::vector<std::string> primaryVariableNames() const override { return {"pw", "Sn"}; }

    Phases phases(const ElementParams& params, const EqVector& values) const;
    double gasDensity(double pn) const;

    EqVector storage(const ElementParams& params, const EqVector& values) const override;
    EqVector flux(const FluxContext& ctx) const override;

    //! TPFA phase data as seen by the flux kernels, phase 0 = water, 1 = gas
    PhasePoint phasePoint(int phase, const DofState& state) const;

private:
    FluidProperties water_;
    double gasViscosity_;
    std::optional<double> constantGasDensity_;
};

/*!
 * \brief Richards equation with a passive solute, primary variables (p_w, x).
 *
 * Gas phase at constant atmospheric pressure, pc = p_atm - p_w. Water and
 * solute balances in moles; D_eff = phi S_w D.
 */
class RichardsModel : public Model
{
public:
    RichardsModel(FluidProperties water, double atmosphericPressure = 1e5)
    : water_(water), atmosphericPressure_(atmosphericPressure) {}

    int numEq() const override { return 2; }
    std::string name() const override { return "richards"; }
    std::vector<std::string> primaryVariableNames() const override { return {"pw", "x"}; }

    double saturation(const ElementParams& params, double pw) const;
    double relativePermeability(const ElementParams& params, double pw) const;
    const FluidProperties& fluid() const { return water_; }
    double atmosphericPressure() const { return atmosphericPressure_; }

    EqVector storage(const ElementParams& params, const EqVector& values) const override;
    EqVector flux(const FluxContext& ctx) const override;

private:
    FluidProperties water_;
    double atmosphericPressure_;
};

/*!
 * \brief Xylem flow in a root segment network with passive solute, primary variables (p_r, x).
 *
 * Per unit root length: storage phi_r rho_m A_r (x), A_r = pi R^2; axial flux
 * K_ax (Psi_in - Psi_out)/d with K_ax taken from the permeability tensor
 * (m^4/(Pa s), viscosity included).
 */
class XylemModel : public Model
{
public:
    explicit XylemModel(FluidProperties water) : water_(water) {}

    int numEq() const override { return 2; }
    std::string name() const override { return "xylem"; }
    std::vector<std::string> primaryVariableNames() const override { return {"pr", "x"}; }

    EqVector storage(const ElementParams& params, const EqVector& values) const override;
    EqVector flux(const FluxContext& ctx) const override;

private:
    FluidProperties water_;
};

//! volumetric axial flux K_ax (Psi_in - Psi_out)/d between two network dofs
double xylemFlux(double axialConductivity, double distance, double pIn, double pOut,
                 double density, const Vec& xIn, const Vec& xOut, const Vec& gravity);

} // namespace fervor
