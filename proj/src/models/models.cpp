#include <fervor/models.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace fervor {

bool BoundaryTypes::hasDirichlet(int numEq) const
{
    for (int eq = 0; eq < numEq; ++eq)
        if (isDirichlet(eq))
            return true;
    return false;
}

ProblemDefinition ProblemDefinition::withMarkers(int numEq, std::map<int, BoundaryTypes> markerTypes)
{
    ProblemDefinition problem;
    problem.boundaryTypes = [types = std::move(markerTypes)](int marker, const Vec&) -> std::optional<BoundaryTypes> {
        const auto it = types.find(marker);
        if (it == types.end())
            return std::nullopt;
        return it->second;
    };
    problem.dirichlet = [numEq](const Vec&, double) { return zeroEq(numEq); };
    problem.neumann = [numEq](int, const Vec&, double, const EqVector&) { return zeroEq(numEq); };
    problem.initial = [numEq](const Vec&) { return zeroEq(numEq); };
    problem.source = [numEq](const Vec&, double, const EqVector&) { return zeroEq(numEq); };
    return problem;
}

BoundaryTypes ProblemDefinition::boundaryTypesAt(int marker, const Vec& pos) const
{
    std::optional<BoundaryTypes> types;
    if (boundaryTypes)
        types = boundaryTypes(marker, pos);
    if (!types)
        throw ParameterError("no boundary condition specified for boundary marker " + std::to_string(marker));
    return *types;
}

// ---------------------------------------------------------------------------

double tpfaGeometricFactor(const SubControlVolumeFace& scvf, const Vec& cellCenter, double extrusion,
                           bool alongNormal)
{
    const double distance = alongNormal ? std::abs((scvf.center - cellCenter).dot(scvf.unitOuterNormal))
                                        : (scvf.center - cellCenter).norm();
    if (!(distance > 0.0))
        throw GeometryError("zero center-to-face distance at scvf " + std::to_string(scvf.index));
    return scvf.area*extrusion/distance;
}

double normalPermeability(const Tensor& k, const Vec& normal)
{
    return normal.dot(k*normal);
}

double harmonicTransmissibility(double tInside, double tOutside)
{
    if (std::isinf(tOutside))
        return tInside;
    if (std::isinf(tInside))
        return tOutside;
    const double sum = tInside + tOutside;
    return sum > 0.0 ? tInside*tOutside/sum : 0.0;
}

double potentialDifference(const PhasePoint& a, const PhasePoint& b, const Vec& gravity)
{
    const double rho = 0.5*(a.density + b.density);
    return a.pressure - b.pressure - rho*gravity.dot(a.position - b.position);
}

double tpfaPhaseFlux(const PhasePoint& inside, std::span<const PhasePoint> outside, const Vec& gravity)
{
    const auto pairFlux = [&](const PhasePoint& out, double t) {
        const double dPsi = potentialDifference(inside, out, gravity);
        const double upwind = dPsi >= 0.0 ? inside.upwindTerm : out.upwindTerm;
        return t*upwind*dPsi;
    };

    if (outside.size() == 1)
        return pairFlux(outside[0], harmonicTransmissibility(inside.halfTransmissibility, outside[0].halfTransmissibility));

    double sum = inside.halfTransmissibility;
    for (const auto& out : outside)
        sum += out.halfTransmissibility;
    double flux = 0.0;
    if (!(sum > 0.0))
        return flux;
    for (const auto& out : outside)
        flux += pairFlux(out, inside.halfTransmissibility*out.halfTransmissibility/sum);
    return flux;
}

double boxPhaseFlux(const SubControlVolumeFace& scvf, const Tensor& k, double extrusion,
                    std::span<const double> pressures, std::span<const double> densities,
                    double upwindInside, double upwindOutside, const Vec& gravity)
{
    Vec gradP = Vec::Zero();
    double rho = 0.0;
    for (std::size_t i = 0; i < pressures.size(); ++i)
    {
        gradP += pressures[i]*scvf.shapeGradients[i];
        rho += densities[i]*scvf.shapeValues[i];
    }
    const double potentialFlux = -scvf.unitOuterNormal.dot(k*(gradP - rho*gravity))*scvf.area*extrusion;
    return (potentialFlux >= 0.0 ? upwindInside : upwindOutside)*potentialFlux;
}

double boxNormalGradient(const SubControlVolumeFace& scvf, double extrusion, std::span<const double> values)
{
    Vec grad = Vec::Zero();
    for (std::size_t i = 0; i < values.size(); ++i)
        grad += values[i]*scvf.shapeGradients[i];
    return grad.dot(scvf.unitOuterNormal)*scvf.area*extrusion;
}

double rootUptake(double soilPressure, double rootPressure, double radius, double krw,
                  double radialConductivity, double molarDensity)
{
    return -2.0*std::numbers::pi*radius*krw*radialConductivity*(soilPressure - rootPressure)*molarDensity;
}

double xylemFlux(double axialConductivity, double distance, double pIn, double pOut,
                 double density, const Vec& xIn, const Vec& xOut, const Vec& gravity)
{
    if (!(distance > 0.0))
        throw GeometryError("zero distance between xylem dofs");
    return axialConductivity*(pIn - pOut - density*gravity.dot(xIn - xOut))/distance;
}

namespace {

//! collect a scalar per element corner for box fluxes
template<class F>
std::vector<double> cornerValues(const FluxContext& ctx, F&& f)
{
    std::vector<double> v;
    v.reserve(ctx.elementValues.size());
    for (const auto& values : ctx.elementValues)
        v.push_back(f(values));
    return v;
}

template<class F>
std::vector<PhasePoint> outsidePoints(const FluxContext& ctx, F&& makePoint)
{
    std::vector<PhasePoint> points;
    points.reserve(ctx.outside.size());
    for (const auto& state : ctx.outside)
        points.push_back(makePoint(state));
    return points;
}

double halfTransmissibility(const DofState& state, const Vec& normal, double coefficient = 1.0)
{
    if (std::isinf(state.geometricFactor))
        return state.geometricFactor;
    return state.geometricFactor*normalPermeability(state.params->permeability, normal)*coefficient;
}

double scalarHalfTransmissibility(const DofState& state, double coefficient)
{
    if (std::isinf(state.geometricFactor))
        return state.geometricFactor;
    return state.geometricFactor*coefficient;
}

} // end anonymous namespace

// ---------------------------------------------------------------------------
// single phase

EqVector OnePModel::storage(const ElementParams& params, const EqVector& values) const
{
    EqVector s(1);
    s[0] = params.porosity*density(values[0]);
    return s;
}

EqVector OnePModel::flux(const FluxContext& ctx) const
{
    EqVector f(1);
    const double mu = fluid_.viscosity;
    if (ctx.scheme == Scheme::tpfa)
    {
        const auto point = [&](const DofState& s) {
            const double rho = density(s.values[0]);
            return PhasePoint{s.values[0], rho, rho/mu, s.position, halfTransmissibility(s, ctx.scvf->unitOuterNormal)};
        };
        f[0] = tpfaPhaseFlux(point(ctx.inside), outsidePoints(ctx, point), ctx.gravity);
        return f;
    }

    const auto p = cornerValues(ctx, [](const EqVector& v) { return v[0]; });
    const auto rho = cornerValues(ctx, [&](const EqVector& v) { return density(v[0]); });
    f[0] = boxPhaseFlux(*ctx.scvf, ctx.elementParams->permeability, ctx.extrusion, p, rho,
                        rho[ctx.insideLocal]/mu, rho[ctx.outsideLocal]/mu, ctx.gravity);
    return f;
}

// ---------------------------------------------------------------------------
// tracer

EqVector TracerModel::storage(const ElementParams& params, const EqVector& values) const
{
    EqVector s(1);
    s[0] = params.porosity*fluid_.molarDensity*values[0];
    return s;
}

double TracerModel::volumeFlux(const SubControlVolumeFace& scvf, double extrusion) const
{
    return velocity_(scvf.center).dot(scvf.unitOuterNormal)*scvf.area*extrusion;
}

EqVector TracerModel::flux(const FluxContext& ctx) const
{
    EqVector f(1);
    const double rhoM = fluid_.molarDensity;
    const double volFlux = volumeFlux(*ctx.scvf, ctx.extrusion);

    if (ctx.scheme == Scheme::tpfa)
    {
        const double xUp = volFlux >= 0.0 ? ctx.inside.values[0] : ctx.outside.front().values[0];
        const auto point = [&](const DofState& s) {
            return PhasePoint{s.values[0], 0.0, 1.0, s.position,
                              scalarHalfTransmissibility(s, rhoM*s.params->porosity*fluid_.diffusion)};
        };
        f[0] = xUp*rhoM*volFlux + tpfaPhaseFlux(point(ctx.inside), outsidePoints(ctx, point), Vec::Zero());
        return f;
    }

    const auto x = cornerValues(ctx, [](const EqVector& v) { return v[0]; });
    const double xUp = volFlux >= 0.0 ? x[ctx.insideLocal] : x[ctx.outsideLocal];
    const double dEff = ctx.elementParams->porosity*fluid_.diffusion;
    f[0] = xUp*rhoM*volFlux - rhoM*dEff*boxNormalGradient(*ctx.scvf, ctx.extrusion, x);
    return f;
}

// ---------------------------------------------------------------------------
// two phase

double TwoPModel::gasDensity(double pn) const
{
    return constantGasDensity_ ? *constantGasDensity_ : fluids::nitrogenDensity(pn);
}

TwoPModel::Phases TwoPModel::phases(const ElementParams& params, const EqVector& values) const
{
    Phases ph;
    ph.sn = values[1];
    ph.sw = 1.0 - ph.sn;
    ph.pw = values[0];
    ph.pn = ph.pw + pc(params.vg, ph.sw);
    ph.rhoW = water_.density;
    ph.rhoN = gasDensity(ph.pn);
    ph.mobW = krw(params.vg, ph.sw)/water_.viscosity;
    ph.mobN = krn(params.vg, ph.sw)/gasViscosity_;
    return ph;
}

EqVector TwoPModel::storage(const ElementParams& params, const EqVector& values) const
{
    const auto ph = phases(params, values);
    EqVector s(2);
    s[0] = params.porosity*ph.rhoW*ph.sw;
    s[1] = params.porosity*ph.rhoN*ph.sn;
    return s;
}

PhasePoint TwoPModel::phasePoint(int phase, const DofState& state) const
{
    const auto ph = phases(*state.params, state.values);
    const double t = std::isinf(state.geometricFactor) ? state.geometricFactor : 0.0;
    if (phase == 0)
        return {ph.pw, ph.rhoW, ph.rhoW*ph.mobW, state.position, t};
    return {ph.pn, ph.rhoN, ph.rhoN*ph.mobN, state.position, t};
}

EqVector TwoPModel::flux(const FluxContext& ctx) const
{
    EqVector f(2);
    if (ctx.scheme == Scheme::tpfa)
    {
        for (int phase = 0; phase < 2; ++phase)
        {
            const auto point = [&](const DofState& s) {
                auto p = phasePoint(phase, s);
                p.halfTransmissibility = halfTransmissibility(s, ctx.scvf->unitOuterNormal);
                return p;
            };
            f[phase] = tpfaPhaseFlux(point(ctx.inside), outsidePoints(ctx, point), ctx.gravity);
        }
        return f;
    }

    std::vector<Phases> ph;
    for (const auto& v : ctx.elementValues)
        ph.push_back(phases(*ctx.elementParams, v));
    std::vector<double> p(ph.size()), rho(ph.size());
    for (std::size_t i = 0; i < ph.size(); ++i) { p[i] = ph[i].pw; rho[i] = ph[i].rhoW; }
    const auto& in = ph[ctx.insideLocal];
    const auto& out = ph[ctx.outsideLocal];
    f[0] = boxPhaseFlux(*ctx.scvf, ctx.elementParams->permeability, ctx.extrusion, p, rho,
                        in.rhoW*in.mobW, out.rhoW*out.mobW, ctx.gravity);
    for (std::size_t i = 0; i < ph.size(); ++i) { p[i] = ph[i].pn; rho[i] = ph[i].rhoN; }
    f[1] = boxPhaseFlux(*ctx.scvf, ctx.elementParams->permeability, ctx.extrusion, p, rho,
                        in.rhoN*in.mobN, out.rhoN*out.mobN, ctx.gravity);
    return f;
}

// ---------------------------------------------------------------------------
// Richards with solute

double RichardsModel::saturation(const ElementParams& params, double pw) const
{
    return swFromPc(params.vg, atmosphericPressure_ - pw);
}

double RichardsModel::relativePermeability(const ElementParams& params, double pw) const
{
    return krw(params.vg, saturation(params, pw));
}

EqVector RichardsModel::storage(const ElementParams& params, const EqVector& values) const
{
    const double water = params.porosity*saturation(params, values[0])*water_.molarDensity;
    EqVector s(2);
    s[0] = water;
    s[1] = water*values[1];
    return s;
}

EqVector RichardsModel::flux(const FluxContext& ctx) const
{
    EqVector f(2);
    const double rhoM = water_.molarDensity;
    const double rho = water_.density;
    const double mu = water_.viscosity;

    if (ctx.scheme == Scheme::tpfa)
    {
        const auto waterPoint = [&](const DofState& s) {
            const double kr = relativePermeability(*s.params, s.values[0]);
            return PhasePoint{s.values[0], rho, rhoM*kr/mu, s.position, halfTransmissibility(s, ctx.scvf->unitOuterNormal)};
        };
        const auto solutePoint = [&](const DofState& s) {
            auto p = waterPoint(s);
            p.upwindTerm *= s.values[1];
            return p;
        };
        const auto diffusionPoint = [&](const DofState& s) {
            const double dEff = s.params->porosity*saturation(*s.params, s.values[0])*water_.diffusion;
            return PhasePoint{s.values[1], 0.0, 1.0, s.position, scalarHalfTransmissibility(s, rhoM*dEff)};
        };
        f[0] = tpfaPhaseFlux(waterPoint(ctx.inside), outsidePoints(ctx, waterPoint), ctx.gravity);
        f[1] = tpfaPhaseFlux(solutePoint(ctx.inside), outsidePoints(ctx, solutePoint), ctx.gravity)
             + tpfaPhaseFlux(diffusionPoint(ctx.inside), outsidePoints(ctx, diffusionPoint), Vec::Zero());
        return f;
    }

    const auto& params = *ctx.elementParams;
    const auto p = cornerValues(ctx, [](const EqVector& v) { return v[0]; });
    const auto x = cornerValues(ctx, [](const EqVector& v) { return v[1]; });
    const std::vector<double> rhoCorners(p.size(), rho);
    const auto& in = ctx.elementValues[ctx.insideLocal];
    const auto& out = ctx.elementValues[ctx.outsideLocal];
    const double mobIn = rhoM*relativePermeability(params, in[0])/mu;
    const double mobOut = rhoM*relativePermeability(params, out[0])/mu;

    f[0] = boxPhaseFlux(*ctx.scvf, params.permeability, ctx.extrusion, p, rhoCorners, mobIn, mobOut, ctx.gravity);
    const double advective = boxPhaseFlux(*ctx.scvf, params.permeability, ctx.extrusion, p, rhoCorners,
                                          mobIn*in[1], mobOut*out[1], ctx.gravity);
    const double dEff = 0.5*params.porosity*water_.diffusion*(saturation(params, in[0]) + saturation(params, out[0]));
    f[1] = advective - rhoM*dEff*boxNormalGradient(*ctx.scvf, ctx.extrusion, x);
    return f;
}

// ---------------------------------------------------------------------------
// xylem

EqVector XylemModel::storage(const ElementParams& params, const EqVector& values) const
{
    const double area = std::numbers::pi*params.radius*params.radius;
    EqVector s(2);
    s[0] = params.porosity*water_.molarDensity*area;
    s[1] = s[0]*values[1];
    return s;
}

EqVector XylemModel::flux(const FluxContext& ctx) const
{
    if (ctx.scheme != Scheme::tpfa)
        throw Error("the xylem model requires the tpfa scheme");

    EqVector f(2);
    const double rhoM = water_.molarDensity;
    const auto waterPoint = [&](const DofState& s) {
        return PhasePoint{s.values[0], water_.density, rhoM, s.position, halfTransmissibility(s, ctx.scvf->unitOuterNormal)};
    };
    const auto solutePoint = [&](const DofState& s) {
        auto p = waterPoint(s);
        p.upwindTerm *= s.values[1];
        return p;
    };
    f[0] = tpfaPhaseFlux(waterPoint(ctx.inside), outsidePoints(ctx, waterPoint), ctx.gravity);
    f[1] = tpfaPhaseFlux(solutePoint(ctx.inside), outsidePoints(ctx, solutePoint), ctx.gravity);
    return f;
}

} // namespace fervor
