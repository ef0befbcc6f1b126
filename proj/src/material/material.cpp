#include <fervor/material.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fervor {

void VanGenuchten::validate() const
{
    if (!(alpha > 0.0))
        throw ParameterError("van Genuchten alpha must be positive");
    if (!(n > 1.0))
        throw ParameterError("van Genuchten n must be greater than one");
    if (!(swr >= 0.0 && swr < 1.0))
        throw ParameterError("residual saturation must be in [0,1)");
    if (!(seLow > 0.0 && seLow < seHigh && seHigh < 1.0))
        throw ParameterError("invalid van Genuchten regularization thresholds");
}

double effectiveSaturation(const VanGenuchten& vg, double sw)
{
    return (sw - vg.swr)/(1.0 - vg.swr);
}

namespace {

double rawPc(const VanGenuchten& vg, double se)
{
    return std::pow(std::pow(se, -1.0/vg.m()) - 1.0, 1.0/vg.n)/vg.alpha;
}

double rawDpcDse(const VanGenuchten& vg, double se)
{
    const double m = vg.m();
    const double x = std::pow(se, -1.0/m) - 1.0;
    return std::pow(x, 1.0/vg.n - 1.0)/(vg.alpha*vg.n)*(-1.0/m)*std::pow(se, -1.0/m - 1.0);
}

double rawSe(const VanGenuchten& vg, double capillaryPressure)
{
    return std::pow(1.0 + std::pow(vg.alpha*capillaryPressure, vg.n), -vg.m());
}

} // end anonymous namespace

double pc(const VanGenuchten& vg, double sw)
{
    const double se = effectiveSaturation(vg, sw);
    if (se < vg.seLow)
        return rawPc(vg, vg.seLow) + rawDpcDse(vg, vg.seLow)*(se - vg.seLow);
    if (se > vg.seHigh)
        return rawPc(vg, vg.seHigh)*(1.0 - se)/(1.0 - vg.seHigh);
    return rawPc(vg, se);
}

double swFromPc(const VanGenuchten& vg, double capillaryPressure)
{
    double se = 1.0;
    const double pcHigh = rawPc(vg, vg.seHigh);
    const double pcLow = rawPc(vg, vg.seLow);
    if (capillaryPressure <= 0.0)
        se = 1.0;
    else if (capillaryPressure < pcHigh)
        se = 1.0 - capillaryPressure/pcHigh*(1.0 - vg.seHigh);
    else if (capillaryPressure <= pcLow)
        se = rawSe(vg, capillaryPressure);
    else
        se = std::max(0.0, vg.seLow + (capillaryPressure - pcLow)/rawDpcDse(vg, vg.seLow));
    return vg.swr + se*(1.0 - vg.swr);
}

double krw(const VanGenuchten& vg, double sw)
{
    const double se = std::clamp(effectiveSaturation(vg, sw), 0.0, 1.0);
    const double m = vg.m();
    const double r = 1.0 - std::pow(1.0 - std::pow(se, 1.0/m), m);
    return std::clamp(std::sqrt(se)*r*r, 0.0, 1.0);
}

double krn(const VanGenuchten& vg, double sw)
{
    const double se = std::clamp(effectiveSaturation(vg, sw), 0.0, 1.0);
    const double m = vg.m();
    return std::clamp(std::sqrt(1.0 - se)*std::pow(1.0 - std::pow(se, 1.0/m), 2.0*m), 0.0, 1.0);
}

Tensor PermeabilityTensor::toWorld() const
{
    Tensor t = Tensor::Zero();
    t.topLeftCorner<2, 2>() = k;
    return t;
}

PermeabilityTensor rotatedPermeability(double kh, double xi, double phiDegrees)
{
    if (!(kh > 0.0) || !(xi > 0.0))
        throw ParameterError("permeability and anisotropy ratio must be positive");

    const double phi = phiDegrees*std::numbers::pi/180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    Eigen::Matrix2d rot;
    rot << c, -s,
           s,  c;
    const Eigen::Matrix2d diag = Eigen::Vector2d(kh, kh/xi).asDiagonal();
    Eigen::Matrix2d k = rot.transpose()*diag*rot;
    // remove round-off asymmetry
    k(0, 1) = k(1, 0) = 0.5*(k(0, 1) + k(1, 0));
    return {k};
}

namespace fluids {

FluidProperties water()
{
    return {1000.0, 1e-3, 5.55e4, 0.0};
}

double nitrogenDensity(double pressure)
{
    return pressure*nitrogenMolarMass/(gasConstant*nitrogenTemperature);
}

} // namespace fluids

SpatialParams::SpatialParams(int numElements, const ElementParams& uniform)
: params_(numElements, uniform)
{}

SpatialParams::SpatialParams(std::vector<ElementParams> params)
: params_(std::move(params))
{}

void SpatialParams::validate() const
{
    for (const auto& p : params_)
    {
        if (!(p.porosity > 0.0 && p.porosity <= 1.0))
            throw ParameterError("porosity must be in (0,1]");
        if (!(p.extrusion > 0.0))
            throw ParameterError("extrusion factor (aperture) must be positive");
        p.vg.validate();
    }
}

} // namespace fervor
