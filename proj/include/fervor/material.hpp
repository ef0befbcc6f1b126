#pragma once

#include <fervor/common.hpp>

#include <Eigen/Core>

#include <vector>

namespace fervor {

/*!
 * \brief Van Genuchten-Mualem parameters.
 *
 * The effective saturation Se = (sw - swr)/(1 - swr) is regularized below
 * seLow (tangent extension of pc) and above seHigh (linear to pc(1) = 0).
 */
struct VanGenuchten
{
    double alpha;        //!< 1/Pa
    double n;
    double swr = 0.0;
    double seLow = 0.01;
    double seHigh = 0.99;

    double m() const { return 1.0 - 1.0/n; }
    void validate() const;
};

double effectiveSaturation(const VanGenuchten& vg, double sw);

//! capillary pressure pc(sw) in Pa
double pc(const VanGenuchten& vg, double sw);
//! inverse of pc: water saturation for a given capillary pressure
double swFromPc(const VanGenuchten& vg, double capillaryPressure);
//! wetting / non-wetting relative permeability, clamped to [0,1]
double krw(const VanGenuchten& vg, double sw);
double krn(const VanGenuchten& vg, double sw);

//! Symmetric positive definite 2x2 intrinsic permeability (m^2).
struct PermeabilityTensor
{
    Eigen::Matrix2d k;

    //! embed into a 3x3 tensor acting in the xy-plane
    Tensor toWorld() const;
};

/*!
 * \brief K = R(phi)^-1 diag(kh, kh/xi) R(phi), phi in degrees.
 */
PermeabilityTensor rotatedPermeability(double kh, double xi, double phiDegrees);

struct FluidProperties
{
    double density;       //!< kg/m^3
    double viscosity;     //!< Pa s
    double molarDensity;  //!< mol/m^3
    double diffusion = 0.0; //!< binary diffusion coefficient m^2/s
};

namespace fluids {

inline constexpr double gasConstant = 8.314462618;

//! constant-property water: rho = 1000 kg/m^3, mu = 1e-3 Pa s, 5.55e4 mol/m^3
FluidProperties water();

//! nitrogen viscosity (constant)
inline constexpr double nitrogenViscosity = 1.75e-5;
inline constexpr double nitrogenMolarMass = 0.028;
inline constexpr double nitrogenTemperature = 293.15;

//! ideal gas density of nitrogen at T = 293.15 K
double nitrogenDensity(double pressure);

} // namespace fluids

/*!
 * \brief Material parameters of one element.
 *
 * `extrusion` scales volumes and face areas: fracture aperture for 1D facet
 * domains, slab thickness for 2D bulk domains, 1 otherwise.
 */
struct ElementParams
{
    double porosity = 1.0;
    Tensor permeability = Tensor::Identity();
    VanGenuchten vg{1e-4, 2.0};
    double extrusion = 1.0;
    //! root radius for segment networks (m)
    double radius = 0.0;
};

//! per-element material parameter fields
class SpatialParams
{
public:
    SpatialParams() = default;
    SpatialParams(int numElements, const ElementParams& uniform);
    explicit SpatialParams(std::vector<ElementParams> params);

    const ElementParams& operator[](int element) const { return params_[element]; }
    ElementParams& operator[](int element) { return params_[element]; }
    int size() const { return static_cast<int>(params_.size()); }

    void validate() const;

private:
    std::vector<ElementParams> params_;
};

} // namespace fervor
