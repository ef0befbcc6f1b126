#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace fervor {

//! Coordinates are always stored with three components; 2D data lives in the z = 0 plane.
using Vec = Eigen::Vector3d;
using Tensor = Eigen::Matrix3d;

//! Upper bound for the number of equations of any model in this library.
inline constexpr int maxNumEq = 2;

//! Small per-dof vector (primary variables, residual contributions, fluxes).
using EqVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, maxNumEq, 1>;

inline EqVector zeroEq(int numEq) { return EqVector::Zero(numEq); }

struct Error : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

//! Malformed input (mesh files, parameter files).
struct ParseError : Error
{
    using Error::Error;
};

//! Invalid mesh or geometry construction.
struct GeometryError : Error
{
    using Error::Error;
};

//! Newton divergence, singular systems, time step underflow.
struct NumericalProblem : Error
{
    using Error::Error;
};

struct ParameterError : Error
{
    using Error::Error;
};

} // namespace fervor
