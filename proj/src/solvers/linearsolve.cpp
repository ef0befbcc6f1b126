#include <fervor/solvers.hpp>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

namespace fervor {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

double relativeResidual(const SparseMatrix& a, const Vector& x, const Vector& b)
{
    const double nb = b.norm();
    const double nr = (a*x - b).norm();
    return nb > 0.0 ? nr/nb : nr;
}

//! inverse of the diagonal blocks, assembled as a sparse block-diagonal matrix
ColMatrix blockJacobiInverse(const SparseMatrix& a, int blockSize)
{
    const int n = static_cast<int>(a.rows());
    if (blockSize < 1 || n % blockSize != 0)
        throw ParameterError("block size does not divide the matrix dimension");

    std::vector<Triplet> triplets;
    for (int start = 0; start < n; start += blockSize)
    {
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(blockSize, blockSize);
        for (int i = 0; i < blockSize; ++i)
            for (SparseMatrix::InnerIterator it(a, start + i); it; ++it)
                if (it.col() >= start && it.col() < start + blockSize)
                    block(i, it.col() - start) = it.value();

        Eigen::FullPivLU<Eigen::MatrixXd> lu(block);
        if (!lu.isInvertible())
            throw NumericalProblem("singular diagonal block at row " + std::to_string(start));
        const Eigen::MatrixXd inv = lu.inverse();
        for (int i = 0; i < blockSize; ++i)
            for (int j = 0; j < blockSize; ++j)
                if (inv(i, j) != 0.0)
                    triplets.emplace_back(start + i, start + j, inv(i, j));
    }
    ColMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

} // end anonymous namespace

Vector linearSolve(const SparseMatrix& a, const Vector& b, const LinearSolverOptions& options,
                   LinearSolverReport* report)
{
    if (a.rows() != a.cols())
        throw Error("linear solve requires a square matrix");
    if (a.rows() != b.size())
        throw Error("right hand side size does not match the matrix");

    LinearSolverReport rep;
    Vector x;
    if (b.norm() == 0.0)
    {
        x = Vector::Zero(b.size());
    }
    else if (options.type == LinearSolverType::lu)
    {
        const ColMatrix ac(a);
        Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(ac);
        if (lu.info() != Eigen::Success)
            throw NumericalProblem("singular matrix: " + lu.lastErrorMessage());
        x = lu.solve(b);
        // a few steps of iterative refinement with the same factorization
        for (int k = 0; k < 3 && relativeResidual(a, x, b) > 1e-13; ++k)
            x += lu.solve(b - a*x);
        if (!x.allFinite())
            throw NumericalProblem("singular matrix: non-finite solution of the linear system");
    }
    else
    {
        const ColMatrix dinv = blockJacobiInverse(a, options.blockSize);
        const ColMatrix pa = dinv*ColMatrix(a);
        const Vector pb = dinv*b;
        Eigen::BiCGSTAB<ColMatrix, Eigen::IdentityPreconditioner> solver;
        solver.setMaxIterations(options.maxIterations);
        solver.setTolerance(0.01*options.tolerance);
        solver.compute(pa);
        x = solver.solve(pb);
        rep.iterations = static_cast<int>(solver.iterations());
        if (!x.allFinite() || relativeResidual(a, x, b) > options.tolerance)
            throw NumericalProblem("iterative solver stagnated after " + std::to_string(rep.iterations)
                                   + " iterations, relative residual " + std::to_string(relativeResidual(a, x, b)));
    }

    rep.relativeResidual = relativeResidual(a, x, b);
    if (report)
        *report = rep;
    return x;
}

} // namespace fervor
