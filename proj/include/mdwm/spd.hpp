#pragma once

// Affine-invariant geometry on the manifold of symmetric positive-definite
// matrices. Every matrix function goes through a symmetric eigendecomposition.

#include <Eigen/Dense>

#include <initializer_list>
#include <span>

namespace mdwm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct EigenDecomposition {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // orthonormal columns
};

EigenDecomposition symmetric_eigen(const Matrix& symmetric);

// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

// V diag(f(w)) V^T
template <typename F>
Matrix spectral_apply(const EigenDecomposition& eig, F&& f) {
    Vector mapped = eig.eigenvalues.unaryExpr(std::forward<F>(f));
    Matrix out = eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.transpose();
    return symmetrize(out);
}

/// An immutable symmetric positive-definite matrix.
///
/// Construction checks symmetry (max |A - A^T| <= 1e-10 max |A|), finiteness
/// and conditioning (smallest eigenvalue > 1e-12 * largest), then stores the
/// exactly symmetrized matrix together with its eigendecomposition so matrix
/// functions do not refactorize.
class SpdMatrix {
public:
    static constexpr double kSymmetryTolerance = 1e-10;
    static constexpr double kConditionFloor = 1e-12;

    explicit SpdMatrix(const Matrix& values);

    static SpdMatrix identity(Index dim);
    static SpdMatrix diagonal(const Vector& entries);
    static SpdMatrix diagonal(std::initializer_list<double> entries);

    Index dim() const { return values_.rows(); }
    const Matrix& matrix() const { return values_; }
    const EigenDecomposition& eigen() const { return eig_; }
    double operator()(Index row, Index col) const { return values_(row, col); }

    // Smallest / largest eigenvalue ratio inverted.
    double condition_number() const;

private:
    SpdMatrix(Matrix values, EigenDecomposition eig);

    Matrix values_;
    EigenDecomposition eig_;
};

// Relative Frobenius distance ||A - B|| / max(||A||, ||B||, tiny).
double relative_difference(const Matrix& a, const Matrix& b);

SpdMatrix spd_power(const SpdMatrix& a, double p);
Matrix spd_sqrt(const SpdMatrix& a);
Matrix spd_invsqrt(const SpdMatrix& a);

// Principal logarithm; the result is symmetric.
Matrix spd_log(const SpdMatrix& a);

// Exponential of a symmetric matrix.
SpdMatrix spd_exp(const Matrix& symmetric);

// A #_lambda B = A^{1/2} (A^{-1/2} B A^{-1/2})^lambda A^{1/2}.
// lambda = 0 and lambda = 1 return the endpoints unchanged.
SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double lambda);

// ||log(A^{-1/2} B A^{-1/2})||_F
double riemann_distance(const SpdMatrix& a, const SpdMatrix& b);

// Distance from a fixed reference, with A^{-1/2} computed once.
class DistanceFrom {
public:
    explicit DistanceFrom(const SpdMatrix& reference);
    double operator()(const SpdMatrix& query) const;
    Index dim() const { return invsqrt_.rows(); }

private:
    Matrix invsqrt_;
};

struct FrechetOptions {
    int max_iterations = 50;
    double tolerance = 1e-9;  // Frobenius norm of the tangent gradient
};

// Norm of sum_i w_i log(M^{-1/2} A_i M^{-1/2}); zero at the weighted mean.
double frechet_gradient_norm(std::span<const SpdMatrix> mats, std::span<const double> weights,
                             const SpdMatrix& mean);

/// Weighted affine-invariant Frechet (Karcher) mean.
///
/// Riemannian gradient descent from the weighted arithmetic mean:
/// M <- M^{1/2} exp(t G) M^{1/2} with G = sum_i w_i log(M^{-1/2} A_i M^{-1/2}).
/// The first step uses t = 1 (the classical fixed-point update); later steps
/// use the Barzilai-Borwein length computed from parallel-transported
/// gradients, which keeps convergence fast when the inputs are widely
/// dispersed and t = 1 would oscillate. Stops when ||G||_F <= tolerance and
/// throws NumericalError (carrying the final gradient norm) otherwise.
SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, std::span<const double> weights,
                       const FrechetOptions& options = {});

// Uniform weights.
SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, const FrechetOptions& options = {});

}  // namespace mdwm
