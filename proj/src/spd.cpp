#include "mdwm/spd.hpp"

#include "mdwm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace mdwm {

namespace {

void require_same_dim(const SpdMatrix& a, const SpdMatrix& b, const char* what) {
    if (a.dim() != b.dim()) {
        std::ostringstream msg;
        msg << what << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
        throw ValidationError(msg.str());
    }
}

void validate_weights(std::span<const SpdMatrix> mats, std::span<const double> weights) {
    if (mats.empty()) throw ValidationError("frechet_mean: empty matrix list");
    if (mats.size() != weights.size()) {
        throw ValidationError("frechet_mean: " + std::to_string(weights.size()) + " weights for " +
                              std::to_string(mats.size()) + " matrices");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("frechet_mean: weights must be finite and nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("frechet_mean: weights sum to " + std::to_string(total) + ", expected 1");
    }
    for (const auto& m : mats) require_same_dim(mats.front(), m, "frechet_mean");
}

// sum_i w_i log(M^{-1/2} A_i M^{-1/2})
Matrix tangent_gradient(std::span<const SpdMatrix> mats, std::span<const double> weights, const SpdMatrix& mean) {
    const Matrix invsqrt_mean = spectral_apply(mean.eigen(), [](double w) { return 1.0 / std::sqrt(w); });
    Matrix gradient = Matrix::Zero(mean.dim(), mean.dim());
    for (std::size_t i = 0; i < mats.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const Matrix whitened = symmetrize(invsqrt_mean * mats[i].matrix() * invsqrt_mean);
        gradient += weights[i] * spectral_apply(symmetric_eigen(whitened), [](double w) { return std::log(w); });
    }
    return symmetrize(gradient);
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

SpdMatrix::SpdMatrix(Matrix values, EigenDecomposition eig) : values_(std::move(values)), eig_(std::move(eig)) {}

SpdMatrix::SpdMatrix(const Matrix& values) {
    if (values.rows() == 0 || values.rows() != values.cols()) {
        throw ValidationError("SpdMatrix: expected a non-empty square matrix, got " + std::to_string(values.rows()) +
                              "x" + std::to_string(values.cols()));
    }
    if (!values.allFinite()) throw ValidationError("SpdMatrix: non-finite entries");
    const double scale = values.cwiseAbs().maxCoeff();
    const double asymmetry = (values - values.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > kSymmetryTolerance * scale) {
        std::ostringstream msg;
        msg << "SpdMatrix: not symmetric (max asymmetry " << asymmetry << ", scale " << scale << ")";
        throw ValidationError(msg.str());
    }
    values_ = symmetrize(values);
    eig_ = symmetric_eigen(values_);
    const double smallest = eig_.eigenvalues(0);
    const double largest = eig_.eigenvalues(eig_.eigenvalues.size() - 1);
    if (!(smallest > 0.0) || smallest <= kConditionFloor * largest) {
        std::ostringstream msg;
        msg << "SpdMatrix: not positive definite or too ill-conditioned (eigenvalues in [" << smallest << ", "
            << largest << "])";
        throw NumericalError(msg.str());
    }
}

SpdMatrix SpdMatrix::identity(Index dim) { return SpdMatrix(Matrix::Identity(dim, dim)); }

SpdMatrix SpdMatrix::diagonal(const Vector& entries) { return SpdMatrix(Matrix(entries.asDiagonal())); }

SpdMatrix SpdMatrix::diagonal(std::initializer_list<double> entries) {
    Vector v(static_cast<Index>(entries.size()));
    Index i = 0;
    for (double e : entries) v(i++) = e;
    return diagonal(v);
}

double SpdMatrix::condition_number() const {
    return eig_.eigenvalues(eig_.eigenvalues.size() - 1) / eig_.eigenvalues(0);
}

double relative_difference(const Matrix& a, const Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-300});
    return (a - b).norm() / scale;
}

SpdMatrix spd_power(const SpdMatrix& a, double p) {
    if (!std::isfinite(p)) throw ValidationError("spd_power: exponent must be finite");
    if (p == 1.0) return a;
    return SpdMatrix(spectral_apply(a.eigen(), [p](double w) { return std::pow(w, p); }));
}

Matrix spd_sqrt(const SpdMatrix& a) {
    return spectral_apply(a.eigen(), [](double w) { return std::sqrt(w); });
}

Matrix spd_invsqrt(const SpdMatrix& a) {
    return spectral_apply(a.eigen(), [](double w) { return 1.0 / std::sqrt(w); });
}

Matrix spd_log(const SpdMatrix& a) {
    return spectral_apply(a.eigen(), [](double w) { return std::log(w); });
}

SpdMatrix spd_exp(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols()) throw ValidationError("spd_exp: matrix is not square");
    if (!symmetric.allFinite()) throw ValidationError("spd_exp: non-finite entries");
    const double scale = std::max(symmetric.cwiseAbs().maxCoeff(), 1.0);
    if ((symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() > SpdMatrix::kSymmetryTolerance * scale) {
        throw ValidationError("spd_exp: matrix is not symmetric");
    }
    const auto eig = symmetric_eigen(symmetrize(symmetric));
    return SpdMatrix(spectral_apply(eig, [](double w) { return std::exp(w); }));
}

SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double lambda) {
    require_same_dim(a, b, "geodesic");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ValidationError("geodesic: lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    if (lambda == 0.0) return a;
    if (lambda == 1.0) return b;
    const Matrix sqrt_a = spd_sqrt(a);
    const Matrix invsqrt_a = spd_invsqrt(a);
    const auto inner = symmetric_eigen(symmetrize(invsqrt_a * b.matrix() * invsqrt_a));
    const Matrix powered = spectral_apply(inner, [lambda](double w) { return std::pow(w, lambda); });
    return SpdMatrix(symmetrize(sqrt_a * powered * sqrt_a));
}

DistanceFrom::DistanceFrom(const SpdMatrix& reference) : invsqrt_(spd_invsqrt(reference)) {}

double DistanceFrom::operator()(const SpdMatrix& query) const {
    if (query.dim() != dim()) {
        throw ValidationError("riemann_distance: dimension mismatch (" + std::to_string(dim()) + " vs " +
                              std::to_string(query.dim()) + ")");
    }
    const Matrix whitened = symmetrize(invsqrt_ * query.matrix() * invsqrt_);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(whitened, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("riemann_distance: eigendecomposition failed");
    double sum = 0.0;
    for (Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const double w = solver.eigenvalues()(i);
        if (!(w > 0.0)) throw NumericalError("riemann_distance: whitened matrix lost positive definiteness");
        const double l = std::log(w);
        sum += l * l;
    }
    return std::sqrt(sum);
}

double riemann_distance(const SpdMatrix& a, const SpdMatrix& b) {
    require_same_dim(a, b, "riemann_distance");
    return DistanceFrom(a)(b);
}

double frechet_gradient_norm(std::span<const SpdMatrix> mats, std::span<const double> weights,
                             const SpdMatrix& mean) {
    validate_weights(mats, weights);
    require_same_dim(mats.front(), mean, "frechet_gradient_norm");
    return tangent_gradient(mats, weights, mean).norm();
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, std::span<const double> weights,
                       const FrechetOptions& options) {
    validate_weights(mats, weights);
    if (mats.size() == 1) return mats.front();

    // A matrix carrying all the weight is the mean.
    for (std::size_t i = 0; i < mats.size(); ++i) {
        if (weights[i] == 1.0) return mats[i];
    }

    const Index dim = mats.front().dim();
    Matrix start = Matrix::Zero(dim, dim);
    for (std::size_t i = 0; i < mats.size(); ++i) start += weights[i] * mats[i].matrix();
    const SpdMatrix initial(symmetrize(start));

    // M = L L^T. The frame is carried along each geodesic step
    // (L <- L exp(X / 2)), which parallel-transports the whitened tangent
    // coordinates, so successive gradients are comparable for the
    // Barzilai-Borwein step length. The first step has length 1, i.e. the
    // classical fixed-point update.
    Matrix frame = spd_sqrt(initial);
    Matrix frame_inv = spd_invsqrt(initial);
    Matrix previous_gradient;
    Matrix previous_step;
    double step_length = 1.0;
    double gradient_norm = 0.0;
    for (int iter = 0; iter <= options.max_iterations; ++iter) {
        Matrix gradient = Matrix::Zero(dim, dim);
        for (std::size_t i = 0; i < mats.size(); ++i) {
            if (weights[i] == 0.0) continue;
            const Matrix whitened = symmetrize(frame_inv * mats[i].matrix() * frame_inv.transpose());
            gradient += weights[i] * spectral_apply(symmetric_eigen(whitened), [](double w) { return std::log(w); });
        }
        gradient = symmetrize(gradient);
        gradient_norm = gradient.norm();
        if (gradient_norm <= options.tolerance) return SpdMatrix(symmetrize(frame * frame.transpose()));
        if (iter == options.max_iterations) break;
        if (iter > 0) {
            const Matrix change = previous_gradient - gradient;
            const double curvature = (previous_step.array() * change.array()).sum();
            step_length = curvature > 0.0 ? previous_step.squaredNorm() / curvature : 1.0;
        }
        const Matrix step = step_length * gradient;
        const auto step_eig = symmetric_eigen(step);
        frame = frame * spectral_apply(step_eig, [](double w) { return std::exp(0.5 * w); });
        frame_inv = spectral_apply(step_eig, [](double w) { return std::exp(-0.5 * w); }) * frame_inv;
        previous_gradient = std::move(gradient);
        previous_step = step;
    }
    std::ostringstream msg;
    msg << "frechet_mean: no convergence after " << options.max_iterations << " iterations (gradient norm "
        << gradient_norm << ", tolerance " << options.tolerance << ")";
    throw NumericalError(msg.str());
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, const FrechetOptions& options) {
    if (mats.empty()) throw ValidationError("frechet_mean: empty matrix list");
    const std::vector<double> weights(mats.size(), 1.0 / static_cast<double>(mats.size()));
    // Uniform weights may miss 1 by an ulp-scale amount; that is within tolerance.
    return frechet_mean(mats, weights, options);
}

}  // namespace mdwm
