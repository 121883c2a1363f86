#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "featdist/error.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/metric_result.hpp"

namespace featdist {

/// Gaussian fitted to a feature matrix: column means and the unbiased
/// (n - 1) sample covariance, explicitly symmetrized.
struct GaussianMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::size_t n_samples = 0;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

template <typename Derived>
GaussianMoments fit_moments(const Eigen::MatrixBase<Derived>& x) {
    const auto n = x.rows();
    if (n < 2) {
        throw Error(ErrorKind::InsufficientSamples, "moments need at least 2 samples, got " + std::to_string(n));
    }
    GaussianMoments m;
    m.n_samples = static_cast<std::size_t>(n);
    m.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
    const Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(n - 1);
    m.cov = 0.5 * (c + c.transpose());
    return m;
}

inline GaussianMoments fit_moments(const FeatureMatrix& x) { return fit_moments(x.values()); }

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw Error(ErrorKind::NotSymmetric, std::string(what) + " is not square");
    }
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw Error(ErrorKind::NotSymmetric, std::string(what) + " is not symmetric (max asymmetry " +
                                                 std::to_string(asym) + ")");
    }
}

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(const Eigen::MatrixXd& a, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalFailure, std::string("eigendecomposition failed for ") + what);
    }
    return solver;
}

/// Tr(sqrt(A^{1/2} B A^{1/2})) for symmetric PSD A, B.
inline double sqrt_trace_congruence(const Eigen::MatrixXd& sqrt_a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd inner = sqrt_a * b * sqrt_a;
    inner = 0.5 * (inner + inner.transpose());
    const auto solver = eig(inner, "covariance congruence");
    double trace = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        trace += std::sqrt(std::max(solver.eigenvalues()(i), 0.0));
    }
    return trace;
}

} // namespace detail

/// Principal square root of a symmetric PSD matrix via eigendecomposition;
/// negative eigenvalues from round-off are clamped to zero.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a) {
    detail::require_symmetric(a, "matrix");
    const auto solver = detail::eig(a, "matrix");
    const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd& v = solver.eigenvectors();
    Eigen::MatrixXd out = v * roots.asDiagonal() * v.transpose();
    return 0.5 * (out + out.transpose());
}

/// ||mu_s - mu_r||^2 + Tr(S_s + S_r - 2 (S_s S_r)^{1/2}).
///
/// The cross term is evaluated as Tr[(S_r^{1/2} S_s S_r^{1/2})^{1/2}], which
/// only ever square-roots symmetric PSD matrices. Both congruence orders are
/// evaluated and averaged so the result is exactly symmetric in its
/// arguments. `epsilon` adds epsilon * I to both covariances (biases FD;
/// off by default).
inline double frechet_distance(const GaussianMoments& real, const GaussianMoments& syn, double epsilon = 0.0) {
    if (real.dim() != syn.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "moments of dimension " + std::to_string(real.dim()) + " and " +
                                                      std::to_string(syn.dim()));
    }
    const auto d = static_cast<Eigen::Index>(real.dim());
    Eigen::MatrixXd cov_r = real.cov;
    Eigen::MatrixXd cov_s = syn.cov;
    if (epsilon != 0.0) {
        cov_r += epsilon * Eigen::MatrixXd::Identity(d, d);
        cov_s += epsilon * Eigen::MatrixXd::Identity(d, d);
    }

    const double mean_term = (syn.mean - real.mean).squaredNorm();
    const double trace_term = cov_s.trace() + cov_r.trace();
    const double cross = 0.5 * (detail::sqrt_trace_congruence(sqrtm_psd(cov_r), cov_s) +
                                detail::sqrt_trace_congruence(sqrtm_psd(cov_s), cov_r));
    const double fd = mean_term + (trace_term - 2.0 * cross);
    if (!std::isfinite(fd)) {
        throw Error(ErrorKind::NumericalFailure, "Frechet distance is not finite");
    }
    if (fd < 0.0) {
        if (fd < -1e-6) {
            throw Error(ErrorKind::NumericalFailure, "Frechet distance " + std::to_string(fd) + " is negative");
        }
        return 0.0;
    }
    return fd;
}

/// normalize -> fit_moments -> frechet_distance, wrapped in a MetricResult.
inline MetricResult frechet_from_features(const FeatureMatrix& real, const FeatureMatrix& syn, NormalizationSpec norm,
                                          double epsilon = 0.0) {
    const FeatureMatrix r = normalize(real, norm);
    const FeatureMatrix s = normalize(syn, norm);
    if (r.cols() != s.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "feature dimensions differ: real d=" + std::to_string(r.cols()) +
                                                      ", syn d=" + std::to_string(s.cols()));
    }
    MetricResult out;
    out.metric = MetricKind::fd;
    out.value = frechet_distance(fit_moments(r), fit_moments(s), epsilon);
    out.normalization = norm;
    out.n_real = r.rows();
    out.n_syn = s.rows();
    return out;
}

} // namespace featdist
