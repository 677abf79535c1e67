#pragma once

#include <Eigen/Dense>

#include "drcb/tensor.hpp"

namespace drcb {

// Compensated accumulator; metric reductions must not depend on summation
// order at double precision.
struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

struct GaussianStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;  // unbiased, symmetrized
    int n = 0;

    int dim() const { return static_cast<int>(mu.size()); }
};

// Two-pass mean/covariance with compensated sums; symmetry enforced by
// (S + S^T)/2.
inline GaussianStats gaussian_stats(const Tensor& features) {
    if (features.ndim() != 2)
        throw std::invalid_argument("gaussian_stats: expected (N,D) features, got " +
                                    shape_str(features.shape()));
    int n = features.dim(0), d = features.dim(1);
    if (n < 2) throw std::invalid_argument("gaussian_stats: need n >= 2, got " + std::to_string(n));

    GaussianStats g;
    g.n = n;
    g.mu.resize(d);
    for (int j = 0; j < d; ++j) {
        KahanSum s;
        for (int i = 0; i < n; ++i)
            s.add(features.raw()[static_cast<std::size_t>(i) * d + j]);
        g.mu[j] = s.value() / n;
    }
    g.sigma.resize(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            KahanSum s;
            for (int i = 0; i < n; ++i) {
                const double* row = features.raw() + static_cast<std::size_t>(i) * d;
                s.add((row[a] - g.mu[a]) * (row[b] - g.mu[b]));
            }
            double v = s.value() / (n - 1);
            g.sigma(a, b) = v;
            g.sigma(b, a) = v;
        }
    g.sigma = ((g.sigma + g.sigma.transpose()) / 2.0).eval();
    return g;
}

// Principal square root of a symmetric PSD matrix by eigendecomposition.
// Eigenvalues slightly below zero (rounding) are clipped; asymmetry beyond
// tolerance is an input error, not something to repair silently.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, double sym_tol = 1e-8) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sqrtm_psd: matrix not square");
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale)
        throw std::invalid_argument("sqrtm_psd: matrix asymmetric beyond tolerance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(((a + a.transpose()) / 2.0).eval());
    if (es.info() != Eigen::Success) throw std::runtime_error("sqrtm_psd: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < lam.size(); ++i) lam[i] = lam[i] > 0.0 ? std::sqrt(lam[i]) : 0.0;
    Eigen::MatrixXd s = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return ((s + s.transpose()) / 2.0).eval();
}

// Independent check on the eigendecomposition path: scaled Newton-Schulz
// iteration. Valid for SPD inputs (normalization puts the spectrum in (0,1]).
inline Eigen::MatrixXd sqrtm_newton_schulz(const Eigen::MatrixXd& a, int iters = 60) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sqrtm_newton_schulz: matrix not square");
    double c = a.norm();  // Frobenius
    if (c == 0.0) return Eigen::MatrixXd::Zero(a.rows(), a.cols());
    Eigen::MatrixXd y = a / c;
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd eye3 = 3.0 * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    for (int k = 0; k < iters; ++k) {
        Eigen::MatrixXd t = (eye3 - z * y) / 2.0;
        y = (y * t).eval();
        z = (t * z).eval();
    }
    return std::sqrt(c) * y;
}

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the cross term
// computed through the symmetric form sqrt(sqrt(S_a) S_b sqrt(S_a)).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b,
                               bool* clipped = nullptr) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("frechet_distance: dimension mismatch " +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    if (clipped) *clipped = false;
    KahanSum mean_term;
    for (int i = 0; i < a.dim(); ++i) {
        double d = a.mu[i] - b.mu[i];
        mean_term.add(d * d);
    }
    Eigen::MatrixXd ra = sqrtm_psd(a.sigma);
    Eigen::MatrixXd m = (ra * b.sigma * ra).eval();
    Eigen::MatrixXd covmean = sqrtm_psd(((m + m.transpose()) / 2.0).eval());
    KahanSum tr;
    for (int i = 0; i < a.dim(); ++i)
        tr.add(a.sigma(i, i) + b.sigma(i, i) - 2.0 * covmean(i, i));
    double v = mean_term.value() + tr.value();
    if (v < 0.0) {
        if (clipped) *clipped = true;
        v = 0.0;
    }
    return v;
}

}  // namespace drcb
