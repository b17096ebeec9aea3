#include "cvdist/gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace cvdist {

Mat symplectic_form(int modes) {
    Mat omega = Mat::Zero(2 * modes, 2 * modes);
    for (int j = 0; j < modes; ++j) {
        omega(2 * j, 2 * j + 1) = 1.0;
        omega(2 * j + 1, 2 * j) = -1.0;
    }
    return omega;
}

double physicality_margin(const Mat& gamma) {
    const int dim = static_cast<int>(gamma.rows());
    CMat h = gamma.cast<Complex>() + Complex(0, 1) * symplectic_form(dim / 2).cast<Complex>();
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_physical(const Mat& gamma, double tol) { return physicality_margin(gamma) >= -tol; }

GaussianState::GaussianState(Vec first_moments, Mat gamma) : d_(std::move(first_moments)) {
    if (d_.size() == 0 || d_.size() % 2 != 0)
        throw std::invalid_argument("GaussianState: first moments must have even, nonzero length");
    if (gamma.rows() != d_.size() || gamma.cols() != d_.size())
        throw std::invalid_argument("GaussianState: covariance dimension does not match first moments");
    gamma_ = 0.5 * (gamma + gamma.transpose());
    const double margin = physicality_margin(gamma_);
    if (margin < -kPhysicalityTol)
        throw std::invalid_argument("GaussianState: covariance violates the uncertainty relation (min eig " +
                                    std::to_string(margin) + ")");
}

SymplecticMap::SymplecticMap(Mat m, double tol) : SymplecticMap(m, Vec::Zero(m.rows()), tol) {}

SymplecticMap::SymplecticMap(Mat m, Vec shift, double tol) : m_(std::move(m)), shift_(std::move(shift)) {
    if (m_.rows() != m_.cols() || m_.rows() % 2 != 0 || m_.rows() == 0)
        throw std::invalid_argument("SymplecticMap: matrix must be square with even dimension");
    if (shift_.size() != m_.rows())
        throw std::invalid_argument("SymplecticMap: shift dimension mismatch");
    const Mat omega = symplectic_form(modes());
    const double err = (m_ * omega * m_.transpose() - omega).cwiseAbs().maxCoeff();
    if (err > tol)
        throw std::invalid_argument("SymplecticMap: matrix is not symplectic (error " + std::to_string(err) + ")");
}

SymplecticMap SymplecticMap::identity(int modes) { return SymplecticMap(Mat::Identity(2 * modes, 2 * modes)); }

GaussianState SymplecticMap::apply(const GaussianState& s) const {
    if (s.modes() != modes()) throw std::invalid_argument("SymplecticMap::apply: mode count mismatch");
    return GaussianState(m_ * s.first_moments() + shift_, apply_covariance(s.covariance()));
}

SymplecticMap SymplecticMap::then(const SymplecticMap& inner) const {
    if (inner.modes() != modes()) throw std::invalid_argument("SymplecticMap::then: mode count mismatch");
    return SymplecticMap(m_ * inner.m_, m_ * inner.shift_ + shift_);
}

Mat rotation_matrix(double phi) {
    Mat m(2, 2);
    m << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
    return m;
}

Mat squeezer_matrix(double r) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = std::exp(-r);
    m(1, 1) = std::exp(r);
    return m;
}

GaussianState make_vacuum(int modes) {
    if (modes < 1) throw std::invalid_argument("make_vacuum: mode count must be at least 1");
    return GaussianState(Vec::Zero(2 * modes), Mat::Identity(2 * modes, 2 * modes));
}

SymmetricTwoMode make_two_mode_squeezed(double r) {
    if (!(r >= 0.0)) throw std::invalid_argument("make_two_mode_squeezed: squeezing r must be >= 0");
    return {std::cosh(2 * r), std::sinh(2 * r)};
}

Complex gaussian_charfun(const GaussianState& state, const Vec& r) {
    if (r.size() != state.first_moments().size())
        throw std::invalid_argument("gaussian_charfun: argument dimension mismatch");
    const double phase = r.dot(state.first_moments());
    const double quad = r.dot(state.covariance() * r);
    return std::exp(Complex(-quad / 4.0, phase));
}

double duan_delta(const SymmetricTwoMode& s) { return s.c - s.s; }

SymplecticMap beam_splitter_map(double reflectivity, int modes_per_side) {
    if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
        throw std::invalid_argument("beam_splitter_map: reflectivity R must lie in [0, 1]");
    if (modes_per_side < 1) throw std::invalid_argument("beam_splitter_map: need at least one mode per side");
    const int m = modes_per_side;
    const double t = std::sqrt(1.0 - reflectivity);
    const double r = std::sqrt(reflectivity);
    Mat bs = Mat::Zero(4 * m, 4 * m);
    for (int j = 0; j < m; ++j) {
        for (int q = 0; q < 2; ++q) {
            const int a = 2 * j + q;
            const int b = 2 * (m + j) + q;
            bs(a, a) = t;
            bs(a, b) = r;
            bs(b, b) = t;
            bs(b, a) = -r;
        }
    }
    return SymplecticMap(bs);
}

Mat pt_sign_matrix(int modes, const std::vector<int>& b_modes) {
    Mat lambda = Mat::Identity(2 * modes, 2 * modes);
    for (int mode : b_modes) {
        if (mode < 0 || mode >= modes)
            throw std::invalid_argument("pt_sign_matrix: mode index " + std::to_string(mode) + " out of range");
        lambda(2 * mode + 1, 2 * mode + 1) = -1.0;
    }
    return lambda;
}

Mat partial_transpose_cov(const Mat& gamma, const std::vector<int>& b_modes) {
    if (gamma.rows() != gamma.cols() || gamma.rows() % 2 != 0)
        throw std::invalid_argument("partial_transpose_cov: covariance must be square with even dimension");
    const Mat lambda = pt_sign_matrix(static_cast<int>(gamma.rows() / 2), b_modes);
    return lambda * gamma * lambda;
}

GaussianState embed_symmetric(const SymmetricTwoMode& s) {
    if (!s.physical()) throw std::invalid_argument("embed_symmetric: (C, S) violates C^2 >= 1 + S^2");
    Mat g = Mat::Zero(4, 4);
    g.diagonal().setConstant(s.c);
    g(0, 2) = g(2, 0) = s.s;
    g(1, 3) = g(3, 1) = -s.s;
    return GaussianState(Vec::Zero(4), g);
}

SymmetricTwoMode extract_symmetric(const Mat& gamma, double tol) {
    if (gamma.rows() != 4 || gamma.cols() != 4)
        throw std::invalid_argument("extract_symmetric: expected a two-mode covariance matrix");
    SymmetricTwoMode out{gamma(0, 0), gamma(0, 2)};
    Mat expected = Mat::Zero(4, 4);
    expected.diagonal().setConstant(out.c);
    expected(0, 2) = expected(2, 0) = out.s;
    expected(1, 3) = expected(3, 1) = -out.s;
    if ((gamma - expected).cwiseAbs().maxCoeff() > tol * std::max(1.0, std::abs(out.c)))
        throw std::invalid_argument("extract_symmetric: covariance is not of symmetric two-mode form");
    return out;
}

namespace {

SymplecticMap checked_local_unitary(const SymplecticMap& v, int modes) {
    if (v.modes() != modes) throw std::invalid_argument("GaussianFilter: mode unitary acts on wrong number of modes");
    if (v.shift().cwiseAbs().maxCoeff() > 0.0)
        throw std::invalid_argument("GaussianFilter: filter must have zero first moments (no displacement in V)");
    const Mat& m = v.matrix();
    for (int i = 0; i < modes; ++i)
        for (int j = 0; j < modes; ++j)
            if (i != j && m.block(2 * i, 2 * j, 2, 2).cwiseAbs().maxCoeff() > 0.0)
                throw std::invalid_argument("GaussianFilter: V must act locally on each mode");
    return v;
}

}  // namespace

GaussianFilter::GaussianFilter(std::vector<double> betas, SymplecticMap mode_unitary)
    : betas_(std::move(betas)), v_(checked_local_unitary(mode_unitary, static_cast<int>(betas_.size()))) {
    if (betas_.empty()) throw std::invalid_argument("GaussianFilter: need at least one mode");
    for (double b : betas_)
        if (!(b > 0.0) || !std::isfinite(b))
            throw std::invalid_argument("GaussianFilter: every beta must be finite and > 0 (full-rank filter)");
}

GaussianFilter::GaussianFilter(std::vector<double> betas)
    : GaussianFilter(betas, SymplecticMap::identity(static_cast<int>(betas.size()))) {}

Mat GaussianFilter::mode_block(int mode) const { return v_.matrix().block(2 * mode, 2 * mode, 2, 2); }

namespace {

Mat scaled_cov(const GaussianFilter& f, double divisor) {
    const int m = f.modes();
    Mat base = Mat::Zero(2 * m, 2 * m);
    for (int j = 0; j < m; ++j) {
        const double v = 1.0 / std::tanh(f.betas()[j] / divisor);
        base(2 * j, 2 * j) = v;
        base(2 * j + 1, 2 * j + 1) = v;
    }
    return f.mode_unitary().apply_covariance(base);
}

}  // namespace

Mat GaussianFilter::covariance_pi() const { return scaled_cov(*this, 2.0); }
Mat GaussianFilter::covariance_p() const { return scaled_cov(*this, 4.0); }

double GaussianFilter::p_eigenvalue(int mode, int n) const { return std::exp(-0.5 * betas_.at(mode) * n); }

}  // namespace cvdist
