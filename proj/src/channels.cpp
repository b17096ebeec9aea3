#include "cvdist/channels.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace cvdist {

namespace {

struct Solved {
    Mat x;
    double condition;
};

// Solves A X = B for symmetric A, rejecting ill-conditioned systems.
Solved solve_symmetric(const Mat& a, const Mat& b, const char* where) {
    Eigen::LDLT<Mat> ldlt(a);
    const double rc = ldlt.rcond();
    if (ldlt.info() != Eigen::Success || !(rc > 0.0))
        throw ConditioningError(std::string(where) + ": matrix is singular");
    const double cond = 1.0 / rc;
    if (cond > kMaxCondition)
        throw ConditioningError(std::string(where) + ": condition number " + std::to_string(cond) +
                                " exceeds 1e12");
    return {ldlt.solve(b), cond};
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

void require_square_even(const Mat& m, const char* where) {
    if (m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() == 0)
        throw std::invalid_argument(std::string(where) + ": matrix must be square with even, nonzero dimension");
}

}  // namespace

GaussianChannelCJ::GaussianChannelCJ(Mat gamma_aa, Mat gamma_ab, Mat gamma_bb)
    : aa_(std::move(gamma_aa)), ab_(std::move(gamma_ab)), bb_(std::move(gamma_bb)) {
    require_square_even(aa_, "GaussianChannelCJ");
    if (ab_.rows() != aa_.rows() || ab_.cols() != aa_.cols() || bb_.rows() != aa_.rows() ||
        bb_.cols() != aa_.cols())
        throw std::invalid_argument("GaussianChannelCJ: block dimensions must agree");
    aa_ = symmetrized(aa_);
    bb_ = symmetrized(bb_);
}

Mat GaussianChannelCJ::assembled() const {
    const Eigen::Index n = aa_.rows();
    Mat g(2 * n, 2 * n);
    g << aa_, ab_, ab_.transpose(), bb_;
    return g;
}

Mat apply_gaussian_channel(const GaussianChannelCJ& ch, const Mat& gamma) {
    require_square_even(gamma, "apply_gaussian_channel");
    if (gamma.rows() != ch.gamma_bb().rows())
        throw std::invalid_argument("apply_gaussian_channel: covariance dimension does not match the channel");
    const Solved s = solve_symmetric(ch.gamma_bb() + gamma, ch.gamma_ab().transpose(), "apply_gaussian_channel");
    return symmetrized(ch.gamma_aa() - ch.gamma_ab() * s.x);
}

Mat AffineChannel::apply(const Mat& gamma) const {
    return scale * gamma + noise * Mat::Identity(gamma.rows(), gamma.cols());
}

SymmetricTwoMode AffineChannel::apply(const SymmetricTwoMode& s) const {
    return {scale * s.c + noise, scale * s.s};
}

AffineChannel AffineChannel::after(const AffineChannel& first) const {
    return {scale * first.scale, scale * first.noise + noise};
}

AffineChannel attenuation(double transmittance, double n_th) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0))
        throw std::invalid_argument("attenuation: transmittance must lie in [0, 1]");
    if (!(n_th >= 0.0)) throw std::invalid_argument("attenuation: n_th must be >= 0");
    return {transmittance, (1.0 + 2.0 * n_th) * (1.0 - transmittance)};
}

AffineChannel loss_thermal(double l_km, double l_att_km, double n_th) {
    if (!(l_km >= 0.0)) throw std::invalid_argument("loss_thermal: distance l must be >= 0");
    if (!(l_att_km > 0.0)) throw std::invalid_argument("loss_thermal: l_att must be > 0");
    return attenuation(std::exp(-l_km / l_att_km), n_th);
}

namespace {

// Per-mode (C, S) of P = t^n, t = exp(-beta/2), sandwiched by V.
GaussianChannelCJ sandwich_cj(const std::vector<double>& t_values, const Mat& m) {
    const int modes = static_cast<int>(t_values.size());
    Mat c = Mat::Zero(2 * modes, 2 * modes);
    Mat s = Mat::Zero(2 * modes, 2 * modes);
    for (int j = 0; j < modes; ++j) {
        const double t2 = t_values[j] * t_values[j];
        c.block(2 * j, 2 * j, 2, 2).diagonal().setConstant((1.0 + t2) / (1.0 - t2));
        s.block(2 * j, 2 * j, 2, 2).diagonal().setConstant(2.0 * t_values[j] / (1.0 - t2));
    }
    // C and S are multiples of the identity per mode, so M C M^T = C M M^T blockwise.
    const Mat mmt = m * m.transpose();
    return GaussianChannelCJ(c * mmt, s * mmt, c * mmt);
}

}  // namespace

GaussianChannelCJ filter_channel_cj(const GaussianFilter& filter) {
    std::vector<double> t;
    for (double b : filter.betas()) t.push_back(std::exp(-0.5 * b));
    return sandwich_cj(t, filter.mode_unitary().matrix());
}

GaussianChannelCJ identity_channel_cj(int modes, double s_reg) {
    if (modes < 1) throw std::invalid_argument("identity_channel_cj: mode count must be at least 1");
    if (!(s_reg > 0.0 && s_reg < 1.0)) throw std::invalid_argument("identity_channel_cj: s_reg must lie in (0, 1)");
    return sandwich_cj(std::vector<double>(modes, s_reg), Mat::Identity(2 * modes, 2 * modes));
}

LimitState limit_state_cov(const Mat& gamma_tau, const GaussianFilter& filter) {
    require_square_even(gamma_tau, "limit_state_cov");
    if (gamma_tau.rows() != 2 * filter.modes())
        throw std::invalid_argument("limit_state_cov: covariance dimension does not match the filter");
    const GaussianChannelCJ ch = filter_channel_cj(filter);
    const Solved s = solve_symmetric(ch.gamma_aa() - symmetrized(gamma_tau), ch.gamma_ab(), "limit_state_cov");
    LimitState out;
    out.gamma = symmetrized(ch.gamma_ab().transpose() * s.x - ch.gamma_bb());
    out.condition = s.condition;
    out.physicality_margin = physicality_margin(out.gamma);
    out.physical = out.physicality_margin >= -kPhysicalityTol;
    return out;
}

InverseFilterIntegrability inverse_filter_integrability(const Mat& gamma_ref, const GaussianFilter& filter) {
    require_square_even(gamma_ref, "inverse_filter_integrability");
    if (gamma_ref.rows() != 2 * filter.modes())
        throw std::invalid_argument("inverse_filter_integrability: covariance dimension does not match the filter");
    const Mat minv = filter.mode_unitary().matrix().inverse();
    Mat q = -minv * symmetrized(gamma_ref) * minv.transpose();
    for (int j = 0; j < filter.modes(); ++j) {
        const double c = 1.0 / std::tanh(0.5 * filter.betas()[j]);
        q(2 * j, 2 * j) += c;
        q(2 * j + 1, 2 * j + 1) += c;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(q), Eigen::EigenvaluesOnly);
    InverseFilterIntegrability out;
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.borderline = std::abs(out.min_eigenvalue) <= 1e-9;
    out.finite = out.min_eigenvalue > 1e-9;
    return out;
}

}  // namespace cvdist
