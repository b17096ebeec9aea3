#pragma once

// Gaussian completely positive maps acting on covariance matrices.

#include <stdexcept>

#include "cvdist/gaussian.hpp"

namespace cvdist {

/// Largest condition number accepted when inverting inside a Schur complement.
inline constexpr double kMaxCondition = 1e12;

class ConditioningError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Blocks of the (partially transposed) Choi state covariance of a Gaussian CP map.
/// The map acts as Gamma -> gamma_AA - gamma_AB (gamma_BB + Gamma)^{-1} gamma_AB^T.
class GaussianChannelCJ {
public:
    GaussianChannelCJ(Mat gamma_aa, Mat gamma_ab, Mat gamma_bb);

    int modes() const { return static_cast<int>(aa_.rows() / 2); }
    const Mat& gamma_aa() const { return aa_; }
    const Mat& gamma_ab() const { return ab_; }
    const Mat& gamma_bb() const { return bb_; }
    Mat assembled() const;

private:
    Mat aa_, ab_, bb_;
};

/// Schur-complement action. Throws ConditioningError when gamma_BB + Gamma is singular
/// or has condition number above kMaxCondition.
Mat apply_gaussian_channel(const GaussianChannelCJ& ch, const Mat& gamma);

/// Gamma -> scale * Gamma + noise * I, applied identically to every mode.
struct AffineChannel {
    double scale = 1.0;
    double noise = 0.0;

    Mat apply(const Mat& gamma) const;
    SymmetricTwoMode apply(const SymmetricTwoMode& s) const;
    /// `this` after `first`.
    AffineChannel after(const AffineChannel& first) const;
};

/// Fiber of length l: transmittance e^{-l/l_att} with thermal admixture n_th.
AffineChannel loss_thermal(double l_km, double l_att_km, double n_th);

/// Beam-splitter loss of given transmittance with thermal admixture n_th.
AffineChannel attenuation(double transmittance, double n_th);

/// rho -> P rho P for the filter's P. Exact for every beta > 0.
GaussianChannelCJ filter_channel_cj(const GaussianFilter& filter);

/// Identity map on `modes` modes, regularized by finite two-mode squeezing with
/// tanh-parameter s_reg. Exact only as s_reg -> 1.
GaussianChannelCJ identity_channel_cj(int modes, double s_reg = 0.9999);

struct LimitState {
    Mat gamma;
    bool physical = false;
    double physicality_margin = 0.0;  // min eigenvalue of gamma + i Omega
    double condition = 0.0;           // of gamma_AA - Gamma_tau
};

/// Inverts the filter action: the covariance of rho with P rho P / tr(...) having covariance
/// gamma_tau. The result is returned even when unphysical, with the flag cleared.
LimitState limit_state_cov(const Mat& gamma_tau, const GaussianFilter& filter);

/// Whether tr(Pi^{-1} tau_ref) is finite for a zero-mean Gaussian tau_ref.
struct InverseFilterIntegrability {
    double min_eigenvalue = 0.0;  // of diag(coth(beta_j / 2)) - M^{-1} Gamma_ref M^{-T}
    bool finite = false;
    bool borderline = false;  // |min_eigenvalue| within 1e-9 of zero
};

InverseFilterIntegrability inverse_filter_integrability(const Mat& gamma_ref, const GaussianFilter& filter);

}  // namespace cvdist
