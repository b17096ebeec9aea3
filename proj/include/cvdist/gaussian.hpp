#pragma once

// Phase-space representation of Gaussian states and maps.
//
// Conventions used throughout the library:
//   * quadrature ordering (X1, P1, ..., Xm, Pm)
//   * X = (a + a^dag)/sqrt(2), P = i(a^dag - a)/sqrt(2)
//   * Gamma_jk = 2 Re tr[(Q_j - d_j)(Q_k - d_k) rho], so the vacuum has Gamma = I
//   * chi(r) = tr[exp(i r.Q) rho] = exp(i r.d - r^T Gamma r / 4) for Gaussian states

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace cvdist {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Smallest eigenvalue tolerated for Gamma + i*Omega.
inline constexpr double kPhysicalityTol = 1e-9;

/// Standard symplectic form for m modes in (X1,P1,...) ordering.
Mat symplectic_form(int modes);

/// Smallest eigenvalue of the Hermitian matrix gamma + i*Omega.
double physicality_margin(const Mat& gamma);

bool is_physical(const Mat& gamma, double tol = kPhysicalityTol);

class GaussianState {
public:
    /// Symmetrizes gamma and checks physicality; throws std::invalid_argument otherwise.
    GaussianState(Vec first_moments, Mat gamma);

    int modes() const { return static_cast<int>(d_.size() / 2); }
    const Vec& first_moments() const { return d_; }
    const Mat& covariance() const { return gamma_; }

private:
    Vec d_;
    Mat gamma_;
};

/// Heisenberg action Q -> M Q + shift. Covariances transform as M Gamma M^T.
class SymplecticMap {
public:
    explicit SymplecticMap(Mat m, double tol = 1e-12);
    SymplecticMap(Mat m, Vec shift, double tol = 1e-12);

    static SymplecticMap identity(int modes);

    int modes() const { return static_cast<int>(m_.rows() / 2); }
    const Mat& matrix() const { return m_; }
    const Vec& shift() const { return shift_; }

    GaussianState apply(const GaussianState& s) const;
    Mat apply_covariance(const Mat& gamma) const { return m_ * gamma * m_.transpose(); }

    /// Composition: (*this) after `inner` in the Heisenberg sense, i.e. M_this * M_inner.
    SymplecticMap then(const SymplecticMap& inner) const;

private:
    Mat m_;
    Vec shift_;
};

/// Single-mode phase rotation exp(-i phi n): X -> cos X + sin P, P -> -sin X + cos P.
Mat rotation_matrix(double phi);
/// Single-mode squeezer exp(r/2 (a^2 - a^dag^2)): X -> e^{-r} X, P -> e^{r} P.
Mat squeezer_matrix(double r);

/// The (C, S) pair of a symmetric two-mode covariance matrix
///
///     | C  0  S  0 |
///     | 0  C  0 -S |
///     | S  0  C  0 |
///     | 0 -S  0  C |
struct SymmetricTwoMode {
    double c = 1.0;
    double s = 0.0;

    bool physical(double tol = kPhysicalityTol) const { return c * c >= 1.0 + s * s - tol && c >= 0 && s >= 0; }
};

GaussianState make_vacuum(int modes);

/// C = cosh 2r, S = sinh 2r.
SymmetricTwoMode make_two_mode_squeezed(double r);

Complex gaussian_charfun(const GaussianState& state, const Vec& r);

/// EPR uncertainty C - S. Below one means entangled.
double duan_delta(const SymmetricTwoMode& s);

/// Beam splitter acting on modes (A1..Am, B1..Bm):
///   A_j -> sqrt(T) A_j + sqrt(R) B_j,   B_j -> sqrt(T) B_j - sqrt(R) A_j
SymplecticMap beam_splitter_map(double reflectivity, int modes_per_side);

/// diag(1, ..., 1, -1 on P of every listed mode, ...).
Mat pt_sign_matrix(int modes, const std::vector<int>& b_modes);

/// Lambda * gamma * Lambda with Lambda = pt_sign_matrix.
Mat partial_transpose_cov(const Mat& gamma, const std::vector<int>& b_modes);

GaussianState embed_symmetric(const SymmetricTwoMode& s);

/// Reads (C, S) back from a covariance matrix of symmetric form; throws if the layout does not match.
SymmetricTwoMode extract_symmetric(const Mat& gamma, double tol = 1e-9);

/// Per-mode filter Pi ∝ V exp(-sum_j beta_j n_j) V^dag with V local to each mode.
class GaussianFilter {
public:
    GaussianFilter(std::vector<double> betas, SymplecticMap mode_unitary);
    /// Thermal-type filter (V = identity).
    explicit GaussianFilter(std::vector<double> betas);

    int modes() const { return static_cast<int>(betas_.size()); }
    const std::vector<double>& betas() const { return betas_; }
    const SymplecticMap& mode_unitary() const { return v_; }

    /// 2x2 block of V acting on one mode.
    Mat mode_block(int mode) const;

    /// Covariance of Pi normalized as a state: M coth(beta/2) M^T.
    Mat covariance_pi() const;
    /// Covariance of P = Pi^{1/2}: M coth(beta/4) M^T.
    Mat covariance_p() const;
    /// Eigenvalues of P on the V-rotated Fock basis, exp(-beta_j n / 2).
    double p_eigenvalue(int mode, int n) const;

private:
    std::vector<double> betas_;
    SymplecticMap v_;
};

}  // namespace cvdist
