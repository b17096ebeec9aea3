#pragma once

// Truncated number-basis simulation. Used as the brute-force cross-check for
// everything computed in phase space.
//
// Multi-mode basis index: n_1 * d^(m-1) + ... + n_m (mode 1 most significant).

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "cvdist/gaussian.hpp"

namespace cvdist::fock {

inline constexpr int kDefaultCutoff = 20;
/// Population allowed in the top two Fock levels of any mode.
inline constexpr double kLeakageError = 1e-6;
inline constexpr double kLeakageWarn = 1e-9;
/// Post-selection weights below this are treated as a failed protocol step.
inline constexpr double kMinWeight = 1e-14;

class LeakageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LeakageLevel { ok, warn };

using SparseC = Eigen::SparseMatrix<Complex>;

class FockDensityMatrix {
public:
    /// Hermitizes `data`; throws if it deviates from Hermitian by more than 1e-10 or
    /// (when `normalized`) if the trace is not 1 within 1e-9.
    FockDensityMatrix(int modes, int cutoff, CMat data, bool normalized = true);

    /// |psi><psi| / <psi|psi>.
    static FockDensityMatrix from_pure(int modes, int cutoff, const CVec& psi);

    int modes() const { return modes_; }
    int cutoff() const { return cutoff_; }
    int dim() const { return static_cast<int>(data_.rows()); }
    const CMat& data() const { return data_; }
    bool normalized() const { return normalized_; }
    double trace() const { return data_.trace().real(); }

    Complex element(const std::vector<int>& ket, const std::vector<int>& bra) const;

    /// Divides by the trace; throws DegenerateError when the trace is below kMinWeight.
    FockDensityMatrix renormalized() const;

    double min_eigenvalue() const;

private:
    int modes_;
    int cutoff_;
    CMat data_;
    bool normalized_;
};

struct TruncatedState {
    FockDensityMatrix state;
    /// Probability removed by truncating to the cutoff before renormalizing.
    double truncation_leakage;
};

struct WeightedState {
    FockDensityMatrix state;
    /// Relative post-selection mass (not a calibrated success probability).
    double weight;
    /// Mass pushed above the cutoff by the operation and dropped.
    double leakage = 0.0;
};

struct Moments {
    Vec d;
    Mat gamma;
};

struct MomentSpec {
    /// Directions r_j; the moment is tr(H_1 ... H_k rho) with H_j = r_j . Q.
    std::vector<Vec> factors;
};

// ---------------------------------------------------------------------------
// Basis helpers

int basis_index(const std::vector<int>& occupation, int cutoff);
std::vector<int> basis_occupation(int index, int modes, int cutoff);

Mat annihilation(int cutoff);

/// <m|D(alpha)|n> with D(alpha) = exp(alpha a^dag - alpha^* a), from the exact
/// ladder recurrences (not a truncated matrix exponential).
CMat displacement_matrix(Complex alpha, int cutoff);

/// exp(i (x X + p P)) == D(alpha) with alpha = (-p + i x)/sqrt(2).
Complex weyl_alpha(double x, double p);

/// sum_i r_i Q_i on the m-mode truncated space.
SparseC quadrature_operator(int modes, int cutoff, const Vec& r);

/// Single-mode Fock-level unitary whose Heisenberg action is the 2x2 symplectic `block`.
CMat local_gaussian_unitary(const Mat& block, int cutoff);

/// Fock matrix of the filter root P_j = V_j exp(-beta_j n / 2) V_j^dag for one mode.
CMat filter_root_matrix(const GaussianFilter& filter, int mode, int cutoff);

/// Beam-splitter matrix elements, block-diagonal in the total photon number of the
/// two modes it mixes. Convention matches cvdist::beam_splitter_map:
///   U^dag a_A U = sqrt(T) a_A + sqrt(R) a_B,  U^dag a_B U = sqrt(T) a_B - sqrt(R) a_A.
class BeamSplitterBlocks {
public:
    BeamSplitterBlocks(double reflectivity, int max_total);

    int max_total() const { return static_cast<int>(blocks_.size()) - 1; }
    /// <a_out, N - a_out| U |a_in, N - a_in>.
    double element(int total, int a_out, int a_in) const { return blocks_[total](a_out, a_in); }
    const Mat& block(int total) const { return blocks_[total]; }

private:
    std::vector<Mat> blocks_;
};

/// Frobenius norm of U (P x P) U^dag - P x P for a thermal P = exp(-beta n / 2) on two
/// modes, with U the beam splitter restricted to the truncated space.
double conjugation_deviation(double reflectivity, double beta, int cutoff);

/// 2 sqrt(sum over a, b < d with a + b >= d of exp(-beta (a + b))): the weight of P x P on
/// photon-number blocks cut by the truncation.
double conjugation_leakage_bound(double beta, int cutoff);

/// K rho K^dag with K acting on a single mode.
CMat apply_mode_operator(const CMat& rho, int modes, int cutoff, int mode, const CMat& k);

/// Largest population held in the top two Fock levels of any mode.
double leakage_estimate(const FockDensityMatrix& rho);

/// Throws LeakageError above kLeakageError; reports `warn` above kLeakageWarn.
LeakageLevel check_leakage(const FockDensityMatrix& rho, const std::string& context);

// ---------------------------------------------------------------------------
// State preparation

/// sum_n tanh^n(r) |n,n> / cosh r, truncated and renormalized.
TruncatedState fock_tmsv(double r, int cutoff = kDefaultCutoff);

/// Zero-mean Gaussian state with covariance `gamma`, truncated and renormalized.
TruncatedState fock_gaussian_state(const Mat& gamma, int cutoff = kDefaultCutoff);

/// sum_n lambda^n |2n>, normalized. Single mode.
FockDensityMatrix squeezed_reference(double lambda, int cutoff = kDefaultCutoff);

/// Attenuation with thermal environment on one mode: Gamma -> T Gamma + (1 + 2 n_th)(1 - T) I.
WeightedState attenuate(const FockDensityMatrix& rho, int mode, double transmittance, double n_th);

// ---------------------------------------------------------------------------
// Protocol steps

Complex charfun_numeric(const FockDensityMatrix& rho, const Vec& r);

/// One building block: mix A_j with B_j on a beam splitter of reflectivity R,
/// weight the B outputs with Pi = P^2 and trace them out.
WeightedState building_block(const FockDensityMatrix& rho_a, const FockDensityMatrix& rho_b, double reflectivity,
                             const GaussianFilter& filter);

/// P rho P / tr(P rho P).
FockDensityMatrix filtered_object(const FockDensityMatrix& rho, const GaussianFilter& filter);

/// P^{-1} tau P^{-1} / tr(...). Inverse of filtered_object up to normalization.
FockDensityMatrix unfiltered_state(const FockDensityMatrix& tau, const GaussianFilter& filter);

/// Diagonal Kraus factor of single-photon replacement on one mode:
/// c_n = <n, 1| U |n, 1> for a beam splitter of transmittivity eta^2.
std::vector<double> photon_replacement_factors(double eta, int cutoff);

/// Symmetric photon replacement on every mode of rho.
WeightedState photon_replacement(const FockDensityMatrix& rho, double eta);

/// (rho + U_T rho U_T^dag) / 2 with U_T = (-1)^{total photon number}.
FockDensityMatrix twirl(const FockDensityMatrix& rho);

// ---------------------------------------------------------------------------
// Diagnostics

Complex moment(const FockDensityMatrix& rho, const MomentSpec& spec);

Moments covariance_from_fock(const FockDensityMatrix& rho);

/// Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2.
double fidelity(const FockDensityMatrix& a, const FockDensityMatrix& b);

struct EpsilonValue {
    double value;
    bool singular;  // <1,1|rho|0,0> vanishes; value is +inf
};

/// <1,0|rho|1,0> / <1,1|rho|0,0> for a two-mode state.
EpsilonValue epsilon_fock(const FockDensityMatrix& rho);

struct DegreeDominance {
    int degree = 0;
    int monomials = 0;
    bool bounded = true;        // |tr(H tau)| <= |tr(H tau_ref)| for every monomial
    bool reference_positive = true;  // tr(H tau_ref) real and >= 0
    double worst_margin = 0.0;  // min over monomials of |tr(H tau_ref)| - |tr(H tau)|
    bool pass() const { return bounded && reference_positive; }
};

struct DominanceReport {
    std::vector<DegreeDominance> degrees;
    bool pass() const;
    /// First failing degree, or -1.
    int first_failure() const;
};

/// Checks tau <=_Pi tau_ref on every normally ordered monomial in the filter modes
/// b_j = V a_j V^dag with total degree 1..k_max.
DominanceReport reference_dominance_check(const FockDensityMatrix& tau, const FockDensityMatrix& tau_ref,
                                          const GaussianFilter& filter, int k_max, double tol = 1e-12);

}  // namespace cvdist::fock
