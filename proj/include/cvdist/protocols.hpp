#pragma once

// Gaussifier protocols in the characteristic-function picture, plus the convergence
// diagnostics that compare a protocol sequence with its Gaussian limit.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cvdist/fock.hpp"
#include "cvdist/gaussian.hpp"

namespace cvdist {

/// Lazily evaluated characteristic function r -> chi(r) with its second-moment matrix.
class CharFunHandle {
public:
    using Evaluator = std::function<Complex(const Vec&)>;

    CharFunHandle(int modes, Mat second_moments, Evaluator eval, bool zero_first_moments = true);

    Complex operator()(const Vec& r) const;

    int modes() const { return modes_; }
    const Mat& second_moments() const { return gamma_; }
    bool zero_first_moments() const { return zero_first_; }

private:
    int modes_;
    Mat gamma_;
    std::shared_ptr<const Evaluator> eval_;
    bool zero_first_;
};

/// Gaussian with covariance gamma and zero first moments. Throws if gamma is not symmetric.
CharFunHandle gaussian_limit(const Mat& gamma);

/// Characteristic function of a Fock-space operator, e.g. a filtered object tau.
/// Second moments are read off the state with the truncated quadratures.
CharFunHandle charfun_from_fock(const fock::FockDensityMatrix& rho);

/// chi'(r) = chi_A(sqrt(1-R) r) chi_B(sqrt(R) r), Gamma' = (1-R) Gamma_A + R Gamma_B.
CharFunHandle blockwise_charfun(const CharFunHandle& a, const CharFunHandle& b, double reflectivity);

/// chi_1(r / sqrt(N))^N, the common closed form of the recursive and pumping Gaussifiers.
CharFunHandle central_limit_charfun(const CharFunHandle& chi1, long long copies);

/// Recursive Gaussifier of depth n, i.e. N = 2^n copies.
CharFunHandle recursive_charfun(const CharFunHandle& chi1, int depth);

/// Reflectivity of the N-th pumping step, 1 / (N + 1).
double pumping_reflectivity(int step);

/// chi_{N+1} from chi_N and a fresh copy chi_1.
CharFunHandle pumping_step(const CharFunHandle& chi_n, const CharFunHandle& chi1, int step);

/// Pumping Gaussifier iterated up to N copies (N - 1 steps).
CharFunHandle pumping_charfun(const CharFunHandle& chi1, int copies);

/// chi_{phi_{N+1}}(r) = chi_{phi_N}(r / sqrt 2) chi_{phi_1}(r / sqrt 2).
CharFunHandle compact_step(const CharFunHandle& chi_n, const CharFunHandle& chi1);

CharFunHandle compact_charfun(const CharFunHandle& chi1, int copies);

// ---------------------------------------------------------------------------
// Schedules and resources

enum class ProtocolKind { recursive, reordered_recursive, pumping, compact };

std::string to_string(ProtocolKind kind);

struct ProtocolSchedule {
    ProtocolKind kind;
    int copies;  // N; a power of two for the recursive kinds

    /// Throws std::invalid_argument for N < 1 or non-power-of-two recursive schedules.
    void validate() const;
};

struct ResourceProfile {
    int memory_modes_per_location = 0;
    int time_steps = 0;
    int raw_copies = 0;
};

ResourceProfile resource_profile(const ProtocolSchedule& schedule);

// ---------------------------------------------------------------------------
// Convergence diagnostics

struct GridSpec {
    double r0 = 3.0;
    double radial_step = 0.25;
    int directions = 16;
};

/// For every pair of phase-space coordinates (i < j): `directions` unit vectors in the
/// (i, j) plane times radii radial_step, 2 radial_step, ..., r0.
std::vector<Vec> evaluation_grid(int modes, const GridSpec& grid = {});

/// max |chi_A - chi_B| over evaluation_grid.
double sup_deviation(const CharFunHandle& a, const CharFunHandle& b, const GridSpec& grid = {});

/// Moment tr(H^k tau) of the state behind `chi` with H = r . Q, from the k-th derivative of
/// t -> chi(t r) by central differences and one Richardson level.
Complex moment_from_charfun(const CharFunHandle& chi, const Vec& r, int k, double step = 0.05);

/// Moments mu_1..mu_k_max of a zero-mean state along one direction -> moments of
/// chi(r/sqrt N)^N along the same direction (cumulants scale as N^{1 - j/2}).
std::vector<double> central_limit_moments(const std::vector<double>& moments, long long copies);

/// (k - 1)!! nu^{k/2} for even k, 0 for odd k.
double wick_moment(double nu, int k);

struct MomentRow {
    int direction = 0;
    int k = 0;
    long long copies = 0;
    double moment = 0.0;
    double wick_target = 0.0;
    double deviation = 0.0;
};

struct MomentReport {
    std::vector<Vec> directions;
    std::vector<MomentRow> rows;
    /// Deviation non-increasing in N for every (direction, k) after the first `burn_in` entries.
    bool non_increasing(int burn_in = 0, double slack = 1e-12) const;
};

/// Moments of tau_N along fixed directions for identical factors H^k, k = 1..k_max.
/// Directions default to every unit quadrature plus the sums X_i + X_j and P_i - P_j.
MomentReport moment_convergence_report(const fock::FockDensityMatrix& tau1, int k_max,
                                       const std::vector<long long>& copies, std::vector<Vec> directions = {});

/// Pumping Gaussifier simulated in Fock space; element N-1 holds rho_N.
std::vector<fock::WeightedState> fock_pumping_sequence(const fock::FockDensityMatrix& rho1,
                                                       const GaussianFilter& filter, int copies);

/// Recursive Gaussifier simulated in Fock space to depth n.
fock::WeightedState fock_recursive(const fock::FockDensityMatrix& rho1, const GaussianFilter& filter, int depth);

struct MatrixElementRow {
    long long copies = 0;
    int ket = 0;
    int bra = 0;
    Complex tau_element;    // <k|tau_N|j> in the filter frame
    Complex tau_limit;      // same element of the Gaussian limit tau_inf
    Complex rho_element;    // <k|rho_N|j> / tr(P rho_N P) = tau element / (lambda_k lambda_j)
    Complex rho_limit;
};

struct MatrixElementReport {
    std::vector<MatrixElementRow> rows;
};

/// Elements of tau_N and rho_N in the eigenbasis of P, from the Fock pumping sequence,
/// against the Gaussian limit with covariance Gamma_tau1. Indices are basis indices.
MatrixElementReport matrix_element_convergence(const fock::FockDensityMatrix& rho1, const GaussianFilter& filter,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const std::vector<long long>& copies);

/// Same report from a precomputed pumping sequence (element N-1 holds rho_N).
MatrixElementReport matrix_element_convergence(const std::vector<fock::WeightedState>& seq,
                                               const GaussianFilter& filter,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const std::vector<long long>& copies);

}  // namespace cvdist
