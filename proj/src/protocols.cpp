#include "cvdist/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "cvdist/channels.hpp"

namespace cvdist {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool is_power_of_two(long long n) { return n >= 1 && (n & (n - 1)) == 0; }

Complex int_power(Complex z, long long n) {
    if (n <= 64) {
        Complex out = 1.0;
        for (long long i = 0; i < n; ++i) out *= z;
        return out;
    }
    Complex out = 1.0;
    while (n > 0) {
        if (n & 1) out *= z;
        z *= z;
        n >>= 1;
    }
    return out;
}

double binomial(int n, int k) {
    double out = 1.0;
    for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

}  // namespace

CharFunHandle::CharFunHandle(int modes, Mat second_moments, Evaluator eval, bool zero_first_moments)
    : modes_(modes),
      gamma_(std::move(second_moments)),
      eval_(std::make_shared<const Evaluator>(std::move(eval))),
      zero_first_(zero_first_moments) {
    require(modes >= 1, "CharFunHandle: mode count must be at least 1");
    require(gamma_.rows() == 2 * modes && gamma_.cols() == 2 * modes,
            "CharFunHandle: second-moment matrix must be 2m x 2m");
    require(static_cast<bool>(*eval_), "CharFunHandle: empty evaluator");
}

Complex CharFunHandle::operator()(const Vec& r) const {
    if (r.size() != 2 * modes_) throw std::invalid_argument("CharFunHandle: argument dimension must be 2 * modes");
    return (*eval_)(r);
}

CharFunHandle gaussian_limit(const Mat& gamma) {
    require(gamma.rows() == gamma.cols() && gamma.rows() % 2 == 0 && gamma.rows() > 0,
            "gaussian_limit: covariance must be square with even dimension");
    require((gamma - gamma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, gamma.cwiseAbs().maxCoeff()),
            "gaussian_limit: covariance must be symmetric");
    const Mat g = gamma;
    return CharFunHandle(static_cast<int>(g.rows() / 2), g,
                         [g](const Vec& r) { return Complex(std::exp(-0.25 * r.dot(g * r)), 0.0); });
}

CharFunHandle charfun_from_fock(const fock::FockDensityMatrix& rho) {
    const auto state = std::make_shared<const fock::FockDensityMatrix>(rho);
    const fock::Moments mom = fock::covariance_from_fock(rho);
    const bool zero_mean = mom.d.cwiseAbs().maxCoeff() < 1e-12;
    return CharFunHandle(
        rho.modes(), mom.gamma, [state](const Vec& r) { return fock::charfun_numeric(*state, r); }, zero_mean);
}

CharFunHandle blockwise_charfun(const CharFunHandle& a, const CharFunHandle& b, double reflectivity) {
    require(a.modes() == b.modes(), "blockwise_charfun: handles must have the same mode count");
    require(reflectivity >= 0.0 && reflectivity <= 1.0, "blockwise_charfun: reflectivity R must lie in [0, 1]");
    const double st = std::sqrt(1.0 - reflectivity);
    const double sr = std::sqrt(reflectivity);
    // Written as Gamma_A + R (Gamma_B - Gamma_A) so equal inputs are reproduced bit for bit.
    Mat gamma = a.second_moments() + reflectivity * (b.second_moments() - a.second_moments());
    return CharFunHandle(
        a.modes(), std::move(gamma), [a, b, st, sr](const Vec& r) { return a(st * r) * b(sr * r); },
        a.zero_first_moments() && b.zero_first_moments());
}

CharFunHandle central_limit_charfun(const CharFunHandle& chi1, long long copies) {
    require(copies >= 1, "central_limit_charfun: number of copies must be >= 1");
    const double scale = 1.0 / std::sqrt(static_cast<double>(copies));
    return CharFunHandle(
        chi1.modes(), chi1.second_moments(),
        [chi1, copies, scale](const Vec& r) { return int_power(chi1(scale * r), copies); },
        chi1.zero_first_moments());
}

CharFunHandle recursive_charfun(const CharFunHandle& chi1, int depth) {
    require(depth >= 0 && depth < 62, "recursive_charfun: depth n must lie in [0, 62)");
    if (depth == 0) return chi1;
    return central_limit_charfun(chi1, 1LL << depth);
}

double pumping_reflectivity(int step) {
    require(step >= 1, "pumping_reflectivity: step N must be >= 1");
    return 1.0 / (step + 1.0);
}

CharFunHandle pumping_step(const CharFunHandle& chi_n, const CharFunHandle& chi1, int step) {
    return blockwise_charfun(chi_n, chi1, pumping_reflectivity(step));
}

CharFunHandle pumping_charfun(const CharFunHandle& chi1, int copies) {
    require(copies >= 1, "pumping_charfun: number of copies must be >= 1");
    CharFunHandle chi = chi1;
    for (int step = 1; step < copies; ++step) chi = pumping_step(chi, chi1, step);
    return chi;
}

CharFunHandle compact_step(const CharFunHandle& chi_n, const CharFunHandle& chi1) {
    return blockwise_charfun(chi_n, chi1, 0.5);
}

CharFunHandle compact_charfun(const CharFunHandle& chi1, int copies) {
    require(copies >= 1, "compact_charfun: number of copies must be >= 1");
    CharFunHandle chi = chi1;
    for (int step = 1; step < copies; ++step) chi = compact_step(chi, chi1);
    return chi;
}

// ---------------------------------------------------------------------------

std::string to_string(ProtocolKind kind) {
    switch (kind) {
        case ProtocolKind::recursive: return "recursive";
        case ProtocolKind::reordered_recursive: return "reordered_recursive";
        case ProtocolKind::pumping: return "pumping";
        case ProtocolKind::compact: return "compact";
    }
    return "unknown";
}

void ProtocolSchedule::validate() const {
    require(copies >= 1, "ProtocolSchedule: number of copies N must be >= 1");
    if (kind == ProtocolKind::recursive || kind == ProtocolKind::reordered_recursive)
        require(is_power_of_two(copies), "ProtocolSchedule: recursive schedules need N = 2^n copies");
}

ResourceProfile resource_profile(const ProtocolSchedule& schedule) {
    schedule.validate();
    const int n_copies = schedule.copies;
    int depth = 0;
    while ((1 << depth) < n_copies) ++depth;
    ResourceProfile out;
    out.raw_copies = n_copies;
    switch (schedule.kind) {
        case ProtocolKind::recursive:
            out.memory_modes_per_location = n_copies;
            out.time_steps = depth;
            break;
        case ProtocolKind::reordered_recursive:
            out.memory_modes_per_location = depth + 1;
            out.time_steps = n_copies - 1;
            break;
        case ProtocolKind::pumping:
        case ProtocolKind::compact:
            out.memory_modes_per_location = 2;
            out.time_steps = n_copies - 1;
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec> evaluation_grid(int modes, const GridSpec& grid) {
    require(modes >= 1, "evaluation_grid: mode count must be at least 1");
    require(grid.r0 > 0.0, "evaluation_grid: radius r0 must be > 0");
    require(grid.radial_step > 0.0, "evaluation_grid: radial step must be > 0");
    require(grid.directions >= 1, "evaluation_grid: need at least one direction");
    const int dim = 2 * modes;
    const int n_radii = static_cast<int>(std::floor(grid.r0 / grid.radial_step + 1e-9));
    std::vector<Vec> points;
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            for (int a = 0; a < grid.directions; ++a) {
                const double theta = 2.0 * std::numbers::pi * a / grid.directions;
                for (int k = 1; k <= n_radii; ++k) {
                    Vec r = Vec::Zero(dim);
                    r(i) = k * grid.radial_step * std::cos(theta);
                    r(j) = k * grid.radial_step * std::sin(theta);
                    points.push_back(std::move(r));
                }
            }
        }
    }
    return points;
}

double sup_deviation(const CharFunHandle& a, const CharFunHandle& b, const GridSpec& grid) {
    require(a.modes() == b.modes(), "sup_deviation: handles must have the same mode count");
    double worst = 0.0;
    for (const Vec& r : evaluation_grid(a.modes(), grid)) worst = std::max(worst, std::abs(a(r) - b(r)));
    return worst;
}

Complex moment_from_charfun(const CharFunHandle& chi, const Vec& r, int k, double step) {
    require(k >= 1, "moment_from_charfun: order k must be >= 1");
    require(step > 0.0, "moment_from_charfun: step must be > 0");
    auto derivative = [&](double h) {
        Complex acc = 0.0;
        for (int j = 0; j <= k; ++j) {
            const double t = (0.5 * k - j) * h;
            acc += ((j % 2) ? -1.0 : 1.0) * binomial(k, j) * chi(t * r);
        }
        return acc / std::pow(h, k);
    };
    const Complex rich = (4.0 * derivative(0.5 * step) - derivative(step)) / 3.0;
    // mu_k = (-i)^k d^k/dt^k chi(t r) at t = 0.
    Complex phase = 1.0;
    for (int i = 0; i < k; ++i) phase *= Complex(0.0, -1.0);
    return phase * rich;
}

std::vector<double> central_limit_moments(const std::vector<double>& moments, long long copies) {
    require(copies >= 1, "central_limit_moments: number of copies must be >= 1");
    const int kmax = static_cast<int>(moments.size());
    // mu[0] = 1; moments[j-1] = mu_j.
    std::vector<double> mu(kmax + 1, 1.0), kappa(kmax + 1, 0.0);
    for (int n = 1; n <= kmax; ++n) mu[n] = moments[n - 1];
    for (int n = 1; n <= kmax; ++n) {
        double s = mu[n];
        for (int j = 1; j < n; ++j) s -= binomial(n - 1, j - 1) * kappa[j] * mu[n - j];
        kappa[n] = s;
    }
    const double nn = static_cast<double>(copies);
    for (int j = 1; j <= kmax; ++j) kappa[j] *= std::pow(nn, 1.0 - 0.5 * j);
    std::vector<double> out(kmax + 1, 1.0);
    for (int n = 1; n <= kmax; ++n) {
        double s = 0.0;
        for (int j = 1; j <= n; ++j) s += binomial(n - 1, j - 1) * kappa[j] * out[n - j];
        out[n] = s;
    }
    return {out.begin() + 1, out.end()};
}

double wick_moment(double nu, int k) {
    require(k >= 0, "wick_moment: order must be >= 0");
    if (k % 2) return 0.0;
    double df = 1.0;
    for (int i = k - 1; i > 1; i -= 2) df *= i;
    return df * std::pow(nu, k / 2);
}

bool MomentReport::non_increasing(int burn_in, double slack) const {
    std::map<std::pair<int, int>, std::vector<double>> series;
    for (const auto& row : rows) series[{row.direction, row.k}].push_back(row.deviation);
    for (const auto& [key, dev] : series)
        for (std::size_t i = static_cast<std::size_t>(std::max(0, burn_in)); i + 1 < dev.size(); ++i)
            if (dev[i + 1] > dev[i] + slack * std::max(1.0, dev[i])) return false;
    return true;
}

MomentReport moment_convergence_report(const fock::FockDensityMatrix& tau1, int k_max,
                                       const std::vector<long long>& copies, std::vector<Vec> directions) {
    require(k_max >= 1, "moment_convergence_report: k_max must be >= 1");
    require(!copies.empty(), "moment_convergence_report: need at least one N");
    const int m = tau1.modes();
    if (directions.empty()) {
        for (int i = 0; i < 2 * m; ++i) directions.push_back(Vec::Unit(2 * m, i));
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) {
                Vec x = Vec::Zero(2 * m), p = Vec::Zero(2 * m);
                x(2 * i) = x(2 * j) = 1.0;
                p(2 * i + 1) = 1.0;
                p(2 * j + 1) = -1.0;
                directions.push_back(x);
                directions.push_back(p);
            }
    }
    MomentReport report;
    report.directions = directions;
    const fock::FockDensityMatrix normalized = tau1.renormalized();
    for (std::size_t di = 0; di < directions.size(); ++di) {
        std::vector<double> mu;
        for (int k = 1; k <= k_max; ++k) {
            fock::MomentSpec spec{std::vector<Vec>(k, directions[di])};
            mu.push_back(fock::moment(normalized, spec).real());
        }
        if (std::abs(mu[0]) > 1e-9)
            throw std::invalid_argument("moment_convergence_report: input must have zero first moments");
        const double nu = k_max >= 2 ? mu[1] : 0.0;
        for (long long n : copies) {
            const std::vector<double> mu_n = central_limit_moments(mu, n);
            for (int k = 1; k <= k_max; ++k) {
                MomentRow row;
                row.direction = static_cast<int>(di);
                row.k = k;
                row.copies = n;
                row.moment = mu_n[k - 1];
                row.wick_target = wick_moment(nu, k);
                row.deviation = std::abs(row.moment - row.wick_target);
                report.rows.push_back(row);
            }
        }
    }
    return report;
}

std::vector<fock::WeightedState> fock_pumping_sequence(const fock::FockDensityMatrix& rho1,
                                                       const GaussianFilter& filter, int copies) {
    require(copies >= 1, "fock_pumping_sequence: number of copies must be >= 1");
    std::vector<fock::WeightedState> out;
    out.push_back({rho1.renormalized(), 1.0, 0.0});
    for (int step = 1; step < copies; ++step)
        out.push_back(fock::building_block(out.back().state, out.front().state, pumping_reflectivity(step), filter));
    return out;
}

fock::WeightedState fock_recursive(const fock::FockDensityMatrix& rho1, const GaussianFilter& filter, int depth) {
    require(depth >= 0, "fock_recursive: depth n must be >= 0");
    fock::WeightedState cur{rho1.renormalized(), 1.0, 0.0};
    for (int i = 0; i < depth; ++i) {
        fock::WeightedState next = fock::building_block(cur.state, cur.state, 0.5, filter);
        next.leakage += cur.leakage;
        cur = std::move(next);
    }
    return cur;
}

namespace {

// V^dag X V for every mode: moves an operator into the eigenframe of P.
CMat to_filter_frame(const CMat& x, int modes, int cutoff, const GaussianFilter& filter) {
    CMat out = x;
    for (int j = 0; j < modes; ++j) {
        const Mat block = filter.mode_block(j);
        if ((block - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0) continue;
        out = fock::apply_mode_operator(out, modes, cutoff, j, fock::local_gaussian_unitary(block, cutoff).adjoint());
    }
    return out;
}

}  // namespace

MatrixElementReport matrix_element_convergence(const fock::FockDensityMatrix& rho1, const GaussianFilter& filter,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const std::vector<long long>& copies) {
    require(!copies.empty(), "matrix_element_convergence: need at least one N");
    for (const auto& [k, j] : pairs)
        require(k >= 0 && k < rho1.dim() && j >= 0 && j < rho1.dim(),
                "matrix_element_convergence: basis index out of range");
    const long long n_max = *std::max_element(copies.begin(), copies.end());
    require(n_max >= 1 && n_max <= 256, "matrix_element_convergence: N must lie in [1, 256]");
    return matrix_element_convergence(fock_pumping_sequence(rho1, filter, static_cast<int>(n_max)), filter, pairs,
                                      copies);
}

MatrixElementReport matrix_element_convergence(const std::vector<fock::WeightedState>& seq,
                                               const GaussianFilter& filter,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const std::vector<long long>& copies) {
    require(!seq.empty(), "matrix_element_convergence: empty pumping sequence");
    const int m = seq.front().state.modes();
    const int d = seq.front().state.cutoff();
    for (const auto& [k, j] : pairs)
        require(k >= 0 && k < seq.front().state.dim() && j >= 0 && j < seq.front().state.dim(),
                "matrix_element_convergence: basis index out of range");
    const fock::FockDensityMatrix tau1 = fock::filtered_object(seq.front().state, filter);
    const Mat gamma_tau = fock::covariance_from_fock(tau1).gamma;
    const CMat tau_inf =
        to_filter_frame(fock::fock_gaussian_state(gamma_tau, d).state.data(), m, d, filter);

    auto lambda = [&](int idx) {
        const auto occ = fock::basis_occupation(idx, m, d);
        double l = 1.0;
        for (int j = 0; j < m; ++j) l *= filter.p_eigenvalue(j, occ[j]);
        return l;
    };

    MatrixElementReport report;
    for (long long n : copies) {
        require(n >= 1 && n <= static_cast<long long>(seq.size()),
                "matrix_element_convergence: N outside the simulated sequence");
        const auto tau_n = fock::filtered_object(seq[static_cast<std::size_t>(n - 1)].state, filter);
        const CMat t = to_filter_frame(tau_n.data(), m, d, filter);
        for (const auto& [k, j] : pairs) {
            MatrixElementRow row;
            row.copies = n;
            row.ket = k;
            row.bra = j;
            row.tau_element = t(k, j);
            row.tau_limit = tau_inf(k, j);
            const double ll = lambda(k) * lambda(j);
            row.rho_element = row.tau_element / ll;
            row.rho_limit = row.tau_limit / ll;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace cvdist
