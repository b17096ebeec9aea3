#include "cvdist/fock.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace cvdist::fock {

namespace {

constexpr Complex kI{0.0, 1.0};

int ipow(int base, int exp) {
    int out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const FockDensityMatrix& a, const FockDensityMatrix& b, const char* where) {
    require(a.modes() == b.modes() && a.cutoff() == b.cutoff(),
            std::string(where) + ": states must have the same mode count and cutoff");
}

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Multiplies the tensor index `pos` (of `count` indices, each of size d) of every
// column of `data` by the d x d matrix k.
void apply_on_index(CMat& data, int count, int d, int pos, const CMat& k) {
    using StridedMap = Eigen::Map<CMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
    const int right = ipow(d, count - 1 - pos);
    const int left = ipow(d, pos);
    CMat tmp(d, right);
    for (Eigen::Index col = 0; col < data.cols(); ++col) {
        Complex* base = data.col(col).data();
        for (int l = 0; l < left; ++l) {
            StridedMap blk(base + static_cast<std::ptrdiff_t>(l) * d * right, d, right,
                           Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(1, right));
            tmp.noalias() = k * blk;
            blk = tmp;
        }
    }
}

void apply_diag_on_index(CMat& data, int count, int d, int pos, const std::vector<double>& w) {
    const int right = ipow(d, count - 1 - pos);
    const Eigen::Index rows = data.rows();
    for (Eigen::Index col = 0; col < data.cols(); ++col)
        for (Eigen::Index i = 0; i < rows; ++i) data(i, col) *= w[(i / right) % d];
}

bool is_diagonal(const CMat& k) {
    for (Eigen::Index i = 0; i < k.rows(); ++i)
        for (Eigen::Index j = 0; j < k.cols(); ++j)
            if (i != j && k(i, j) != Complex(0.0)) return false;
    return true;
}

// Single-mode ladder matrix at a given size.
Mat ladder(int d) {
    Mat a = Mat::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

struct EigenPairs {
    std::vector<double> values;
    CMat vectors;  // columns
};

// Eigenpairs of a PSD matrix above a relative floor.
EigenPairs significant_eigenpairs(const CMat& rho, double rel_floor = 1e-14) {
    Eigen::SelfAdjointEigenSolver<CMat> es(rho);
    const Vec& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    EigenPairs out;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = ev.size() - 1; i >= 0; --i)
        if (ev(i) > rel_floor * top) keep.push_back(i);
    out.vectors.resize(rho.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        out.values.push_back(ev(keep[c]));
        out.vectors.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
    }
    return out;
}

CMat mode_operator_power(int d, int p, int q) {
    const Mat a = ladder(d);
    Mat op = Mat::Identity(d, d);
    for (int i = 0; i < q; ++i) op = a * op;
    for (int i = 0; i < p; ++i) op = a.transpose() * op;
    return op.cast<Complex>();
}

}  // namespace

// ---------------------------------------------------------------------------
// FockDensityMatrix

FockDensityMatrix::FockDensityMatrix(int modes, int cutoff, CMat data, bool normalized)
    : modes_(modes), cutoff_(cutoff), normalized_(normalized) {
    require(modes >= 1, "FockDensityMatrix: mode count must be at least 1");
    require(cutoff >= 2, "FockDensityMatrix: cutoff must be at least 2");
    const int dim = ipow(cutoff, modes);
    require(data.rows() == dim && data.cols() == dim, "FockDensityMatrix: data must be cutoff^modes square");
    const double scale = std::max(1.0, data.cwiseAbs().maxCoeff());
    const double herm_err = (data - data.adjoint()).cwiseAbs().maxCoeff();
    if (herm_err > 1e-10 * scale)
        throw std::invalid_argument("FockDensityMatrix: data is not Hermitian (error " + std::to_string(herm_err) + ")");
    data_ = 0.5 * (data + data.adjoint());
    if (normalized && std::abs(data_.trace().real() - 1.0) > 1e-9)
        throw std::invalid_argument("FockDensityMatrix: normalized state must have unit trace");
}

FockDensityMatrix FockDensityMatrix::from_pure(int modes, int cutoff, const CVec& psi) {
    const double n2 = psi.squaredNorm();
    if (!(n2 > 0.0)) throw DegenerateError("from_pure: zero state vector");
    return FockDensityMatrix(modes, cutoff, psi * psi.adjoint() / n2);
}

Complex FockDensityMatrix::element(const std::vector<int>& ket, const std::vector<int>& bra) const {
    require(static_cast<int>(ket.size()) == modes_ && static_cast<int>(bra.size()) == modes_,
            "FockDensityMatrix::element: occupation length must equal mode count");
    return data_(basis_index(ket, cutoff_), basis_index(bra, cutoff_));
}

FockDensityMatrix FockDensityMatrix::renormalized() const {
    const double tr = trace();
    if (!(tr >= kMinWeight)) throw DegenerateError("renormalize: trace " + std::to_string(tr) + " below 1e-14");
    return FockDensityMatrix(modes_, cutoff_, data_ / tr, true);
}

double FockDensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMat> es(data_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Basis helpers

int basis_index(const std::vector<int>& occupation, int cutoff) {
    int idx = 0;
    for (int n : occupation) {
        require(n >= 0 && n < cutoff, "basis_index: occupation outside the cutoff");
        idx = idx * cutoff + n;
    }
    return idx;
}

std::vector<int> basis_occupation(int index, int modes, int cutoff) {
    std::vector<int> occ(modes);
    for (int j = modes - 1; j >= 0; --j) {
        occ[j] = index % cutoff;
        index /= cutoff;
    }
    return occ;
}

Mat annihilation(int cutoff) {
    require(cutoff >= 1, "annihilation: cutoff must be positive");
    return ladder(cutoff);
}

CMat displacement_matrix(Complex alpha, int cutoff) {
    require(cutoff >= 1, "displacement_matrix: cutoff must be positive");
    const int d = cutoff;
    CMat out(d, d);
    const Complex ac = std::conj(alpha);
    out(0, 0) = std::exp(-0.5 * std::norm(alpha));
    for (int m = 1; m < d; ++m) out(m, 0) = alpha * out(m - 1, 0) / std::sqrt(static_cast<double>(m));
    for (int n = 0; n + 1 < d; ++n) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(n + 1));
        out(0, n + 1) = -ac * out(0, n) * inv;
        for (int m = 1; m < d; ++m)
            out(m, n + 1) = (std::sqrt(static_cast<double>(m)) * out(m - 1, n) - ac * out(m, n)) * inv;
    }
    return out;
}

Complex weyl_alpha(double x, double p) { return Complex(-p, x) / std::numbers::sqrt2; }

SparseC quadrature_operator(int modes, int cutoff, const Vec& r) {
    require(r.size() == 2 * modes, "quadrature_operator: direction dimension must be 2 * modes");
    const int dim = ipow(cutoff, modes);
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(dim) * modes * 2);
    for (int idx = 0; idx < dim; ++idx) {
        const auto occ = basis_occupation(idx, modes, cutoff);
        for (int j = 0; j < modes; ++j) {
            const double rx = r(2 * j), rp = r(2 * j + 1);
            if (rx == 0.0 && rp == 0.0) continue;
            const int stride = ipow(cutoff, modes - 1 - j);
            const int n = occ[j];
            if (n > 0)
                trip.emplace_back(idx - stride, idx,
                                  Complex(rx, -rp) * std::sqrt(static_cast<double>(n)) / std::numbers::sqrt2);
            if (n + 1 < cutoff)
                trip.emplace_back(idx + stride, idx,
                                  Complex(rx, rp) * std::sqrt(static_cast<double>(n + 1)) / std::numbers::sqrt2);
        }
    }
    SparseC op(dim, dim);
    op.setFromTriplets(trip.begin(), trip.end());
    return op;
}

namespace {

// Fock unitary on an enlarged space; callers crop.
CMat local_unitary_extended(const Mat& block, int ext) {
    require(block.rows() == 2 && block.cols() == 2, "local_gaussian_unitary: expected a 2x2 block");
    require(std::abs(block.determinant() - 1.0) < 1e-9, "local_gaussian_unitary: block is not symplectic");
    Eigen::JacobiSVD<Mat> svd(block, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat u = svd.matrixU();
    Mat wt = svd.matrixV().transpose();
    if (u.determinant() < 0) {
        u.col(1) *= -1.0;
        wt.row(1) *= -1.0;
    }
    const double sq = -std::log(svd.singularValues()(0));
    const double phi1 = std::atan2(u(0, 1), u(0, 0));
    const double phi2 = std::atan2(wt(0, 1), wt(0, 0));

    const Mat a = ladder(ext);
    Mat gen = 0.5 * sq * (a * a - a.transpose() * a.transpose());
    const CMat sqz = gen.exp().cast<Complex>();
    auto rot = [ext](double phi) {
        CVec ph(ext);
        for (int n = 0; n < ext; ++n) ph(n) = std::exp(Complex(0.0, -phi * n));
        return ph;
    };
    return rot(phi1).asDiagonal() * sqz * rot(phi2).asDiagonal();
}

int extended_size(int cutoff) { return 2 * cutoff + 40; }

}  // namespace

CMat local_gaussian_unitary(const Mat& block, int cutoff) {
    return local_unitary_extended(block, extended_size(cutoff)).topLeftCorner(cutoff, cutoff);
}

CMat filter_root_matrix(const GaussianFilter& filter, int mode, int cutoff) {
    require(mode >= 0 && mode < filter.modes(), "filter_root_matrix: mode out of range");
    const Mat block = filter.mode_block(mode);
    if ((block - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0) {
        CMat p = CMat::Zero(cutoff, cutoff);
        for (int n = 0; n < cutoff; ++n) p(n, n) = filter.p_eigenvalue(mode, n);
        return p;
    }
    const int ext = extended_size(cutoff);
    const CMat v = local_unitary_extended(block, ext);
    CVec w(ext);
    for (int n = 0; n < ext; ++n) w(n) = filter.p_eigenvalue(mode, n);
    const CMat p = v * w.asDiagonal() * v.adjoint();
    return p.topLeftCorner(cutoff, cutoff);
}

BeamSplitterBlocks::BeamSplitterBlocks(double reflectivity, int max_total) {
    require(reflectivity >= 0.0 && reflectivity <= 1.0, "BeamSplitterBlocks: reflectivity R must lie in [0, 1]");
    require(max_total >= 0, "BeamSplitterBlocks: max_total must be >= 0");
    const double theta = std::acos(std::sqrt(1.0 - reflectivity));
    blocks_.reserve(max_total + 1);
    for (int total = 0; total <= max_total; ++total) {
        // Generator theta (a_A^dag a_B - a_A a_B^dag) on |a, total - a>.
        const int sz = total + 1;
        CMat h = CMat::Zero(sz, sz);
        for (int a = 0; a < total; ++a) {
            const double g = theta * std::sqrt(static_cast<double>((a + 1) * (total - a)));
            // G(a+1, a) = g, G(a, a+1) = -g; H = i G is Hermitian.
            h(a + 1, a) = Complex(0.0, g);
            h(a, a + 1) = Complex(0.0, -g);
        }
        Eigen::SelfAdjointEigenSolver<CMat> es(h);
        CVec ph(sz);
        for (int i = 0; i < sz; ++i) ph(i) = std::exp(Complex(0.0, -es.eigenvalues()(i)));
        const CMat u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
        blocks_.push_back(u.real());
    }
}

double conjugation_deviation(double reflectivity, double beta, int cutoff) {
    require(beta > 0.0, "conjugation_deviation: beta must be > 0");
    require(cutoff >= 2, "conjugation_deviation: cutoff must be at least 2");
    const int d = cutoff;
    const BeamSplitterBlocks bs(reflectivity, 2 * (d - 1));
    double sum = 0.0;
    for (int n = d; n <= 2 * (d - 1); ++n) {
        // Complete blocks commute with P x P exactly; only cut blocks contribute.
        const int lo = n - d + 1, hi = d - 1, sz = hi - lo + 1;
        const Mat u = bs.block(n).block(lo, lo, sz, sz);
        const Mat dev = std::exp(-0.5 * beta * n) * (u * u.transpose() - Mat::Identity(sz, sz));
        sum += dev.squaredNorm();
    }
    return std::sqrt(sum);
}

double conjugation_leakage_bound(double beta, int cutoff) {
    require(beta > 0.0, "conjugation_leakage_bound: beta must be > 0");
    double sum = 0.0;
    for (int a = 0; a < cutoff; ++a)
        for (int b = 0; b < cutoff; ++b)
            if (a + b >= cutoff) sum += std::exp(-beta * (a + b));
    return 2.0 * std::sqrt(sum);
}

CMat apply_mode_operator(const CMat& rho, int modes, int cutoff, int mode, const CMat& k) {
    require(mode >= 0 && mode < modes, "apply_mode_operator: mode out of range");
    require(k.rows() == cutoff && k.cols() == cutoff, "apply_mode_operator: operator must be cutoff x cutoff");
    CMat x = rho;
    apply_on_index(x, modes, cutoff, mode, k);
    CMat y = x.adjoint();
    apply_on_index(y, modes, cutoff, mode, k);
    return y.adjoint();
}

double leakage_estimate(const FockDensityMatrix& rho) {
    const int d = rho.cutoff();
    const int m = rho.modes();
    std::vector<double> per_mode(m, 0.0);
    for (int idx = 0; idx < rho.dim(); ++idx) {
        const double pop = rho.data()(idx, idx).real();
        const auto occ = basis_occupation(idx, m, d);
        for (int j = 0; j < m; ++j)
            if (occ[j] >= d - 2) per_mode[j] += pop;
    }
    return *std::max_element(per_mode.begin(), per_mode.end()) / std::max(rho.trace(), kMinWeight);
}

LeakageLevel check_leakage(const FockDensityMatrix& rho, const std::string& context) {
    const double leak = leakage_estimate(rho);
    if (leak > kLeakageError)
        throw LeakageError(context + ": truncation leakage " + std::to_string(leak) + " exceeds 1e-6 at cutoff " +
                           std::to_string(rho.cutoff()));
    return leak > kLeakageWarn ? LeakageLevel::warn : LeakageLevel::ok;
}

// ---------------------------------------------------------------------------
// State preparation

TruncatedState fock_tmsv(double r, int cutoff) {
    require(r >= 0.0 && std::isfinite(r), "fock_tmsv: squeezing r must be >= 0");
    require(cutoff >= 2, "fock_tmsv: cutoff must be at least 2");
    const double t = std::tanh(r);
    CVec psi = CVec::Zero(cutoff * cutoff);
    double amp = 1.0 / std::cosh(r);
    double kept = 0.0;
    for (int n = 0; n < cutoff; ++n) {
        psi(n * cutoff + n) = amp;
        kept += amp * amp;
        amp *= t;
    }
    TruncatedState out{FockDensityMatrix::from_pure(2, cutoff, psi), std::max(0.0, 1.0 - kept)};
    check_leakage(out.state, "fock_tmsv");
    return out;
}

TruncatedState fock_gaussian_state(const Mat& gamma, int cutoff) {
    require(gamma.rows() == gamma.cols() && gamma.rows() % 2 == 0 && gamma.rows() > 0,
            "fock_gaussian_state: covariance must be square with even dimension");
    require(is_physical(gamma), "fock_gaussian_state: covariance is not physical");
    const int m = static_cast<int>(gamma.rows() / 2);
    const int d = cutoff;

    // Complex covariance in the (a_1..a_m, a_1^dag..a_m^dag) basis.
    CMat w = CMat::Zero(2 * m, 2 * m);
    for (int j = 0; j < m; ++j) {
        w(j, 2 * j) = 1.0 / std::numbers::sqrt2;
        w(j, 2 * j + 1) = kI / std::numbers::sqrt2;
        w(m + j, 2 * j) = 1.0 / std::numbers::sqrt2;
        w(m + j, 2 * j + 1) = -kI / std::numbers::sqrt2;
    }
    const CMat sigma_q = w * (0.5 * gamma).cast<Complex>() * w.adjoint() + 0.5 * CMat::Identity(2 * m, 2 * m);
    Eigen::PartialPivLU<CMat> lu(sigma_q);
    CMat xmat = CMat::Zero(2 * m, 2 * m);
    xmat.topRightCorner(m, m).setIdentity();
    xmat.bottomLeftCorner(m, m).setIdentity();
    const CMat a = xmat * (CMat::Identity(2 * m, 2 * m) - lu.inverse());
    const Complex prefactor = 1.0 / std::sqrt(lu.determinant());

    // F_k = G_k / sqrt(k!) over all 2m-digit indices (hafnian recursion). The first m
    // digits index the bra, the last m the ket.
    const int digits = 2 * m;
    const int total = ipow(d, digits);
    std::vector<int> stride(digits);
    for (int i = 0; i < digits; ++i) stride[i] = ipow(d, digits - 1 - i);
    std::vector<Complex> f(total, Complex(0.0));
    f[0] = 1.0;
    std::vector<int> k(digits, 0);
    for (int flat = 1; flat < total; ++flat) {
        // increment the digit vector
        for (int i = digits - 1; i >= 0; --i) {
            if (++k[i] < d) break;
            k[i] = 0;
        }
        int i0 = 0;
        while (k[i0] == 0) ++i0;
        const int prev = flat - stride[i0];
        Complex acc = 0.0;
        for (int j = 0; j < digits; ++j) {
            const int kj = k[j] - (j == i0 ? 1 : 0);
            if (kj == 0 || a(i0, j) == Complex(0.0)) continue;
            acc += a(i0, j) * std::sqrt(static_cast<double>(kj)) * f[prev - stride[j]];
        }
        f[flat] = acc / std::sqrt(static_cast<double>(k[i0]));
    }
    const int dim = ipow(d, m);
    CMat rho(dim, dim);
    for (int ket = 0; ket < dim; ++ket)
        for (int bra = 0; bra < dim; ++bra) rho(ket, bra) = prefactor * f[bra * dim + ket];
    const double tr = rho.trace().real();
    FockDensityMatrix st(m, d, rho, false);
    TruncatedState out{st.renormalized(), std::max(0.0, 1.0 - tr)};
    check_leakage(out.state, "fock_gaussian_state");
    return out;
}

FockDensityMatrix squeezed_reference(double lambda, int cutoff) {
    require(lambda > 0.0 && lambda < 1.0, "squeezed_reference: lambda must lie in (0, 1)");
    CVec psi = CVec::Zero(cutoff);
    double amp = 1.0;
    for (int n = 0; 2 * n < cutoff; ++n) {
        psi(2 * n) = amp;
        amp *= lambda;
    }
    auto st = FockDensityMatrix::from_pure(1, cutoff, psi);
    check_leakage(st, "squeezed_reference");
    return st;
}

WeightedState attenuate(const FockDensityMatrix& rho, int mode, double transmittance, double n_th) {
    require(transmittance >= 0.0 && transmittance <= 1.0, "attenuate: transmittance must lie in [0, 1]");
    require(n_th >= 0.0, "attenuate: n_th must be >= 0");
    require(mode >= 0 && mode < rho.modes(), "attenuate: mode out of range");
    const int d = rho.cutoff();
    // Thermal environment populations, cut once negligible.
    std::vector<double> pk;
    for (int k = 0; k < d; ++k) {
        const double p = std::pow(n_th, k) / std::pow(1.0 + n_th, k + 1);
        if (k > 0 && p < 1e-18) break;
        pk.push_back(p);
    }
    const int kmax = static_cast<int>(pk.size()) - 1;
    const BeamSplitterBlocks bs(1.0 - transmittance, d - 1 + kmax);
    CMat out = CMat::Zero(rho.dim(), rho.dim());
    for (int k = 0; k <= kmax; ++k) {
        for (int e = 0; e <= d - 1 + k; ++e) {
            CMat kraus = CMat::Zero(d, d);
            bool any = false;
            for (int n = 0; n < d; ++n) {
                const int a_out = n + k - e;
                if (a_out < 0 || a_out >= d) continue;
                kraus(a_out, n) = bs.element(n + k, a_out, n);
                any = true;
            }
            if (any) out += pk[k] * apply_mode_operator(rho.data(), rho.modes(), d, mode, kraus);
        }
    }
    FockDensityMatrix raw(rho.modes(), d, out, false);
    const double weight = raw.trace();
    return {raw.renormalized(), weight, std::max(0.0, rho.trace() - weight)};
}

// ---------------------------------------------------------------------------
// Protocol steps

Complex charfun_numeric(const FockDensityMatrix& rho, const Vec& r) {
    require(r.size() == 2 * rho.modes(), "charfun_numeric: argument dimension must be 2 * modes");
    CMat d = displacement_matrix(weyl_alpha(r(0), r(1)), rho.cutoff());
    for (int j = 1; j < rho.modes(); ++j)
        d = kron(d, displacement_matrix(weyl_alpha(r(2 * j), r(2 * j + 1)), rho.cutoff()));
    return d.cwiseProduct(rho.data().transpose()).sum();
}

namespace {

// Applies the beam splitter between tensor positions pa and pb of every column.
// Components pushed above the cutoff are dropped.
void apply_bs_on_indices(CMat& data, int count, int d, int pa, int pb, const BeamSplitterBlocks& bs) {
    const int sa = ipow(d, count - 1 - pa);
    const int sb = ipow(d, count - 1 - pb);
    const int total = ipow(d, count);
    std::vector<int> bases;
    bases.reserve(total / (d * d));
    for (int flat = 0; flat < total; ++flat)
        if ((flat / sa) % d == 0 && (flat / sb) % d == 0) bases.push_back(flat);
    std::vector<Complex> in(d), out(d);
    for (Eigen::Index col = 0; col < data.cols(); ++col) {
        Complex* v = data.col(col).data();
        for (int base : bases) {
            for (int n = 0; n <= 2 * (d - 1); ++n) {
                const int lo = std::max(0, n - d + 1);
                const int hi = std::min(n, d - 1);
                const Mat& u = bs.block(n);
                for (int a = lo; a <= hi; ++a) in[a - lo] = v[base + a * sa + (n - a) * sb];
                for (int ao = lo; ao <= hi; ++ao) {
                    Complex acc = 0.0;
                    for (int a = lo; a <= hi; ++a) acc += u(ao, a) * in[a - lo];
                    out[ao - lo] = acc;
                }
                for (int ao = lo; ao <= hi; ++ao) v[base + ao * sa + (n - ao) * sb] = out[ao - lo];
            }
        }
    }
}

}  // namespace

WeightedState building_block(const FockDensityMatrix& rho_a, const FockDensityMatrix& rho_b, double reflectivity,
                             const GaussianFilter& filter) {
    require_same_shape(rho_a, rho_b, "building_block");
    require(reflectivity >= 0.0 && reflectivity <= 1.0, "building_block: reflectivity R must lie in [0, 1]");
    require(filter.modes() == rho_a.modes(), "building_block: filter must act on the same number of modes");
    const int m = rho_a.modes();
    const int d = rho_a.cutoff();
    const int dim = rho_a.dim();
    const int count = 2 * m;

    const EigenPairs ea = significant_eigenpairs(rho_a.data());
    const EigenPairs eb = (&rho_a == &rho_b) ? ea : significant_eigenpairs(rho_b.data());
    const BeamSplitterBlocks bs(reflectivity, 2 * (d - 1));

    std::vector<CMat> p_ops(m);
    std::vector<std::vector<double>> p_diag(m);
    for (int j = 0; j < m; ++j) {
        p_ops[j] = filter_root_matrix(filter, j, d);
        if (is_diagonal(p_ops[j])) {
            p_diag[j].resize(d);
            for (int n = 0; n < d; ++n) p_diag[j][n] = p_ops[j](n, n).real();
        }
    }

    CMat acc = CMat::Zero(dim, dim);
    double lost = 0.0;
    const double norm_a = rho_a.trace();
    const double norm_b = rho_b.trace();
    CMat psi(static_cast<Eigen::Index>(dim) * dim, 1);
    for (std::size_t i = 0; i < ea.values.size(); ++i) {
        for (std::size_t j = 0; j < eb.values.size(); ++j) {
            const double w = ea.values[i] * eb.values[j] / (norm_a * norm_b);
            // psi index = iA * dim + iB
            for (int ia = 0; ia < dim; ++ia)
                psi.col(0).segment(static_cast<Eigen::Index>(ia) * dim, dim) =
                    ea.vectors(ia, static_cast<Eigen::Index>(i)) * eb.vectors.col(static_cast<Eigen::Index>(j));
            for (int l = 0; l < m; ++l) apply_bs_on_indices(psi, count, d, l, m + l, bs);
            lost += w * std::max(0.0, 1.0 - psi.squaredNorm());
            for (int l = 0; l < m; ++l) {
                if (!p_diag[l].empty())
                    apply_diag_on_index(psi, count, d, m + l, p_diag[l]);
                else
                    apply_on_index(psi, count, d, m + l, p_ops[l]);
            }
            // Column-major view: rows = B index, columns = A index. rho' += w M^dag M, transposed at the end.
            Eigen::Map<CMat> mview(psi.data(), dim, dim);
            const Vec col_norm = mview.colwise().squaredNorm().transpose();
            const Vec row_norm = mview.rowwise().squaredNorm();
            const double total = col_norm.sum();
            if (!(total > 0.0)) continue;
            const double floor = 1e-30 * total;
            std::vector<int> cols, rows;
            for (int c = 0; c < dim; ++c)
                if (col_norm(c) > floor) cols.push_back(c);
            for (int r = 0; r < dim; ++r)
                if (row_norm(r) > floor) rows.push_back(r);
            CMat sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c)
                for (std::size_t r = 0; r < rows.size(); ++r)
                    sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = mview(rows[r], cols[c]);
            CMat gram = CMat::Zero(sub.cols(), sub.cols());
            gram.selfadjointView<Eigen::Lower>().rankUpdate(sub.adjoint(), w);
            for (std::size_t c = 0; c < cols.size(); ++c)
                for (std::size_t r = c; r < cols.size(); ++r)
                    acc(cols[r], cols[c]) += gram(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
    // acc holds the lower triangle of rho'^T.
    CMat full = acc.selfadjointView<Eigen::Lower>();
    full.transposeInPlace();
    FockDensityMatrix raw(m, d, full, false);
    const double weight = raw.trace();
    if (!(weight >= kMinWeight))
        throw DegenerateError("building_block: post-selection weight " + std::to_string(weight) + " below 1e-14");
    return {raw.renormalized(), weight, lost};
}

namespace {

FockDensityMatrix sandwich(const FockDensityMatrix& rho, const GaussianFilter& filter, bool inverse,
                           const char* where) {
    require(filter.modes() == rho.modes(), std::string(where) + ": filter must act on the same number of modes");
    CMat x = rho.data();
    for (int j = 0; j < rho.modes(); ++j) {
        CMat p = filter_root_matrix(filter, j, rho.cutoff());
        if (inverse) {
            if (is_diagonal(p)) {
                for (int n = 0; n < rho.cutoff(); ++n) p(n, n) = 1.0 / p(n, n);
            } else {
                p = p.inverse().eval();
            }
        }
        x = apply_mode_operator(x, rho.modes(), rho.cutoff(), j, p);
    }
    FockDensityMatrix raw(rho.modes(), rho.cutoff(), x, false);
    if (!(raw.trace() >= kMinWeight))
        throw DegenerateError(std::string(where) + ": filtered trace " + std::to_string(raw.trace()) +
                              " below 1e-14");
    return raw.renormalized();
}

}  // namespace

FockDensityMatrix filtered_object(const FockDensityMatrix& rho, const GaussianFilter& filter) {
    return sandwich(rho, filter, false, "filtered_object");
}

FockDensityMatrix unfiltered_state(const FockDensityMatrix& tau, const GaussianFilter& filter) {
    return sandwich(tau, filter, true, "unfiltered_state");
}

std::vector<double> photon_replacement_factors(double eta, int cutoff) {
    require(eta > 0.0 && eta < 1.0, "photon_replacement: eta must lie in (0, 1)");
    const BeamSplitterBlocks bs(1.0 - eta * eta, cutoff);
    std::vector<double> c(cutoff);
    for (int n = 0; n < cutoff; ++n) c[n] = bs.element(n + 1, n, n);
    return c;
}

WeightedState photon_replacement(const FockDensityMatrix& rho, double eta) {
    const auto c = photon_replacement_factors(eta, rho.cutoff());
    CMat x = rho.data();
    for (int j = 0; j < rho.modes(); ++j) {
        apply_diag_on_index(x, rho.modes(), rho.cutoff(), j, c);
        x.adjointInPlace();
        apply_diag_on_index(x, rho.modes(), rho.cutoff(), j, c);
        x.adjointInPlace();
    }
    FockDensityMatrix raw(rho.modes(), rho.cutoff(), x, false);
    const double weight = raw.trace();
    if (!(weight >= kMinWeight))
        throw DegenerateError("photon_replacement: post-selection weight " + std::to_string(weight) +
                              " below 1e-14");
    return {raw.renormalized(), weight, 0.0};
}

FockDensityMatrix twirl(const FockDensityMatrix& rho) {
    const int dim = rho.dim();
    std::vector<int> parity(dim);
    for (int i = 0; i < dim; ++i) {
        const auto occ = basis_occupation(i, rho.modes(), rho.cutoff());
        parity[i] = std::accumulate(occ.begin(), occ.end(), 0) % 2;
    }
    CMat x = rho.data();
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i)
            if (parity[i] != parity[j]) x(i, j) = 0.0;
    return FockDensityMatrix(rho.modes(), rho.cutoff(), x, rho.normalized());
}

// ---------------------------------------------------------------------------
// Diagnostics

Complex moment(const FockDensityMatrix& rho, const MomentSpec& spec) {
    require(!spec.factors.empty(), "moment: MomentSpec needs at least one factor");
    for (const Vec& r : spec.factors) {
        require(r.size() == 2 * rho.modes(), "moment: factor dimension must be 2 * modes");
        require(r.cwiseAbs().maxCoeff() > 0.0, "moment: factor directions must be nonzero");
    }
    check_leakage(rho, "moment");
    CMat v = rho.data();
    for (auto it = spec.factors.rbegin(); it != spec.factors.rend(); ++it)
        v = quadrature_operator(rho.modes(), rho.cutoff(), *it) * v;
    return v.trace();
}

Moments covariance_from_fock(const FockDensityMatrix& rho) {
    check_leakage(rho, "covariance_from_fock");
    const int n = 2 * rho.modes();
    std::vector<SparseC> q;
    for (int i = 0; i < n; ++i) q.push_back(quadrature_operator(rho.modes(), rho.cutoff(), Vec::Unit(n, i)));
    Moments out{Vec(n), Mat(n, n)};
    const double tr = rho.trace();
    std::vector<CMat> qrho;
    for (int i = 0; i < n; ++i) {
        qrho.push_back(q[i] * rho.data());
        out.d(i) = qrho.back().trace().real() / tr;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            Complex s = 0.0;
            for (int k = 0; k < q[i].outerSize(); ++k)
                for (SparseC::InnerIterator it(q[i], k); it; ++it) s += it.value() * qrho[j](it.col(), it.row());
            out.gamma(i, j) = out.gamma(j, i) = 2.0 * (s.real() / tr - out.d(i) * out.d(j));
        }
    }
    return out;
}

namespace {

CMat psd_sqrt(const CMat& a, const char* where) {
    Eigen::SelfAdjointEigenSolver<CMat> es(a);
    if (es.eigenvalues().minCoeff() < -1e-9) throw std::invalid_argument(std::string(where) + ": input is not PSD");
    const Vec s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

double fidelity(const FockDensityMatrix& a, const FockDensityMatrix& b) {
    require_same_shape(a, b, "fidelity");
    const CMat sa = psd_sqrt(a.data(), "fidelity");
    if (b.min_eigenvalue() < -1e-9) throw std::invalid_argument("fidelity: input is not PSD");
    const CMat inner = sa * b.data() * sa;
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
    const double root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::clamp(root * root, 0.0, 1.0);
}

EpsilonValue epsilon_fock(const FockDensityMatrix& rho) {
    require(rho.modes() == 2, "epsilon_fock: expected a two-mode state");
    const Complex num = rho.element({1, 0}, {1, 0});
    const Complex den = rho.element({1, 1}, {0, 0});
    if (std::abs(den) < 1e-300 || std::abs(den) < 1e-14 * std::abs(num))
        return {std::numeric_limits<double>::infinity(), true};
    return {(num / den).real(), false};
}

bool DominanceReport::pass() const {
    return std::all_of(degrees.begin(), degrees.end(), [](const DegreeDominance& d) { return d.pass(); });
}

int DominanceReport::first_failure() const {
    for (const auto& d : degrees)
        if (!d.pass()) return d.degree;
    return -1;
}

DominanceReport reference_dominance_check(const FockDensityMatrix& tau, const FockDensityMatrix& tau_ref,
                                          const GaussianFilter& filter, int k_max, double tol) {
    require_same_shape(tau, tau_ref, "reference_dominance_check");
    require(filter.modes() == tau.modes(), "reference_dominance_check: filter must act on the same modes");
    require(k_max >= 1 && k_max < tau.cutoff(), "reference_dominance_check: k_max must lie in [1, cutoff)");
    const int m = tau.modes();
    const int d = tau.cutoff();

    // tr(V A V^dag tau) = tr(A V^dag tau V): move to the filter frame once.
    CMat t = tau.data();
    CMat tr = tau_ref.data();
    for (int j = 0; j < m; ++j) {
        const Mat block = filter.mode_block(j);
        if ((block - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0) continue;
        const CMat vdag = local_gaussian_unitary(block, d).adjoint();
        t = apply_mode_operator(t, m, d, j, vdag);
        tr = apply_mode_operator(tr, m, d, j, vdag);
    }

    DominanceReport report;
    std::vector<int> expo(2 * m, 0);  // (p_1, q_1, ..., p_m, q_m)
    for (int k = 1; k <= k_max; ++k) {
        DegreeDominance deg;
        deg.degree = k;
        deg.worst_margin = std::numeric_limits<double>::infinity();
        // Enumerate compositions of k into 2m nonnegative parts.
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == 2 * m - 1) {
                expo[pos] = left;
                CMat x = t, y = tr;
                for (int j = 0; j < m; ++j) {
                    const CMat op = mode_operator_power(d, expo[2 * j], expo[2 * j + 1]);
                    apply_on_index(x, m, d, j, op);
                    apply_on_index(y, m, d, j, op);
                }
                const Complex mt = x.trace();
                const Complex mr = y.trace();
                const double margin = std::abs(mr) - std::abs(mt);
                const double scale = std::max(1.0, std::abs(mr));
                ++deg.monomials;
                deg.worst_margin = std::min(deg.worst_margin, margin);
                if (margin < -tol * scale) deg.bounded = false;
                if (std::abs(mr.imag()) > tol * scale || mr.real() < -tol * scale) deg.reference_positive = false;
                return;
            }
            for (int v = 0; v <= left; ++v) {
                expo[pos] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, k);
        report.degrees.push_back(deg);
    }
    return report;
}

}  // namespace cvdist::fock
