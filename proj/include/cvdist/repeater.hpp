#pragma once

// Repeater chain on symmetric two-mode Gaussian links: fiber transmission, optional
// station loss, de-Gaussification + Gaussification in closed form, entanglement swapping.

#include <string>
#include <vector>

#include "cvdist/gaussian.hpp"

namespace cvdist::repeater {

using LinkState = SymmetricTwoMode;

inline constexpr double kDefaultAttenuationKm = 22.0;
inline constexpr double kDefaultThermalPhotons = 1e-8;
inline constexpr double kDefaultLambdaFactor = 0.99;
/// Below this S the link is treated as carrying no entanglement at all.
inline constexpr double kSingularS = 1e-12;

enum class Variant { i, ii };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

struct RepeaterConfig {
    double r = 0.5;
    int k = 0;          // swap depth; m = 2^k sources
    double L = 100.0;   // total distance in km, L = 2 m l
    double l_att = kDefaultAttenuationKm;
    double n_th = kDefaultThermalPhotons;
    double lambda_factor = kDefaultLambdaFactor;
    Variant variant = Variant::i;
    bool distill = true;  // false: plain transmission and swapping
    bool nested = false;  // also distill after every swap

    int sources() const { return 1 << k; }
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Both modes of a TMSV sent through l km of fiber each.
LinkState transmit(double r, double l_km, double l_att = kDefaultAttenuationKm, double n_th = kDefaultThermalPhotons);

/// TMSV from a midpoint source spanning `span_km` end to end (each mode travels span/2).
LinkState transmit_span(double r, double span_km, double l_att = kDefaultAttenuationKm,
                        double n_th = kDefaultThermalPhotons);

/// 50% loss with thermal admixture on each mode inside the station.
LinkState station_loss(const LinkState& s, double n_th = kDefaultThermalPhotons);

/// (C^2 - S^2 - 1) / (2 S). Throws std::domain_error for S below kSingularS.
double epsilon_symmetric(const LinkState& s);

/// Output of photon replacement followed by full Gaussification.
/// Throws std::domain_error unless 0 < Lambda < 1 / (1 + eps).
LinkState distilled_state(double eps, double lambda);

/// factor / (1 + eps).
double lambda_policy(double eps, double factor = kDefaultLambdaFactor);

/// Optimal Gaussian entanglement swap g(C, S) = (C - S^2 / 2C, S^2 / 2C).
LinkState swap(const LinkState& s);

/// Link state after the full chain.
LinkState chain_state(const RepeaterConfig& cfg);

/// Duan Delta of chain_state.
double chain_delta(const RepeaterConfig& cfg);

struct DirectReach {
    double km;
    bool unbounded;  // n_th = 0: pure loss never destroys the entanglement
};

/// Largest end-to-end distance over which direct TMSV transmission stays entangled.
DirectReach direct_lmax(double r, double l_att = kDefaultAttenuationKm, double n_th = kDefaultThermalPhotons);

struct MaxDistance {
    double L_km = 0.0;
    double delta = 0.0;        // chain_delta at L_km
    bool entangled = false;    // false: not entangled even at the lower bracket end
    bool capped = false;       // still entangled at the upper bracket end
    bool monotone = true;      // Delta was non-decreasing on the coarse grid
};

struct SearchOptions {
    double lo_km = 1.0;
    double hi_km = 5000.0;
    double tol_km = 0.1;
    int coarse_points = 200;
};

/// Largest L with chain_delta < 1 (cfg.L is ignored).
MaxDistance max_distance(RepeaterConfig cfg, const SearchOptions& opts = {});

struct ScanRow {
    double r = 0.0;
    int m = 1;
    std::string variant;  // "i", "ii" or "direct"
    double L_max_km = 0.0;
    double delta_at_Lmax = 0.0;
};

struct ScanSpec {
    std::vector<double> r_grid;
    std::vector<int> k_set;
    std::vector<Variant> variants{Variant::i};
    bool include_direct = true;
    bool distill = true;
    bool nested = false;
    double l_att = kDefaultAttenuationKm;
    double n_th = kDefaultThermalPhotons;
    double lambda_factor = kDefaultLambdaFactor;
    SearchOptions search;
};

/// One configuration per row, r-major: for every r the direct row first, then every
/// variant and k in the given order.
std::vector<RepeaterConfig> scan_configs(const ScanSpec& spec);

ScanRow scan_row(const RepeaterConfig& cfg, const SearchOptions& opts = {});

/// Sequential scan. The CLI evaluates scan_configs in parallel instead.
std::vector<ScanRow> scan(const ScanSpec& spec);

}  // namespace cvdist::repeater
