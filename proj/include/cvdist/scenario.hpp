#pragma once

// End-to-end Gaussification run: photon-replaced TMSV, Fock-space filtering, closed-form
// central-limit sequence, and every convergence diagnostic. Drives `cvdist gaussify`.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvdist/channels.hpp"
#include "cvdist/protocols.hpp"

namespace cvdist {

struct GaussifyScenario {
    double r = 0.4;
    double eta = 0.5;
    double beta = 1.0;
    std::string input = "photon_replaced";  // or "gaussian"
    bool twirl = false;
    std::vector<long long> copies{1, 2, 4, 8, 16};
    GridSpec grid{2.0, 0.25, 16};
    int k_max = 4;
    int cutoff = fock::kDefaultCutoff;
    /// Largest N simulated in Fock space for matrix elements and fidelities.
    int fock_copies = 16;
    /// Reflectivity of the single building-block round compared against the product rule.
    double reflectivity = 0.5;

    /// Throws std::invalid_argument naming the offending parameter.
    void validate() const;
};

struct DeviationRow {
    long long copies;
    double sup_deviation;
};

struct FidelityRow {
    long long copies;
    double fidelity;  // F(rho_N, rho_inf)
    double weight;    // post-selection mass of the last step
};

struct GaussifyReport {
    GaussifyScenario scenario;
    Mat gamma_tau1;
    bool second_moments_exact = true;
    std::vector<DeviationRow> deviations;
    bool deviations_decreasing = true;
    MomentReport moments;
    MatrixElementReport matrix_elements;
    double oracle_round_deviation = 0.0;  // Fock building block vs product rule, grid r0 = 3
    LimitState limit;
    InverseFilterIntegrability limit_integrability;
    std::vector<FidelityRow> fidelities;
    /// "ok", "limit_unphysical", "limit_exceeds_cutoff" or "not_requested".
    std::string fidelity_status = "not_requested";
    double max_leakage = 0.0;
};

GaussifyReport run_gaussify(const GaussifyScenario& scenario);

/// Default matrix elements: <00|.|00>, <11|.|00>, <10|.|10>, and the parity-odd <10|.|00>.
std::vector<std::pair<int, int>> default_element_pairs(int cutoff);

}  // namespace cvdist
