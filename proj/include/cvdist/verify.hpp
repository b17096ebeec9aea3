#pragma once

// Invariant suite behind `cvdist verify`, plus the non-Gaussian test inputs shared by
// the checks and the acceptance runner.

#include <functional>
#include <string>
#include <vector>

#include "cvdist/fock.hpp"
#include "cvdist/protocols.hpp"
#include "cvdist/repeater.hpp"

namespace cvdist::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    int cutoff = fock::kDefaultCutoff;
    std::function<repeater::LinkState(const repeater::LinkState&)> swap_fn = repeater::swap;
};

std::vector<CheckResult> run_all(const VerifyOptions& opts = {});

// Individual checks, each self-contained.
CheckResult check_conjugation_lemma(int cutoff);
CheckResult check_wick(int cutoff);
CheckResult check_pumping_equals_recursive();
CheckResult check_zero_persistence();
CheckResult check_schur_vs_fock(int cutoff);
CheckResult check_boundary_consistency();
CheckResult check_swap_map(const std::function<repeater::LinkState(const repeater::LinkState&)>& swap_fn);
CheckResult check_distilled_physicality();
CheckResult check_loss_semigroup();
CheckResult check_filter_round_trip();

// ---------------------------------------------------------------------------
// Test inputs

/// (1 - |r|^2 / 2) exp(-|r|^2 / 4): the single-photon state on one mode.
Complex single_photon_charfun(double x, double p);

/// |1><1| on every mode. Zero wherever some mode has |r_j|^2 = 2.
CharFunHandle fock_one_charfun(int modes);

/// p |1..1><1..1| + (1 - p) vacuum.
CharFunHandle photon_vacuum_mixture_charfun(int modes, double p);

struct PhotonReplacedInput {
    fock::FockDensityMatrix rho1;  // photon-replaced TMSV
    fock::FockDensityMatrix tau1;  // its filtered object
    GaussianFilter filter;
};

/// TMSV(r) -> symmetric photon replacement (eta) -> thermal filter beta on both modes.
PhotonReplacedInput photon_replaced_tmsv(double r, double eta, double beta, int cutoff);

}  // namespace cvdist::verify
