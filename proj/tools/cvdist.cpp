// cvdist: batch front end for Gaussification runs, repeater sweeps and the invariant suite.
//
// Exit codes: 0 success, 1 check failure, 2 usage or domain error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvdist/config.hpp"
#include "cvdist/repeater.hpp"
#include "cvdist/scenario.hpp"
#include "cvdist/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cvdist;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    int cutoff = -1;
    int threads = 0;
    std::string variant;
    std::string inject_fault;
};

KeyValueConfig load_config(const CommonOptions& opts) {
    KeyValueConfig cfg = opts.config_path.empty() ? KeyValueConfig{} : KeyValueConfig::from_file(opts.config_path);
    for (const auto& a : opts.overrides) cfg.assign(a);
    return cfg;
}

std::string num12(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

// ---------------------------------------------------------------------------
// gaussify

const std::set<std::string> kGaussifyKeys{"r",  "eta",       "beta",       "input", "twirl", "n_list", "r0",
                                          "radial_step", "directions", "k_max", "cutoff", "fock_n_max", "R"};

GaussifyScenario gaussify_scenario(const KeyValueConfig& cfg, const CommonOptions& opts) {
    cfg.reject_unknown(kGaussifyKeys);
    GaussifyScenario sc;
    sc.r = cfg.get_double("r", sc.r);
    sc.eta = cfg.get_double("eta", sc.eta);
    sc.beta = cfg.get_double("beta", sc.beta);
    sc.input = cfg.get_string("input", sc.input);
    sc.twirl = cfg.get_bool("twirl", sc.twirl);
    std::vector<int> ns;
    for (long long n : sc.copies) ns.push_back(static_cast<int>(n));
    ns = cfg.get_int_list("n_list", ns);
    sc.copies.assign(ns.begin(), ns.end());
    sc.grid.r0 = cfg.get_double("r0", sc.grid.r0);
    sc.grid.radial_step = cfg.get_double("radial_step", sc.grid.radial_step);
    sc.grid.directions = cfg.get_int("directions", sc.grid.directions);
    sc.k_max = cfg.get_int("k_max", sc.k_max);
    sc.cutoff = cfg.get_int("cutoff", sc.cutoff);
    if (opts.cutoff > 0) sc.cutoff = opts.cutoff;
    sc.fock_copies = cfg.get_int("fock_n_max", sc.fock_copies);
    sc.reflectivity = cfg.get_double("R", sc.reflectivity);
    sc.validate();
    return sc;
}

json report_json(const GaussifyReport& rep) {
    const auto& sc = rep.scenario;
    json j;
    j["scenario"] = {{"r", sc.r},
                     {"eta", sc.eta},
                     {"beta", sc.beta},
                     {"input", sc.input},
                     {"twirl", sc.twirl},
                     {"n_list", sc.copies},
                     {"r0", sc.grid.r0},
                     {"radial_step", sc.grid.radial_step},
                     {"directions", sc.grid.directions},
                     {"k_max", sc.k_max},
                     {"cutoff", sc.cutoff},
                     {"fock_n_max", sc.fock_copies},
                     {"R", sc.reflectivity}};
    j["gamma_tau1"] = matrix_json(rep.gamma_tau1);
    j["second_moments_exact"] = rep.second_moments_exact;

    json dev = json::array();
    for (const auto& d : rep.deviations) dev.push_back({{"N", d.copies}, {"sup_deviation", d.sup_deviation}});
    j["sup_deviation"] = dev;
    j["sup_deviation_decreasing"] = rep.deviations_decreasing;

    json dirs = json::array();
    for (const auto& v : rep.moments.directions) dirs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    json mrows = json::array();
    for (const auto& m : rep.moments.rows)
        mrows.push_back({{"direction", m.direction},
                         {"k", m.k},
                         {"N", m.copies},
                         {"moment", m.moment},
                         {"wick_target", m.wick_target},
                         {"deviation", m.deviation}});
    j["moments"] = {{"directions", dirs}, {"rows", mrows}, {"non_increasing", rep.moments.non_increasing()}};

    json erows = json::array();
    for (const auto& e : rep.matrix_elements.rows)
        erows.push_back({{"N", e.copies},
                         {"ket", e.ket},
                         {"bra", e.bra},
                         {"tau", complex_json(e.tau_element)},
                         {"tau_limit", complex_json(e.tau_limit)},
                         {"rho", complex_json(e.rho_element)},
                         {"rho_limit", complex_json(e.rho_limit)},
                         {"tau_deviation", std::abs(e.tau_element - e.tau_limit)}});
    j["matrix_elements"] = erows;

    json fid = json::array();
    for (const auto& f : rep.fidelities) fid.push_back({{"N", f.copies}, {"fidelity", f.fidelity}, {"weight", f.weight}});
    j["fidelity_vs_limit"] = fid;
    j["fidelity_status"] = rep.fidelity_status;

    j["oracle_round_deviation"] = rep.oracle_round_deviation;
    j["limit_state"] = {{"gamma", matrix_json(rep.limit.gamma)},
                        {"physical", rep.limit.physical},
                        {"physicality_margin", rep.limit.physicality_margin},
                        {"condition", rep.limit.condition}};
    j["reference_integrability"] = {{"min_eigenvalue", rep.limit_integrability.min_eigenvalue},
                                    {"finite", rep.limit_integrability.finite},
                                    {"borderline", rep.limit_integrability.borderline}};
    j["max_leakage"] = rep.max_leakage;
    return j;
}

std::string convergence_csv(const GaussifyReport& rep) {
    std::string out = "N,sup_deviation,moment_k4_deviation,fidelity_vs_limit\n";
    for (const auto& d : rep.deviations) {
        double k4 = std::nan("");
        for (const auto& m : rep.moments.rows)
            if (m.copies == d.copies && m.k == 4) k4 = std::isnan(k4) ? m.deviation : std::max(k4, m.deviation);
        double fid = std::nan("");
        for (const auto& f : rep.fidelities)
            if (f.copies == d.copies) fid = f.fidelity;
        out += std::to_string(d.copies) + "," + num12(d.sup_deviation) + "," + num12(k4) + "," + num12(fid) + "\n";
    }
    return out;
}

int cmd_gaussify(const CommonOptions& opts) {
    const GaussifyScenario sc = gaussify_scenario(load_config(opts), opts);
    const GaussifyReport rep = run_gaussify(sc);
    const fs::path dir = prepare_out_dir(opts.out_dir);
    write_file(dir / "gaussify_report.json", report_json(rep).dump(2) + "\n");
    write_file(dir / "gaussify_convergence.csv", convergence_csv(rep));
    for (const auto& d : rep.deviations)
        std::cout << "N=" << d.copies << " sup_deviation=" << num12(d.sup_deviation) << "\n";
    std::cout << "wrote " << (dir / "gaussify_report.json").string() << " and "
              << (dir / "gaussify_convergence.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// repeater-scan

const std::set<std::string> kScanKeys{"r",      "k_set",         "variants", "include_direct", "distill",
                                      "nested", "l_att",         "n_th",     "lambda_factor",  "L_min",
                                      "L_max",  "tolerance_km", "coarse_points"};

repeater::ScanSpec scan_spec(const KeyValueConfig& cfg, const CommonOptions& opts) {
    cfg.reject_unknown(kScanKeys);
    repeater::ScanSpec spec;
    spec.r_grid = cfg.get_double_list("r", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
                                            1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0});
    spec.k_set = cfg.get_int_list("k_set", {0, 1, 2, 3, 4});
    for (int k : spec.k_set)
        if (k < 0 || k > 20) throw std::invalid_argument("parameter k_set: swap depth must lie in [0, 20]");
    std::vector<std::string> names = cfg.get_string_list("variants", {"i", "ii"});
    if (!opts.variant.empty()) names = {opts.variant};
    spec.variants.clear();
    for (const auto& n : names) spec.variants.push_back(repeater::parse_variant(n));
    spec.include_direct = cfg.get_bool("include_direct", spec.include_direct);
    spec.distill = cfg.get_bool("distill", spec.distill);
    spec.nested = cfg.get_bool("nested", spec.nested);
    spec.l_att = cfg.get_double("l_att", spec.l_att);
    spec.n_th = cfg.get_double("n_th", spec.n_th);
    spec.lambda_factor = cfg.get_double("lambda_factor", spec.lambda_factor);
    spec.search.lo_km = cfg.get_double("L_min", spec.search.lo_km);
    spec.search.hi_km = cfg.get_double("L_max", spec.search.hi_km);
    spec.search.tol_km = cfg.get_double("tolerance_km", spec.search.tol_km);
    spec.search.coarse_points = cfg.get_int("coarse_points", spec.search.coarse_points);
    if (!(spec.search.lo_km > 0.0 && spec.search.hi_km > spec.search.lo_km))
        throw std::invalid_argument("parameter L_min/L_max: need 0 < L_min < L_max");
    if (!(spec.search.tol_km > 0.0)) throw std::invalid_argument("parameter tolerance_km: must be > 0");
    if (spec.search.coarse_points < 2) throw std::invalid_argument("parameter coarse_points: must be >= 2");
    return spec;
}

int cmd_repeater_scan(const CommonOptions& opts) {
    const repeater::ScanSpec spec = scan_spec(load_config(opts), opts);
    // Validates every row before any work starts.
    const auto configs = repeater::scan_configs(spec);

    std::vector<repeater::ScanRow> rows(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                rows[i] = repeater::scan_row(configs[i], spec.search);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads) : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(configs.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::string csv = "r,m,variant,L_max_km,delta_at_Lmax\n";
    for (const auto& row : rows)
        csv += num12(row.r) + "," + std::to_string(row.m) + "," + row.variant + "," + num12(row.L_max_km) + "," +
               num12(row.delta_at_Lmax) + "\n";
    const fs::path dir = prepare_out_dir(opts.out_dir);
    write_file(dir / "repeater_scan.csv", csv);
    std::cout << "wrote " << rows.size() << " rows to " << (dir / "repeater_scan.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const CommonOptions& opts) {
    if (!opts.config_path.empty() || !opts.overrides.empty()) load_config(opts).reject_unknown({});
    verify::VerifyOptions vo;
    if (opts.cutoff > 0) {
        if (opts.cutoff < 4 || opts.cutoff > 40) throw std::invalid_argument("parameter cutoff: must lie in [4, 40]");
        vo.cutoff = opts.cutoff;
    }
    if (opts.inject_fault == "swap-sign") {
        vo.swap_fn = [](const repeater::LinkState& s) {
            const double q = s.s * s.s / (2.0 * s.c);
            return repeater::LinkState{s.c + q, q};
        };
    } else if (!opts.inject_fault.empty()) {
        throw std::invalid_argument("parameter inject-fault: unknown fault '" + opts.inject_fault + "'");
    }

    const auto results = verify::run_all(vo);
    std::vector<std::string> failed;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        if (!r.passed) failed.push_back(r.name);
    }
    if (failed.empty()) {
        std::cout << "all " << results.size() << " checks passed\n";
        return kExitOk;
    }
    std::cout << failed.size() << " check(s) failed:";
    for (const auto& f : failed) std::cout << " " << f;
    std::cout << "\n";
    return kExitCheckFailed;
}

void add_common(CLI::App* sub, CommonOptions& opts, bool scan) {
    sub->add_option("--config", opts.config_path, "key=value scenario file")->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--set", opts.overrides, "override a config key (key=value), repeatable");
    sub->add_option("--cutoff", opts.cutoff, "Fock cutoff per mode")->check(CLI::PositiveNumber);
    if (scan) {
        sub->add_option("--variant", opts.variant, "restrict to one station variant")->check(CLI::IsMember({"i", "ii"}));
        sub->add_option("--threads", opts.threads, "worker threads (0: hardware concurrency)")
            ->check(CLI::NonNegativeNumber);
    } else {
        sub->add_option("--variant", opts.variant, "ignored outside repeater-scan")->check(CLI::IsMember({"i", "ii"}));
        sub->add_option("--threads", opts.threads, "ignored outside repeater-scan")->check(CLI::NonNegativeNumber);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-variable entanglement distillation toolkit"};
    app.require_subcommand(1);

    CommonOptions gopts, sopts, vopts;
    auto* gaussify = app.add_subcommand("gaussify", "Gaussification convergence report (JSON + CSV)");
    add_common(gaussify, gopts, false);
    auto* scan = app.add_subcommand("repeater-scan", "maximum-distance sweep (CSV)");
    add_common(scan, sopts, true);
    auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
    add_common(verify_cmd, vopts, false);
    verify_cmd->add_option("--inject-fault", vopts.inject_fault, "test fixture: corrupt a component")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gaussify->parsed()) return cmd_gaussify(gopts);
        if (scan->parsed()) return cmd_repeater_scan(sopts);
        return cmd_verify(vopts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
