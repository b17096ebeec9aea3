#include "cvdist/repeater.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cvdist/channels.hpp"

namespace cvdist::repeater {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check_channel_params(double l_att, double n_th) {
    require(l_att > 0.0 && std::isfinite(l_att), "l_att must be > 0");
    require(n_th >= 0.0 && std::isfinite(n_th), "n_th must be >= 0");
}

LinkState distill_link(const LinkState& s, double factor) {
    if (s.s < kSingularS) return s;  // nothing to distill
    const double eps = epsilon_symmetric(s);
    return distilled_state(eps, lambda_policy(eps, factor));
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::i ? "i" : "ii"; }

Variant parse_variant(const std::string& text) {
    if (text == "i") return Variant::i;
    if (text == "ii") return Variant::ii;
    throw std::invalid_argument("variant must be 'i' or 'ii' (got '" + text + "')");
}

void RepeaterConfig::validate() const {
    require(r > 0.0 && std::isfinite(r), "r must be > 0");
    require(k >= 0 && k <= 20, "k must lie in [0, 20]");
    require(L > 0.0 && std::isfinite(L), "L must be > 0");
    check_channel_params(l_att, n_th);
    require(lambda_factor > 0.0 && lambda_factor < 1.0, "lambda_factor must lie in (0, 1)");
}

LinkState transmit(double r, double l_km, double l_att, double n_th) {
    require(r >= 0.0, "transmit: r must be >= 0");
    check_channel_params(l_att, n_th);
    return loss_thermal(l_km, l_att, n_th).apply(make_two_mode_squeezed(r));
}

LinkState transmit_span(double r, double span_km, double l_att, double n_th) {
    return transmit(r, 0.5 * span_km, l_att, n_th);
}

LinkState station_loss(const LinkState& s, double n_th) { return attenuation(0.5, n_th).apply(s); }

double epsilon_symmetric(const LinkState& s) {
    if (!(s.s >= kSingularS)) throw std::domain_error("epsilon_symmetric: S = 0, epsilon is singular");
    return (s.c * s.c - s.s * s.s - 1.0) / (2.0 * s.s);
}

LinkState distilled_state(double eps, double lambda) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::domain_error("distilled_state: epsilon must be finite and >= 0");
    if (!(lambda > 0.0 && lambda < 1.0 / (1.0 + eps)))
        throw std::domain_error("distilled_state: Lambda must lie in (0, 1/(1+epsilon))");
    const double one_minus = 1.0 - eps * lambda;
    const double den = one_minus * one_minus - lambda * lambda;
    if (!(den > 0.0)) throw std::domain_error("distilled_state: non-positive denominator");
    LinkState out{(lambda * lambda * (1.0 - eps * eps) + 1.0) / den, 2.0 * lambda / den};
    if (!out.physical(1e-9 * out.c * out.c))
        throw std::domain_error("distilled_state: result violates C^2 >= 1 + S^2");
    return out;
}

double lambda_policy(double eps, double factor) {
    require(factor > 0.0 && factor < 1.0, "lambda_policy: factor must lie in (0, 1)");
    require(eps >= 0.0, "lambda_policy: epsilon must be >= 0");
    return factor / (1.0 + eps);
}

LinkState swap(const LinkState& s) {
    if (!(s.c > 0.0)) throw std::domain_error("swap: C must be > 0");
    const double q = s.s * s.s / (2.0 * s.c);
    return {s.c - q, q};
}

LinkState chain_state(const RepeaterConfig& cfg) {
    cfg.validate();
    const int m = cfg.sources();
    LinkState link = transmit(cfg.r, cfg.L / (2.0 * m), cfg.l_att, cfg.n_th);
    if (cfg.distill) {
        if (cfg.variant == Variant::ii) link = station_loss(link, cfg.n_th);
        link = distill_link(link, cfg.lambda_factor);
    }
    for (int i = 0; i < cfg.k; ++i) {
        link = swap(link);
        if (cfg.distill && cfg.nested) link = distill_link(link, cfg.lambda_factor);
    }
    return link;
}

double chain_delta(const RepeaterConfig& cfg) { return duan_delta(chain_state(cfg)); }

DirectReach direct_lmax(double r, double l_att, double n_th) {
    require(r > 0.0, "direct_lmax: r must be > 0");
    check_channel_params(l_att, n_th);
    if (n_th == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {2.0 * l_att * std::log((1.0 + 2.0 * n_th - std::exp(-2.0 * r)) / (2.0 * n_th)), false};
}

MaxDistance max_distance(RepeaterConfig cfg, const SearchOptions& opts) {
    require(opts.lo_km > 0.0 && opts.hi_km > opts.lo_km, "max_distance: bracket must satisfy 0 < lo < hi");
    require(opts.tol_km > 0.0, "max_distance: tolerance must be > 0");
    require(opts.coarse_points >= 2, "max_distance: need at least two coarse points");
    auto delta_at = [&](double L) {
        cfg.L = L;
        return chain_delta(cfg);
    };

    MaxDistance out;
    // Coarse grid: check monotonicity and locate the first crossing.
    std::vector<double> grid(opts.coarse_points), vals(opts.coarse_points);
    for (int i = 0; i < opts.coarse_points; ++i) {
        grid[i] = opts.lo_km + (opts.hi_km - opts.lo_km) * i / (opts.coarse_points - 1);
        vals[i] = delta_at(grid[i]);
        if (i > 0 && vals[i] < vals[i - 1] - 1e-9 * std::abs(vals[i - 1])) out.monotone = false;
    }
    if (!(vals.front() < 1.0)) {
        out.delta = vals.front();
        return out;
    }
    out.entangled = true;
    if (vals.back() < 1.0 && out.monotone) {
        out.capped = true;
        out.L_km = opts.hi_km;
        out.delta = vals.back();
        return out;
    }

    double lo = opts.lo_km, hi = opts.hi_km;
    if (out.monotone) {
        for (int i = 1; i < opts.coarse_points; ++i)
            if (!(vals[i] < 1.0)) {
                lo = grid[i - 1];
                hi = grid[i];
                break;
            }
    } else {
        // Dense scan for the last entangled point, then refine around it.
        const double step = opts.tol_km;
        double last = opts.lo_km;
        for (double L = opts.lo_km; L <= opts.hi_km; L += step)
            if (delta_at(L) < 1.0) last = L;
        out.L_km = last;
        out.delta = delta_at(last);
        out.capped = last + step > opts.hi_km;
        return out;
    }
    while (hi - lo > opts.tol_km) {
        const double mid = 0.5 * (lo + hi);
        (delta_at(mid) < 1.0 ? lo : hi) = mid;
    }
    out.L_km = lo;
    out.delta = delta_at(lo);
    return out;
}

std::vector<RepeaterConfig> scan_configs(const ScanSpec& spec) {
    require(!spec.r_grid.empty(), "scan: r grid must be nonempty");
    require(!spec.k_set.empty(), "scan: k set must be nonempty");
    require(!spec.variants.empty(), "scan: need at least one variant");
    std::vector<RepeaterConfig> out;
    for (double r : spec.r_grid) {
        RepeaterConfig base;
        base.r = r;
        base.l_att = spec.l_att;
        base.n_th = spec.n_th;
        base.lambda_factor = spec.lambda_factor;
        if (spec.include_direct) {
            RepeaterConfig direct = base;
            direct.distill = false;
            direct.validate();
            out.push_back(direct);
        }
        for (Variant v : spec.variants)
            for (int k : spec.k_set) {
                RepeaterConfig cfg = base;
                cfg.k = k;
                cfg.variant = v;
                cfg.distill = spec.distill;
                cfg.nested = spec.nested;
                cfg.validate();
                out.push_back(cfg);
            }
    }
    return out;
}

ScanRow scan_row(const RepeaterConfig& cfg, const SearchOptions& opts) {
    ScanRow row;
    row.r = cfg.r;
    row.m = cfg.sources();
    if (!cfg.distill && cfg.k == 0) {
        // Plain transmission has a closed-form reach; the search would only approximate it.
        const DirectReach reach = direct_lmax(cfg.r, cfg.l_att, cfg.n_th);
        if (!reach.unbounded) {
            RepeaterConfig at = cfg;
            at.L = reach.km;
            row.variant = "direct";
            row.L_max_km = reach.km;
            row.delta_at_Lmax = chain_delta(at);
            return row;
        }
    }
    const MaxDistance md = max_distance(cfg, opts);
    if (cfg.distill)
        row.variant = to_string(cfg.variant);
    else
        row.variant = cfg.k == 0 ? "direct" : "swap";
    row.L_max_km = md.L_km;
    row.delta_at_Lmax = md.delta;
    return row;
}

std::vector<ScanRow> scan(const ScanSpec& spec) {
    std::vector<ScanRow> rows;
    for (const auto& cfg : scan_configs(spec)) rows.push_back(scan_row(cfg, spec.search));
    return rows;
}

}  // namespace cvdist::repeater
