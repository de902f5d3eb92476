#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "functionals.hpp"
#include "geometry.hpp"
#include "json.hpp"
#include "limit.hpp"
#include "optimize.hpp"
#include "potentials.hpp"
#include "profiles.hpp"

namespace glab {

inline constexpr const char* kSchema = "gamma-limit-lab/v1";

// n values from hi down to lo, evenly spaced in log.
inline std::vector<double> geometric_eps(double hi = 0.5, double lo = 0.02, int n = 8) {
    if (!(hi > 0.0 && lo > 0.0)) throw ConfigError("eps must be positive");
    if (n < 1) return {};
    if (n == 1) return {hi};
    if (!(lo < hi)) throw ConfigError("eps range must decrease");
    std::vector<double> e(n);
    for (int i = 0; i < n; ++i) e[i] = hi * std::pow(lo / hi, static_cast<double>(i) / (n - 1));
    e.back() = lo;
    return e;
}

struct WellSpec {
    double low = -1.0, high = 1.0, amplitude = 1.0;
    std::string form = "quartic";
    DoubleWell make() const { return DoubleWell(low, high, amplitude, form_from_name(form)); }
};

struct MinimizerConfig {
    int max_iter = 20000;
    double gtol = 1e-7;
    double ftol = 1e-13;
    int stall = 60;
    int memory = 10;
    int restarts = 0;  // extra runs from the previous result with fresh memory
};

struct GammaStudyConfig {
    double R = 8.0, H = 8.0;
    std::vector<double> deltas{0.5, 0.25, 0.125, 0.0625};
    bool polar_start = true, step_start = false;
    int random_starts = 0;
    bool per_start_ladders = false;  // one ladder per start instead of the best-of at the coarsest level
    std::vector<double> tail_R{4, 8, 16, 32, 64};
    double tail_delta = 0.5;
    int tail_fit = 3;  // number of trailing differences in the slope fit
    int tail_max_iter = 20000;
    double reference = 0.0;  // frozen value at the finest ladder level; 0 disables the regression check
};

struct PairConfig {
    std::vector<Point> interface;  // empty: vertical segment through the middle
    bool default_interface = true;
    Point ref{-1, -1};             // negative: a quarter of the way in, halfway up
    bool ref_is_beta = false;
    bool optimal_v = true;
    bool v_beta_at_start = false;
    std::vector<double> v_jumps;
    int boundary_segments = 0;  // 0: one per boundary edge
};

struct PartitionConfig {
    double r = 1.0;
    double cutoff_b = -1.0;
    double lambda_factor = 2.0;
};

struct SuiteConfig {
    std::vector<int> sizes{8, 16};
    int trials = 100;
    int slice_cells = 32;
    int slice_trials = 20;
    int scaling_trials = 20;
};

struct SweepConfig {
    double p = 2.5;
    bool cross_check = false;
    WellSpec W, V;
    double m = -1.0;
    double lx = 8.0, ly = 8.0, delta = 0.0625;
    std::vector<double> eps = geometric_eps();
    MinimizerConfig minimizer;
    std::string out = "out";
    std::uint64_t seed = 42;
    PairConfig pair;
    PartitionConfig partition;
    GammaStudyConfig gamma;
    double gamma_p = 0.0;  // > 0 skips the Φ line-tension estimate (ψ is still computed)
    std::vector<double> sigma_p_list{2.0, 2.25, 2.5, 2.75};
    SuiteConfig suite;
    bool timestamps = false;
    int workers = 0;

    void validate() const {
        PExponent(p, cross_check);
        W.make();
        V.make();
        if (eps.empty()) throw ConfigError("eps list is empty");
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (!(eps[i] > 0.0)) throw ConfigError("eps must be positive");
            if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("eps list must be strictly decreasing");
        }
        if (!(lx > 0 && ly > 0 && delta > 0)) throw ConfigError("grid extents and spacing must be positive");
        if (minimizer.max_iter < 1 || minimizer.memory < 1) throw ConfigError("minimizer budget must be positive");
        if (gamma.tail_max_iter < 1) throw ConfigError("gamma tail_max_iter must be positive");
        if (!(partition.r > 0)) throw ConfigError("partition radius must be positive");
        for (double s : sigma_p_list) PExponent(s, s == 2.0);
        if (gamma.deltas.empty()) throw ConfigError("gamma ladder needs at least one spacing");
    }
};

inline nlohmann::ordered_json to_json(const WellSpec& w) {
    return {{"low", w.low}, {"high", w.high}, {"amplitude", w.amplitude}, {"form", w.form}};
}

inline nlohmann::ordered_json to_json(const SweepConfig& c) {
    nlohmann::ordered_json j;
    j["p"] = c.p;
    j["cross_check"] = c.cross_check;
    j["W"] = to_json(c.W);
    j["V"] = to_json(c.V);
    j["m"] = c.m;
    j["grid"] = {{"lx", c.lx}, {"ly", c.ly}, {"delta", c.delta}};
    j["eps"] = c.eps;
    j["minimizer"] = {{"max_iter", c.minimizer.max_iter}, {"gtol", c.minimizer.gtol},
                      {"ftol", c.minimizer.ftol},         {"stall", c.minimizer.stall},
                      {"memory", c.minimizer.memory},     {"restarts", c.minimizer.restarts}};
    j["out"] = c.out;
    j["seed"] = c.seed;
    nlohmann::ordered_json pr;
    if (!c.pair.default_interface) {
        nlohmann::ordered_json vs = nlohmann::ordered_json::array();
        for (const Point& q : c.pair.interface) vs.push_back({q.x, q.y});
        pr["interface"] = vs;
    }
    pr["ref"] = {c.pair.ref.x, c.pair.ref.y};
    pr["ref_label"] = c.pair.ref_is_beta ? "beta" : "alpha";
    if (c.pair.optimal_v) {
        pr["boundary"] = "optimal";
    } else {
        pr["boundary"] = {{"start_label", c.pair.v_beta_at_start ? "beta" : "alpha"}, {"jumps", c.pair.v_jumps}};
    }
    pr["boundary_segments"] = c.pair.boundary_segments;
    j["pair"] = pr;
    j["partition"] = {{"r", c.partition.r}, {"cutoff_b", c.partition.cutoff_b},
                      {"lambda_factor", c.partition.lambda_factor}};
    j["gamma"] = {{"R", c.gamma.R},
                  {"H", c.gamma.H},
                  {"deltas", c.gamma.deltas},
                  {"polar_start", c.gamma.polar_start},
                  {"step_start", c.gamma.step_start},
                  {"random_starts", c.gamma.random_starts},
                  {"per_start_ladders", c.gamma.per_start_ladders},
                  {"tail_R", c.gamma.tail_R},
                  {"tail_delta", c.gamma.tail_delta},
                  {"tail_fit", c.gamma.tail_fit},
                  {"tail_max_iter", c.gamma.tail_max_iter},
                  {"reference", c.gamma.reference}};
    j["gamma_p"] = c.gamma_p;
    j["sigma_p_list"] = c.sigma_p_list;
    j["suite"] = {{"sizes", c.suite.sizes},
                  {"trials", c.suite.trials},
                  {"slice_cells", c.suite.slice_cells},
                  {"slice_trials", c.suite.slice_trials},
                  {"scaling_trials", c.suite.scaling_trials}};
    j["timestamps"] = c.timestamps;
    j["workers"] = c.workers;
    return j;
}

// ---- constants ----

struct SigmaRow {
    double p = 0.0, c_p = 0.0, sigma_p = 0.0, profile_energy = 0.0, rel_diff = 0.0;
    bool ok = false;
};

inline std::vector<SigmaRow> run_sigma_table(const std::vector<double>& ps, const DoubleWell& W, double tol = 1e-6) {
    std::vector<SigmaRow> rows;
    for (double p : ps) {
        PExponent(p, p == 2.0);
        SigmaRow r;
        r.p = p;
        r.c_p = constant_c_p(p);
        r.sigma_p = constant_sigma_p(p, W);
        r.profile_energy = solve_profile_ode(W, p).energy;
        r.rel_diff = std::abs(r.profile_energy - r.sigma_p) / r.sigma_p;
        r.ok = r.rel_diff <= tol;
        rows.push_back(r);
    }
    return rows;
}

// ---- γ_p study ----

struct TailFit {
    std::vector<double> R, estimate, diff;
    double slope = 0.0, predicted = 0.0, rel_error = 0.0;
    bool converged = true;  // every box met the stopping test within its budget
    bool ok = false;
};

struct GammaStudy {
    std::vector<std::vector<GammaEstimate>> ladders;  // one per start when per_start_ladders
    bool monotone = true;
    double max_increase = 0.0;  // largest step up along any ladder
    double spread = 0.0;        // relative spread of the finest estimates across ladders
    double best = 0.0;
    TailFit tail;
};

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs at least two points");
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw Error("slope fit needs positive data");
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double a = 0, b = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        a += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        b += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return a / b;
}

// Tail of the box estimate in R: successive differences decay like R^{-2(p-2)}.
inline TailFit fit_gamma_tail(const DoubleWell& V, double p, const GammaStudyConfig& c, int workers = 0) {
    TailFit t;
    t.predicted = -2.0 * (p - 2.0);
    if (c.tail_R.size() < 3) return t;
    for (std::size_t i = 0; i < c.tail_R.size(); ++i)
        if (i > 0 && !(c.tail_R[i] > c.tail_R[i - 1])) throw ConfigError("tail R list must increase");
    t.R = c.tail_R;
    t.estimate.resize(t.R.size());
    GammaOptions o;
    o.polar_start = true;
    o.step_start = false;
    o.random_starts = 0;
    o.minimize.max_iter = c.tail_max_iter;
    std::vector<char> conv(t.R.size());
    parallel_for(static_cast<int>(t.R.size()), [&](int i) {
        // large boxes stall from the fan start; warm them up on coarser spacings
        std::vector<double> d;
        for (double h = std::min(t.R[i] / 4.0, 8.0 * c.tail_delta); h > c.tail_delta * (1.0 + 1e-12); h /= 2.0)
            d.push_back(h);
        d.push_back(c.tail_delta);
        GammaOptions oi = o;
        oi.workers = 1;
        const GammaEstimate e = estimate_gamma_nested(V, p, t.R[i], t.R[i], d, oi).back();
        t.estimate[i] = e.estimate;
        conv[i] = e.converged;
    }, workers);
    for (char ci : conv) t.converged = t.converged && ci;
    std::vector<double> xr, dy;
    for (std::size_t i = 0; i + 1 < t.R.size(); ++i) t.diff.push_back(t.estimate[i + 1] - t.estimate[i]);
    const std::size_t k = std::min<std::size_t>(std::max(c.tail_fit, 2), t.diff.size());
    for (std::size_t i = t.diff.size() - k; i < t.diff.size(); ++i) {
        xr.push_back(t.R[i]);
        dy.push_back(t.diff[i]);
    }
    bool positive = true;
    for (double d : dy) positive = positive && d > 0.0;
    if (!positive) return t;
    t.slope = loglog_slope(xr, dy);
    t.rel_error = std::abs(t.slope - t.predicted) / std::abs(t.predicted);
    t.ok = t.converged && t.rel_error <= 0.15;
    return t;
}

inline GammaStudy run_gamma_study(const DoubleWell& V, double p, const GammaStudyConfig& c, std::uint64_t seed = 1,
                                  int workers = 0, bool with_tail = true) {
    GammaStudy st;
    GammaOptions base;
    base.seed = seed;
    base.workers = workers;
    if (c.per_start_ladders) {
        std::vector<GammaOptions> starts;
        if (c.polar_start) {
            GammaOptions o = base;
            o.step_start = false, o.random_starts = 0;
            starts.push_back(o);
        }
        if (c.step_start) {
            GammaOptions o = base;
            o.polar_start = false, o.random_starts = 0;
            starts.push_back(o);
        }
        for (int r = 0; r < c.random_starts; ++r) {
            GammaOptions o = base;
            o.polar_start = o.step_start = false;
            o.random_starts = 1;
            o.seed = seed + 1000003ULL * static_cast<std::uint64_t>(r);
            starts.push_back(o);
        }
        if (starts.empty()) throw ConfigError("gamma study has no starts");
        st.ladders.resize(starts.size());
        parallel_for(static_cast<int>(starts.size()), [&](int k) {
            GammaOptions o = starts[k];
            o.workers = 1;
            st.ladders[k] = estimate_gamma_nested(V, p, c.R, c.H, c.deltas, o);
        }, workers);
    } else {
        base.polar_start = c.polar_start;
        base.step_start = c.step_start;
        base.random_starts = c.random_starts;
        st.ladders.push_back(estimate_gamma_nested(V, p, c.R, c.H, c.deltas, base));
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& lad : st.ladders) {
        for (std::size_t k = 1; k < lad.size(); ++k) {
            const double up = lad[k].estimate - lad[k - 1].estimate;
            st.max_increase = std::max(st.max_increase, up);
            if (up > 1e-8) st.monotone = false;
        }
        lo = std::min(lo, lad.back().estimate);
        hi = std::max(hi, lad.back().estimate);
    }
    st.best = lo;
    st.spread = (hi - lo) / lo;
    if (with_tail) st.tail = fit_gamma_tail(V, p, c, workers);
    return st;
}

// ---- ε sweep ----

struct SweepContext {
    DoubleWell W, V;
    double p = 2.5, m = 1.0;
    ProfileSolution1D profile;
    TransitionMap tmap;
    PsiProfile psi;
    double gamma = 0.0;
    LimitConstants constants;
};

inline SweepContext make_sweep_context(const SweepConfig& cfg) {
    cfg.validate();
    SweepContext ctx;
    ctx.W = cfg.W.make();
    ctx.V = cfg.V.make();
    ctx.p = cfg.p;
    ctx.m = make_truncation(ctx.W, ctx.V, cfg.m).m;
    ctx.profile = solve_profile_ode(ctx.W, cfg.p);
    const double lo = std::min(ctx.W.well_low(), ctx.V.well_low()), hi = std::max(ctx.W.well_high(), ctx.V.well_high());
    ctx.tmap = TransitionMap(ctx.W, cfg.p, lo, hi);
    GammaStudyConfig gc = cfg.gamma;
    gc.per_start_ladders = false;
    const GammaStudy st = run_gamma_study(ctx.V, cfg.p, gc, cfg.seed, cfg.workers, false);
    ctx.psi = PsiProfile(st.ladders[0].back().minimizer, ctx.V.well_low(), ctx.V.well_high());
    ctx.gamma = cfg.gamma_p > 0.0 ? cfg.gamma_p : st.best;
    ctx.constants = make_limit_constants(ctx.W, ctx.V, cfg.p, ctx.gamma);
    return ctx;
}

// The configured pair; with an optimal boundary phase, v* from the cyclic DP on the boundary edges.
inline LimitPair make_limit_pair(const SweepConfig& cfg, const LimitConstants& c) {
    LimitPair pair;
    pair.lx = cfg.lx;
    pair.ly = cfg.ly;
    pair.su.vertices = cfg.pair.default_interface ? std::vector<Point>{{0.5 * cfg.lx, 0.0}, {0.5 * cfg.lx, cfg.ly}}
                                                  : cfg.pair.interface;
    pair.labels.ref = cfg.pair.ref.x < 0 ? Point{0.25 * cfg.lx, 0.5 * cfg.ly} : cfg.pair.ref;
    pair.labels.ref_is_beta = cfg.pair.ref_is_beta;
    if (cfg.pair.optimal_v) {
        const int n = cfg.pair.boundary_segments > 0
                          ? cfg.pair.boundary_segments
                          : static_cast<int>(std::lround(pair.perimeter() / cfg.delta));
        const PhaseChoice ch = minimize_phi_over_v(boundary_wall_costs(pair, c, n), c.gamma_p);
        pair = with_boundary_labels(pair, ch.labels);
    } else {
        pair.v.beta_at_start = cfg.pair.v_beta_at_start;
        pair.v.jumps = cfg.pair.v_jumps;
    }
    pair.validate();
    return pair;
}

// Projected L-BFGS on [-m,m]: every iterate is its own truncation.
inline MinimizeResult minimize_F(Field& u, const RectDomainGrid& g, double eps, const DoubleWell& W,
                                 const DoubleWell& V, double m, const MinimizerConfig& mc) {
    EnergyTerms t;
    t.eps = eps;
    t.W = &W;
    t.V = &V;
    Field work(g.shape());
    BoxLbfgs solver(
        [&](const std::vector<double>& x, std::vector<double>& gr) {
            work.values = x;
            return evaluate_energy(g.lattice(), work, t, &gr).total;
        },
        -m, m, {});
    MinimizeOptions o;
    o.max_iter = mc.max_iter;
    o.gtol = mc.gtol;
    o.ftol = mc.ftol;
    o.stall_limit = mc.stall;
    o.memory = mc.memory;
    MinimizeResult r = solver.run(u.values, o);
    for (int k = 0; k < mc.restarts; ++k) {
        MinimizeResult s = solver.run(u.values, o);
        s.iterations += r.iterations;
        s.evaluations += r.evaluations;
        const bool gained = s.f < r.f;
        r = s;
        if (!gained) break;
    }
    return r;
}

struct EpsEntry {
    double eps = 0.0;
    EnergyBreakdown minimized, recovery;
    std::vector<RegionEnergy> regions;
    int iterations = 0;
    std::string stop_reason;
    std::string status = "ok";  // ok | failed
    std::string note;
    double rho = 0.0, sigma = 0.0, lambda = 0.0;
};

struct RunRecord {
    std::string schema = kSchema;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    double gamma_p = 0.0;
    PhiValue phi;
    std::vector<double> v_jumps;
    std::vector<EpsEntry> entries;
    std::vector<Field> min_fields, rec_fields;  // not part of the JSON summary
    std::string started, finished;               // empty unless timestamps were requested
};

inline nlohmann::ordered_json to_json(const EpsEntry& e) {
    nlohmann::ordered_json regs = nlohmann::ordered_json::object();
    for (const RegionEnergy& r : e.regions) regs[r.name] = to_json(r.energy);
    return {{"eps", e.eps},
            {"minimized", to_json(e.minimized)},
            {"recovery", to_json(e.recovery)},
            {"regions", regs},
            {"iterations", e.iterations},
            {"stop_reason", e.stop_reason},
            {"status", e.status},
            {"note", e.note},
            {"rho", e.rho},
            {"sigma", e.sigma},
            {"lambda", e.lambda}};
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["schema"] = r.schema;
    j["config"] = r.config;
    j["gamma_p"] = r.gamma_p;
    j["phi"] = to_json(r.phi);
    j["v_jumps"] = r.v_jumps;
    nlohmann::ordered_json es = nlohmann::ordered_json::array();
    for (const EpsEntry& e : r.entries) es.push_back(to_json(e));
    j["entries"] = es;
    if (!r.started.empty()) j["started"] = r.started;
    if (!r.finished.empty()) j["finished"] = r.finished;
    return j;
}

inline RunRecord run_record_from_json(const nlohmann::ordered_json& j) {
    if (j.at("schema").get<std::string>() != kSchema) throw Error("unknown run record schema");
    RunRecord r;
    r.config = j.at("config");
    r.gamma_p = j.at("gamma_p").get<double>();
    const auto& ph = j.at("phi");
    r.phi = {ph.at("surface").get<double>(), ph.at("wall").get<double>(), ph.at("line").get<double>(),
             ph.at("total").get<double>()};
    r.v_jumps = j.at("v_jumps").get<std::vector<double>>();
    for (const auto& e : j.at("entries")) {
        EpsEntry x;
        x.eps = e.at("eps").get<double>();
        x.minimized = energy_from_json(e.at("minimized"));
        x.recovery = energy_from_json(e.at("recovery"));
        for (const auto& [name, val] : e.at("regions").items()) x.regions.push_back({name, energy_from_json(val)});
        x.iterations = e.at("iterations").get<int>();
        x.stop_reason = e.at("stop_reason").get<std::string>();
        x.status = e.at("status").get<std::string>();
        x.note = e.at("note").get<std::string>();
        x.rho = e.at("rho").get<double>();
        x.sigma = e.at("sigma").get<double>();
        x.lambda = e.at("lambda").get<double>();
        r.entries.push_back(std::move(x));
    }
    if (j.contains("started")) r.started = j.at("started").get<std::string>();
    if (j.contains("finished")) r.finished = j.at("finished").get<std::string>();
    return r;
}

inline std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

// For each ε: the assembled recovery field, then F_ε minimized from it.
inline RunRecord run_eps_sweep(const SweepConfig& cfg, const LimitPair& pair, const SweepContext& ctx) {
    cfg.validate();
    RunRecord rec;
    rec.config = to_json(cfg);
    if (cfg.timestamps) rec.started = utc_now();
    rec.gamma_p = ctx.gamma;
    rec.phi = phi_energy(pair, ctx.constants);
    rec.v_jumps = pair.v.jumps;
    const RectDomainGrid g(cfg.lx, cfg.ly, cfg.delta, cfg.p);
    const std::size_t n = cfg.eps.size();
    rec.entries.resize(n);
    rec.min_fields.resize(n);
    rec.rec_fields.resize(n);
    AssemblyInputs in{&ctx.W, &ctx.V, cfg.p, &ctx.profile, &ctx.tmap, &ctx.psi};
    AssemblyOptions ao{cfg.partition.r, cfg.partition.cutoff_b, cfg.partition.lambda_factor};
    // assembly errors (infeasible partition) abort the whole sweep
    std::vector<GlobalRecovery> recs(n);
    for (std::size_t i = 0; i < n; ++i) recs[i] = assemble_global_recovery(pair, g, cfg.eps[i], in, ao);
    parallel_for(static_cast<int>(n), [&](int i) {
        EpsEntry& e = rec.entries[i];
        const GlobalRecovery& gr = recs[i];
        e.eps = cfg.eps[i];
        e.recovery = gr.total;
        e.regions = gr.regions;
        e.rho = gr.radii.rho;
        e.sigma = gr.radii.sigma;
        e.lambda = gr.lambda;
        e.note = gr.note;
        Field u = gr.u;
        try {
            const MinimizeResult mr = minimize_F(u, g, e.eps, ctx.W, ctx.V, ctx.m, cfg.minimizer);
            e.iterations = mr.iterations;
            e.stop_reason = mr.reason;
            e.minimized = full_energy_F(u, g, e.eps, ctx.W, ctx.V);
            if (!std::isfinite(e.minimized.total)) {
                e.status = "failed";
                e.note = "minimizer diverged";
            } else if (e.minimized.total > e.recovery.total) {
                e.status = "failed";
                e.note = "descent property violated";
            }
        } catch (const std::exception& ex) {
            e.status = "failed";
            e.note = ex.what();
        }
        rec.min_fields[i] = std::move(u);
        rec.rec_fields[i] = gr.u;
    }, cfg.workers);
    if (cfg.timestamps) rec.finished = utc_now();
    return rec;
}

// ---- reports ----

namespace detail {
inline std::string fmt(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}
}  // namespace detail

inline std::string sweep_csv(const RunRecord& r, bool recovery) {
    std::ostringstream s;
    s << "eps,grad,bulk,boundary,total,phi_ref,ratio,status\n";
    for (const EpsEntry& e : r.entries) {
        const EnergyBreakdown& b = recovery ? e.recovery : e.minimized;
        const double ratio = r.phi.total > 0.0 ? b.total / r.phi.total : std::numeric_limits<double>::quiet_NaN();
        s << detail::fmt(e.eps) << ',' << detail::fmt(b.grad) << ',' << detail::fmt(b.bulk) << ','
          << detail::fmt(b.boundary) << ',' << detail::fmt(b.total) << ',' << detail::fmt(r.phi.total) << ','
          << detail::fmt(ratio) << ',' << e.status << '\n';
    }
    return s.str();
}

// sweep.csv (minimized), recovery.csv, summary.json and fields/*.csv under dir.
inline void emit_report(const RunRecord& r, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
    detail::write_text(fs::path(dir) / "sweep.csv", sweep_csv(r, false));
    detail::write_text(fs::path(dir) / "recovery.csv", sweep_csv(r, true));
    detail::write_text(fs::path(dir) / "summary.json", to_json(r).dump(2) + "\n");
    if (r.min_fields.empty() && r.rec_fields.empty()) return;
    fs::create_directories(fs::path(dir) / "fields", ec);
    if (ec) throw Error("cannot create " + (fs::path(dir) / "fields").string() + ": " + ec.message());
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        char name[32];
        if (i < r.min_fields.size() && r.min_fields[i].size()) {
            std::snprintf(name, sizeof name, "min_%02zu.csv", i);
            write_field_csv(r.min_fields[i], (fs::path(dir) / "fields" / name).string());
        }
        if (i < r.rec_fields.size() && r.rec_fields[i].size()) {
            std::snprintf(name, sizeof name, "rec_%02zu.csv", i);
            write_field_csv(r.rec_fields[i], (fs::path(dir) / "fields" / name).string());
        }
    }
}

// Re-reads the stored fields and re-evaluates every recorded total; returns the largest mismatch.
inline double spot_check_record(const RunRecord& r, const std::string& dir, const RectDomainGrid& g,
                                const DoubleWell& W, const DoubleWell& V) {
    namespace fs = std::filesystem;
    double worst = 0.0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "min_%02zu.csv", i);
        const Field um = read_field_csv((fs::path(dir) / "fields" / name).string(), g.shape());
        std::snprintf(name, sizeof name, "rec_%02zu.csv", i);
        const Field ur = read_field_csv((fs::path(dir) / "fields" / name).string(), g.shape());
        const double eps = r.entries[i].eps;
        worst = std::max(worst, std::abs(full_energy_F(um, g, eps, W, V).total - r.entries[i].minimized.total));
        worst = std::max(worst, std::abs(full_energy_F(ur, g, eps, W, V).total - r.entries[i].recovery.total));
    }
    return worst;
}

// ---- randomized invariants ----

struct PropertyCheck {
    explicit PropertyCheck(std::string n = {}) : name(std::move(n)) {}
    std::string name;
    int trials = 0;
    int violations = 0;
    double worst = 0.0;  // largest relative violation
    nlohmann::ordered_json reproducer;  // first counterexample, null if none
    bool pass() const { return violations == 0; }
};

struct SuiteReport {
    std::vector<PropertyCheck> checks;
    bool pass() const {
        for (const PropertyCheck& c : checks)
            if (!c.pass()) return false;
        return true;
    }
};

inline nlohmann::ordered_json to_json(const SuiteReport& s) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const PropertyCheck& c : s.checks)
        a.push_back({{"name", c.name},
                     {"trials", c.trials},
                     {"violations", c.violations},
                     {"worst", c.worst},
                     {"pass", c.pass()},
                     {"reproducer", c.reproducer}});
    return {{"schema", kSchema}, {"pass", s.pass()}, {"checks", a}};
}

namespace detail {
inline void record_violation(PropertyCheck& c, double rel, const nlohmann::ordered_json& repro) {
    ++c.violations;
    c.worst = std::max(c.worst, rel);
    if (c.reproducer.is_null()) c.reproducer = repro;
}

inline nlohmann::ordered_json field_json(const Field& u, double p, double eps) {
    return {{"p", p},
            {"eps", eps},
            {"nx", u.shape.nx},
            {"ny", u.shape.ny},
            {"dx", u.shape.dx},
            {"x0", u.shape.x0},
            {"y0", u.shape.y0},
            {"values", u.values}};
}

// Smooth random field: a few random Fourier modes pushed through tanh.
inline Field smooth_random_field(const GridShape& s, std::mt19937_64& rng, double amp) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double kx[3], ky[3], ph[3], a[3];
    for (int k = 0; k < 3; ++k) kx[k] = 1.5 * U(rng), ky[k] = 1.5 * U(rng), ph[k] = 3.0 * U(rng), a[k] = U(rng);
    Field u(s);
    for (int n = 0; n < s.size(); ++n) {
        const Point x = s.node(n);
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += a[k] * std::sin(kx[k] * x.x + ky[k] * x.y + ph[k]);
        u.values[n] = amp * std::tanh(2.0 * v);
    }
    return u;
}
}  // namespace detail

// Truncation, Young bound, rearrangement, scaling and slicing checks with a fixed seed.
inline SuiteReport run_property_suite(std::uint64_t seed, const SuiteConfig& sc, double p = 2.5,
                                      const std::vector<double>& eps = geometric_eps(),
                                      const DoubleWell& W = DoubleWell(-1, 1), const DoubleWell& V = DoubleWell(-1, 1)) {
    SuiteReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const TruncationLevel m = make_truncation(W, V);
    const double span = std::max(std::abs(W.well_low()), std::abs(W.well_high()));

    PropertyCheck young{"young_lower_bound"}, trunc{"truncation"}, rearr{"rearrangement"};
    if (!sc.sizes.empty()) {
        const AntiderivativeTable Wcal(W, p, -3.0 * m.m, 3.0 * m.m);
        for (int cells : sc.sizes) {
            const RectDomainGrid g(1.0, 1.0, 1.0 / cells, p);
            const HalfPlaneGrid hg(1.0, 1.0, 1.0 / cells, p);
            for (int t = 0; t < sc.trials; ++t) {
                Field u(g.shape());
                for (double& x : u.values) x = 1.5 * span * U(rng);
                const double lb = modica_lower_bound(u, g.lattice(), Wcal);
                const Field ut = truncate_field(u, m);
                for (double e : eps) {
                    ++young.trials;
                    const double G = bulk_energy_G(u, g.lattice(), e, W).total;
                    if (G < lb * (1.0 - 1e-12))
                        detail::record_violation(young, (lb - G) / lb, detail::field_json(u, p, e));
                    ++trunc.trials;
                    const double F0 = full_energy_F(u, g, e, W, V).total, F1 = full_energy_F(ut, g, e, W, V).total;
                    if (F1 > F0 * (1.0 + 1e-12))
                        detail::record_violation(trunc, (F1 - F0) / F0, detail::field_json(u, p, e));
                }
                ++rearr.trials;
                Field h(hg.shape());
                for (double& x : h.values) x = span * U(rng);
                EnergyTerms et;
                const double E0 = evaluate_energy(hg.lattice(), h, et).total;
                const double E1 = evaluate_energy(hg.lattice(), monotone_rearrange_x1(h), et).total;
                if (E1 > E0 * (1.0 + 1e-12)) detail::record_violation(rearr, (E1 - E0) / E0, detail::field_json(h, p, 1.0));
            }
        }
    }
    rep.checks.push_back(young);
    rep.checks.push_back(trunc);
    rep.checks.push_back(rearr);

    // H_ε(u(·/√ε)) = H_1(u). With ε = k² the dilated lattice refines the original one, so the
    // gradient term must agree to rounding and the wall term can only drop (smaller hulls).
    PropertyCheck scal{"scaling"};
    if (!sc.sizes.empty()) {
        const HalfPlaneGrid hg(2.0, 2.0, 1.0 / 16.0, p);
        const double factors[] = {4.0, 9.0, 16.0};
        for (int t = 0; t < sc.scaling_trials; ++t) {
            ++scal.trials;
            const double e = factors[t % 3];
            const Field u = detail::smooth_random_field(hg.shape(), rng, span);
            const RescaledField rf = rescale_field(u, hg, e, true);
            const EnergyBreakdown a = halfplane_energy_H(rf.field, rf.grid, e, V);
            const EnergyBreakdown b = halfplane_energy_H(u, hg, 1.0, V);
            const double rg = std::abs(a.grad - b.grad) / b.grad;
            const double rw = b.boundary > 0.0 ? (a.boundary - b.boundary) / b.boundary : 0.0;
            if (rg > 1e-9 || rw > 1e-12)
                detail::record_violation(scal, std::max(rg, rw), detail::field_json(u, p, e));
        }
    }
    rep.checks.push_back(scal);

    PropertyCheck slice{"slicing"};
    if (!sc.sizes.empty() && sc.slice_trials > 0) {
        const HalfBox3D box(sc.slice_cells);
        for (int t = 0; t < sc.slice_trials; ++t) {
            Field3D u(box);
            for (double& x : u.values) x = span * U(rng);
            const double e = eps[t % eps.size()];
            for (int dir = 0; dir < 2; ++dir) {
                ++slice.trials;
                const SliceBound b = slice_lower_bound(u, p, e, V, dir);
                if (b.lhs < b.rhs) detail::record_violation(slice, (b.rhs - b.lhs) / b.rhs, {{"trial", t}, {"eps", e}});
            }
        }
    }
    rep.checks.push_back(slice);
    return rep;
}

}  // namespace glab
