#include "greendc/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "greendc/queueing_loss.hpp"

namespace greendc::oracle {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton iteration
// on the Legendre polynomial.
struct GaussLegendre {
    static constexpr int n = 24;
    double node[n];
    double weight[n];

    GaussLegendre() {
        for (int i = 0; i < n; ++i) {
            double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) {
                    double q0 = 1.0, q1 = x;
                    for (int k = 2; k <= n; ++k) {
                        const double q2 = ((2 * k - 1) * x * q1 - (k - 1) * q0) / k;
                        q0 = q1;
                        q1 = q2;
                    }
                    const double d = n * (x * q1 - q0) / (x * x - 1.0);
                    node[i] = x;
                    weight[i] = 2.0 / ((1.0 - x * x) * d * d);
                    break;
                }
            }
        }
    }
};

const GaussLegendre& gl() {
    static const GaussLegendre g;
    return g;
}

double tail_integrand(double v, double t) { return v * std::exp(-t * v - 0.5 * v * v); }

}  // namespace

double ref_alpha(double t, double cv) {
    if (!(cv > 0.0)) throw std::invalid_argument("ref_alpha: cv must be > 0");
    if (!(t >= 0.0)) throw std::invalid_argument("ref_alpha: t must be >= 0");
    // v solving t*v + v^2/2 = 750: integrand negligible beyond it.
    const double vmax = -t + std::sqrt(t * t + 1500.0);
    // Panels sized to the local exponential decay so each Gauss rule stays in
    // its accurate regime.
    const GaussLegendre& rule = gl();
    double integral = 0.0;
    double v0 = 0.0;
    for (int panel = 0; panel < 4000 && v0 < vmax; ++panel) {
        const double h = std::min(8.0 / (t + v0 + 1.0), vmax - v0);
        const double mid = v0 + 0.5 * h;
        const double half = 0.5 * h;
        double acc = 0.0;
        for (int i = 0; i < GaussLegendre::n; ++i)
            acc += rule.weight[i] * tail_integrand(mid + half * rule.node[i], t);
        integral += acc * half;
        v0 += h;
    }
    return cv * kInvSqrt2Pi * integral;
}

double ref_loss(const WorkloadStats& stats, const QueueSpec& q) {
    if (q.alloc_rate <= 0.0) throw std::invalid_argument("ref_loss: alloc_rate must be > 0");
    if (stats.mean_rate <= 0.0) throw std::invalid_argument("ref_loss: mean_rate must be > 0");
    if (stats.variance <= 0.0) return 0.0;
    const double tau = q.deadline - q.network_delay;
    if (tau <= 0.0) throw std::invalid_argument("ref_loss: deadline must exceed network delay");

    const double mean2 = stats.mean_rate * stats.mean_rate;
    const double cv = std::sqrt(stats.variance) / stats.mean_rate;
    const double x1 = q.service_rate / q.alloc_rate - 1.0;
    const double t = x1 / cv;

    double m_min;
    if (x1 <= 1e-12) {
        m_min = 0.0;
    } else {
        m_min = kInf;
        int argmin = 1;
        const int max_lag = static_cast<int>(stats.autocov.size()) - 1;
        for (int n = 1; n <= 100000; ++n) {
            double var = n * stats.autocov[0];
            for (int l = 1; l <= std::min(n - 1, max_lag); ++l)
                var += 2.0 * (n - l) * stats.autocov[l];
            const double rho = var / mean2;
            if (rho <= 0.0) continue;
            const double s = (tau + n) * x1 + tau;
            const double m = s * s / rho;
            if (m < m_min) {
                m_min = m;
                argmin = n;
            }
            if (n > 4 * argmin + 64 && m > 4.0 * m_min) break;
        }
    }
    const double p = ref_alpha(t, cv) * std::exp(-0.5 * m_min);
    return std::min(1.0, std::max(0.0, p));
}

double ref_slot_profit(const Allocation& alloc, const SlotEnvironment& env,
                       std::span<const DataCenterSpec> dcs,
                       std::span<const ServiceClass> classes) {
    double profit = 0.0;
    const double T = env.slot_length;
    for (std::size_t i = 0; i < dcs.size(); ++i) {
        for (std::size_t j = 0; j < classes.size(); ++j) {
            for (int side = 0; side < 2; ++side) {
                const QueueAllocation& qa =
                    side == 0 ? alloc.green[i][j] : alloc.brown[i][j];
                if (qa.service_rate <= 0.0) continue;
                double pl = 0.0;
                if (qa.alloc_rate > 0.0) {
                    QueueSpec qs;
                    qs.alloc_rate = qa.alloc_rate;
                    qs.service_rate = qa.service_rate;
                    qs.deadline = classes[j].deadline;
                    qs.network_delay = dcs[i].network_delay;
                    pl = ref_loss(env.class_stats[j], qs);
                }
                const double revenue = (1.0 - pl) * classes[j].income * qa.alloc_rate * T -
                                       pl * classes[j].penalty * qa.alloc_rate * T;
                const double base = dcs[i].idle_power + (dcs[i].pue - 1.0) * dcs[i].peak_power;
                const double prop = dcs[i].peak_power - dcs[i].idle_power;
                const double k = classes[j].per_server_capacity;
                const double power =
                    base * qa.service_rate / k + prop * (1.0 - pl) * qa.alloc_rate / k;
                const double price = side == 0 ? dcs[i].green_unit_cost : env.brown_price[i];
                profit += revenue - price * power * T / 3600.0;
            }
        }
    }
    return profit;
}

// ---------------------------------------------------------------------------
// Monte Carlo queue
// ---------------------------------------------------------------------------

std::optional<std::vector<double>> fit_ma_coefficients(std::span<const double> autocov) {
    if (autocov.empty()) return std::nullopt;
    const int L = static_cast<int>(autocov.size()) - 1;
    if (autocov[0] < 0.0) return std::nullopt;
    if (autocov[0] == 0.0) return std::vector<double>(autocov.size(), 0.0);
    if (L == 0) return std::vector<double>{std::sqrt(autocov[0])};

    // Spectral density must be positive for a real MA factorization.
    for (int k = 0; k <= 720; ++k) {
        const double w = 3.14159265358979323846 * k / 720.0;
        double f = autocov[0];
        for (int l = 1; l <= L; ++l) f += 2.0 * autocov[l] * std::cos(l * w);
        if (f <= 1e-12 * autocov[0]) return std::nullopt;
    }

    // Damped Newton on F_k(b) = sum_m b_m b_{m+k} - autocov_k.
    const int n = L + 1;
    std::vector<double> b(n, 0.0);
    b[0] = std::sqrt(autocov[0]);
    auto residual = [&](const std::vector<double>& bb, std::vector<double>& F) {
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int m = 0; m + k < n; ++m) acc += bb[m] * bb[m + k];
            F[k] = acc - autocov[k];
        }
    };
    std::vector<double> F(n), Fn(n);
    residual(b, F);
    for (int iter = 0; iter < 200; ++iter) {
        double fn = 0.0;
        for (double v : F) fn = std::max(fn, std::abs(v));
        if (fn <= 1e-12 * autocov[0]) return b;

        // Jacobian J[k][i] = b[i+k] + b[i-k] (terms present when in range).
        std::vector<std::vector<double>> J(n, std::vector<double>(n, 0.0));
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) {
                if (i + k < n) J[k][i] += b[i + k];
                if (i - k >= 0) J[k][i] += b[i - k];
            }
        }
        // Gaussian elimination with partial pivoting.
        std::vector<double> rhs(n);
        for (int k = 0; k < n; ++k) rhs[k] = -F[k];
        for (int col = 0; col < n; ++col) {
            int piv = col;
            for (int r = col + 1; r < n; ++r)
                if (std::abs(J[r][col]) > std::abs(J[piv][col])) piv = r;
            if (std::abs(J[piv][col]) < 1e-14) return std::nullopt;
            std::swap(J[piv], J[col]);
            std::swap(rhs[piv], rhs[col]);
            for (int r = col + 1; r < n; ++r) {
                const double f = J[r][col] / J[col][col];
                for (int c = col; c < n; ++c) J[r][c] -= f * J[col][c];
                rhs[r] -= f * rhs[col];
            }
        }
        std::vector<double> step(n);
        for (int r = n - 1; r >= 0; --r) {
            double acc = rhs[r];
            for (int c = r + 1; c < n; ++c) acc -= J[r][c] * step[c];
            step[r] = acc / J[r][r];
        }
        // Halving line search on the residual norm.
        double tstep = 1.0;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            std::vector<double> bt(n);
            for (int i = 0; i < n; ++i) bt[i] = b[i] + tstep * step[i];
            residual(bt, Fn);
            double fnn = 0.0;
            for (double v : Fn) fnn = std::max(fnn, std::abs(v));
            if (fnn < fn) {
                b = bt;
                F = Fn;
                ok = true;
                break;
            }
            tstep *= 0.5;
        }
        if (!ok) return std::nullopt;
    }
    return std::nullopt;
}

McResult mc_loss(const WorkloadStats& stats, const QueueSpec& q, const McConfig& cfg) {
    if (q.alloc_rate <= 0.0) throw std::invalid_argument("mc_loss: alloc_rate must be > 0");
    if (cfg.replications < 1) throw std::invalid_argument("mc_loss: replications must be >= 1");
    if (!(cfg.horizon_s > cfg.burn_in_s) || cfg.burn_in_s < 0.0)
        throw std::invalid_argument("mc_loss: need horizon > burn_in >= 0");
    const double tau = q.deadline - q.network_delay;
    if (tau <= 0.0) throw std::invalid_argument("mc_loss: deadline must exceed network delay");

    McResult out;
    const double sigma_scale = q.alloc_rate / stats.mean_rate;  // queue-level std scaling
    std::vector<double> ma;
    bool correlated = false;
    for (std::size_t l = 1; l < stats.autocov.size(); ++l)
        if (stats.autocov[l] != 0.0) correlated = true;
    if (correlated) {
        auto fit = fit_ma_coefficients(stats.autocov);
        if (fit) {
            ma = *fit;
        } else {
            out.ma_fallback = true;
        }
    }
    if (ma.empty()) ma = {std::sqrt(stats.variance)};  // i.i.d. (or fallback)
    for (double& c : ma) c *= sigma_scale;

    const long long ticks = static_cast<long long>(std::ceil(cfg.horizon_s));
    const long long burn =
        std::min(static_cast<long long>(std::ceil(cfg.burn_in_s)), ticks - 1);
    const double mu = q.service_rate;
    const double buffer = mu * tau;

    std::vector<double> losses(cfg.replications);
    for (int rep = 0; rep < cfg.replications; ++rep) {
        std::mt19937_64 eng(cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<unsigned long long>(rep));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> noise(ma.size(), 0.0);
        std::size_t head = 0;

        QueueState state;
        state.buffer_cap = buffer;
        double offered = 0.0, dropped = 0.0;
        double backlog_at_burn = 0.0;
        for (long long tick = 0; tick < ticks; ++tick) {
            if (tick == burn) backlog_at_burn = state.backlog;
            noise[head] = normal(eng);
            double rate = q.alloc_rate;
            for (std::size_t m = 0; m < ma.size(); ++m)
                rate += ma[m] * noise[(head + ma.size() - m) % ma.size()];
            head = (head + 1) % ma.size();
            if (rate < 0.0) rate = 0.0;  // Gaussian rates clipped at zero

            // Fluid tick: net flow, then clamp at the buffer; the overflow
            // volume is the dropped workload.
            const double q2 = state.backlog + rate - mu;
            double drop = 0.0;
            if (q2 > state.buffer_cap) {
                drop = q2 - state.buffer_cap;
                state.backlog = state.buffer_cap;
            } else {
                state.backlog = std::max(q2, 0.0);
            }
            if (tick >= burn) {
                offered += rate;
                dropped += drop;
            }
        }
        state.dropped = dropped;
        // Served volume by conservation; the identity holds exactly.
        state.served = offered - dropped - (state.backlog - backlog_at_burn);
        losses[rep] = offered > 0.0 ? dropped / offered : 0.0;
        out.offered += offered;
        out.dropped += dropped;
        out.served += state.served;
    }

    double mean = 0.0;
    for (double v : losses) mean += v;
    mean /= cfg.replications;
    double var = 0.0;
    for (double v : losses) var += (v - mean) * (v - mean);
    if (cfg.replications > 1) var /= (cfg.replications - 1);
    out.loss = mean;
    out.half_width = cfg.replications > 1
                         ? 1.96 * std::sqrt(var / cfg.replications)
                         : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Brute-force grid oracle
// ---------------------------------------------------------------------------

namespace {

struct QueueTables {
    bool exists = false;        // green side may be off entirely
    double mu_cap = kInf;       // per-queue upper bound (green cap)
    // term[a][m]: profit term of this queue at lambda index a, mu grid m;
    // -inf marks infeasible combinations.
    std::vector<std::vector<double>> term;
    std::vector<double> lam_grid;
};

}  // namespace

BruteForceResult brute_force_solve(const SlotEnvironment& env,
                                   std::span<const DataCenterSpec> dcs,
                                   std::span<const ServiceClass> classes,
                                   const GridSpec& grid) {
    const std::size_t nd = dcs.size();
    if (nd < 1 || nd > 2 || classes.size() != 1) {
        std::ostringstream os;
        os << "brute_force_solve: guarded to <= 2 DCs and exactly 1 class; this instance would "
              "need roughly "
           << static_cast<double>(grid.lambda_steps + 1) * (grid.lambda_steps + 1) *
                  (grid.mu_steps + 1) * (grid.mu_steps + 1) * dcs.size() * classes.size()
           << " grid evaluations";
        throw std::invalid_argument(os.str());
    }
    env.validate(nd, 1);
    const ServiceClass& cls = classes[0];
    const double demand = env.class_demand(0);
    const double T = env.slot_length;
    const double k = cls.per_server_capacity;
    const int LS = grid.lambda_steps;
    const int MS = grid.mu_steps;

    BruteForceResult res;
    res.best = Allocation::zeros(nd, 1);
    res.profit = -kInf;

    if (demand <= 0.0) {
        // Keep-on minimum: mu = 1 on every brown queue, nothing allocated.
        double profit = 0.0;
        for (std::size_t i = 0; i < nd; ++i) {
            res.best.brown[i][0] = {0.0, 1.0};
            const double base = dcs[i].idle_power + (dcs[i].pue - 1.0) * dcs[i].peak_power;
            profit -= env.brown_price[i] * base / k * T / 3600.0;
        }
        res.profit = profit;
        res.feasible = true;
        return res;
    }

    // Same activation rule as the solver, independently restated: the green
    // side exists when one server-equivalent fits strictly inside the cap.
    auto green_servers = [&](std::size_t i) {
        const double hours = T / 3600.0;
        const double kw = env.green_energy[i] / hours;
        return static_cast<int>(std::floor(kw / (dcs[i].peak_power * dcs[i].pue) + 1e-9));
    };

    // Per-queue profit term tables.
    auto build_tables = [&](std::size_t i, bool green) {
        QueueTables t;
        const int caps = green_servers(i);
        if (green) {
            if (caps < 1 || 1.0 / k >= caps * (1.0 - 1e-9)) return t;  // off
            t.mu_cap = caps * k;
        }
        t.exists = true;
        const double price = green ? dcs[i].green_unit_cost : env.brown_price[i];
        const double base = dcs[i].idle_power + (dcs[i].pue - 1.0) * dcs[i].peak_power;
        const double prop = dcs[i].peak_power - dcs[i].idle_power;
        const double ccoef = price * T / 3600.0;

        t.lam_grid.resize(LS + 1);
        for (int a = 0; a <= LS; ++a) t.lam_grid[a] = demand * a / LS;
        t.term.assign(LS + 1, {});
        for (int a = 0; a <= LS; ++a) {
            const double lam = t.lam_grid[a];
            const double lo = std::max(1.0, lam);
            const double hi =
                std::min(t.mu_cap * (1.0 - 1e-12), std::max(grid.mu_span * demand, 2.0 * lo));
            if (!(hi >= lo)) { t.term[a] = {}; continue; }
            if (a == 0) {
                // Empty queue: only the base load varies, so mu sits at the
                // lower bound.
                t.term[a] = {-ccoef * base * lo / k};
                continue;
            }
            std::vector<double> row(MS + 1, -kInf);
            for (int m = 0; m <= MS; ++m) {
                const double mu = lo + (hi - lo) * m / MS;
                QueueSpec qs;
                qs.alloc_rate = lam;
                qs.service_rate = mu;
                qs.deadline = cls.deadline;
                qs.network_delay = dcs[i].network_delay;
                const double pl = ref_loss(env.class_stats[0], qs);
                ++res.evaluations;
                if (lam * pl > cls.drop_threshold) continue;  // SLA violated
                const double revenue =
                    (1.0 - pl) * cls.income * lam * T - pl * cls.penalty * lam * T;
                const double power = base * mu / k + prop * (1.0 - pl) * lam / k;
                row[m] = revenue - ccoef * power;
            }
            t.term[a] = std::move(row);
        }
        return t;
    };

    struct DcBest {
        // best[ag][ab] with the mu choices; -inf when infeasible.
        std::vector<std::vector<double>> profit;
        std::vector<std::vector<std::pair<double, double>>> mus;  // (mu_g, mu_b)
        bool green_exists = false;
    };

    std::vector<DcBest> dc_best(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        QueueTables tg = build_tables(i, true);
        QueueTables tb = build_tables(i, false);
        DcBest& db = dc_best[i];
        db.green_exists = tg.exists;
        db.profit.assign(LS + 1, std::vector<double>(LS + 1, -kInf));
        db.mus.assign(LS + 1, std::vector<std::pair<double, double>>(LS + 1, {0.0, 0.0}));
        const double total_mu_cap = dcs[i].max_servers * k;

        auto mu_at = [&](const QueueTables& t, int a, int m) {
            const double lam = t.lam_grid[a];
            const double lo = std::max(1.0, lam);
            const double hi =
                std::min(t.mu_cap * (1.0 - 1e-12), std::max(grid.mu_span * demand, 2.0 * lo));
            if (t.term[a].size() == 1) return lo;
            return lo + (hi - lo) * m / MS;
        };

        for (int ag = 0; ag <= LS; ++ag) {
            if (!tg.exists && ag > 0) break;
            if (tg.exists && tg.term[ag].empty()) continue;
            for (int ab = 0; ab <= LS; ++ab) {
                if (ag + ab > LS) break;
                if (tb.term[ab].empty()) continue;
                double best = -kInf;
                std::pair<double, double> best_mu{0.0, 0.0};
                const int mg_count = tg.exists ? static_cast<int>(tg.term[ag].size()) : 1;
                for (int mg = 0; mg < mg_count; ++mg) {
                    double pg = 0.0, mug = 0.0;
                    if (tg.exists) {
                        pg = tg.term[ag][mg];
                        if (pg == -kInf) continue;
                        mug = mu_at(tg, ag, mg);
                    }
                    for (int mb = 0; mb < static_cast<int>(tb.term[ab].size()); ++mb) {
                        const double pb = tb.term[ab][mb];
                        if (pb == -kInf) continue;
                        const double mub = mu_at(tb, ab, mb);
                        if (mug + mub > total_mu_cap) continue;
                        if (pg + pb > best) {
                            best = pg + pb;
                            best_mu = {mug, mub};
                        }
                    }
                }
                db.profit[ag][ab] = best;
                db.mus[ag][ab] = best_mu;
            }
        }
    }

    // Combine across DCs on the allocation simplex.
    const auto lam_of = [&](int a) { return demand * a / LS; };
    if (nd == 1) {
        for (int ag = 0; ag <= LS; ++ag) {
            const int ab = LS - ag;
            const double p = dc_best[0].profit[ag][ab];
            if (p > res.profit) {
                res.profit = p;
                res.feasible = true;
                res.best = Allocation::zeros(1, 1);
                res.best.green[0][0] = {lam_of(ag), dc_best[0].mus[ag][ab].first};
                res.best.brown[0][0] = {lam_of(ab), dc_best[0].mus[ag][ab].second};
            }
        }
    } else {
        for (int ag1 = 0; ag1 <= LS; ++ag1) {
            for (int ab1 = 0; ab1 + ag1 <= LS; ++ab1) {
                const double p1 = dc_best[0].profit[ag1][ab1];
                if (p1 == -kInf) continue;
                for (int ag2 = 0; ag2 + ag1 + ab1 <= LS; ++ag2) {
                    const int ab2 = LS - ag1 - ab1 - ag2;
                    const double p2 = dc_best[1].profit[ag2][ab2];
                    if (p2 == -kInf) continue;
                    if (p1 + p2 > res.profit) {
                        res.profit = p1 + p2;
                        res.feasible = true;
                        res.best = Allocation::zeros(2, 1);
                        res.best.green[0][0] = {lam_of(ag1), dc_best[0].mus[ag1][ab1].first};
                        res.best.brown[0][0] = {lam_of(ab1), dc_best[0].mus[ag1][ab1].second};
                        res.best.green[1][0] = {lam_of(ag2), dc_best[1].mus[ag2][ab2].first};
                        res.best.brown[1][0] = {lam_of(ab2), dc_best[1].mus[ag2][ab2].second};
                    }
                }
            }
        }
    }
    if (!res.feasible) res.profit = 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// Convexity / bounds audit
// ---------------------------------------------------------------------------

namespace {

std::string point_str(const char* fmt, double a, double b, double c, double d) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
    return buf;
}

// Independent closed form for g'' via the bracket expression, with the
// prefactor from quadrature rather than the production path.
double g2_closed_bracket(double t, int n, double cv, double tau) {
    const double a = (tau + n) * cv;
    const double s = a * t + tau;
    const double rho = n * cv * cv;  // i.i.d. audit grid
    const double m = s * s / rho;
    const double m1 = 2.0 * a * s / rho;
    const double m2 = 2.0 * a * a / rho;
    const double alpha = ref_alpha(t, cv);
    const double K = cv * kInvSqrt2Pi;
    const double ex = std::exp(-0.5 * m);
    if (ex == 0.0) return 0.0;
    const double bracket = t * t * t - t * t * m1 + (3.0 + 0.25 * m1 * m1 - 0.5 * m2) * t - m1 +
                           (K / alpha) * (m1 - t);
    return alpha * ex / t * bracket;
}

}  // namespace

bool AuditReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string AuditReport::to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": max violation "
           << c.max_violation << " (tolerance " << c.tolerance << ")";
        if (!c.worst_point.empty()) os << " at " << c.worst_point;
        os << "\n";
    }
    os << (all_pass() ? "audit: all checks passed\n" : "audit: FAILURES present\n");
    return os.str();
}

AuditReport convexity_audit(const AuditGrid& grid) {
    AuditReport rep;
    std::vector<double> tgrid;
    for (double t = grid.t_min; t <= grid.t_max + 1e-12; t += grid.t_step) tgrid.push_back(t);

    // 1) Mills tail sandwich.
    {
        AuditCheck c{"mills-tail-sandwich", 0.0, grid.sandwich_tol, true, ""};
        std::vector<double> ts = tgrid;
        for (double t : {20.0, 25.0, 29.0, 30.0, 31.0, 35.0, 50.0, 100.0, 1000.0})
            ts.push_back(t);
        for (double t : ts) {
            const double h = greendc::mills_tail(t);
            const double lo = t * greendc::mills_ratio_lower(t);
            const double hi = t * greendc::mills_ratio_upper(t);
            const double v = std::max(lo - h, h - hi);
            if (v > c.max_violation) {
                c.max_violation = v;
                c.worst_point = point_str("t=%.3g", t, 0, 0, 0);
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    // 2) Prefactor sandwich.
    {
        AuditCheck c{"alpha-sandwich", 0.0, grid.sandwich_tol, true, ""};
        for (double cv : grid.cvs) {
            for (double t : tgrid) {
                const double a = greendc::alpha_normalized(t, cv);
                const double v =
                    std::max(greendc::alpha_lower(t, cv) - a, a - greendc::alpha_upper(t, cv));
                if (v > c.max_violation) {
                    c.max_violation = v;
                    c.worst_point = point_str("t=%.3g cv=%.3g", t, cv, 0, 0);
                }
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    // 3) Analytic prefactor derivatives vs central differences.
    {
        AuditCheck c{"alpha-derivative-agreement", 0.0, grid.alpha_fd_tol, true, ""};
        for (double cv : grid.cvs) {
            for (double t : tgrid) {
                if (t < 0.1) continue;
                const double h1 = 1e-6 * std::max(1.0, t);
                const double fd1 = (greendc::alpha_normalized(t + h1, cv) -
                                    greendc::alpha_normalized(t - h1, cv)) /
                                   (2.0 * h1);
                const double an1 = greendc::alpha_deriv1(t, cv);
                const double v1 = std::abs(fd1 - an1) / std::max(std::abs(an1), 1e-12);

                const double h2 = 3e-4 * std::max(1.0, t / 3.0);
                const double fd2 = (greendc::alpha_normalized(t + h2, cv) -
                                    2.0 * greendc::alpha_normalized(t, cv) +
                                    greendc::alpha_normalized(t - h2, cv)) /
                                   (h2 * h2);
                const double an2 = greendc::alpha_deriv2(t, cv);
                const double v2 = std::abs(fd2 - an2) / std::max(std::abs(an2), 1e-12);
                const double v = std::max(v1, v2);
                if (v > c.max_violation) {
                    c.max_violation = v;
                    c.worst_point = point_str("t=%.3g cv=%.3g", t, cv, 0, 0);
                }
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    // 4) Closed-form vs numerical second derivative, and
    // 6) curvature nonnegativity over the same grid.
    {
        AuditCheck agree{"g2-closed-vs-numeric", 0.0, grid.g2_agree_tol, true, ""};
        AuditCheck curv{"curvature-nonnegativity", 0.0, -grid.curvature_floor, true, ""};
        for (double cv : grid.cvs) {
            for (double tau : grid.eff_deadlines) {
                NormalizedClass nc;
                nc.cv = cv;
                nc.eff_deadline = tau;
                nc.norm_autocov = {cv * cv};
                for (int n = grid.n_min; n <= grid.n_max; ++n) {
                    for (double t : tgrid) {
                        if (t < 0.1) continue;
                        const ExponentTerms e = greendc::exponent_terms(t, n, nc);
                        if (e.m > 500.0) continue;  // both routes underflow; skip
                        // Step small enough to resolve the exponential slope.
                        const double h =
                            std::min(1e-4 * std::max(1.0, t), 0.002 / (1.0 + std::abs(e.m1)));
                        const double num = greendc::g_second_derivative(t, n, nc, h);
                        const double cf = g2_closed_bracket(t, n, cv, tau);
                        const double v =
                            std::abs(num - cf) / std::max({std::abs(cf), std::abs(num), 1e-12});
                        if (v > agree.max_violation) {
                            agree.max_violation = v;
                            agree.worst_point = point_str("t=%.3g n=%.0f cv=%.3g tau=%.3g", t,
                                                          static_cast<double>(n), cv, tau);
                        }
                        const double scale = std::max(
                            1.0, greendc::alpha_normalized(t, cv) * std::exp(-0.5 * e.m) *
                                     (t * t + 1.0));
                        const double neg = -num / scale;
                        if (neg > curv.max_violation) {
                            curv.max_violation = neg;
                            curv.worst_point = point_str("t=%.3g n=%.0f cv=%.3g tau=%.3g", t,
                                                         static_cast<double>(n), cv, tau);
                        }
                    }
                }
            }
        }
        agree.pass = agree.max_violation <= agree.tolerance;
        curv.pass = curv.max_violation <= curv.tolerance;
        rep.checks.push_back(agree);
        rep.checks.push_back(curv);
    }

    // 5) Window-variance bracket for admissible autocovariances.
    {
        AuditCheck c{"rho-bracket", 0.0, grid.rho_tol, true, ""};
        std::mt19937_64 eng(grid.seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (double cv : grid.cvs) {
            for (int rep_i = 0; rep_i < 64; ++rep_i) {
                NormalizedClass nc;
                nc.cv = cv;
                nc.eff_deadline = 1.0;
                const int L = 1 + static_cast<int>(U(eng) * 8);
                nc.norm_autocov.assign(L + 1, 0.0);
                nc.norm_autocov[0] = cv * cv;
                for (int l = 1; l <= L; ++l) nc.norm_autocov[l] = cv * cv * U(eng);
                for (int n = grid.n_min; n <= grid.n_max; ++n) {
                    const double r = nc.rho(n);
                    const double lo = n * cv * cv;
                    const double hi = static_cast<double>(n) * n * cv * cv;
                    const double v = std::max(lo - r, r - hi) / hi;
                    if (v > c.max_violation) {
                        c.max_violation = v;
                        c.worst_point = point_str("n=%.0f cv=%.3g L=%.0f",
                                                  static_cast<double>(n), cv,
                                                  static_cast<double>(L), 0);
                    }
                }
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    // 7) Midpoint convexity of lambda * P_L on mu >= max(lambda, 1).
    {
        AuditCheck c{"drop-rate-midpoint-convexity", 0.0, grid.midpoint_tol, true, ""};
        std::mt19937_64 eng(grid.seed + 1);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        SearchConfig search;
        for (double cv : grid.cvs) {
            for (double tau : grid.eff_deadlines) {
                NormalizedClass nc;
                nc.cv = cv;
                nc.eff_deadline = tau;
                nc.norm_autocov = {cv * cv};
                auto f = [&](double lam, double mu) {
                    return drop_rate_eval(lam, mu, nc, search).value;
                };
                for (int s = 0; s < grid.midpoint_samples; ++s) {
                    double l1 = 0.2 + 4.8 * U(eng);
                    double m1 = std::max(l1 * (1.0 + 0.5 * U(eng)), 1.0);
                    double l2, m2;
                    if (s % 2 == 0) {
                        l2 = 0.2 + 4.8 * U(eng);
                        m2 = std::max(l2 * (1.0 + 0.5 * U(eng)), 1.0);
                    } else {
                        // Nearby pairs probe the local scale as well.
                        l2 = l1 * (1.0 + 0.05 * (U(eng) - 0.5));
                        const double x1 = m1 / l1;
                        m2 = std::max(l2 * (x1 + 0.02 * U(eng)), 1.0);
                    }
                    const double lm = 0.5 * (l1 + l2);
                    const double mm = 0.5 * (m1 + m2);
                    if (mm < std::max(lm, 1.0)) continue;
                    const double viol = f(lm, mm) - 0.5 * (f(l1, m1) + f(l2, m2));
                    if (viol > c.max_violation) {
                        c.max_violation = viol;
                        c.worst_point = point_str("cv=%.3g tau=%.3g lam1=%.6g mu-ratio=%.6g", cv,
                                                  tau, l1, m1 / l1);
                    }
                }
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    // 8) Perspective identity: scaling (lambda, mu) scales lambda*g exactly.
    {
        AuditCheck c{"perspective-homogeneity", 0.0, grid.euler_tol, true, ""};
        std::mt19937_64 eng(grid.seed + 2);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        SearchConfig search;
        for (double cv : grid.cvs) {
            NormalizedClass nc;
            nc.cv = cv;
            nc.eff_deadline = 1.0 + 9.0 * U(eng);
            nc.norm_autocov = {cv * cv};
            for (int s = 0; s < 200; ++s) {
                const double lam = 0.5 + 10.0 * U(eng);
                const double mu = std::max(lam * (1.0 + U(eng)), 1.0);
                const double f1 = drop_rate_eval(lam, mu, nc, search).value;
                for (double scale : {0.5, 2.0}) {
                    const double f2 = drop_rate_eval(scale * lam, scale * mu, nc, search).value;
                    const double v = std::abs(f2 - scale * f1) / std::max(scale * f1, 1e-12);
                    if (v > c.max_violation) {
                        c.max_violation = v;
                        c.worst_point = point_str("cv=%.3g lam=%.4g ratio=%.4g c=%.1f", cv, lam,
                                                  mu / lam, scale);
                    }
                }
            }
        }
        c.pass = c.max_violation <= c.tolerance;
        rep.checks.push_back(c);
    }

    return rep;
}

}  // namespace greendc::oracle
