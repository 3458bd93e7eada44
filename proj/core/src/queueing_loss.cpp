#include "greendc/queueing_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace greendc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)
constexpr double kSqrtPiOver2 = 1.2533141373155002512; // sqrt(pi/2)
constexpr double kSqrt2 = 1.4142135623730950488;
// Beyond this the direct e^{t^2/2}*erfc path loses headroom; the two-sided
// bracket is 6.5e-6 wide (relative) there and shrinking like 1/t^4.
constexpr double kLargeT = 30.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double require_nonneg_t(double t, const char* who) {
    if (!(t >= 0.0)) throw std::invalid_argument(std::string(who) + ": t must be >= 0");
    return t;
}

}  // namespace

double mills_ratio_lower(double t) { return 2.0 / (t + std::sqrt(t * t + 4.0)); }
double mills_ratio_upper(double t) { return 2.0 / (t + std::sqrt(t * t + 8.0 / kPi)); }

namespace {

// Above this the Mills-ratio continued fraction replaces the direct
// e^{t^2/2} * erfc route, whose 1 - t*R(t) loses digits to cancellation.
constexpr double kCfT = 2.0;

// Leading tail of the Mills-ratio continued fraction
// R = 1/(t + c1), c1 = 1/(t + c2), c2 = 2/(t + c3), ... evaluated backward.
// Depth 160 is exact to double precision for t >= 2.
double mills_cf_head(double t) {
    double c = 0.0;
    for (int k = 160; k >= 1; --k) c = k / (t + c);
    return c;  // c1
}

// 1 - h(t) = 1 - t*R(t), computed without cancellation where it matters.
double one_minus_tail(double t) {
    if (t > kLargeT)
        return 1.0 - 0.5 * t * (mills_ratio_lower(t) + mills_ratio_upper(t));
    if (t > kCfT) {
        const double c1 = mills_cf_head(t);
        return c1 / (t + c1);
    }
    return 1.0 - t * kSqrtPiOver2 * std::exp(0.5 * t * t) * std::erfc(t / kSqrt2);
}

}  // namespace

double mills_ratio(double t) {
    require_nonneg_t(t, "mills_ratio");
    if (t > kLargeT) return 0.5 * (mills_ratio_lower(t) + mills_ratio_upper(t));
    if (t > kCfT) return 1.0 / (t + mills_cf_head(t));
    return kSqrtPiOver2 * std::exp(0.5 * t * t) * std::erfc(t / kSqrt2);
}

double mills_tail(double t) {
    require_nonneg_t(t, "mills_tail");
    if (t == 0.0) return 0.0;
    if (t > kCfT) return 1.0 - one_minus_tail(t);  // exact CF value; benign subtraction
    return t * mills_ratio(t);
}

double alpha_normalized(double t, double cv) {
    if (!(cv > 0.0)) throw std::invalid_argument("alpha_normalized: cv must be > 0");
    require_nonneg_t(t, "alpha_normalized");
    return cv * kInvSqrt2Pi * one_minus_tail(t);
}

double alpha_lower(double t, double cv) {
    return cv * kInvSqrt2Pi * (1.0 - t * mills_ratio_upper(t));
}

double alpha_upper(double t, double cv) {
    return cv * kInvSqrt2Pi * (1.0 - t * mills_ratio_lower(t));
}

double alpha_deriv1(double t, double cv) {
    if (!(cv > 0.0)) throw std::invalid_argument("alpha_deriv1: cv must be > 0");
    const double r = mills_ratio(t);
    return cv * kInvSqrt2Pi * (t - (1.0 + t * t) * r);
}

double alpha_deriv2(double t, double cv) {
    if (!(cv > 0.0)) throw std::invalid_argument("alpha_deriv2: cv must be > 0");
    const double r = mills_ratio(t);
    return cv * kInvSqrt2Pi * (2.0 + t * t - t * (t * t + 3.0) * r);
}

double alpha_raw(const WorkloadStats& stats, const QueueSpec& q) {
    stats.validate();
    if (q.alloc_rate == 0.0)
        throw std::invalid_argument(
            "alpha_raw: empty queue (alloc_rate == 0); caller must short-circuit");
    const double cv = stats.cv();
    const double t = (q.service_rate / q.alloc_rate - 1.0) / cv;
    return alpha_normalized(t, cv);
}

NormalizedClass NormalizedClass::from(const WorkloadStats& stats, const QueueSpec& q) {
    stats.validate();
    // The zero effective deadline limit is allowed here (the exponent's
    // numerator simply vanishes at mu == lambda); loss_probability itself
    // requires a strictly positive effective deadline.
    if (q.effective_deadline() < 0.0)
        throw std::invalid_argument("NormalizedClass: deadline must not fall below network delay");
    NormalizedClass nc;
    nc.cv = stats.cv();
    nc.eff_deadline = q.effective_deadline();
    const double m2 = stats.mean_rate * stats.mean_rate;
    nc.norm_autocov.reserve(stats.autocov.size());
    for (double c : stats.autocov) nc.norm_autocov.push_back(c / m2);
    return nc;
}

double NormalizedClass::rho(int n) const {
    if (n < 1) throw std::invalid_argument("rho: n must be >= 1");
    const double c0 = norm_autocov.empty() ? cv * cv : norm_autocov[0];
    double r = n * c0;
    const int max_lag = static_cast<int>(norm_autocov.size()) - 1;
    const int top = std::min(n - 1, max_lag);
    for (int l = 1; l <= top; ++l) r += 2.0 * (n - l) * norm_autocov[l];
    return r;
}

double exponent_m(int n, const WorkloadStats& stats, const QueueSpec& q) {
    if (n < 1) throw std::invalid_argument("exponent_m: n must be >= 1");
    if (q.alloc_rate <= 0.0) throw std::invalid_argument("exponent_m: alloc_rate must be > 0");
    const NormalizedClass nc = NormalizedClass::from(stats, q);
    const double x1 = q.service_rate / q.alloc_rate - 1.0;
    const double s = (nc.eff_deadline + n) * x1 + nc.eff_deadline;
    return s * s / nc.rho(n);
}

ExponentTerms exponent_terms(double t, int n, const NormalizedClass& nc) {
    if (n < 1) throw std::invalid_argument("exponent_terms: n must be >= 1");
    const double a = (nc.eff_deadline + n) * nc.cv;
    const double s = a * t + nc.eff_deadline;
    const double r = nc.rho(n);
    ExponentTerms e;
    e.m = s * s / r;
    e.m1 = 2.0 * a * s / r;
    e.m2 = 2.0 * a * a / r;
    return e;
}

double g_value(double t, int n, const NormalizedClass& nc) {
    const ExponentTerms e = exponent_terms(t, n, nc);
    return alpha_normalized(t, nc.cv) * std::exp(-0.5 * e.m);
}

double g_deriv1(double t, int n, const NormalizedClass& nc) {
    const ExponentTerms e = exponent_terms(t, n, nc);
    const double ex = std::exp(-0.5 * e.m);
    if (ex == 0.0) return 0.0;
    return ex * (alpha_deriv1(t, nc.cv) - 0.5 * alpha_normalized(t, nc.cv) * e.m1);
}

double g_deriv2(double t, int n, const NormalizedClass& nc) {
    const ExponentTerms e = exponent_terms(t, n, nc);
    const double ex = std::exp(-0.5 * e.m);
    if (ex == 0.0) return 0.0;
    const double a0 = alpha_normalized(t, nc.cv);
    const double a1 = alpha_deriv1(t, nc.cv);
    const double a2 = alpha_deriv2(t, nc.cv);
    return ex * (a2 - a1 * e.m1 + a0 * (0.25 * e.m1 * e.m1 - 0.5 * e.m2));
}

double g_second_derivative(double t, int n, const NormalizedClass& nc, double h_step) {
    if (!(h_step > 0.0)) throw std::invalid_argument("g_second_derivative: h_step must be > 0");
    if (t < h_step)
        throw std::invalid_argument("g_second_derivative: stencil leaves the domain (t < h_step)");
    const double f0 = g_value(t - h_step, n, nc);
    const double f1 = g_value(t, n, nc);
    const double f2 = g_value(t + h_step, n, nc);
    return (f2 - 2.0 * f1 + f0) / (h_step * h_step);
}

namespace {

struct ScanOutcome {
    double m_min = kInf;
    int argmin = 1;
    bool lower_bound_only = false;
    bool tie = false;
};

// Minimizes ((tau+n)*x1 + tau)^2 / rho(n) over integer n in [1, n_max] with
// incremental rho sums and an early stop once the sequence has been strictly
// increasing for `increase_run` steps.
ScanOutcome scan_exponent(double x1, const NormalizedClass& nc, const SearchConfig& search) {
    const double tau = nc.eff_deadline;
    const double c0 = nc.norm_autocov.empty() ? nc.cv * nc.cv : nc.norm_autocov[0];
    const int max_lag = static_cast<int>(nc.norm_autocov.size()) - 1;

    ScanOutcome out;
    double sum_c = 0.0;   // sum of c_l for l = 1..min(n-1, L)
    double sum_lc = 0.0;  // sum of l*c_l
    double prev = kInf;
    double prev_best_neighbor = kInf;  // value at argmin-1
    double next_after_best = kInf;     // value at argmin+1
    int increase = 0;
    for (int n = 1; n <= search.n_max; ++n) {
        const int l = n - 1;
        if (l >= 1 && l <= max_lag) {
            sum_c += nc.norm_autocov[l];
            sum_lc += l * nc.norm_autocov[l];
        }
        const double rho = n * c0 + 2.0 * (n * sum_c - sum_lc);
        if (rho <= 0.0) { prev = kInf; continue; }  // not a valid window variance
        const double s = (tau + n) * x1 + tau;
        const double m = s * s / rho;
        if (m < out.m_min) {
            out.m_min = m;
            out.argmin = n;
            prev_best_neighbor = prev;
            next_after_best = kInf;
        } else if (n == out.argmin + 1) {
            next_after_best = m;
        }
        if (n > 1 && m > prev) {
            if (++increase >= search.increase_run) break;
        } else {
            increase = 0;
        }
        prev = m;
    }
    // A boundary minimum means the scan cannot certify the true infimum.
    if (out.argmin == search.n_max) out.lower_bound_only = true;

    const double tie_tol = 1e-9 * (1.0 + out.m_min);
    if (std::isfinite(prev_best_neighbor) && prev_best_neighbor - out.m_min <= tie_tol)
        out.tie = true;
    if (std::isfinite(next_after_best) && next_after_best - out.m_min <= tie_tol)
        out.tie = true;
    return out;
}

}  // namespace

LossResult loss_probability(const WorkloadStats& stats, const QueueSpec& q,
                            const SearchConfig& search) {
    stats.validate();
    q.validate();
    if (search.n_max < 1) throw std::invalid_argument("loss_probability: n_max must be >= 1");
    if (q.alloc_rate <= 0.0)
        throw std::invalid_argument(
            "loss_probability: empty queue (alloc_rate == 0); caller must short-circuit");
    if (q.effective_deadline() <= 0.0)
        throw std::invalid_argument("loss_probability: deadline must exceed network delay");

    LossResult r;
    if (stats.variance <= 0.0) {
        // Deterministic arrivals never overflow the buffer while mu >= lambda.
        r.loss_prob = 0.0;
        r.log_loss = -kInf;
        r.alpha = 0.0;
        r.m_min = kInf;
        r.argmin_n = 0;
        return r;
    }

    const NormalizedClass nc = NormalizedClass::from(stats, q);
    const double x1 = q.service_rate / q.alloc_rate - 1.0;
    const double t = x1 / nc.cv;
    r.alpha = alpha_normalized(t, nc.cv);

    if (x1 <= search.degeneracy_rel) {
        // The numerator is ~constant while the window variance grows, so the
        // infimum over n is 0, approached as n -> infinity.
        r.m_min = 0.0;
        r.argmin_n = 0;
    } else {
        const ScanOutcome sc = scan_exponent(x1, nc, search);
        r.m_min = sc.m_min;
        r.argmin_n = sc.argmin;
        r.lower_bound_only = sc.lower_bound_only;
    }

    r.log_loss = std::log(r.alpha) - 0.5 * r.m_min;
    const double raw = std::exp(r.log_loss);
    if (raw > 1.0) {
        r.loss_prob = 1.0;
        r.clamped = true;
    } else {
        r.loss_prob = raw;
    }
    return r;
}

DropRateEval drop_rate_eval(double lam, double mu, const NormalizedClass& nc,
                            const SearchConfig& search) {
    DropRateEval out;
    if (lam <= 0.0) return out;      // perspective extension: empty queue
    if (nc.cv <= 0.0) return out;    // deterministic arrivals: no losses for mu >= lambda

    double x1 = mu / lam - 1.0;
    if (x1 < 0.0) x1 = 0.0;  // callers keep mu >= lambda; clamp guards roundoff
    const double t = x1 / nc.cv;

    double a0, a1, a2, ex, m1, m2;
    if (x1 <= search.degeneracy_rel) {
        out.active_n = 0;
        a0 = alpha_normalized(t, nc.cv);
        a1 = alpha_deriv1(t, nc.cv);
        a2 = alpha_deriv2(t, nc.cv);
        ex = 1.0;
        m1 = 0.0;
        m2 = 0.0;
    } else {
        const ScanOutcome sc = scan_exponent(x1, nc, search);
        out.active_n = sc.argmin;
        out.tie = sc.tie;
        const ExponentTerms e = exponent_terms(t, sc.argmin, nc);
        ex = std::exp(-0.5 * e.m);
        if (ex == 0.0) return out;  // underflowed: value and derivatives all ~0
        a0 = alpha_normalized(t, nc.cv);
        a1 = alpha_deriv1(t, nc.cv);
        a2 = alpha_deriv2(t, nc.cv);
        m1 = e.m1;
        m2 = e.m2;
    }

    const double g = ex * a0;
    const double g1 = ex * (a1 - 0.5 * a0 * m1);
    const double g2 = ex * (a2 - a1 * m1 + a0 * (0.25 * m1 * m1 - 0.5 * m2));

    const double x = mu / lam;
    out.value = lam * g;
    out.dmu = g1 / nc.cv;
    out.dlam = g - x / nc.cv * g1;
    const double cv2 = nc.cv * nc.cv;
    out.d2_mu_mu = g2 / (cv2 * lam);
    out.d2_lam_mu = -g2 * x / (cv2 * lam);
    out.d2_lam_lam = g2 * x * x / (cv2 * lam);
    return out;
}

}  // namespace greendc
