#pragma once

#include <vector>

#include "greendc/types.hpp"

namespace greendc {

/// Controls the scan that minimizes the exponent over window lengths n.
struct SearchConfig {
    int n_max = 1000;            // largest window length scanned
    int increase_run = 50;       // stop after this many consecutive increases
    double degeneracy_rel = 1e-9;  // (mu-lambda)/lambda below this => exponent 0
};

/// Outcome of one loss-probability evaluation.
struct LossResult {
    double loss_prob = 0.0;   // clamped into [0, 1]
    double log_loss = 0.0;    // ln(alpha) - m_min/2, before clamping
    int argmin_n = 0;         // minimizing window; 0 = infimum at n -> infinity
    double alpha = 0.0;       // prefactor
    double m_min = 0.0;       // minimized exponent
    bool clamped = false;         // raw value exceeded 1
    bool lower_bound_only = false;  // scan ended at n_max still decreasing
};

/// Class-level constants of the normalized loss form: everything the loss
/// depends on besides the ratio mu/lambda. norm_autocov[l] = C(l)/mean^2,
/// so norm_autocov[0] == cv^2.
struct NormalizedClass {
    double cv = 0.0;
    double eff_deadline = 1.0;          // seconds
    std::vector<double> norm_autocov;   // lag 0..L

    static NormalizedClass from(const WorkloadStats& stats, const QueueSpec& q);
    /// Window variance of the normalized rate process over n one-second lags.
    double rho(int n) const;
};

/// Mills ratio of the standard normal: e^{t^2/2} * integral_t^inf e^{-u^2/2} du.
double mills_ratio(double t);
/// h(t) = t * mills_ratio(t); the tail factor of the normalized prefactor.
double mills_tail(double t);
/// Two-sided analytic bounds on mills_ratio.
double mills_ratio_lower(double t);
double mills_ratio_upper(double t);

/// alpha(t) = cv/sqrt(2*pi) * (1 - h(t)). Throws for cv <= 0.
double alpha_normalized(double t, double cv);
/// Analytic bounds matching the mills_ratio bounds.
double alpha_lower(double t, double cv);
double alpha_upper(double t, double cv);
/// First and second derivatives of alpha_normalized in t (closed form,
/// regular at t = 0).
double alpha_deriv1(double t, double cv);
double alpha_deriv2(double t, double cv);

/// Prefactor for a concrete queue; delegates to alpha_normalized with
/// t = (mu/lambda - 1)/cv. Throws when alloc_rate == 0 (empty queue; the
/// caller must short-circuit that case).
double alpha_raw(const WorkloadStats& stats, const QueueSpec& q);

/// Exponent M_n for window length n >= 1.
double exponent_m(int n, const WorkloadStats& stats, const QueueSpec& q);

/// M_n and its first two derivatives in the normalized variable t, at fixed n.
struct ExponentTerms {
    double m = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
};
ExponentTerms exponent_terms(double t, int n, const NormalizedClass& nc);

/// g_n(t) = alpha(t) * exp(-M_n(t)/2).
double g_value(double t, int n, const NormalizedClass& nc);
/// First/second derivative of g_n in t via the closed-form alpha derivatives.
double g_deriv1(double t, int n, const NormalizedClass& nc);
double g_deriv2(double t, int n, const NormalizedClass& nc);
/// Central-difference second derivative of g_n; the audit compares it against
/// the closed form. Requires t >= h_step.
double g_second_derivative(double t, int n, const NormalizedClass& nc, double h_step = 1e-4);

/// Loss probability P_L = alpha * exp(-min_n M_n / 2), scanned in log space.
LossResult loss_probability(const WorkloadStats& stats, const QueueSpec& q,
                            const SearchConfig& search = {});

/// lambda * P_L and its derivatives in (lambda, mu) at the active window.
/// The Hessian entries are exact for the active n; callers that need a PSD
/// model clamp the curvature themselves.
struct DropRateEval {
    double value = 0.0;
    double dlam = 0.0;
    double dmu = 0.0;
    double d2_lam_lam = 0.0;
    double d2_lam_mu = 0.0;
    double d2_mu_mu = 0.0;
    int active_n = 0;  // 0 = degenerate (mu ~ lambda) path
    bool tie = false;  // neighboring window within tie tolerance
};
DropRateEval drop_rate_eval(double lam, double mu, const NormalizedClass& nc,
                            const SearchConfig& search = {});

}  // namespace greendc
