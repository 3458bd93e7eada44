#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "greendc/queueing_loss.hpp"
#include "greendc/validation.hpp"

using namespace greendc;
using Catch::Approx;

namespace {

// High-precision reference values, frozen from 40-digit quadrature of the
// defining integrals (see oracle::ref_alpha for the runtime route).
constexpr double kH1 = 0.65567954241879847;
constexpr double kH05 = 0.43818222822684617;
constexpr double kH2 = 0.84273845857610895;
constexpr double kAlpha1Cv1 = 0.13736398853630931;
constexpr double kAlpha0Cv1 = 0.39894228040143268;
constexpr double kAlpha1Cv03 = 0.041209196560892792;
constexpr double kAlpha0Cv03 = 0.11968268412042980;

WorkloadStats iid_stats(double mean, double sigma) {
    WorkloadStats st;
    st.mean_rate = mean;
    st.variance = sigma * sigma;
    st.autocov = {st.variance};
    return st;
}

QueueSpec queue(double lam, double mu, double deadline, double delay = 0.0) {
    QueueSpec q;
    q.alloc_rate = lam;
    q.service_rate = mu;
    q.deadline = deadline;
    q.network_delay = delay;
    return q;
}

}  // namespace

TEST_CASE("mills_tail pinned values and limits") {
    CHECK(mills_tail(0.0) == 0.0);
    CHECK(mills_tail(1.0) == Approx(kH1).epsilon(1e-13));
    CHECK(mills_tail(0.5) == Approx(kH05).epsilon(1e-13));
    CHECK(mills_tail(2.0) == Approx(kH2).epsilon(1e-13));
    CHECK_THROWS_AS(mills_tail(-0.1), std::invalid_argument);

    // Agreement with the independent quadrature route: alpha = K*(1-h).
    for (double t : {0.1, 0.7, 1.0, 3.0, 8.0, 20.0}) {
        const double via_tail = alpha_normalized(t, 1.0);
        CHECK(via_tail == Approx(oracle::ref_alpha(t, 1.0)).epsilon(1e-11));
    }
}

TEST_CASE("mills_tail stays inside the analytic sandwich, no overflow") {
    for (double t : {0.0, 0.3, 1.0, 5.0, 29.9, 30.0, 30.1, 50.0, 500.0, 1e4}) {
        const double h = mills_tail(t);
        CHECK(std::isfinite(h));
        CHECK(h >= t * mills_ratio_lower(t) - 1e-12);
        CHECK(h <= t * mills_ratio_upper(t) + 1e-12);
        CHECK(h >= 0.0);
        CHECK(h < 1.0);
    }
}

TEST_CASE("mills_tail is monotone nondecreasing") {
    double prev = 0.0;
    for (double t = 0.0; t <= 40.0; t += 0.05) {
        const double h = mills_tail(t);
        CHECK(h >= prev - 1e-9);  // the large-t branch switch is 6e-6-accurate
        prev = h;
    }
}

TEST_CASE("alpha_normalized pinned values, bracket and monotonicity") {
    CHECK(alpha_normalized(0.0, 1.0) == Approx(kAlpha0Cv1).epsilon(1e-14));
    CHECK(alpha_normalized(1.0, 1.0) == Approx(kAlpha1Cv1).epsilon(1e-13));
    CHECK(alpha_normalized(1.0, 0.3) == Approx(kAlpha1Cv03).epsilon(1e-13));
    CHECK_THROWS_AS(alpha_normalized(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(alpha_normalized(1.0, -1.0), std::invalid_argument);

    double prev = alpha_normalized(0.0, 0.3);
    for (double t = 0.05; t < 12.0; t += 0.05) {
        const double a = alpha_normalized(t, 0.3);
        CHECK(a > 0.0);
        CHECK(a < prev);  // strictly decreasing
        CHECK(a >= alpha_lower(t, 0.3) - 1e-12);
        CHECK(a <= alpha_upper(t, 0.3) + 1e-12);
        prev = a;
    }
}

TEST_CASE("alpha derivatives match central differences") {
    for (double cv : {0.3, 1.0}) {
        for (double t : {0.05, 0.3, 1.0, 2.5, 6.0, 9.5}) {
            const double h1 = 1e-6 * std::max(1.0, t);
            const double fd1 =
                (alpha_normalized(t + h1, cv) - alpha_normalized(t - h1, cv)) / (2 * h1);
            CHECK(alpha_deriv1(t, cv) == Approx(fd1).epsilon(1e-6));
            const double h2 = 3e-4 * std::max(1.0, t / 3.0);
            const double fd2 = (alpha_normalized(t + h2, cv) - 2 * alpha_normalized(t, cv) +
                                alpha_normalized(t - h2, cv)) /
                               (h2 * h2);
            CHECK(alpha_deriv2(t, cv) == Approx(fd2).epsilon(1e-5));
        }
    }
    // alpha'(0) = -K * sqrt(pi/2)
    CHECK(alpha_deriv1(0.0, 1.0) ==
          Approx(-kAlpha0Cv1 * 1.2533141373155003).epsilon(1e-14));
}

TEST_CASE("alpha_raw delegates to the normalized form") {
    CHECK(alpha_raw(iid_stats(100, 30), queue(100, 100, 2.0)) ==
          Approx(kAlpha0Cv03).epsilon(1e-14));
    CHECK(alpha_raw(iid_stats(100, 30), queue(100, 130, 2.0)) ==
          Approx(kAlpha1Cv03).epsilon(1e-13));
    // Scale invariance is exact: same normalized inputs, same code path.
    const double a1 = alpha_raw(iid_stats(100, 30), queue(100, 120, 2.0));
    const double a2 = alpha_raw(iid_stats(200, 60), queue(200, 240, 2.0));
    CHECK(a1 == a2);
    CHECK_THROWS_AS(alpha_raw(iid_stats(100, 30), queue(0, 100, 2.0)), std::invalid_argument);
}

TEST_CASE("exponent_m hand value, limits and scale invariance") {
    // i.i.d., n = 1, effective deadline 1, mu/lambda = 1.2, cv = 0.3:
    // ((1+1)*0.2 + 1)^2 / 0.09 = 196/9.
    CHECK(exponent_m(1, iid_stats(100, 30), queue(100, 120, 1.0)) ==
          Approx(196.0 / 9.0).epsilon(1e-13));
    // Numerator vanishes at mu == lambda with zero effective deadline.
    for (int n : {1, 3, 10})
        CHECK(exponent_m(n, iid_stats(50, 10), queue(50, 50, 0.5, 0.5)) == 0.0);
    // Depends only on the ratio and the class-level normalized covariance.
    const double m1 = exponent_m(7, iid_stats(100, 30), queue(100, 125, 3.0));
    const double m2 = exponent_m(7, iid_stats(300, 90), queue(300, 375, 3.0));
    CHECK(m1 == Approx(m2).epsilon(1e-13));
    CHECK_THROWS_AS(exponent_m(0, iid_stats(100, 30), queue(100, 120, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("window variance bracket for admissible autocovariances") {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        NormalizedClass nc;
        nc.cv = 0.1 + U(eng);
        nc.eff_deadline = 1.0;
        const int L = 1 + static_cast<int>(U(eng) * 10);
        nc.norm_autocov.assign(L + 1, 0.0);
        nc.norm_autocov[0] = nc.cv * nc.cv;
        for (int l = 1; l <= L; ++l) nc.norm_autocov[l] = nc.cv * nc.cv * U(eng);
        for (int n = 1; n <= 40; ++n) {
            const double r = nc.rho(n);
            CHECK(r >= n * nc.cv * nc.cv * (1.0 - 1e-12));
            CHECK(r <= double(n) * n * nc.cv * nc.cv * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("loss_probability pinned example") {
    // lambda=100, mu=130, sigma=30, i.i.d., effective deadline 1 s.
    const LossResult r = loss_probability(iid_stats(100, 30), queue(100, 130, 1.0));
    CHECK(r.argmin_n == 4);
    CHECK(r.m_min == Approx(625.0 / 36.0).epsilon(1e-13));
    CHECK(r.alpha == Approx(kAlpha1Cv03).epsilon(1e-13));
    CHECK(r.loss_prob == Approx(6.9996571715991633e-06).epsilon(1e-12));
    CHECK(!r.clamped);
    CHECK(!r.lower_bound_only);
    // Log-space consistency.
    CHECK(std::exp(r.log_loss) == Approx(r.loss_prob).epsilon(1e-15));
    CHECK(r.loss_prob <= r.alpha);
}

TEST_CASE("loss_probability degenerate and extreme regimes") {
    // mu == lambda: infimum of the exponent is 0, loss equals the prefactor.
    const LossResult deg = loss_probability(iid_stats(100, 30), queue(100, 100, 2.0));
    CHECK(deg.argmin_n == 0);
    CHECK(deg.m_min == 0.0);
    CHECK(deg.loss_prob == Approx(kAlpha0Cv03).epsilon(1e-13));

    // Heavy overprovisioning drives the loss below 1e-6.
    const LossResult tiny = loss_probability(iid_stats(100, 30), queue(100, 1000, 1.0));
    CHECK(tiny.loss_prob < 1e-6);

    // Huge coefficient of variation: prefactor above 1, clamped.
    const LossResult clamp = loss_probability(iid_stats(10, 50), queue(10, 10, 2.0));
    CHECK(clamp.clamped);
    CHECK(clamp.loss_prob == 1.0);
    CHECK(clamp.alpha > 1.0);

    // Deterministic arrivals: no losses in the mu >= lambda region.
    const LossResult det = loss_probability(iid_stats(100, 0), queue(100, 120, 1.0));
    CHECK(det.loss_prob == 0.0);

    // Near-degenerate ratio with a large deadline exhausts the scan.
    SearchConfig small;
    small.n_max = 100;
    const LossResult lbo =
        loss_probability(iid_stats(100, 30), queue(100, 100.01, 30.0), small);
    CHECK(lbo.lower_bound_only);
    CHECK(lbo.argmin_n == 100);

    CHECK_THROWS_AS(loss_probability(iid_stats(100, 30), queue(0, 100, 1.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_probability(iid_stats(100, 30), queue(120, 100, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("loss probability is scale invariant") {
    std::mt19937_64 eng(23);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double lam = 1.0 + 999.0 * U(eng);
        const double ratio = 1.0 + 9.0 * U(eng);
        const double cv = 0.05 + 1.95 * U(eng);
        const double tau = 0.1 + 59.9 * U(eng);
        WorkloadStats st = iid_stats(lam, cv * lam);
        const QueueSpec q = queue(lam, ratio * lam, tau);
        const double base = loss_probability(st, q).loss_prob;
        for (double c : {0.5, 2.0, 10.0}) {
            WorkloadStats sts = iid_stats(c * lam, cv * c * lam);
            sts.variance = c * c * st.variance;
            sts.autocov = {sts.variance};
            const QueueSpec qs = queue(c * lam, c * ratio * lam, tau);
            CHECK(std::abs(loss_probability(sts, qs).loss_prob - base) <= 1e-12);
        }
    }
}

TEST_CASE("loss probability is nonincreasing in the service rate") {
    const WorkloadStats st = iid_stats(100, 30);
    double prev = 1.0;
    for (double mu = 100.0; mu <= 200.0; mu += 0.5) {
        const double p = loss_probability(st, queue(100, mu, 2.0)).loss_prob;
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
}

TEST_CASE("second derivative: stencil agrees with the closed form") {
    NormalizedClass nc;
    nc.cv = 0.3;
    nc.eff_deadline = 5.0;
    nc.norm_autocov = {0.09};
    for (int n : {1, 2, 5, 10}) {
        for (double t : {0.5, 1.0, 2.0, 3.0}) {
            // The stencil must resolve the exponential slope of the window term.
            const double slope = exponent_terms(t, n, nc).m1;
            const double h = std::min(1e-4, 0.002 / (1.0 + std::abs(slope)));
            const double numeric = g_second_derivative(t, n, nc, h);
            const double closed = g_deriv2(t, n, nc);
            CHECK(numeric == Approx(closed).epsilon(1e-6));
            CHECK(closed > 0.0);  // mainstream region: curvature positive
        }
    }
    CHECK_THROWS_AS(g_second_derivative(1e-6, 1, nc, 1e-4), std::invalid_argument);
}

TEST_CASE("drop rate evaluation: gradients, Hessian and homogeneity") {
    NormalizedClass nc;
    nc.cv = 0.3;
    nc.eff_deadline = 2.0;
    nc.norm_autocov = {0.09};
    std::mt19937_64 eng(31);
    std::uniform_real_distribution<double> U(0.0, 1.0);

    for (int rep = 0; rep < 60; ++rep) {
        const double lam = 5.0 + 200.0 * U(eng);
        const double mu = std::max(lam * (1.05 + 0.6 * U(eng)), 1.0);
        const DropRateEval e = drop_rate_eval(lam, mu, nc);
        if (e.tie || e.value < 1e-280) continue;

        // Euler identity of the perspective: lam*dlam + mu*dmu == value.
        CHECK(lam * e.dlam + mu * e.dmu == Approx(e.value).epsilon(1e-9));

        // Degree-1 homogeneity.
        const DropRateEval e2 = drop_rate_eval(2 * lam, 2 * mu, nc);
        CHECK(e2.value == Approx(2 * e.value).epsilon(1e-12));

        // Finite differences of the value.
        const double hl = 1e-6 * lam;
        const double hm = 1e-6 * mu;
        const double fdl = (drop_rate_eval(lam + hl, mu, nc).value -
                            drop_rate_eval(lam - hl, mu, nc).value) /
                           (2 * hl);
        const double fdm = (drop_rate_eval(lam, mu + hm, nc).value -
                            drop_rate_eval(lam, mu - hm, nc).value) /
                           (2 * hm);
        CHECK(e.dlam == Approx(fdl).epsilon(1e-4).margin(1e-12));
        CHECK(e.dmu == Approx(fdm).epsilon(1e-4).margin(1e-12));
    }

    // Perspective extension at zero allocation.
    const DropRateEval zero = drop_rate_eval(0.0, 5.0, nc);
    CHECK(zero.value == 0.0);
    CHECK(zero.dlam == 0.0);
    CHECK(zero.dmu == 0.0);
}
