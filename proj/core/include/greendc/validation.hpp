#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greendc/types.hpp"

namespace greendc::oracle {

/// Reference prefactor via direct quadrature of the defining integral
/// (alpha = cv/sqrt(2*pi) * int_0^inf v e^{-t v - v^2/2} dv). Shares no code
/// with the production path.
double ref_alpha(double t, double cv);

/// Reference loss probability: quadrature prefactor plus a plain window scan.
double ref_loss(const WorkloadStats& stats, const QueueSpec& q);

/// Straight-line slot profit recomputation (uses ref_loss).
double ref_slot_profit(const Allocation& alloc, const SlotEnvironment& env,
                       std::span<const DataCenterSpec> dcs,
                       std::span<const ServiceClass> classes);

// --- Monte Carlo queue ------------------------------------------------------

struct McConfig {
    double horizon_s = 1e5;
    int replications = 20;
    std::uint64_t seed = 1;
    double burn_in_s = 1000.0;
};

/// Finite fluid queue state used by the tick loop.
struct QueueState {
    double backlog = 0.0;
    double buffer_cap = 0.0;  // service_rate * (deadline - delay)
    double dropped = 0.0;
    double served = 0.0;
};

struct McResult {
    double loss = 0.0;        // mean dropped/offered across replications
    double half_width = 0.0;  // 95% normal-approximation half width
    double offered = 0.0;     // totals across replications, post burn-in
    double dropped = 0.0;
    double served = 0.0;
    bool ma_fallback = false;  // correlated draws degraded to i.i.d.
};

/// Discrete-time (1 s ticks) Gaussian-arrival fluid queue with deterministic
/// service and buffer service_rate * effective deadline. Arrivals beyond the
/// buffer are dropped.
McResult mc_loss(const WorkloadStats& stats, const QueueSpec& q, const McConfig& cfg);

/// Moving-average coefficients matching a target autocovariance sequence;
/// empty when no real-coefficient solution exists.
std::optional<std::vector<double>> fit_ma_coefficients(std::span<const double> autocov);

// --- Brute-force grid oracle --------------------------------------------------

struct GridSpec {
    int lambda_steps = 100;  // grid step = demand / lambda_steps
    int mu_steps = 100;
    double mu_span = 3.0;    // mu scanned up to mu_span * demand (cap permitting)
};

struct BruteForceResult {
    Allocation best;
    double profit = 0.0;
    bool feasible = false;
    long long evaluations = 0;
};

/// Exhaustive scan over the allocation simplex and per-queue mu grids.
/// Guarded to at most 2 DCs and exactly 1 class; larger instances throw with
/// an estimated-cost message.
BruteForceResult brute_force_solve(const SlotEnvironment& env,
                                   std::span<const DataCenterSpec> dcs,
                                   std::span<const ServiceClass> classes,
                                   const GridSpec& grid);

// --- Convexity / bounds audit -------------------------------------------------

struct AuditGrid {
    double t_min = 0.0;
    double t_max = 10.0;
    double t_step = 0.1;
    int n_min = 1;
    int n_max = 50;
    std::vector<double> cvs = {0.1, 0.3, 1.0};
    std::vector<double> eff_deadlines = {1.0, 5.0, 30.0};
    int midpoint_samples = 2000;
    std::uint64_t seed = 42;

    double sandwich_tol = 1e-12;
    double alpha_fd_tol = 1e-6;     // relative
    double g2_agree_tol = 1e-4;     // relative
    double curvature_floor = -1e-6; // normalized
    double midpoint_tol = 1e-8;
    double rho_tol = 1e-12;
    double euler_tol = 1e-12;       // relative
};

struct AuditCheck {
    std::string name;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string worst_point;
};

struct AuditReport {
    std::vector<AuditCheck> checks;
    bool all_pass() const;
    std::string to_text() const;
};

AuditReport convexity_audit(const AuditGrid& grid = {});

}  // namespace greendc::oracle
