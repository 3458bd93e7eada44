#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "greendc/power_profit.hpp"
#include "greendc/queueing_loss.hpp"
#include "greendc/types.hpp"

namespace greendc {

enum class SolveStatus {
    optimal,
    feasible_not_converged,
    infeasible,
    non_certified,
};
const char* to_string(SolveStatus s);

struct SolveOptions {
    double tolerance = 1e-6;            // relative objective tolerance
    int max_iterations = 400;           // Newton iteration budget per start
    double barrier_initial_weight = 10.0;
    double barrier_reduction = 0.2;
    double epsilon_alloc_frac = 1e-6;   // fraction of class demand treated as empty
    std::uint64_t seed = 1;
    int multistart = 3;
    bool total_capacity_constraint = true;  // cap green+brown servers at max_servers
    bool relax_demand_equality = false;     // turn the demand equality into <=
    SearchConfig search;
};

struct KktResiduals {
    double stationarity = 0.0;
    double equality = 0.0;
    double inequality = 0.0;  // max positive constraint value (scaled)
    double gap = 0.0;         // barrier duality-gap estimate
};

struct SolveResult {
    Allocation allocation;
    double objective = 0.0;  // profit in currency
    SolveStatus status = SolveStatus::infeasible;
    KktResiduals kkt;
    int iterations = 0;
    bool profitability_ok = true;
    std::vector<std::pair<int, int>> gate_failures;  // (dc, class) failing the gate
    std::vector<int> green_caps;     // per-DC green server cap used
    std::vector<char> green_active;  // per-DC: green side present in the program
    bool degenerate_demand = false;  // some class had ~zero demand
    std::string message;
};

/// Per-queue expected-drop-rate model; the baseline swaps the queueing model
/// behind this interface.
class DropRateModel {
public:
    virtual ~DropRateModel() = default;
    virtual DropRateEval eval(double lam, double mu, const NormalizedClass& nc) const = 0;
    /// Loss probability for reporting, clamped into [0, 1].
    virtual double loss_prob(double lam, double mu, const NormalizedClass& nc) const = 0;
    /// Whether the concavity argument applies to this model.
    virtual bool certified() const = 0;
};

std::shared_ptr<const DropRateModel> gd1_drop_model(const SearchConfig& search = {});

/// Servers the slot's green energy can power at worst-case draw. The floor
/// keeps the green capacity constraint linear.
int green_server_cap(const DataCenterSpec& dc, double green_energy_kwh, double slot_seconds);

/// The per-slot program in solver form. Variables are packed
/// [lam_0, mu_0, lam_1, mu_1, ...] over the active queues.
struct ProblemInstance {
    struct Queue {
        int dc = 0;
        int cls = 0;
        bool green = true;
        NormalizedClass nc;
        double capacity = 1.0;        // k_j
        double income_coeff = 0.0;    // objective coefficient on lambda
        double mu_cost_coeff = 0.0;   // energy cost coefficient on mu
        double drop_weight = 0.0;     // coefficient on lambda * P_L
        double drop_threshold = 0.0;  // TH_j
        bool sla_active = true;       // false for deterministic (cv = 0) classes
        double fixed_lambda = std::numeric_limits<double>::quiet_NaN();  // set => frozen
    };
    /// Always-on queue of an excluded zero-demand class; contributes only a
    /// constant base-load cost.
    struct FixedQueue {
        int dc = 0;
        int cls = 0;
        bool green = true;
        double mu = 1.0;
    };

    std::vector<DataCenterSpec> dcs;
    std::vector<ServiceClass> classes;
    SlotEnvironment env;
    std::vector<Queue> queues;
    std::vector<FixedQueue> fixed_queues;
    std::vector<int> green_caps;
    std::vector<char> green_active;
    std::vector<char> class_active;       // demand above the degeneracy floor
    double fixed_cost = 0.0;              // objective constant from fixed_queues
    bool total_cap = true;
    bool relax_equality = false;
    bool infeasible_by_construction = false;
    bool degenerate_demand = false;
    std::string construction_note;
    std::shared_ptr<const DropRateModel> model;
    SearchConfig search;

    std::size_t n_queues() const { return queues.size(); }
    std::size_t n_vars() const { return 2 * queues.size(); }
    std::size_t n_equalities() const;

    /// Negated profit (minimization objective), gradient, and the profit
    /// decomposition, all on the packed variable vector.
    double objective(std::span<const double> x) const;
    std::vector<double> gradient(std::span<const double> x) const;
    double profit(std::span<const double> x) const { return -objective(x); }

    std::vector<double> pack(const Allocation& a) const;
    Allocation unpack(std::span<const double> x) const;
};

ProblemInstance build_problem(const SlotEnvironment& env,
                              std::span<const DataCenterSpec> dcs,
                              std::span<const ServiceClass> classes,
                              const SolveOptions& opts);

SolveResult solve(const ProblemInstance& problem, const SolveOptions& opts);

/// Gradient of the minimization objective at an allocation, packed like the
/// instance's variables.
std::vector<double> objective_gradient(const Allocation& point, const ProblemInstance& problem);

}  // namespace greendc
