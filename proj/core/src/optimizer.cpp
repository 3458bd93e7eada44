#include "greendc/optimizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace greendc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDemandFloor = 0.0;  // demand <= this => degenerate class

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Gd1Model final : public DropRateModel {
public:
    explicit Gd1Model(SearchConfig s) : search_(s) {}

    DropRateEval eval(double lam, double mu, const NormalizedClass& nc) const override {
        return drop_rate_eval(lam, mu, nc, search_);
    }
    double loss_prob(double lam, double mu, const NormalizedClass& nc) const override {
        if (lam <= 0.0 || nc.cv <= 0.0) return 0.0;
        const DropRateEval e = drop_rate_eval(lam, mu, nc, search_);
        return std::min(1.0, std::max(0.0, e.value / lam));
    }
    bool certified() const override { return true; }

private:
    SearchConfig search_;
};

// Projects a symmetric 2x2 [[a, b], [b, c]] onto the PSD cone.
void psd_project_2x2(double& a, double& b, double& c) {
    const double mean = 0.5 * (a + c);
    const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const double lo = mean - rad;
    if (lo >= 0.0) return;
    const double hi = mean + rad;
    if (hi <= 0.0) {
        a = b = c = 0.0;
        return;
    }
    // Eigenvector for hi: (b, hi - a) unless degenerate.
    double vx = b, vy = hi - a;
    double norm = std::hypot(vx, vy);
    if (norm == 0.0) {
        vx = 1.0;
        vy = 0.0;
        norm = 1.0;
    }
    vx /= norm;
    vy /= norm;
    a = hi * vx * vx;
    b = hi * vx * vy;
    c = hi * vy * vy;
}

}  // namespace

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::feasible_not_converged: return "feasible-not-converged";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::non_certified: return "non-certified";
    }
    return "unknown";
}

std::shared_ptr<const DropRateModel> gd1_drop_model(const SearchConfig& search) {
    return std::make_shared<Gd1Model>(search);
}

int green_server_cap(const DataCenterSpec& dc, double green_energy_kwh, double slot_seconds) {
    if (green_energy_kwh < 0.0)
        throw std::invalid_argument("green_server_cap: green_energy must be >= 0");
    if (slot_seconds <= 0.0)
        throw std::invalid_argument("green_server_cap: slot length must be > 0");
    const double hours = slot_seconds / 3600.0;
    const double avail_kw = green_energy_kwh / hours;
    const double per_server_kw = dc.peak_power * dc.pue;  // worst-case draw
    if (per_server_kw <= 0.0) return 0;
    return static_cast<int>(std::floor(avail_kw / per_server_kw + 1e-9));
}

std::size_t ProblemInstance::n_equalities() const {
    if (relax_equality) return 0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
        if (!class_active[j]) continue;
        bool has_free = false;
        for (const auto& q : queues)
            if (q.cls == static_cast<int>(j) && std::isnan(q.fixed_lambda)) has_free = true;
        if (has_free) ++n;
    }
    return n;
}

double ProblemInstance::objective(std::span<const double> x) const {
    double profit = -fixed_cost;
    for (std::size_t q = 0; q < queues.size(); ++q) {
        const auto& Q = queues[q];
        const double lam = x[2 * q];
        const double mu = x[2 * q + 1];
        const DropRateEval d = model->eval(lam, mu, Q.nc);
        profit += Q.income_coeff * lam - Q.mu_cost_coeff * mu - Q.drop_weight * d.value;
    }
    return -profit;
}

std::vector<double> ProblemInstance::gradient(std::span<const double> x) const {
    std::vector<double> g(n_vars(), 0.0);
    for (std::size_t q = 0; q < queues.size(); ++q) {
        const auto& Q = queues[q];
        const double lam = x[2 * q];
        const double mu = x[2 * q + 1];
        const DropRateEval d = model->eval(lam, mu, Q.nc);
        g[2 * q] = -(Q.income_coeff - Q.drop_weight * d.dlam);
        g[2 * q + 1] = -(-Q.mu_cost_coeff - Q.drop_weight * d.dmu);
    }
    return g;
}

std::vector<double> ProblemInstance::pack(const Allocation& a) const {
    std::vector<double> x(n_vars(), 0.0);
    for (std::size_t q = 0; q < queues.size(); ++q) {
        const auto& Q = queues[q];
        const QueueAllocation& qa =
            Q.green ? a.green[Q.dc][Q.cls] : a.brown[Q.dc][Q.cls];
        x[2 * q] = qa.alloc_rate;
        x[2 * q + 1] = qa.service_rate;
    }
    return x;
}

Allocation ProblemInstance::unpack(std::span<const double> x) const {
    Allocation a = Allocation::zeros(dcs.size(), classes.size());
    for (std::size_t q = 0; q < queues.size(); ++q) {
        const auto& Q = queues[q];
        QueueAllocation& qa = Q.green ? a.green[Q.dc][Q.cls] : a.brown[Q.dc][Q.cls];
        qa.alloc_rate = x[2 * q];
        qa.service_rate = x[2 * q + 1];
    }
    for (const auto& f : fixed_queues) {
        QueueAllocation& qa = f.green ? a.green[f.dc][f.cls] : a.brown[f.dc][f.cls];
        qa.alloc_rate = 0.0;
        qa.service_rate = f.mu;
    }
    return a;
}

std::vector<double> objective_gradient(const Allocation& point, const ProblemInstance& problem) {
    return problem.gradient(problem.pack(point));
}

ProblemInstance build_problem(const SlotEnvironment& env,
                              std::span<const DataCenterSpec> dcs,
                              std::span<const ServiceClass> classes,
                              const SolveOptions& opts) {
    const std::size_t nd = dcs.size();
    const std::size_t ncl = classes.size();
    if (nd == 0 || ncl == 0)
        throw std::invalid_argument("build_problem: need at least one DC and one class");
    for (const auto& d : dcs) d.validate();
    for (const auto& c : classes) c.validate();
    env.validate(nd, ncl);

    ProblemInstance P;
    P.dcs.assign(dcs.begin(), dcs.end());
    P.classes.assign(classes.begin(), classes.end());
    P.env = env;
    P.total_cap = opts.total_capacity_constraint;
    P.relax_equality = opts.relax_demand_equality;
    P.search = opts.search;
    P.model = gd1_drop_model(opts.search);

    const double T = env.slot_length;

    P.class_active.assign(ncl, 1);
    for (std::size_t j = 0; j < ncl; ++j) {
        if (env.class_demand(j) <= kDemandFloor) {
            P.class_active[j] = 0;
            P.degenerate_demand = true;
        }
    }

    P.green_caps.resize(nd);
    P.green_active.assign(nd, 0);
    double min_server_mass = 0.0;  // per-DC server units needed by active classes
    for (std::size_t j = 0; j < ncl; ++j)
        if (P.class_active[j]) min_server_mass += 1.0 / classes[j].per_server_capacity;
    for (std::size_t i = 0; i < nd; ++i) {
        P.green_caps[i] = green_server_cap(dcs[i], env.green_energy[i], T);
        // The green side exists only when mu >= 1 per class fits strictly
        // inside the cap; otherwise those queues are off entirely.
        P.green_active[i] =
            (P.green_caps[i] >= 1 && min_server_mass < P.green_caps[i] * (1.0 - 1e-9)) ? 1 : 0;
    }

    // Zero-demand classes keep one always-on brown queue per DC at the minimum
    // service rate; only its base load enters the objective.
    for (std::size_t i = 0; i < nd; ++i) {
        for (std::size_t j = 0; j < ncl; ++j) {
            if (P.class_active[j]) continue;
            ProblemInstance::FixedQueue f;
            f.dc = static_cast<int>(i);
            f.cls = static_cast<int>(j);
            f.green = false;
            f.mu = 1.0;
            P.fixed_queues.push_back(f);
            const double servers = f.mu / classes[j].per_server_capacity;
            P.fixed_cost += env.brown_price[i] * dcs[i].base_load_per_server() * servers * T *
                            kKwhPerKwSecond;
        }
    }

    for (std::size_t i = 0; i < nd; ++i) {
        for (std::size_t j = 0; j < ncl; ++j) {
            if (!P.class_active[j]) continue;
            QueueSpec qs;
            qs.deadline = classes[j].deadline;
            qs.network_delay = dcs[i].network_delay;
            qs.alloc_rate = 0.0;
            qs.service_rate = std::max(1.0, env.class_demand(j));
            if (qs.effective_deadline() <= 0.0)
                throw std::invalid_argument("build_problem: network delay of " + dcs[i].name +
                                            " exceeds deadline of " + classes[j].name);
            const NormalizedClass nc = NormalizedClass::from(env.class_stats[j], qs);
            for (int side = 0; side < 2; ++side) {
                const bool green = side == 0;
                if (green && !P.green_active[i]) continue;
                ProblemInstance::Queue Q;
                Q.dc = static_cast<int>(i);
                Q.cls = static_cast<int>(j);
                Q.green = green;
                Q.nc = nc;
                Q.capacity = classes[j].per_server_capacity;
                const double price = green ? dcs[i].green_unit_cost : env.brown_price[i];
                const double energy_coeff = price * T * kKwhPerKwSecond;
                Q.income_coeff =
                    classes[j].income * T -
                    energy_coeff * dcs[i].prop_load_per_server() / classes[j].per_server_capacity;
                Q.mu_cost_coeff =
                    energy_coeff * dcs[i].base_load_per_server() / classes[j].per_server_capacity;
                Q.drop_weight =
                    (classes[j].income + classes[j].penalty) * T -
                    energy_coeff * dcs[i].prop_load_per_server() / classes[j].per_server_capacity;
                Q.drop_threshold = classes[j].drop_threshold;
                Q.sla_active = env.class_stats[j].variance > 0.0;
                if (Q.sla_active && Q.drop_threshold <= 0.0) {
                    P.infeasible_by_construction = true;
                    P.construction_note = "drop threshold 0 for class " + classes[j].name +
                                          " cannot be met with stochastic arrivals";
                }
                P.queues.push_back(Q);
            }
        }
    }

    // Cheap capacity screen: every DC must fit the minimum service rates.
    if (P.total_cap) {
        for (std::size_t i = 0; i < nd; ++i) {
            double fixed_mass = 0.0;
            for (const auto& f : P.fixed_queues)
                if (f.dc == static_cast<int>(i))
                    fixed_mass += f.mu / classes[f.cls].per_server_capacity;
            double need = fixed_mass;
            for (const auto& Q : P.queues)
                if (Q.dc == static_cast<int>(i)) need += 1.0 / Q.capacity;
            if (need > dcs[i].max_servers) {
                P.infeasible_by_construction = true;
                P.construction_note = "minimum service rates exceed max_servers at " + dcs[i].name;
            }
        }
    }
    return P;
}

// ---------------------------------------------------------------------------
// Barrier solver internals
// ---------------------------------------------------------------------------

namespace {

enum class CKind { lam_nonneg, lam_le_mu, mu_ge_one, sla, green_cap, total_cap, demand_le };

struct CRow {
    CKind kind;
    int queue = -1;
    int dc = -1;
    int cls = -1;
    double rhs = 0.0;
    double scale = 1.0;
    bool soft = false;  // phase-1: relaxed by s
};

struct Candidate {
    VectorXd x;  // full 2*nq vector
    double profit = -kInf;
    bool feasible = false;
    int iterations = 0;
    KktResiduals kkt;
    bool converged = false;
    std::string note;
};

class BarrierSolver {
public:
    BarrierSolver(const ProblemInstance& P, const SolveOptions& opts) : P_(P), opts_(opts) {
        const std::size_t nq = P.n_queues();
        lam_var_.assign(nq, -1);
        mu_var_.assign(nq, -1);
        int v = 0;
        for (std::size_t q = 0; q < nq; ++q) {
            if (std::isnan(P.queues[q].fixed_lambda)) lam_var_[q] = v++;
            mu_var_[q] = v++;
        }
        nfree_ = v;
        build_rows();
        build_equalities();
    }

    int nfree() const { return nfree_; }

    // Maps a free-variable vector to the full packed vector.
    VectorXd full_x(const VectorXd& z) const {
        VectorXd x(2 * P_.n_queues());
        for (std::size_t q = 0; q < P_.n_queues(); ++q) {
            x[2 * q] = lam_var_[q] >= 0 ? z[lam_var_[q]] : P_.queues[q].fixed_lambda;
            x[2 * q + 1] = z[mu_var_[q]];
        }
        return x;
    }

    VectorXd z_from_full(const VectorXd& x) const {
        VectorXd z(nfree_);
        for (std::size_t q = 0; q < P_.n_queues(); ++q) {
            if (lam_var_[q] >= 0) z[lam_var_[q]] = x[2 * q];
            z[mu_var_[q]] = x[2 * q + 1];
        }
        return z;
    }

    Candidate run(const VectorXd& x0_full) {
        Candidate cand;
        iterations_ = 0;

        VectorXd z = z_from_full(x0_full);
        if (!equalities_hold(z)) project_equalities(z);

        if (!strictly_feasible(z)) {
            if (!phase1(z)) {
                cand.feasible = false;
                cand.iterations = iterations_;
                cand.note = worst_violation_note(z);
                return cand;
            }
        }
        const bool converged = phase2(z);
        cand.x = full_x(z);
        cand.profit = P_.profit(std::vector<double>(cand.x.data(), cand.x.data() + cand.x.size()));
        cand.feasible = true;
        cand.converged = converged;
        cand.iterations = iterations_;
        cand.kkt = kkt_residuals(z);
        return cand;
    }

private:
    const ProblemInstance& P_;
    const SolveOptions& opts_;
    std::vector<int> lam_var_, mu_var_;
    int nfree_ = 0;
    std::vector<CRow> rows_;
    MatrixXd A_;  // equality matrix over free vars
    VectorXd b_;
    int iterations_ = 0;
    double final_w_ = 0.0;

    void build_rows() {
        const auto& queues = P_.queues;
        for (std::size_t q = 0; q < queues.size(); ++q) {
            if (lam_var_[q] >= 0)
                rows_.push_back({CKind::lam_nonneg, static_cast<int>(q), -1, -1, 0.0, 1.0, false});
            rows_.push_back({CKind::lam_le_mu, static_cast<int>(q), -1, -1, 0.0, 1.0, false});
            rows_.push_back({CKind::mu_ge_one, static_cast<int>(q), -1, -1, 1.0, 1.0, true});
            if (queues[q].sla_active)
                rows_.push_back({CKind::sla, static_cast<int>(q), -1, -1, queues[q].drop_threshold,
                                 1.0 + queues[q].drop_threshold, true});
        }
        for (std::size_t i = 0; i < P_.dcs.size(); ++i) {
            if (P_.green_active[i]) {
                rows_.push_back({CKind::green_cap, -1, static_cast<int>(i), -1,
                                 static_cast<double>(P_.green_caps[i]),
                                 1.0 + P_.green_caps[i], true});
            }
            if (P_.total_cap) {
                double fixed_mass = 0.0;
                for (const auto& f : P_.fixed_queues)
                    if (f.dc == static_cast<int>(i))
                        fixed_mass += f.mu / P_.classes[f.cls].per_server_capacity;
                const double rhs = P_.dcs[i].max_servers - fixed_mass;
                rows_.push_back({CKind::total_cap, -1, static_cast<int>(i), -1, rhs,
                                 1.0 + std::abs(rhs), true});
            }
        }
        if (P_.relax_equality) {
            for (std::size_t j = 0; j < P_.classes.size(); ++j) {
                if (!P_.class_active[j]) continue;
                rows_.push_back({CKind::demand_le, -1, -1, static_cast<int>(j),
                                 P_.env.class_demand(j), 1.0 + P_.env.class_demand(j), true});
            }
        }
    }

    void build_equalities() {
        std::vector<int> eq_classes;
        if (!P_.relax_equality) {
            for (std::size_t j = 0; j < P_.classes.size(); ++j) {
                if (!P_.class_active[j]) continue;
                bool has_free = false;
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].cls == static_cast<int>(j) && lam_var_[q] >= 0)
                        has_free = true;
                if (has_free) eq_classes.push_back(static_cast<int>(j));
            }
        }
        A_ = MatrixXd::Zero(static_cast<int>(eq_classes.size()), nfree_);
        b_ = VectorXd::Zero(static_cast<int>(eq_classes.size()));
        for (std::size_t r = 0; r < eq_classes.size(); ++r) {
            const int j = eq_classes[r];
            double rhs = P_.env.class_demand(j);
            for (std::size_t q = 0; q < P_.queues.size(); ++q) {
                if (P_.queues[q].cls != j) continue;
                if (lam_var_[q] >= 0)
                    A_(static_cast<int>(r), lam_var_[q]) = 1.0;
                else
                    rhs -= P_.queues[q].fixed_lambda;
            }
            b_[static_cast<int>(r)] = rhs;
        }
    }

    bool equalities_hold(const VectorXd& z) const {
        if (A_.rows() == 0) return true;
        return ((A_ * z - b_).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + b_.cwiseAbs().maxCoeff()));
    }

    // Least-squares correction onto the equality manifold.
    void project_equalities(VectorXd& z) const {
        if (A_.rows() == 0) return;
        const VectorXd r = A_ * z - b_;
        const MatrixXd AAt = A_ * A_.transpose();
        z -= A_.transpose() * AAt.ldlt().solve(r);
    }

    // Constraint value; x is the full packed vector, drops the per-queue evals.
    double row_value(const CRow& row, const VectorXd& x,
                     const std::vector<DropRateEval>& drops) const {
        switch (row.kind) {
            case CKind::lam_nonneg: return -x[2 * row.queue];
            case CKind::lam_le_mu: return x[2 * row.queue] - x[2 * row.queue + 1];
            case CKind::mu_ge_one: return 1.0 - x[2 * row.queue + 1];
            case CKind::sla: return drops[row.queue].value - row.rhs;
            case CKind::green_cap: {
                double sum = 0.0;
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].green && P_.queues[q].dc == row.dc)
                        sum += x[2 * q + 1] / P_.queues[q].capacity;
                return sum - row.rhs;
            }
            case CKind::total_cap: {
                double sum = 0.0;
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].dc == row.dc) sum += x[2 * q + 1] / P_.queues[q].capacity;
                return sum - row.rhs;
            }
            case CKind::demand_le: {
                double sum = 0.0;
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].cls == row.cls) sum += x[2 * q];
                return sum - row.rhs;
            }
        }
        return 0.0;
    }

    // Gradient of a row over free variables (appended s column excluded).
    void row_gradient(const CRow& row, const VectorXd& x,
                      const std::vector<DropRateEval>& drops, VectorXd& out) const {
        out.setZero();
        switch (row.kind) {
            case CKind::lam_nonneg: out[lam_var_[row.queue]] = -1.0; break;
            case CKind::lam_le_mu:
                if (lam_var_[row.queue] >= 0) out[lam_var_[row.queue]] = 1.0;
                out[mu_var_[row.queue]] = -1.0;
                break;
            case CKind::mu_ge_one: out[mu_var_[row.queue]] = -1.0; break;
            case CKind::sla:
                if (lam_var_[row.queue] >= 0) out[lam_var_[row.queue]] = drops[row.queue].dlam;
                out[mu_var_[row.queue]] = drops[row.queue].dmu;
                break;
            case CKind::green_cap:
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].green && P_.queues[q].dc == row.dc)
                        out[mu_var_[q]] = 1.0 / P_.queues[q].capacity;
                break;
            case CKind::total_cap:
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].dc == row.dc) out[mu_var_[q]] = 1.0 / P_.queues[q].capacity;
                break;
            case CKind::demand_le:
                for (std::size_t q = 0; q < P_.queues.size(); ++q)
                    if (P_.queues[q].cls == row.cls && lam_var_[q] >= 0)
                        out[lam_var_[q]] = 1.0;
                break;
        }
        (void)x;
    }

    std::vector<DropRateEval> eval_drops(const VectorXd& x) const {
        std::vector<DropRateEval> drops(P_.n_queues());
        for (std::size_t q = 0; q < P_.n_queues(); ++q)
            drops[q] = P_.model->eval(x[2 * q], x[2 * q + 1], P_.queues[q].nc);
        return drops;
    }

    // Linear (non-SLA) rows are checked without evaluating the loss model so
    // the line search can reject points outside the model's domain first.
    bool linear_rows_strict(const VectorXd& x, double margin) const {
        for (const auto& row : rows_) {
            if (row.kind == CKind::sla) continue;
            if (row.soft && phase1_mode_) continue;
            const double g = row_value(row, x, {});
            if (!(g < -margin * row.scale)) return false;
        }
        return true;
    }

    bool strictly_feasible(const VectorXd& z) const {
        const VectorXd x = full_x(z);
        if (!linear_rows_strict(x, 1e-12)) return false;
        const auto drops = eval_drops(x);
        for (const auto& row : rows_) {
            if (row.kind != CKind::sla) continue;
            if (!(row_value(row, x, drops) < -1e-12 * row.scale)) return false;
        }
        return true;
    }

    std::string worst_violation_note(const VectorXd& z) const {
        const VectorXd x = full_x(z);
        const auto drops = eval_drops(x);
        double worst = -kInf;
        std::string name = "none";
        for (const auto& row : rows_) {
            const double g = row_value(row, x, drops) / row.scale;
            if (g > worst) {
                worst = g;
                switch (row.kind) {
                    case CKind::lam_nonneg: name = "lambda >= 0"; break;
                    case CKind::lam_le_mu: name = "lambda <= mu"; break;
                    case CKind::mu_ge_one: name = "mu >= 1"; break;
                    case CKind::sla:
                        name = "drop-rate threshold (" +
                               P_.dcs[P_.queues[row.queue].dc].name + ", " +
                               P_.classes[P_.queues[row.queue].cls].name + ")";
                        break;
                    case CKind::green_cap: name = "green cap at " + P_.dcs[row.dc].name; break;
                    case CKind::total_cap: name = "server cap at " + P_.dcs[row.dc].name; break;
                    case CKind::demand_le: name = "demand bound"; break;
                }
            }
        }
        return "most violated constraint: " + name;
    }

    // --- phase handling ----------------------------------------------------

    bool phase1_mode_ = false;
    double s_val_ = 0.0;  // phase-1 slack variable

    struct FEval {
        bool ok = false;
        double value = kInf;
        double f0 = 0.0;
    };

    // Barrier value at (z, s). In phase 1 soft rows become g - s <= 0 and the
    // objective is s; hard rows stay as they are.
    FEval barrier_value(const VectorXd& z, double w, double s) const {
        FEval fe;
        const VectorXd x = full_x(z);
        // Domain: lambda > 0 for every free lambda before touching the model.
        for (std::size_t q = 0; q < P_.n_queues(); ++q)
            if (lam_var_[q] >= 0 && x[2 * q] <= 0.0) return fe;
        const auto drops = eval_drops(x);
        double phi = 0.0;
        for (const auto& row : rows_) {
            double g = row_value(row, x, drops);
            if (phase1_mode_ && row.soft) g -= s;
            if (!(g < 0.0)) return fe;
            phi -= std::log(-g / row.scale);
        }
        double f0;
        if (phase1_mode_) {
            f0 = s;
        } else {
            f0 = P_.objective(std::vector<double>(x.data(), x.data() + x.size()));
        }
        fe.ok = true;
        fe.f0 = f0;
        fe.value = f0 + w * phi;
        return fe;
    }

    // Gradient and Hessian of the barrier objective over free vars (+ s).
    void barrier_derivs(const VectorXd& z, double w, double s, double& F, VectorXd& grad,
                        MatrixXd& H) const {
        const int dim = nfree_ + (phase1_mode_ ? 1 : 0);
        const VectorXd x = full_x(z);
        const auto drops = eval_drops(x);
        grad = VectorXd::Zero(dim);
        H = MatrixXd::Zero(dim, dim);
        double phi = 0.0;

        double f0 = 0.0;
        if (phase1_mode_) {
            f0 = s;
            grad[nfree_] += 1.0;
        } else {
            std::vector<double> xs(x.data(), x.data() + x.size());
            f0 = P_.objective(xs);
            for (std::size_t q = 0; q < P_.n_queues(); ++q) {
                const auto& Q = P_.queues[q];
                const auto& d = drops[q];
                const double glam = -(Q.income_coeff - Q.drop_weight * d.dlam);
                const double gmu = -(-Q.mu_cost_coeff - Q.drop_weight * d.dmu);
                if (lam_var_[q] >= 0) grad[lam_var_[q]] += glam;
                grad[mu_var_[q]] += gmu;
                if (Q.drop_weight > 0.0) {
                    double hll = Q.drop_weight * d.d2_lam_lam;
                    double hlm = Q.drop_weight * d.d2_lam_mu;
                    double hmm = Q.drop_weight * d.d2_mu_mu;
                    psd_project_2x2(hll, hlm, hmm);
                    if (lam_var_[q] >= 0) {
                        H(lam_var_[q], lam_var_[q]) += hll;
                        H(lam_var_[q], mu_var_[q]) += hlm;
                        H(mu_var_[q], lam_var_[q]) += hlm;
                    }
                    H(mu_var_[q], mu_var_[q]) += hmm;
                }
            }
        }

        VectorXd gk(nfree_);
        for (const auto& row : rows_) {
            double g = row_value(row, x, drops);
            if (phase1_mode_ && row.soft) g -= s;
            phi -= std::log(-g / row.scale);
            row_gradient(row, x, drops, gk);
            const double inv = 1.0 / (-g);

            // grad phi += gk / (-g); with s column for soft rows.
            for (int v = 0; v < nfree_; ++v)
                if (gk[v] != 0.0) grad[v] += w * inv * gk[v];
            double gs = 0.0;
            if (phase1_mode_ && row.soft) {
                gs = -1.0;
                grad[nfree_] += w * inv * gs;
            }

            // Hessian: outer product term.
            for (int a = 0; a < nfree_; ++a) {
                if (gk[a] == 0.0) continue;
                for (int bq = a; bq < nfree_; ++bq) {
                    if (gk[bq] == 0.0) continue;
                    const double v = w * inv * inv * gk[a] * gk[bq];
                    H(a, bq) += v;
                    if (bq != a) H(bq, a) += v;
                }
            }
            if (phase1_mode_ && row.soft) {
                for (int a = 0; a < nfree_; ++a) {
                    if (gk[a] == 0.0) continue;
                    const double v = w * inv * inv * gk[a] * gs;
                    H(a, nfree_) += v;
                    H(nfree_, a) += v;
                }
                H(nfree_, nfree_) += w * inv * inv;
            }

            // Curvature of the SLA row itself.
            if (row.kind == CKind::sla) {
                const auto& d = drops[row.queue];
                double hll = d.d2_lam_lam, hlm = d.d2_lam_mu, hmm = d.d2_mu_mu;
                psd_project_2x2(hll, hlm, hmm);
                const int lv = lam_var_[row.queue];
                const int mv = mu_var_[row.queue];
                if (lv >= 0) {
                    H(lv, lv) += w * inv * hll;
                    H(lv, mv) += w * inv * hlm;
                    H(mv, lv) += w * inv * hlm;
                }
                H(mv, mv) += w * inv * hmm;
            }
        }
        F = f0 + w * phi;
    }

    // One centering stage: damped Newton on the equality manifold.
    // Inexact centers are fine for the path; the stage cap and the
    // stagnation break keep stiff geometries (drop-rate walls change
    // double-exponentially in mu) from eating the whole budget.
    // Returns false when the global iteration budget is exhausted.
    bool center(VectorXd& z, double w, double& s, double tol_scale, int stage_cap = 60) {
        const int dim = nfree_ + (phase1_mode_ ? 1 : 0);
        VectorXd grad(dim);
        MatrixXd H(dim, dim);
        const int ne = static_cast<int>(A_.rows());

        double prev_decrement = kInf;
        int stagnant = 0;
        for (int local = 0; local < stage_cap; ++local) {
            if (iterations_ >= opts_.max_iterations) return false;
            double F;
            barrier_derivs(z, w, s, F, grad, H);

            // Newton step with A [dz] = 0 (s column unconstrained).
            MatrixXd Af = MatrixXd::Zero(ne, dim);
            if (ne > 0) Af.leftCols(nfree_) = A_;

            VectorXd step(dim);
            double ridge = 0.0;
            for (;;) {
                MatrixXd Hr = H;
                if (ridge > 0.0) Hr.diagonal().array() += ridge;
                Eigen::LLT<MatrixXd> llt(Hr);
                if (llt.info() == Eigen::Success) {
                    if (ne == 0) {
                        step = -llt.solve(grad);
                    } else {
                        const MatrixXd W = llt.solve(Af.transpose());
                        const VectorXd hg = llt.solve(grad);
                        const MatrixXd S = Af * W;
                        const VectorXd nu = S.ldlt().solve(-(Af * hg));
                        step = -(hg + W * nu);
                    }
                    break;
                }
                ridge = ridge == 0.0 ? 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff())
                                     : ridge * 100.0;
                if (ridge > 1e6) { step.setZero(); break; }
            }

            const double decrement = -grad.dot(step);
            if (!(decrement > 0.0)) return true;  // numerically centered
            if (0.5 * decrement <= tol_scale * (1.0 + std::abs(F))) return true;
            if (decrement >= 0.9 * prev_decrement) {
                if (++stagnant >= 3) return true;  // numerical floor reached
            } else {
                stagnant = 0;
            }
            prev_decrement = decrement;

            ++iterations_;

            // Backtracking line search: stay in the domain, then Armijo.
            double tstep = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls) {
                VectorXd zt = z + tstep * step.head(nfree_);
                const double st = phase1_mode_ ? s + tstep * step[nfree_] : s;
                const FEval fe = barrier_value(zt, w, st);
                if (fe.ok && fe.value <= F - 0.25 * tstep * decrement) {
                    z = zt;
                    s = st;
                    moved = true;
                    break;
                }
                tstep *= 0.5;
            }
            if (!moved) return true;  // stalled; accept the centered-enough point

            if (phase1_mode_ && s < -1e-3) return true;  // interior found early
        }
        return true;  // stage cap: continue the path from the inexact center
    }

    int count_barrier_rows() const { return static_cast<int>(rows_.size()); }

    bool phase1(VectorXd& z) {
        // Fallback start satisfying the hard rows and the equalities.
        if (!hard_rows_ok(z)) z = fallback_start();
        phase1_mode_ = true;
        const VectorXd x = full_x(z);
        const auto drops = eval_drops(x);
        double smax = 0.0;
        for (const auto& row : rows_)
            if (row.soft) smax = std::max(smax, row_value(row, x, drops));
        s_val_ = smax + 1.0;

        double w = 1.0 + std::abs(s_val_);
        const int m = count_barrier_rows();
        for (int outer = 0; outer < 80; ++outer) {
            if (!center(z, w, s_val_, 1e-9)) break;
            if (s_val_ < -1e-3) break;
            if (w * m < 1e-10 * (1.0 + std::abs(s_val_))) break;
            w *= opts_.barrier_reduction;
        }
        phase1_mode_ = false;
        if (s_val_ >= 0.0) return false;
        return strictly_feasible(z);
    }

    bool hard_rows_ok(const VectorXd& z) const {
        const VectorXd x = full_x(z);
        for (const auto& row : rows_) {
            if (row.soft) continue;
            if (!(row_value(row, x, {}) < 0.0)) return false;
        }
        return true;
    }

    VectorXd fallback_start() const {
        // Equal split per class over its queues; mu comfortably above lambda.
        VectorXd x(2 * P_.n_queues());
        std::vector<int> count(P_.classes.size(), 0);
        for (const auto& Q : P_.queues)
            if (std::isnan(Q.fixed_lambda)) count[Q.cls]++;
        std::vector<double> fixed_sum(P_.classes.size(), 0.0);
        for (const auto& Q : P_.queues)
            if (!std::isnan(Q.fixed_lambda)) fixed_sum[Q.cls] += Q.fixed_lambda;
        for (std::size_t q = 0; q < P_.n_queues(); ++q) {
            const auto& Q = P_.queues[q];
            double lam;
            if (std::isnan(Q.fixed_lambda)) {
                const double remaining = P_.env.class_demand(Q.cls) - fixed_sum[Q.cls];
                lam = std::max(remaining, 0.0) / std::max(count[Q.cls], 1);
            } else {
                lam = Q.fixed_lambda;
            }
            x[2 * q] = lam;
            x[2 * q + 1] = std::max(1.2 * lam, 1.1);
        }
        return z_from_full(x);
    }

    bool phase2(VectorXd& z) {
        s_val_ = 0.0;
        const int m = count_barrier_rows();
        const VectorXd x0 = full_x(z);
        const double scale =
            1.0 + std::abs(P_.profit(std::vector<double>(x0.data(), x0.data() + x0.size())));
        double w = opts_.barrier_initial_weight * scale / std::max(m, 1);
        bool budget_ok = true;
        for (int outer = 0; outer < 120; ++outer) {
            const bool last = w * m <= opts_.tolerance * scale;
            budget_ok = center(z, w, s_val_, last ? 1e-12 : 1e-9);
            final_w_ = w;
            if (!budget_ok) break;
            if (last) break;
            w *= opts_.barrier_reduction;
        }
        return budget_ok;
    }

    KktResiduals kkt_residuals(const VectorXd& z) const {
        KktResiduals r;
        const VectorXd x = full_x(z);
        const auto drops = eval_drops(x);
        std::vector<double> xs(x.data(), x.data() + x.size());
        const std::vector<double> g0 = P_.gradient(xs);

        VectorXd grad = VectorXd::Zero(nfree_);
        for (std::size_t q = 0; q < P_.n_queues(); ++q) {
            if (lam_var_[q] >= 0) grad[lam_var_[q]] += g0[2 * q];
            grad[mu_var_[q]] += g0[2 * q + 1];
        }
        double gnorm = 1.0 + grad.cwiseAbs().maxCoeff();

        VectorXd gk(nfree_);
        for (const auto& row : rows_) {
            const double g = row_value(row, x, drops);
            r.inequality = std::max(r.inequality, g / row.scale);
            const double mult = final_w_ / std::max(-g, 1e-300);
            row_gradient(row, x, drops, gk);
            grad += mult * gk;
        }
        if (A_.rows() > 0) {
            const VectorXd req = A_ * z - b_;
            r.equality = req.cwiseAbs().maxCoeff() / (1.0 + b_.cwiseAbs().maxCoeff());
            // Least-squares multipliers for the equality rows.
            const MatrixXd AAt = A_ * A_.transpose();
            const VectorXd nu = AAt.ldlt().solve(-(A_ * grad));
            grad += A_.transpose() * nu;
        }
        r.stationarity = grad.cwiseAbs().maxCoeff() / gnorm;
        r.inequality = std::max(0.0, r.inequality);
        r.gap = final_w_ * count_barrier_rows();
        return r;
    }

public:
    KktResiduals residuals_at(const VectorXd& z) const { return kkt_residuals(z); }
};

// Constructive proportional-split start. start_idx 0 is deterministic;
// higher indices perturb the split weights.
VectorXd constructive_start(const ProblemInstance& P, const SolveOptions& opts, int start_idx) {
    std::mt19937_64 eng(opts.seed + 0x9E3779B97F4A7C15ULL * static_cast<unsigned long long>(start_idx));
    std::normal_distribution<double> N(0.0, 1.0);
    auto jitter = [&](double sigma) { return start_idx == 0 ? 1.0 : std::exp(sigma * N(eng)); };

    const std::size_t nd = P.dcs.size();
    const std::size_t ncl = P.classes.size();
    const std::size_t nq = P.n_queues();
    std::vector<int> qof(nd * ncl * 2, -1);
    for (std::size_t q = 0; q < nq; ++q) {
        const auto& Q = P.queues[q];
        qof[(Q.dc * ncl + Q.cls) * 2 + (Q.green ? 0 : 1)] = static_cast<int>(q);
    }
    VectorXd x = VectorXd::Zero(2 * nq);

    // Green service rates: one server-equivalent per class plus a share of the
    // remaining budget, weighted by demand.
    for (std::size_t i = 0; i < nd; ++i) {
        if (!P.green_active[i]) continue;
        double min_mass = 0.0;
        std::vector<double> wgt(ncl, 0.0);
        double wsum = 0.0;
        for (std::size_t j = 0; j < ncl; ++j) {
            if (qof[(i * ncl + j) * 2] < 0) continue;
            min_mass += 1.0 / P.classes[j].per_server_capacity;
            wgt[j] = (P.env.class_demand(j) / P.classes[j].per_server_capacity + 1e-6) * jitter(0.25);
            wsum += wgt[j];
        }
        const double budget = 0.9 * (P.green_caps[i] - min_mass);
        for (std::size_t j = 0; j < ncl; ++j) {
            const int q = qof[(i * ncl + j) * 2];
            if (q < 0) continue;
            const double mass = 1.0 / P.classes[j].per_server_capacity +
                                (wsum > 0.0 ? budget * wgt[j] / wsum : 0.0);
            x[2 * q + 1] = mass * P.classes[j].per_server_capacity;
        }
    }

    // Workload split: green first, proportional to the green headroom, then
    // the remainder across DCs weighted by ascending brown price.
    std::vector<std::size_t> price_rank(nd);
    for (std::size_t i = 0; i < nd; ++i) price_rank[i] = i;
    std::sort(price_rank.begin(), price_rank.end(), [&](std::size_t a, std::size_t b) {
        if (P.env.brown_price[a] != P.env.brown_price[b])
            return P.env.brown_price[a] < P.env.brown_price[b];
        return a < b;
    });
    std::vector<double> rank_w(nd, 0.0);
    for (std::size_t r = 0; r < nd; ++r) rank_w[price_rank[r]] = jitter(0.3) / (1.0 + r);

    for (std::size_t j = 0; j < ncl; ++j) {
        if (!P.class_active[j]) continue;
        const double demand = P.env.class_demand(j);
        double cap_sum = 0.0;
        std::vector<double> cap(nd, 0.0);
        for (std::size_t i = 0; i < nd; ++i) {
            const int q = qof[(i * ncl + j) * 2];
            if (q < 0) continue;
            cap[i] = 0.85 * x[2 * q + 1];
            cap_sum += cap[i];
        }
        const double green_total = std::min(0.9 * demand, 0.9 * cap_sum);
        for (std::size_t i = 0; i < nd; ++i) {
            const int q = qof[(i * ncl + j) * 2];
            if (q < 0 || cap_sum <= 0.0) continue;
            x[2 * q] = green_total * cap[i] / cap_sum;
        }
        double remainder = demand - (cap_sum > 0.0 ? green_total : 0.0);
        double wsum = 0.0;
        for (std::size_t i = 0; i < nd; ++i) wsum += rank_w[i];
        for (std::size_t i = 0; i < nd; ++i) {
            const int q = qof[(i * ncl + j) * 2 + 1];
            const double lam = remainder * rank_w[i] / wsum;
            x[2 * q] = lam;
            x[2 * q + 1] = std::max(1.2 * jitter(0.15) * lam, 1.0 + 0.05 * jitter(0.2));
        }
    }

    // Respect the total server cap by shrinking brown service rates.
    if (P.total_cap) {
        for (std::size_t i = 0; i < nd; ++i) {
            double fixed_mass = 0.0;
            for (const auto& f : P.fixed_queues)
                if (f.dc == static_cast<int>(i))
                    fixed_mass += f.mu / P.classes[f.cls].per_server_capacity;
            double green_mass = 0.0, brown_mass = 0.0;
            for (std::size_t q = 0; q < nq; ++q) {
                const auto& Q = P.queues[q];
                if (Q.dc != static_cast<int>(i)) continue;
                (Q.green ? green_mass : brown_mass) += x[2 * q + 1] / Q.capacity;
            }
            const double limit = 0.95 * P.dcs[i].max_servers - fixed_mass - green_mass;
            if (brown_mass > limit && brown_mass > 0.0) {
                const double f = std::max(0.0, limit / brown_mass);
                for (std::size_t q = 0; q < nq; ++q) {
                    const auto& Q = P.queues[q];
                    if (Q.dc != static_cast<int>(i) || Q.green) continue;
                    const double lam = x[2 * q];
                    x[2 * q + 1] = std::max({x[2 * q + 1] * f, 1.05 * lam, 1.02});
                }
            }
        }
    }

    // Nudge service rates up where the drop-rate constraint starts binding.
    for (int round = 0; round < 6; ++round) {
        bool any = false;
        for (std::size_t q = 0; q < nq; ++q) {
            const auto& Q = P.queues[q];
            if (!Q.sla_active) continue;
            const DropRateEval d = P.model->eval(x[2 * q], x[2 * q + 1], Q.nc);
            if (d.value >= 0.9 * Q.drop_threshold) {
                x[2 * q + 1] *= 1.3;
                any = true;
            }
        }
        if (!any) break;
    }
    return x;
}

}  // namespace

SolveResult solve(const ProblemInstance& P, const SolveOptions& opts) {
    SolveResult res;
    res.green_caps = P.green_caps;
    res.green_active = P.green_active;
    res.degenerate_demand = P.degenerate_demand;

    const ProfitabilityReport gate = profitability_check(P.classes, P.dcs, P.env);
    res.profitability_ok = gate.all_ok();
    res.gate_failures = gate.failing;

    if (P.infeasible_by_construction) {
        res.status = SolveStatus::infeasible;
        res.message = P.construction_note;
        res.allocation = Allocation::zeros(P.dcs.size(), P.classes.size());
        return res;
    }

    if (P.queues.empty()) {
        // Nothing to decide: only always-on queues of zero-demand classes.
        std::vector<double> empty;
        res.allocation = P.unpack(empty);
        res.objective = -P.fixed_cost;
        res.status = SolveStatus::optimal;
        if (res.degenerate_demand) res.message = "degenerate demand: no allocatable workload";
        return res;
    }

    BarrierSolver solver(P, opts);
    Candidate best;
    int total_iters = 0;
    std::string fail_note;
    const int starts = std::max(1, opts.multistart);
    for (int s = 0; s < starts; ++s) {
        const VectorXd x0 = constructive_start(P, opts, s);
        Candidate c = solver.run(x0);
        total_iters += c.iterations;
        if (!c.feasible) {
            if (fail_note.empty()) fail_note = c.note;
            continue;
        }
        if (!best.feasible || c.profit > best.profit) best = std::move(c);
    }
    res.iterations = total_iters;

    if (!best.feasible) {
        res.status = SolveStatus::infeasible;
        res.message = fail_note.empty() ? "no feasible point found" : fail_note;
        res.allocation = Allocation::zeros(P.dcs.size(), P.classes.size());
        return res;
    }

    // Epsilon floor: allocations below the floor are empty queues; their mass
    // moves to the largest sibling so the demand equality stays exact.
    VectorXd x = best.x;
    for (std::size_t j = 0; j < P.classes.size(); ++j) {
        if (!P.class_active[j]) continue;
        const double floor = opts.epsilon_alloc_frac * P.env.class_demand(j);
        double moved = 0.0;
        int biggest = -1;
        for (std::size_t q = 0; q < P.n_queues(); ++q) {
            if (P.queues[q].cls != static_cast<int>(j)) continue;
            if (!std::isnan(P.queues[q].fixed_lambda)) continue;
            if (x[2 * q] < floor) {
                moved += x[2 * q];
                x[2 * q] = 0.0;
            } else if (biggest < 0 || x[2 * q] > x[2 * biggest]) {
                biggest = static_cast<int>(q);
            }
        }
        // Redistribution keeps the demand equality exact; with the relaxed
        // program the snapped mass simply stays unserved.
        if (moved > 0.0 && biggest >= 0 && !P.relax_equality) {
            const double room = x[2 * biggest + 1] - x[2 * biggest];
            x[2 * biggest] += std::min(moved, std::max(0.0, room));
        }
    }

    res.allocation = P.unpack(std::vector<double>(x.data(), x.data() + x.size()));
    res.objective = P.profit(std::vector<double>(x.data(), x.data() + x.size()));
    res.kkt = best.kkt;

    // The duality-gap certificate is the optimality statement; the residuals
    // guard against line-search stalls masquerading as convergence. The
    // stationarity floor scales with the barrier Hessian's conditioning, so
    // its threshold is the loose one.
    const bool residuals_ok = best.kkt.stationarity <= 1e-2 && best.kkt.equality <= 1e-6 &&
                              best.kkt.inequality <= 1e-6;
    if (!best.converged || !residuals_ok) {
        res.status = SolveStatus::feasible_not_converged;
    } else {
        res.status = SolveStatus::optimal;
    }
    if (!res.profitability_ok || !P.model->certified()) {
        res.status = SolveStatus::non_certified;
        if (!res.profitability_ok)
            res.message = "profitability condition fails; concavity not guaranteed";
    }
    if (res.degenerate_demand && res.message.empty())
        res.message = "degenerate demand: some classes carry no workload";
    return res;
}

}  // namespace greendc
