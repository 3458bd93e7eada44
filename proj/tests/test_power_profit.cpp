#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "greendc/power_profit.hpp"
#include "greendc/validation.hpp"

using namespace greendc;
using Catch::Approx;

namespace {

DataCenterSpec paper_dc() {
    DataCenterSpec dc;
    dc.idle_power = 0.1;
    dc.peak_power = 0.2;
    dc.pue = 1.2;
    dc.max_servers = 10000;
    dc.network_delay = 0.0;
    dc.green_unit_cost = 0.03;
    return dc;
}

ServiceClass cls(double k, double income = 1e-3, double penalty = 2e-3,
                 double deadline = 2.0) {
    ServiceClass c;
    c.deadline = deadline;
    c.income = income;
    c.penalty = penalty;
    c.per_server_capacity = k;
    c.drop_threshold = 10.0;
    return c;
}

WorkloadStats iid(double mean, double sigma) {
    WorkloadStats st;
    st.mean_rate = mean;
    st.variance = sigma * sigma;
    st.autocov = {st.variance};
    return st;
}

}  // namespace

TEST_CASE("total_power base and proportional parts") {
    const DataCenterSpec dc = paper_dc();
    CHECK(total_power(1.0, 0.0, dc) == Approx(0.14).epsilon(1e-14));
    CHECK(total_power(1.0, 1.0, dc) == Approx(0.24).epsilon(1e-14));
    CHECK(total_power(0.0, 0.7, dc) == 0.0);
    CHECK_THROWS_AS(total_power(1.0, 1.2, dc), std::invalid_argument);
    CHECK_THROWS_AS(total_power(-1.0, 0.2, dc), std::invalid_argument);
    // Linear in servers and utilization.
    CHECK(total_power(7.0, 0.3, dc) ==
          Approx(7.0 * total_power(1.0, 0.3, dc)).epsilon(1e-13));
    const double du = total_power(1.0, 0.8, dc) - total_power(1.0, 0.3, dc);
    CHECK(du == Approx(0.5 * dc.prop_load_per_server()).epsilon(1e-13));
}

TEST_CASE("workload_power matches the aggregate formula") {
    const DataCenterSpec dc = paper_dc();
    const std::vector<ServiceClass> classes = {cls(10.0), cls(20.0)};

    // One idle server: service rate k, no workload.
    {
        const std::vector<QueueAllocation> qs = {{0.0, 10.0}, {0.0, 0.0}};
        const std::vector<double> pl = {0.0, 0.0};
        CHECK(workload_power(qs, pl, classes, dc) == Approx(0.14).epsilon(1e-13));
    }
    // Full utilization consistency with total_power.
    {
        const std::vector<QueueAllocation> qs = {{10.0, 10.0}, {0.0, 0.0}};
        const std::vector<double> pl = {0.0, 0.0};
        CHECK(workload_power(qs, pl, classes, dc) ==
              Approx(total_power(1.0, 1.0, dc)).epsilon(1e-13));
    }
    // Worked two-class example: 3 servers at utilization 1/2.
    {
        const std::vector<QueueAllocation> qs = {{10.0, 20.0}, {10.0, 20.0}};
        const std::vector<double> pl = {0.0, 0.0};
        CHECK(workload_power(qs, pl, classes, dc) ==
              Approx(total_power(3.0, 0.5, dc)).epsilon(1e-13));
    }
}

TEST_CASE("class_revenue boundary cases") {
    const ServiceClass c = cls(10.0, 2e-3, 3e-3);
    CHECK(class_revenue(100.0, 0.0, c, 900.0) == Approx(2e-3 * 100 * 900).epsilon(1e-14));
    CHECK(class_revenue(100.0, 1.0, c, 900.0) == Approx(-3e-3 * 100 * 900).epsilon(1e-14));
    const ServiceClass sym = cls(10.0, 2e-3, 2e-3);
    CHECK(class_revenue(100.0, 0.5, sym, 900.0) == Approx(0.0).margin(1e-12));
}

TEST_CASE("slot_profit breakdown consistency and the all-idle limit") {
    const std::vector<DataCenterSpec> dcs = {paper_dc(), paper_dc()};
    const std::vector<ServiceClass> classes = {cls(10.0), cls(5.0, 2e-3)};
    SlotEnvironment env;
    env.slot_length = 900.0;
    env.green_energy = {10.0, 5.0};
    env.brown_price = {0.08, 0.12};
    env.class_stats = {iid(100, 30), iid(50, 10)};

    Allocation alloc = Allocation::zeros(2, 2);
    alloc.green[0][0] = {60.0, 90.0};
    alloc.green[1][1] = {30.0, 45.0};
    alloc.brown[0][1] = {20.0, 30.0};
    alloc.brown[1][0] = {40.0, 70.0};
    // Remaining queues kept on at the minimum service rate with no workload.
    alloc.brown[0][0] = {0.0, 1.0};
    alloc.brown[1][1] = {0.0, 1.0};

    const ProfitBreakdown pb = slot_profit(alloc, env, dcs, classes);
    double green_rev = 0, green_cost = 0, brown_rev = 0, brown_cost = 0;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            green_rev += pb.green[i][j].revenue;
            green_cost += pb.green[i][j].energy_cost;
            brown_rev += pb.brown[i][j].revenue;
            brown_cost += pb.brown[i][j].energy_cost;
        }
    }
    CHECK(pb.green_revenue == Approx(green_rev).epsilon(1e-13));
    CHECK(pb.green_cost == Approx(green_cost).epsilon(1e-13));
    CHECK(pb.brown_revenue == Approx(brown_rev).epsilon(1e-13));
    CHECK(pb.brown_cost == Approx(brown_cost).epsilon(1e-13));
    CHECK(pb.total() ==
          Approx(green_rev - green_cost + brown_rev - brown_cost).epsilon(1e-13));

    // Independent straight-line recomputation.
    CHECK(pb.total() ==
          Approx(oracle::ref_slot_profit(alloc, env, dcs, classes)).epsilon(1e-9));

    // Zero allocation, mu at the lower bound: only base load remains.
    Allocation idle = Allocation::zeros(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) idle.brown[i][j] = {0.0, 1.0};
    const ProfitBreakdown pbi = slot_profit(idle, env, dcs, classes);
    double expect = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            expect -= env.brown_price[i] * dcs[i].base_load_per_server() /
                      classes[j].per_server_capacity * 900.0 * kKwhPerKwSecond;
    CHECK(pbi.total() == Approx(expect).epsilon(1e-12));
    CHECK(pbi.green_revenue == 0.0);
    CHECK(pbi.brown_revenue == 0.0);

    // Single queue, zero loss and free green energy earns exactly delta*lam*T.
    SlotEnvironment env1;
    env1.slot_length = 900.0;
    env1.green_energy = {100.0};
    env1.brown_price = {0.0};
    env1.class_stats = {iid(100, 0)};
    const std::vector<DataCenterSpec> one_dc = {[] {
        DataCenterSpec d = paper_dc();
        d.green_unit_cost = 0.0;
        return d;
    }()};
    const std::vector<ServiceClass> one_cls = {cls(10.0, 1e-3, 2e-3)};
    Allocation a1 = Allocation::zeros(1, 1);
    a1.green[0][0] = {100.0, 150.0};
    const ProfitBreakdown pb1 = slot_profit(a1, env1, one_dc, one_cls);
    CHECK(pb1.total() == Approx(1e-3 * 100 * 900).epsilon(1e-12));
}

TEST_CASE("profit is degree-1 homogeneous per queue") {
    const std::vector<DataCenterSpec> dcs = {paper_dc()};
    const std::vector<ServiceClass> classes = {cls(10.0)};
    SlotEnvironment env;
    env.slot_length = 600.0;
    env.green_energy = {50.0};
    env.brown_price = {0.1};
    env.class_stats = {iid(100, 30)};

    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const double lam = 20.0 + 150.0 * U(eng);
        const double mu = lam * (1.05 + 0.5 * U(eng));
        Allocation a = Allocation::zeros(1, 1);
        a.green[0][0] = {lam, mu};
        const double p1 = slot_profit(a, env, dcs, classes).total();
        const double c = 0.5 + 2.5 * U(eng);
        Allocation b = Allocation::zeros(1, 1);
        b.green[0][0] = {c * lam, c * mu};
        const double p2 = slot_profit(b, env, dcs, classes).total();
        CHECK(p2 == Approx(c * p1).epsilon(1e-9));
    }
}

TEST_CASE("profitability gate (sufficient condition)") {
    const std::vector<DataCenterSpec> dcs = {paper_dc()};
    SlotEnvironment env;
    env.slot_length = 900.0;
    env.green_energy = {10.0};
    env.brown_price = {50.0};
    env.class_stats = {iid(100, 30)};

    // income 10, prop 0.1 kW, k = 100, worst price 50/kWh:
    // 10 - (0.1/100) * 50/3600 > 0 -> profitable.
    {
        const std::vector<ServiceClass> classes = {cls(100.0, 10.0, 1.0)};
        const auto rep = profitability_check(classes, dcs, env);
        CHECK(rep.all_ok());
        CHECK(rep.ok[0][0]);
    }
    // Zero income can never be strictly positive.
    {
        const std::vector<ServiceClass> classes = {cls(100.0, 0.0, 1.0)};
        const auto rep = profitability_check(classes, dcs, env);
        CHECK(!rep.all_ok());
        REQUIRE(rep.failing.size() == 1);
        CHECK(rep.failing[0] == std::pair<int, int>(0, 0));
    }
    // Free energy: any positive income passes.
    {
        SlotEnvironment free_env = env;
        free_env.brown_price = {0.0};
        std::vector<DataCenterSpec> free_dcs = dcs;
        free_dcs[0].green_unit_cost = 0.0;
        const std::vector<ServiceClass> classes = {cls(100.0, 1e-9, 0.0)};
        CHECK(profitability_check(classes, free_dcs, free_env).all_ok());
    }
}

TEST_CASE("energy cost units: kW times seconds over 3600 times price") {
    const DataCenterSpec dc = paper_dc();
    const std::vector<DataCenterSpec> dcs = {dc};
    const std::vector<ServiceClass> classes = {cls(10.0, 0.0, 0.0)};
    SlotEnvironment env;
    env.slot_length = 1800.0;
    env.green_energy = {0.0};
    env.brown_price = {0.25};
    env.class_stats = {iid(100, 0)};

    Allocation a = Allocation::zeros(1, 1);
    a.brown[0][0] = {0.0, 20.0};  // two idle servers
    const ProfitBreakdown pb = slot_profit(a, env, dcs, classes);
    const double power_kw = 2.0 * dc.base_load_per_server();
    CHECK(pb.brown_cost == Approx(0.25 * power_kw * 1800.0 / 3600.0).epsilon(1e-13));
}
