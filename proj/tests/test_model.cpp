#include "phaseopt/error.hpp"
#include "phaseopt/model.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>
#include <random>

using namespace phaseopt;
using Catch::Matchers::WithinAbs;

namespace {

SessionProfile session(std::string id, int a, int d, double e) {
    SessionProfile s;
    s.id = std::move(id);
    s.arrival = a;
    s.duration = d;
    s.energy = e;
    return s;
}

NetworkSpec spec_with(double c1, double c2 = 100.0, double n_r = 4.0) {
    NetworkSpec s;
    s.c1 = c1;
    s.c2 = c2;
    s.n_r = n_r;
    return s;
}

}  // namespace

TEST_CASE("presence rows are half-open windows") {
    const Fleet f({session("a", 2, 3, 1.0)}, 6, 0.2);
    const Eigen::MatrixXd e = build_presence(f);
    Eigen::RowVectorXd expected(6);
    expected << 0, 0, 1, 1, 1, 0;
    CHECK(e.row(0) == expected);

    const Fleet empty({}, 4, 0.2);
    CHECK(build_presence(empty).rows() == 0);
    CHECK(build_presence(empty).cols() == 4);

    const Fleet full({session("a", 0, 5, 1.0)}, 5, 0.2);
    CHECK(build_presence(full).sum() == 5.0);
}

TEST_CASE("sessions past the horizon are clipped with a warning and keep their energy") {
    const Fleet f({session("late", 4, 5, 2.5)}, 6, 0.2);
    CHECK(f[0].duration == 2);
    CHECK(f[0].energy == 2.5);
    REQUIRE(f.warnings().size() == 1);
    CHECK(f.warnings()[0].find("late") != std::string::npos);
}

TEST_CASE("fleet rejects malformed sessions") {
    CHECK_THROWS_AS(Fleet({session("x", 6, 1, 1.0)}, 6, 0.2), DataError);
    CHECK_THROWS_AS(Fleet({session("x", -1, 1, 1.0)}, 6, 0.2), DataError);
    CHECK_THROWS_AS(Fleet({session("x", 0, -1, 1.0)}, 6, 0.2), DataError);
    CHECK_THROWS_AS(Fleet({session("x", 0, 1, -1.0)}, 6, 0.2), DataError);
    CHECK_THROWS_AS(Fleet({}, 0, 0.2), InvalidParameter);
    CHECK_THROWS_AS(Fleet({}, 3, 0.0), InvalidParameter);
}

TEST_CASE("a session with energy but no window is kept and flagged") {
    const Fleet f({session("z", 1, 0, 2.0)}, 4, 0.2);
    CHECK(f.size() == 1);
    CHECK(build_presence(f).sum() == 0.0);
    CHECK_FALSE(f.warnings().empty());
}

TEST_CASE("phasor entries follow the 30/-90/150 degree pattern") {
    const PhasorPair p = build_phasors(4.0);
    const double deg = std::numbers::pi / 180.0;
    CHECK(std::abs(p.phi1(0, 0) - std::polar(1.0, 30 * deg)) < 1e-15);
    CHECK(std::abs(p.phi2(0, 2) - (-0.5) * std::polar(1.0, 150 * deg)) < 1e-15);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            const double m1 = std::abs(p.phi1(r, c));
            CHECK((std::abs(m1) < 1e-15 || std::abs(m1 - 1.0) < 1e-15));
            const double m2 = std::abs(p.phi2(r, c));
            CHECK((std::abs(m2 - 0.25) < 1e-15 || std::abs(m2 - 0.5) < 1e-15));
        }
    }
    const PhasorPair q = build_phasors(1.0);
    for (int r = 0; r < 3; ++r) {
        std::vector<double> mags;
        for (int c = 0; c < 3; ++c) mags.push_back(std::abs(q.phi2(r, c)));
        std::sort(mags.begin(), mags.end());
        CHECK_THAT(mags[0], WithinAbs(1.0, 1e-15));
        CHECK_THAT(mags[1], WithinAbs(1.0, 1e-15));
        CHECK_THAT(mags[2], WithinAbs(2.0, 1e-15));
    }
    CHECK_THROWS_AS(build_phasors(0.0), InvalidParameter);
    CHECK_THROWS_AS(build_phasors(-2.0), InvalidParameter);
}

TEST_CASE("line magnitudes match the hand phasor oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (double n_r : {1.0, 2.0, 4.0, 7.5}) {
        const PhasorPair ph = build_phasors(n_r);
        for (int rep = 0; rep < 50; ++rep) {
            AggregatePower p{Eigen::MatrixXd(3, 1)};
            p.power << u(rng), u(rng), u(rng);
            const Eigen::MatrixXd m = line_magnitudes(p, ph);
            const auto expect = testsupport::line_loads(p.power(0, 0), p.power(1, 0), p.power(2, 0), n_r);
            for (int l = 0; l < 6; ++l) CHECK_THAT(m(l, 0), WithinAbs(expect[static_cast<std::size_t>(l)], 1e-12));
        }
    }
}

TEST_CASE("balanced loads give sqrt(3) p and 3 p / n_r") {
    const double p = 2.7;
    AggregatePower bal{Eigen::MatrixXd::Constant(3, 2, p)};
    const Eigen::MatrixXd m = line_magnitudes(bal, build_phasors(4.0));
    for (int t = 0; t < 2; ++t) {
        for (int l = 0; l < 3; ++l) CHECK_THAT(m(l, t), WithinAbs(std::sqrt(3.0) * p, 1e-12));
        for (int l = 3; l < 6; ++l) CHECK_THAT(m(l, t), WithinAbs(3.0 * p / 4.0, 1e-12));
    }
    AggregatePower zero{Eigen::MatrixXd::Zero(3, 3)};
    CHECK(line_magnitudes(zero, build_phasors(4.0)).maxCoeff() == 0.0);
}

TEST_CASE("line magnitudes are positively homogeneous and cyclically symmetric") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    const PhasorPair ph = build_phasors(4.0);
    for (int rep = 0; rep < 100; ++rep) {
        AggregatePower p{Eigen::MatrixXd(3, 4)};
        for (Eigen::Index k = 0; k < p.power.size(); ++k) p.power.data()[k] = u(rng);
        const double alpha = u(rng);
        AggregatePower scaled{p.power * alpha};
        CHECK((line_magnitudes(scaled, ph) - alpha * line_magnitudes(p, ph)).cwiseAbs().maxCoeff() < 1e-12);

        // ab -> bc -> ca -> ab relabeling: new row bc holds the old ab power.
        AggregatePower rot{Eigen::MatrixXd(3, 4)};
        rot.power.row(1) = p.power.row(0);
        rot.power.row(2) = p.power.row(1);
        rot.power.row(0) = p.power.row(2);
        const Eigen::MatrixXd a = line_magnitudes(p, ph);
        const Eigen::MatrixXd b = line_magnitudes(rot, ph);
        for (int t = 0; t < 4; ++t) {
            for (int side = 0; side < 2; ++side) {
                std::vector<double> x{a(3 * side, t), a(3 * side + 1, t), a(3 * side + 2, t)};
                std::vector<double> y{b(3 * side, t), b(3 * side + 1, t), b(3 * side + 2, t)};
                std::sort(x.begin(), x.end());
                std::sort(y.begin(), y.end());
                for (int k = 0; k < 3; ++k) CHECK_THAT(x[static_cast<std::size_t>(k)], WithinAbs(y[static_cast<std::size_t>(k)], 1e-12));
            }
        }
    }
}

TEST_CASE("objective value and weight families") {
    CHECK(objective_value(ChargingSchedule{Eigen::MatrixXd::Zero(2, 3)}, unit_weights(3)) == 0.0);
    CHECK(objective_value(ChargingSchedule{Eigen::MatrixXd::Ones(2, 2)}, unit_weights(2)) == -4.0);
    ChargingSchedule single{Eigen::MatrixXd::Zero(1, 3)};
    single.power(0, 0) = 1.0;
    CHECK(objective_value(single, quick_charge_weights(3)) == -3.0);
    const Eigen::VectorXd w = quick_charge_weights(4);
    CHECK(w(0) == 4.0);
    CHECK(w(3) == 1.0);
    CHECK_THROWS_AS(objective_value(single, unit_weights(2)), DimensionError);
}

TEST_CASE("selection matrices enumerate subsets lexicographically") {
    CHECK(build_selection_matrix(1, 3) == Eigen::MatrixXd::Identity(3, 3));
    const Eigen::MatrixXd two = build_selection_matrix(2, 2);
    CHECK(two.cols() == 1);
    CHECK(two.sum() == 2.0);
    CHECK(build_full_selection(4).cols() == 15);

    const Eigen::MatrixXd m = build_selection_matrix(2, 4);
    REQUIRE(m.cols() == 6);
    const int expected[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (int k = 0; k < 6; ++k) {
        CHECK(m.col(k).sum() == 2.0);
        CHECK(m(expected[k][0], k) == 1.0);
        CHECK(m(expected[k][1], k) == 1.0);
    }
    CHECK(binomial(30, 15) == 155117520u);
}

TEST_CASE("selection matrix cap errors name the column count") {
    try {
        build_selection_matrix(10, 20, 1000);
        FAIL("expected a size error");
    } catch (const SizeError& e) {
        CHECK(std::string(e.what()).find("184756") != std::string::npos);
    }
    CHECK_THROWS_AS(build_full_selection(20, 1000), SizeError);
    CHECK_THROWS_AS(build_selection_matrix(0, 3), InvalidParameter);
    CHECK_THROWS_AS(build_selection_matrix(4, 3), InvalidParameter);
}

TEST_CASE("M tilde is [I | E' | 1]") {
    const Fleet f({session("a", 0, 2, 1.0), session("b", 1, 2, 1.0)}, 3, 0.2);
    const Eigen::MatrixXd m = build_m_tilde(f);
    REQUIRE(m.cols() == 6);
    CHECK(m.leftCols(3) == Eigen::MatrixXd::Identity(3, 3));
    CHECK(m.middleCols(3, 2) == build_presence(f).transpose());
    CHECK(m.col(5) == Eigen::VectorXd::Ones(3));

    const Fleet none({}, 4, 0.2);
    CHECK(build_m_tilde(none).cols() == 5);
}

TEST_CASE("W is the elementwise min of rate capacity and energy cap") {
    NetworkSpec spec;
    const Fleet f({session("a", 1, 3, 1.2), session("b", 0, 4, 50.0)}, 5, 0.2);
    const Eigen::MatrixXd e = build_presence(f);
    const Eigen::MatrixXd wi = build_w(f, spec, Eigen::MatrixXd::Identity(5, 5));
    for (int i = 0; i < 2; ++i) {
        for (int t = 0; t < 5; ++t) CHECK(wi(i, t) == std::min(spec.r_max * e(i, t), f[i].energy / 0.2));
    }
    const Eigen::MatrixXd wall = build_w(f, spec, Eigen::MatrixXd::Ones(5, 1));
    CHECK_THAT(wall(0, 0), WithinAbs(std::min(3.0 * 3, 1.2 / 0.2), 1e-12));
    CHECK_THAT(wall(1, 0), WithinAbs(std::min(3.0 * 4, 50.0 / 0.2), 1e-12));

    // Zero laxity: both arguments coincide for the whole-horizon column.
    const Fleet zl({session("z", 1, 3, 3.0 * 3 * 0.2)}, 5, 0.2);
    const Eigen::MatrixXd wz = build_w(zl, spec, Eigen::MatrixXd::Ones(5, 1));
    CHECK_THAT(wz(0, 0), WithinAbs(3.0 * 3, 1e-12));
    CHECK_THAT(wz(0, 0), WithinAbs(zl[0].energy / 0.2, 1e-12));
}

TEST_CASE("W is monotone in energy demand") {
    std::mt19937_64 rng(3);
    NetworkSpec spec;
    for (int rep = 0; rep < 30; ++rep) {
        const auto inst = testsupport::random_instance(rng, 4, 5, false);
        const Eigen::MatrixXd m = build_full_selection(5);
        const Eigen::MatrixXd w0 = build_w(inst.fleet, spec, m);
        auto sessions = inst.fleet.sessions();
        const int k = std::uniform_int_distribution<int>(0, 3)(rng);
        sessions[static_cast<std::size_t>(k)].energy *= 1.5;
        const Fleet bigger(sessions, 5, 0.2);
        CHECK(((build_w(bigger, spec, m) - w0).array() >= 0.0).all());
    }
}

TEST_CASE("constraint bundles validate their shapes") {
    NetworkSpec spec;
    const Fleet f({session("a", 0, 2, 1.0)}, 3, 0.2);
    CHECK_NOTHROW(m_tilde_constraint(f, spec).validate(3, 1));
    CHECK_NOTHROW(rate_constraint(f, spec).validate(3, 1));
    SelectionConstraint bad = identity_constraint(f, spec);
    bad.m(0, 0) = 0.5;
    CHECK_THROWS_AS(bad.validate(3, 1), DataError);
    CHECK_THROWS_AS(identity_constraint(f, spec).validate(4, 1), DimensionError);
    NetworkSpec other = spec;
    other.step_hours = 0.25;
    CHECK_THROWS_AS(m_tilde_constraint(f, other), InvalidParameter);
}

TEST_CASE("network spec validation") {
    NetworkSpec s;
    CHECK_NOTHROW(s.validate());
    const Eigen::MatrixXd c = s.limit_matrix(3);
    CHECK(c.rows() == 6);
    CHECK(c.topRows(3).isConstant(s.c1));
    CHECK(c.bottomRows(3).isConstant(s.c2));
    for (double NetworkSpec::*field : {&NetworkSpec::r_max, &NetworkSpec::c1, &NetworkSpec::c2, &NetworkSpec::n_r,
                                       &NetworkSpec::step_hours}) {
        NetworkSpec bad;
        bad.*field = 0.0;
        CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    }
}

TEST_CASE("phase selection encodings") {
    const PhaseSelection x({Phase::AB, Phase::CA, Phase::CA});
    const Eigen::MatrixXd m = x.matrix();
    CHECK(m.colwise().sum().isOnes());
    CHECK(PhaseSelection::from_matrix(m) == x);
    CHECK(x.rotated() == PhaseSelection({Phase::BC, Phase::AB, Phase::AB}));
    CHECK(x.counts() == std::array<int, 3>{1, 0, 2});
    Eigen::MatrixXd bad = m;
    bad(1, 0) = 1.0;
    CHECK_THROWS_AS(PhaseSelection::from_matrix(bad), DataError);
    CHECK(parse_phase("BC") == Phase::BC);
    CHECK_THROWS_AS(parse_phase("ac"), DataError);
    CHECK(to_string(rotate(Phase::CA)) == "ab");
}

TEST_CASE("feasibility report separates the three constraint families") {
    NetworkSpec spec = spec_with(100.0);
    const Fleet f({session("a", 0, 2, 10.0), session("b", 1, 2, 10.0)}, 3, 0.2);
    const PhaseSelection x({Phase::AB, Phase::BC});

    ChargingSchedule zero{Eigen::MatrixXd::Zero(2, 3)};
    const auto r0 = check_feasibility(x, zero, f, spec);
    CHECK(r0.feasible);
    CHECK(r0.worst() == 0.0);

    ChargingSchedule over = zero;
    over.power(0, 1) = spec.r_max + 0.25;
    CHECK_THAT(check_feasibility(x, over, f, spec).charger, WithinAbs(0.25, 1e-12));

    ChargingSchedule absent = zero;
    absent.power(1, 0) = 0.5;  // b has not arrived yet
    CHECK_THAT(check_feasibility(x, absent, f, spec).charger, WithinAbs(0.5, 1e-12));

    const Fleet small({session("a", 0, 2, 0.5)}, 3, 0.2);
    ChargingSchedule hungry{Eigen::MatrixXd::Zero(1, 3)};
    hungry.power(0, 0) = 3.0;
    hungry.power(0, 1) = 3.0;
    CHECK_THAT(check_feasibility(PhaseSelection({Phase::AB}), hungry, small, spec).demand, WithinAbs(0.7, 1e-12));
}

TEST_CASE("single EV on ab above c1 overloads lines a and b by p - c1") {
    const double p = 3.0;
    const double c1 = 2.2;
    NetworkSpec spec = spec_with(c1);
    const Fleet f({session("a", 0, 1, 10.0)}, 1, 0.2);
    ChargingSchedule a{Eigen::MatrixXd::Constant(1, 1, p)};
    const auto rep = check_feasibility(PhaseSelection({Phase::AB}), a, f, spec);
    CHECK_THAT(rep.network, WithinAbs(p - c1, 1e-12));
    const Eigen::MatrixXd mags = line_magnitudes(aggregate(PhaseSelection({Phase::AB}), a), build_phasors(spec.n_r));
    CHECK_THAT(mags(0, 0), WithinAbs(p, 1e-12));
    CHECK_THAT(mags(1, 0), WithinAbs(p, 1e-12));
    CHECK_THAT(mags(2, 0), WithinAbs(0.0, 1e-12));
}

TEST_CASE("feasible schedules of the original problem satisfy the full relaxation") {
    // Relaxation property: (X, XA) meets P M_T <= X W_3 for any feasible (X, A).
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 40; ++rep) {
        const auto inst = testsupport::random_instance(rng, 4, 5, rep % 2 == 0);
        const Fleet& f = inst.fleet;
        NetworkSpec spec = inst.spec;
        spec.c1 = spec.c2 = 1e3;
        // A random schedule inside the box, scaled into each demand.
        ChargingSchedule a{build_presence(f) * spec.r_max};
        for (Eigen::Index k = 0; k < a.power.size(); ++k) a.power.data()[k] *= u(rng);
        for (int i = 0; i < f.size(); ++i) {
            const double delivered = a.power.row(i).sum() * f.step_hours();
            if (delivered > f[i].energy) a.power.row(i) *= f[i].energy / delivered;
        }
        std::vector<Phase> phases;
        for (int i = 0; i < f.size(); ++i) phases.push_back(kPhases[static_cast<std::size_t>(rng() % 3)]);
        const PhaseSelection x(phases);
        REQUIRE(check_feasibility(x, a, f, spec).feasible);

        const SelectionConstraint full = full_constraint(f, spec);
        const Eigen::MatrixXd lhs = aggregate(x, a).power * full.m;
        const Eigen::MatrixXd rhs = x.matrix() * full.w;
        CHECK((lhs - rhs).maxCoeff() <= 1e-9);
    }
}

TEST_CASE("zero laxity detection") {
    NetworkSpec spec;
    const Fleet zl({session("a", 0, 2, 1.2), session("b", 1, 3, 1.8)}, 4, 0.2);
    CHECK(is_zero_laxity(zl, spec));
    const Fleet lax({session("a", 0, 2, 1.0)}, 4, 0.2);
    CHECK_FALSE(is_zero_laxity(lax, spec));
}
