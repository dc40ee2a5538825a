#include "phaseopt/model.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace phaseopt {

namespace {

std::complex<double> polar_deg(double magnitude, double degrees) {
    const double rad = degrees * std::numbers::pi / 180.0;
    return {magnitude * std::cos(rad), magnitude * std::sin(rad)};
}

void check_step_consistency(const Fleet& fleet, const NetworkSpec& spec) {
    if (std::abs(fleet.step_hours() - spec.step_hours) > 1e-12 * std::max(1.0, spec.step_hours)) {
        std::ostringstream os;
        os << "fleet step " << fleet.step_hours() << " h does not match network step " << spec.step_hours << " h";
        throw InvalidParameter(os.str());
    }
}

}  // namespace

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::AB: return "ab";
        case Phase::BC: return "bc";
        case Phase::CA: return "ca";
    }
    return "?";
}

Phase parse_phase(std::string_view label) {
    std::string lower(label);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "ab") return Phase::AB;
    if (lower == "bc") return Phase::BC;
    if (lower == "ca") return Phase::CA;
    throw DataError("unknown phase label '" + std::string(label) + "'");
}

Phase rotate(Phase p) {
    return static_cast<Phase>((index(p) + 1) % 3);
}

// ---------------------------------------------------------------------------
// Fleet
// ---------------------------------------------------------------------------

Fleet::Fleet(std::vector<SessionProfile> sessions, int horizon, double step_hours)
    : sessions_(std::move(sessions)), horizon_(horizon), step_hours_(step_hours) {
    if (horizon_ < 1) throw InvalidParameter("horizon must be at least one step");
    if (!(step_hours_ > 0.0) || !std::isfinite(step_hours_)) throw InvalidParameter("step_hours must be positive");
    for (auto& s : sessions_) {
        if (s.arrival < 0 || s.arrival >= horizon_) {
            throw DataError("session '" + s.id + "' arrives at step " + std::to_string(s.arrival) +
                            ", outside [0, " + std::to_string(horizon_) + ")");
        }
        if (s.duration < 0) throw DataError("session '" + s.id + "' has negative duration");
        if (!(s.energy >= 0.0) || !std::isfinite(s.energy)) {
            throw DataError("session '" + s.id + "' has invalid energy demand");
        }
        if (s.departure() > horizon_) {
            std::ostringstream os;
            os << "session '" << s.id << "' clipped from " << s.duration << " to " << horizon_ - s.arrival
               << " steps at the horizon; energy demand kept at " << s.energy << " kWh";
            warnings_.push_back(os.str());
            s.duration = horizon_ - s.arrival;
        }
        if (s.duration == 0 && s.energy > 0.0) {
            warnings_.push_back("session '" + s.id + "' requests energy but has no charging window");
        }
    }
}

double Fleet::total_energy() const {
    double sum = 0.0;
    for (const auto& s : sessions_) sum += s.energy;
    return sum;
}

Eigen::VectorXd Fleet::energies() const {
    Eigen::VectorXd e(size());
    for (int i = 0; i < size(); ++i) e(i) = (*this)[i].energy;
    return e;
}

// ---------------------------------------------------------------------------
// NetworkSpec / PhasorPair / PhaseSelection
// ---------------------------------------------------------------------------

void NetworkSpec::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(r_max)) throw InvalidParameter("r_max must be positive");
    if (!positive(c1)) throw InvalidParameter("c1 must be positive");
    if (!positive(c2)) throw InvalidParameter("c2 must be positive");
    if (!positive(n_r)) throw InvalidParameter("n_r must be positive");
    if (!positive(step_hours)) throw InvalidParameter("step_hours must be positive");
}

Eigen::Matrix<double, 6, 1> NetworkSpec::line_limits() const {
    Eigen::Matrix<double, 6, 1> c;
    c << c1, c1, c1, c2, c2, c2;
    return c;
}

Eigen::MatrixXd NetworkSpec::limit_matrix(int horizon) const {
    return line_limits().replicate(1, horizon);
}

Eigen::Matrix<std::complex<double>, 6, 3> PhasorPair::stacked() const {
    Eigen::Matrix<std::complex<double>, 6, 3> s;
    s.topRows<3>() = phi1;
    s.bottomRows<3>() = phi2;
    return s;
}

Eigen::MatrixXd PhaseSelection::matrix() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, size());
    for (int i = 0; i < size(); ++i) x(index((*this)[i]), i) = 1.0;
    return x;
}

PhaseSelection PhaseSelection::from_matrix(const Eigen::MatrixXd& x, double tol) {
    if (x.rows() != 3) throw DimensionError("phase selection matrix must have 3 rows");
    std::vector<Phase> out;
    out.reserve(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        int hot = -1;
        for (int r = 0; r < 3; ++r) {
            const double v = x(r, j);
            if (std::abs(v - 1.0) <= tol) {
                if (hot >= 0) throw DataError("column " + std::to_string(j) + " selects more than one phase");
                hot = r;
            } else if (std::abs(v) > tol) {
                throw DataError("column " + std::to_string(j) + " is not binary");
            }
        }
        if (hot < 0) throw DataError("column " + std::to_string(j) + " selects no phase");
        out.push_back(static_cast<Phase>(hot));
    }
    return PhaseSelection(std::move(out));
}

PhaseSelection PhaseSelection::rotated() const {
    std::vector<Phase> out(assignment_);
    for (auto& p : out) p = rotate(p);
    return PhaseSelection(std::move(out));
}

std::array<int, 3> PhaseSelection::counts() const {
    std::array<int, 3> n{0, 0, 0};
    for (Phase p : assignment_) ++n[static_cast<std::size_t>(index(p))];
    return n;
}

void SelectionConstraint::validate(int horizon, int fleet_size) const {
    if (m.rows() != horizon) throw DimensionError("selection matrix must have T rows");
    if (w.rows() != fleet_size) throw DimensionError("W must have N rows");
    if (w.cols() != m.cols()) throw DimensionError("M and W must share their column count");
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        bool nonzero = false;
        for (Eigen::Index t = 0; t < m.rows(); ++t) {
            const double v = m(t, k);
            if (v != 0.0 && v != 1.0) throw DataError("selection matrix must be binary");
            nonzero = nonzero || v == 1.0;
        }
        if (!nonzero) throw DataError("selection matrix column " + std::to_string(k) + " is empty");
    }
    if ((w.array() < 0.0).any()) throw DataError("W must be nonnegative");
}

double FeasibilityReport::worst() const {
    return std::max({charger, demand, network});
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

Eigen::MatrixXd build_presence(const Fleet& fleet) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(fleet.size(), fleet.horizon());
    for (int i = 0; i < fleet.size(); ++i) {
        const auto& s = fleet[i];
        for (int t = s.arrival; t < s.departure(); ++t) e(i, t) = 1.0;
    }
    return e;
}

PhasorPair build_phasors(double n_r) {
    if (!(n_r > 0.0) || !std::isfinite(n_r)) throw InvalidParameter("turning ratio must be positive");
    const double k = 1.0 / n_r;
    // Column angles are shared by every row: 30, -90 and 150 degrees.
    const std::array<double, 3> angle{30.0, -90.0, 150.0};
    const double m1[3][3] = {{1, 0, -1}, {-1, 1, 0}, {0, -1, 1}};
    const double m2[3][3] = {{k, k, -2 * k}, {-2 * k, k, k}, {k, -2 * k, k}};
    PhasorPair out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            out.phi1(r, c) = polar_deg(m1[r][c], angle[static_cast<std::size_t>(c)]);
            out.phi2(r, c) = polar_deg(m2[r][c], angle[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

Eigen::MatrixXd line_magnitudes(const AggregatePower& p, const PhasorPair& phasors) {
    if (p.power.rows() != 3) throw DimensionError("aggregate power must have 3 rows");
    const Eigen::MatrixXcd lines = phasors.stacked() * p.power.cast<std::complex<double>>();
    return lines.cwiseAbs();
}

AggregatePower aggregate(const PhaseSelection& x, const ChargingSchedule& a) {
    if (a.power.rows() != x.size()) throw DimensionError("schedule rows must match the phase selection");
    AggregatePower p{Eigen::MatrixXd::Zero(3, a.power.cols())};
    for (int i = 0; i < x.size(); ++i) p.power.row(index(x[i])) += a.power.row(i);
    return p;
}

double objective_value(const ChargingSchedule& a, const Eigen::VectorXd& weights) {
    if (weights.size() != a.power.cols()) throw DimensionError("weight vector length must equal T");
    if ((weights.array() < 0.0).any()) throw InvalidParameter("objective weights must be nonnegative");
    if (a.power.size() == 0) return 0.0;
    return -(a.power * weights).sum();
}

Eigen::VectorXd unit_weights(int horizon) {
    return Eigen::VectorXd::Ones(horizon);
}

Eigen::VectorXd quick_charge_weights(int horizon) {
    Eigen::VectorXd w(horizon);
    for (int t = 0; t < horizon; ++t) w(t) = static_cast<double>(horizon - t);
    return w;
}

std::size_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::size_t result = 1;
    for (int i = 1; i <= k; ++i) {
        const auto num = static_cast<std::size_t>(n - k + i);
        // result * num / i is exact at every step; guard the multiplication.
        if (result > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
        result = result * num / static_cast<std::size_t>(i);
    }
    return result;
}

Eigen::MatrixXd build_selection_matrix(int m, int horizon, std::size_t cap) {
    if (horizon < 1 || m < 1 || m > horizon) throw InvalidParameter("selection matrix needs 1 <= m <= T");
    const std::size_t cols = binomial(horizon, m);
    if (cols > cap) {
        throw SizeError("selection matrix M(" + std::to_string(m) + "," + std::to_string(horizon) + ") has C(T,m) = " +
                        std::to_string(cols) + " columns, above the cap of " + std::to_string(cap));
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(horizon, static_cast<Eigen::Index>(cols));
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index col = 0; col < static_cast<Eigen::Index>(cols); ++col) {
        for (int i : idx) out(i, col) = 1.0;
        // Advance to the next combination in lexicographic order.
        int pos = m - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == horizon - m + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < m; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

Eigen::MatrixXd build_full_selection(int horizon, std::size_t cap) {
    if (horizon < 1) throw InvalidParameter("horizon must be at least one step");
    const std::size_t cols = horizon >= 63 ? std::numeric_limits<std::size_t>::max() : (std::size_t{1} << horizon) - 1;
    if (cols > cap) {
        throw SizeError("full selection matrix M_T has 2^T - 1 = " + std::to_string(cols) +
                        " columns, above the cap of " + std::to_string(cap));
    }
    Eigen::MatrixXd out(horizon, static_cast<Eigen::Index>(cols));
    Eigen::Index col = 0;
    for (int m = 1; m <= horizon; ++m) {
        Eigen::MatrixXd block = build_selection_matrix(m, horizon, cap);
        out.middleCols(col, block.cols()) = block;
        col += block.cols();
    }
    return out;
}

Eigen::MatrixXd build_m_tilde(const Fleet& fleet) {
    const int T = fleet.horizon();
    const int N = fleet.size();
    Eigen::MatrixXd out(T, T + N + 1);
    out.leftCols(T) = Eigen::MatrixXd::Identity(T, T);
    out.middleCols(T, N) = build_presence(fleet).transpose();
    out.col(T + N).setOnes();
    return out;
}

Eigen::MatrixXd build_w(const Fleet& fleet, const NetworkSpec& spec, const Eigen::MatrixXd& m) {
    if (!(fleet.step_hours() > 0.0)) throw InvalidParameter("step_hours must be positive");
    if (m.rows() != fleet.horizon()) throw DimensionError("selection matrix must have T rows");
    const Eigen::MatrixXd rate = build_presence(fleet) * m * spec.r_max;
    const Eigen::VectorXd cap = fleet.energies() / fleet.step_hours();
    return rate.cwiseMin(cap.replicate(1, m.cols()));
}

SelectionConstraint m_tilde_constraint(const Fleet& fleet, const NetworkSpec& spec) {
    check_step_consistency(fleet, spec);
    SelectionConstraint c;
    c.m = build_m_tilde(fleet);
    c.w = build_w(fleet, spec, c.m);
    return c;
}

SelectionConstraint identity_constraint(const Fleet& fleet, const NetworkSpec& spec) {
    check_step_consistency(fleet, spec);
    SelectionConstraint c;
    c.m = Eigen::MatrixXd::Identity(fleet.horizon(), fleet.horizon());
    c.w = build_w(fleet, spec, c.m);
    return c;
}

SelectionConstraint rate_constraint(const Fleet& fleet, const NetworkSpec& spec) {
    check_step_consistency(fleet, spec);
    SelectionConstraint c;
    c.m = Eigen::MatrixXd::Identity(fleet.horizon(), fleet.horizon());
    c.w = build_presence(fleet) * spec.r_max;
    return c;
}

SelectionConstraint full_constraint(const Fleet& fleet, const NetworkSpec& spec, std::size_t cap) {
    check_step_consistency(fleet, spec);
    SelectionConstraint c;
    c.m = build_full_selection(fleet.horizon(), cap);
    c.w = build_w(fleet, spec, c.m);
    return c;
}

bool is_zero_laxity(const Fleet& fleet, const NetworkSpec& spec, double tol) {
    for (const auto& s : fleet.sessions()) {
        const double full = spec.r_max * s.duration * fleet.step_hours();
        if (std::abs(s.energy - full) > tol * std::max(1.0, full)) return false;
    }
    return true;
}

FeasibilityReport check_feasibility(const PhaseSelection& x, const ChargingSchedule& a, const Fleet& fleet,
                                    const NetworkSpec& spec, double tol) {
    const int N = fleet.size();
    const int T = fleet.horizon();
    if (x.size() != N) throw DimensionError("phase selection length must equal N");
    if (a.power.rows() != N || a.power.cols() != T) throw DimensionError("schedule must be N x T");

    FeasibilityReport rep;
    if (N > 0) {
        const Eigen::MatrixXd upper = build_presence(fleet) * spec.r_max;
        rep.charger = std::max((-a.power).maxCoeff(), (a.power - upper).maxCoeff());
        const Eigen::VectorXd delivered = a.power.rowwise().sum() * fleet.step_hours();
        rep.demand = (delivered - fleet.energies()).maxCoeff();
    }
    rep.charger = std::max(rep.charger, 0.0);
    rep.demand = std::max(rep.demand, 0.0);

    const Eigen::MatrixXd mags = line_magnitudes(aggregate(x, a), build_phasors(spec.n_r));
    rep.network = std::max(0.0, (mags - spec.limit_matrix(T)).maxCoeff());
    rep.feasible = rep.worst() <= tol;
    return rep;
}

}  // namespace phaseopt
