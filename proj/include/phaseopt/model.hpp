#pragma once

// =============================================================================
// Charging-network model: sessions, network parameters, transformer phasors,
// phase selections, schedules, and the aggregate-power relaxation matrices.
// =============================================================================
//
// Time is always an integer step index. A session with arrival a and duration
// d is present on the half-open window [a, a + d). Power is in kW, energy in
// kWh, and the step length is in hours.

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phaseopt {

/// Line-to-line phase an EV is plugged into behind the Delta-Wye transformer.
enum class Phase : std::uint8_t { AB = 0, BC = 1, CA = 2 };

inline constexpr std::array<Phase, 3> kPhases{Phase::AB, Phase::BC, Phase::CA};

std::string_view to_string(Phase p);
/// Accepts "ab", "bc", "ca" (any case). Throws DataError otherwise.
Phase parse_phase(std::string_view label);
/// Cyclic relabeling ab -> bc -> ca -> ab.
Phase rotate(Phase p);

inline int index(Phase p) { return static_cast<int>(p); }

struct SessionProfile {
    std::string id;
    int arrival = 0;    ///< first step the EV is plugged in
    int duration = 0;   ///< number of steps plugged in
    double energy = 0;  ///< requested energy, kWh
    std::optional<Phase> declared_phase;

    int departure() const { return arrival + duration; }
};

/// An ordered set of sessions over a horizon of `horizon` steps of
/// `step_hours` each. Sessions running past the horizon are clipped at
/// construction (energy is kept) and a warning is recorded.
class Fleet {
public:
    Fleet() = default;
    Fleet(std::vector<SessionProfile> sessions, int horizon, double step_hours);

    const std::vector<SessionProfile>& sessions() const { return sessions_; }
    const SessionProfile& operator[](int i) const { return sessions_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(sessions_.size()); }
    bool empty() const { return sessions_.empty(); }
    int horizon() const { return horizon_; }
    double step_hours() const { return step_hours_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    double total_energy() const;
    Eigen::VectorXd energies() const;

private:
    std::vector<SessionProfile> sessions_;
    int horizon_ = 1;
    double step_hours_ = 1.0;
    std::vector<std::string> warnings_;
};

/// Transformer and charger parameters. c1 limits the three secondary-side
/// lines, c2 the three primary-side lines; both are power limits in kW.
struct NetworkSpec {
    double r_max = 3.0;
    double c1 = 20.0;
    double c2 = 20.0;
    double n_r = 4.0;
    double step_hours = 0.2;

    /// Throws InvalidParameter unless every field is strictly positive.
    void validate() const;
    /// Per-line limits: rows 0..2 are c1, rows 3..5 are c2.
    Eigen::Matrix<double, 6, 1> line_limits() const;
    /// The 6 x T limit matrix C_max.
    Eigen::MatrixXd limit_matrix(int horizon) const;
};

/// Phasor maps from line-to-line phase power to secondary (phi1) and
/// primary (phi2) line power.
struct PhasorPair {
    Eigen::Matrix3cd phi1;
    Eigen::Matrix3cd phi2;

    /// Rows of [phi1; phi2] stacked into a 6 x 3 matrix.
    Eigen::Matrix<std::complex<double>, 6, 3> stacked() const;
};

/// Dense encoding of the one-hot 3 x N phase selection matrix X.
class PhaseSelection {
public:
    PhaseSelection() = default;
    explicit PhaseSelection(std::vector<Phase> assignment) : assignment_(std::move(assignment)) {}

    const std::vector<Phase>& assignment() const { return assignment_; }
    Phase operator[](int i) const { return assignment_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(assignment_.size()); }

    /// The 3 x N binary matrix.
    Eigen::MatrixXd matrix() const;
    /// Rebuilds from a 3 x N matrix; throws DataError unless every column is one-hot.
    static PhaseSelection from_matrix(const Eigen::MatrixXd& x, double tol = 1e-9);
    /// Every label advanced by one cyclic step.
    PhaseSelection rotated() const;
    /// Number of EVs on each phase.
    std::array<int, 3> counts() const;

    friend bool operator==(const PhaseSelection&, const PhaseSelection&) = default;

private:
    std::vector<Phase> assignment_;
};

/// N x T per-EV charging power, kW.
struct ChargingSchedule {
    Eigen::MatrixXd power;
};

/// 3 x T per-phase aggregate power, kW.
struct AggregatePower {
    Eigen::MatrixXd power;
};

/// Relaxed charging constraints P * M <= X * W.
struct SelectionConstraint {
    Eigen::MatrixXd m;  ///< T x K binary
    Eigen::MatrixXd w;  ///< N x K nonnegative

    int columns() const { return static_cast<int>(m.cols()); }
    /// Throws DimensionError / DataError on malformed matrices.
    void validate(int horizon, int fleet_size) const;
};

/// Residuals of the three constraint families; positive values are violations.
struct FeasibilityReport {
    double charger = 0;  ///< C_r, kW
    double demand = 0;   ///< C_d, kWh
    double network = 0;  ///< C_soc, kW
    bool feasible = true;

    double worst() const;
};

/// Maximum number of columns any selection-matrix builder will produce.
inline constexpr std::size_t kDefaultSelectionCap = 1u << 16;

/// N x T binary presence matrix.
Eigen::MatrixXd build_presence(const Fleet& fleet);

/// Throws InvalidParameter unless n_r > 0.
PhasorPair build_phasors(double n_r);

/// Elementwise magnitudes |[phi1; phi2] P|, a 6 x T matrix.
Eigen::MatrixXd line_magnitudes(const AggregatePower& p, const PhasorPair& phasors);

/// P = X A.
AggregatePower aggregate(const PhaseSelection& x, const ChargingSchedule& a);

/// f_w(A) = -sum_i (A w)_i.
double objective_value(const ChargingSchedule& a, const Eigen::VectorXd& weights);

/// All-ones weights (energy aggregation).
Eigen::VectorXd unit_weights(int horizon);
/// Quick-charge weights w_t = T - t for t = 0..T-1.
Eigen::VectorXd quick_charge_weights(int horizon);

/// Number of m-subsets of T items, saturating at SIZE_MAX.
std::size_t binomial(int n, int k);

/// T x C(T, m) matrix whose columns are the m-subsets of {0..T-1} in
/// lexicographic order of their sorted index lists.
Eigen::MatrixXd build_selection_matrix(int m, int horizon, std::size_t cap = kDefaultSelectionCap);

/// [M(1,T) | M(2,T) | ... | M(T,T)], 2^T - 1 columns.
Eigen::MatrixXd build_full_selection(int horizon, std::size_t cap = kDefaultSelectionCap);

/// [I_T | E^T | 1], T + N + 1 columns.
Eigen::MatrixXd build_m_tilde(const Fleet& fleet);

/// W = min(E M r_max, V), V holding e_i / step_hours in every column.
Eigen::MatrixXd build_w(const Fleet& fleet, const NetworkSpec& spec, const Eigen::MatrixXd& m);

/// (M~, build_w(M~)): the T + N + 1 column relaxation.
SelectionConstraint m_tilde_constraint(const Fleet& fleet, const NetworkSpec& spec);
/// (I_T, build_w(I_T)).
SelectionConstraint identity_constraint(const Fleet& fleet, const NetworkSpec& spec);
/// (I_T, E r_max): the rate-only relaxation that is exact for zero-laxity fleets.
SelectionConstraint rate_constraint(const Fleet& fleet, const NetworkSpec& spec);
/// (M_T, build_w(M_T)): every nonempty subset of steps.
SelectionConstraint full_constraint(const Fleet& fleet, const NetworkSpec& spec,
                                    std::size_t cap = kDefaultSelectionCap);

/// True when every session satisfies e_i = r_max * d_i * step_hours within tol.
bool is_zero_laxity(const Fleet& fleet, const NetworkSpec& spec, double tol = 1e-9);

FeasibilityReport check_feasibility(const PhaseSelection& x, const ChargingSchedule& a, const Fleet& fleet,
                                    const NetworkSpec& spec, double tol = 1e-6);

}  // namespace phaseopt
