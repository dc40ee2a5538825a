#include "phaseopt/conic.hpp"

#include "phaseopt/error.hpp"

#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace phaseopt {

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot_row(const SparseRow& row, const VectorXd& x) {
    double v = 0.0;
    for (const auto& [j, a] : row) v += a * x(j);
    return v;
}

// ---------------------------------------------------------------------------
// Cone algebra over K = R^l_+ x Q^{q_1} x ... x Q^{q_k}
// ---------------------------------------------------------------------------

struct Cones {
    int l = 0;
    std::vector<int> soc;

    int rows() const {
        int r = l;
        for (int q : soc) r += q;
        return r;
    }
    int degree() const { return l + static_cast<int>(soc.size()); }
};

template <typename F>
void for_each_soc(const Cones& k, F&& f) {
    int off = k.l;
    for (std::size_t b = 0; b < k.soc.size(); ++b) {
        f(b, off, k.soc[b]);
        off += k.soc[b];
    }
}

VectorXd identity_element(const Cones& k) {
    VectorXd e = VectorXd::Zero(k.rows());
    e.head(k.l).setOnes();
    for_each_soc(k, [&](std::size_t, int off, int) { e(off) = 1.0; });
    return e;
}

/// u o v
VectorXd jordan_product(const Cones& k, const VectorXd& u, const VectorXd& v) {
    VectorXd out(u.size());
    out.head(k.l) = u.head(k.l).cwiseProduct(v.head(k.l));
    for_each_soc(k, [&](std::size_t, int off, int q) {
        out(off) = u.segment(off, q).dot(v.segment(off, q));
        out.segment(off + 1, q - 1) = u(off) * v.segment(off + 1, q - 1) + v(off) * u.segment(off + 1, q - 1);
    });
    return out;
}

/// x such that lambda o x = d.
VectorXd jordan_divide(const Cones& k, const VectorXd& lambda, const VectorXd& d) {
    VectorXd out(d.size());
    out.head(k.l) = d.head(k.l).cwiseQuotient(lambda.head(k.l));
    for_each_soc(k, [&](std::size_t, int off, int q) {
        const double l0 = lambda(off);
        const auto l1 = lambda.segment(off + 1, q - 1);
        const double rho = l0 * l0 - l1.squaredNorm();
        const double x0 = (l0 * d(off) - l1.dot(d.segment(off + 1, q - 1))) / rho;
        out(off) = x0;
        out.segment(off + 1, q - 1) = (d.segment(off + 1, q - 1) - x0 * l1) / l0;
    });
    return out;
}

/// Largest alpha with v + alpha dv in the cone (capped at `cap`).
double max_step(const Cones& k, const VectorXd& v, const VectorXd& dv, double cap) {
    double alpha = cap;
    for (int i = 0; i < k.l; ++i) {
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    }
    for_each_soc(k, [&](std::size_t, int off, int q) {
        const double u0 = v(off);
        const double d0 = dv(off);
        const auto u1 = v.segment(off + 1, q - 1);
        const auto d1 = dv.segment(off + 1, q - 1);
        // f(a) = (u0 + a d0)^2 - |u1 + a d1|^2 = qa a^2 + qb a + qc, qc > 0.
        const double qa = d0 * d0 - d1.squaredNorm();
        const double qb = 2.0 * (u0 * d0 - u1.dot(d1));
        const double qc = u0 * u0 - u1.squaredNorm();
        double root = kInf;
        if (qa == 0.0) {
            if (qb < 0.0) root = -qc / qb;
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
                const double r1 = qq / qa;
                const double r2 = qq != 0.0 ? qc / qq : kInf;
                if (r1 > 0.0) root = std::min(root, r1);
                if (r2 > 0.0) root = std::min(root, r2);
            }
        }
        // The cone half u0 + a d0 >= 0 cannot fail before f does when qc > 0.
        alpha = std::min(alpha, root);
    });
    return std::max(alpha, 0.0);
}

/// Signed distance-like margin; positive iff strictly interior.
double interior_margin(const Cones& k, const VectorXd& v) {
    double m = kInf;
    for (int i = 0; i < k.l; ++i) m = std::min(m, v(i));
    for_each_soc(k, [&](std::size_t, int off, int q) { m = std::min(m, v(off) - v.segment(off + 1, q - 1).norm()); });
    return m;
}

/// Shift r into the interior: r + (1 + alpha) e when r is not strictly inside.
VectorXd shift_into_cone(const Cones& k, const VectorXd& r) {
    double alpha = -kInf;
    for (int i = 0; i < k.l; ++i) alpha = std::max(alpha, -r(i));
    for_each_soc(k, [&](std::size_t, int off, int q) {
        alpha = std::max(alpha, r.segment(off + 1, q - 1).norm() - r(off));
    });
    if (k.rows() == 0 || alpha < 0.0) return r;
    return r + (1.0 + alpha) * identity_element(k);
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling
// ---------------------------------------------------------------------------

struct Scaling {
    VectorXd d;  // LP part: sqrt(s / z)
    std::vector<Eigen::MatrixXd> w, winv;
    VectorXd lambda;

    static Scaling identity(const Cones& k) {
        Scaling sc;
        sc.d = VectorXd::Ones(k.l);
        for (int q : k.soc) {
            sc.w.push_back(Eigen::MatrixXd::Identity(q, q));
            sc.winv.push_back(Eigen::MatrixXd::Identity(q, q));
        }
        sc.lambda = VectorXd::Zero(k.rows());
        return sc;
    }

    static std::optional<Scaling> nesterov_todd(const Cones& k, const VectorXd& s, const VectorXd& z) {
        Scaling sc;
        sc.d = (s.head(k.l).array() / z.head(k.l).array()).sqrt();
        bool ok = true;
        for_each_soc(k, [&](std::size_t, int off, int q) {
            const auto sb = s.segment(off, q);
            const auto zb = z.segment(off, q);
            const double sjs = sb(0) * sb(0) - sb.tail(q - 1).squaredNorm();
            const double zjz = zb(0) * zb(0) - zb.tail(q - 1).squaredNorm();
            if (!(sjs > 0.0) || !(zjz > 0.0)) {
                ok = false;
                return;
            }
            const VectorXd sn = sb / std::sqrt(sjs);
            const VectorXd zn = zb / std::sqrt(zjz);
            const double gamma = std::sqrt(0.5 * (1.0 + sn.dot(zn)));
            VectorXd jz = zn;
            jz.tail(q - 1) *= -1.0;
            const VectorXd wb = (sn + jz) / (2.0 * gamma);
            const double eta = std::pow(sjs / zjz, 0.25);
            // W = eta [a q'; q I + q q' / (1 + a)], W^-1 flips the sign of q.
            const double a = wb(0);
            const VectorXd qv = wb.tail(q - 1);
            Eigen::MatrixXd hw(q, q);
            hw(0, 0) = a;
            hw.block(0, 1, 1, q - 1) = qv.transpose();
            hw.block(1, 0, q - 1, 1) = qv;
            hw.bottomRightCorner(q - 1, q - 1) =
                Eigen::MatrixXd::Identity(q - 1, q - 1) + qv * qv.transpose() / (1.0 + a);
            Eigen::MatrixXd hinv = hw;
            hinv.block(0, 1, 1, q - 1) *= -1.0;
            hinv.block(1, 0, q - 1, 1) *= -1.0;
            sc.w.push_back(eta * hw);
            sc.winv.push_back(hinv / eta);
        });
        if (!ok) return std::nullopt;
        sc.lambda = sc.apply_w(k, z);
        return sc;
    }

    VectorXd apply_w(const Cones& k, const VectorXd& v) const {
        VectorXd out(v.size());
        out.head(k.l) = d.cwiseProduct(v.head(k.l));
        for_each_soc(k, [&](std::size_t b, int off, int q) { out.segment(off, q) = w[b] * v.segment(off, q); });
        return out;
    }
    VectorXd apply_winv(const Cones& k, const VectorXd& v) const {
        VectorXd out(v.size());
        out.head(k.l) = v.head(k.l).cwiseQuotient(d);
        for_each_soc(k, [&](std::size_t b, int off, int q) { out.segment(off, q) = winv[b] * v.segment(off, q); });
        return out;
    }
    VectorXd apply_w2(const Cones& k, const VectorXd& v) const { return apply_w(k, apply_w(k, v)); }
    VectorXd apply_winv2(const Cones& k, const VectorXd& v) const { return apply_winv(k, apply_winv(k, v)); }

    SpMat winv2_matrix(const Cones& k) const {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(k.l + 9 * static_cast<int>(k.soc.size())));
        for (int i = 0; i < k.l; ++i) trip.emplace_back(i, i, 1.0 / (d(i) * d(i)));
        for_each_soc(k, [&](std::size_t b, int off, int q) {
            const Eigen::MatrixXd m2 = winv[b] * winv[b];
            for (int r = 0; r < q; ++r)
                for (int c = 0; c < q; ++c) trip.emplace_back(off + r, off + c, m2(r, c));
        });
        SpMat m(k.rows(), k.rows());
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }
};

// ---------------------------------------------------------------------------
// Reduced standard form: min c'x  s.t. Ax = b, Gx + s = h, s in K
// ---------------------------------------------------------------------------

struct StandardForm {
    int n = 0;
    VectorXd c;
    SpMat a;
    VectorXd b;
    SpMat g;
    VectorXd h;
    Cones cones;
};

/// Solves  [0 A' G'; A 0 0; G 0 -W^2] [dx; dy; dz] = [r1; r2; r3]
/// through the normal equations with iterative refinement.
class KktSolver {
public:
    explicit KktSolver(const StandardForm& sf) : sf_(sf), gt_(sf.g.transpose()), at_(sf.a.transpose()) {}

    bool factor(const Scaling& sc) {
        sc_ = &sc;
        const SpMat winv2 = sc.winv2_matrix(sf_.cones);
        const SpMat wg = winv2 * sf_.g;
        Eigen::MatrixXd h = Eigen::MatrixXd(gt_ * wg);
        const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
        double reg = 1e-13 * scale;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::MatrixXd hr = h;
            hr.diagonal().array() += reg;
            llt_.compute(hr);
            if (llt_.info() == Eigen::Success) break;
            reg *= 100.0;
            if (attempt == 7) return false;
        }
        if (sf_.a.rows() > 0) {
            hinv_at_ = llt_.solve(Eigen::MatrixXd(at_));
            Eigen::MatrixXd s = sf_.a * hinv_at_;
            const double sscale = std::max(1.0, s.diagonal().cwiseAbs().maxCoeff());
            s.diagonal().array() += 1e-13 * sscale;
            schur_.compute(s);
            if (schur_.info() != Eigen::Success) return false;
        }
        return true;
    }

    void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx, VectorXd& dy,
               VectorXd& dz) const {
        solve_once(r1, r2, r3, dx, dy, dz);
        double prev = kInf;
        for (int it = 0; it < 3; ++it) {
            const VectorXd e1 = r1 - at_ * dy - gt_ * dz;
            const VectorXd e2 = r2 - sf_.a * dx;
            const VectorXd e3 = r3 - sf_.g * dx + sc_->apply_w2(sf_.cones, dz);
            const double err = std::max({e1.lpNorm<Eigen::Infinity>(), e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                         e3.size() ? e3.lpNorm<Eigen::Infinity>() : 0.0});
            if (err < 1e-14 || err > 0.5 * prev) break;
            prev = err;
            VectorXd cx, cy, cz;
            solve_once(e1, e2, e3, cx, cy, cz);
            dx += cx;
            dy += cy;
            dz += cz;
        }
    }

private:
    void solve_once(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& dx, VectorXd& dy,
                    VectorXd& dz) const {
        const VectorXd g = r1 + gt_ * sc_->apply_winv2(sf_.cones, r3);
        if (sf_.a.rows() > 0) {
            const VectorXd hg = llt_.solve(g);
            dy = schur_.solve(sf_.a * hg - r2);
            dx = hg - hinv_at_ * dy;
        } else {
            dy = VectorXd::Zero(0);
            dx = llt_.solve(g);
        }
        dz = sc_->apply_winv2(sf_.cones, sf_.g * dx - r3);
    }

    const StandardForm& sf_;
    SpMat gt_;
    SpMat at_;
    const Scaling* sc_ = nullptr;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd hinv_at_;
    Eigen::LLT<Eigen::MatrixXd> schur_;
};

struct HsdeOutcome {
    SolveStatus status = SolveStatus::NumericalFailure;
    VectorXd x;
    int iterations = 0;
};

HsdeOutcome run_hsde(const StandardForm& sf, const ToleranceConfig& tol) {
    const Cones& k = sf.cones;
    const int n = sf.n;
    const int p = static_cast<int>(sf.a.rows());
    const int m = k.rows();
    const VectorXd e = identity_element(k);

    HsdeOutcome out;
    KktSolver kkt(sf);

    // Initial point from two least-squares style solves with W = I.
    Scaling ident = Scaling::identity(k);
    if (!kkt.factor(ident)) return out;
    VectorXd x, y, z, s;
    {
        VectorXd dx, dy, dz;
        kkt.solve(VectorXd::Zero(n), sf.b, sf.h, dx, dy, dz);
        x = dx;
        s = shift_into_cone(k, -dz);
        kkt.solve(-sf.c, VectorXd::Zero(p), VectorXd::Zero(m), dx, dy, dz);
        y = dy;
        z = shift_into_cone(k, dz);
    }
    double tau = 1.0;
    double kappa = 1.0;

    const double nb = std::max(1.0, sf.b.size() ? sf.b.norm() : 0.0);
    const double nh = std::max(1.0, sf.h.norm());
    const double nc = std::max(1.0, sf.c.norm());
    const SpMat at = sf.a.transpose();
    const SpMat gt = sf.g.transpose();

    for (int iter = 0; iter <= tol.max_iterations; ++iter) {
        out.iterations = iter;
        const VectorXd rx = at * y + gt * z + sf.c * tau;
        const VectorXd ry = sf.a * x - sf.b * tau;
        const VectorXd rz = s + sf.g * x - sf.h * tau;
        const double cx = sf.c.dot(x);
        const double by_hz = sf.b.dot(y) + sf.h.dot(z);
        const double rt = kappa + cx + by_hz;
        const double sz = s.dot(z);
        const double mu = (sz + tau * kappa) / (k.degree() + 1);

        const double pres = std::max(ry.size() ? ry.norm() / nb : 0.0, rz.norm() / nh) / tau;
        const double dres = rx.norm() / nc / tau;
        const double pcost = cx / tau;
        const double dcost = -by_hz / tau;
        const double gap = sz / (tau * tau);
        const double gap_scale = std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) return out;

        if (pres < tol.feasibility && dres < tol.feasibility && gap <= tol.gap * gap_scale &&
            std::abs(pcost - dcost) <= tol.gap * gap_scale * 10.0) {
            out.status = SolveStatus::Optimal;
            out.x = x / tau;
            return out;
        }
        if (by_hz < 0.0) {
            const double infres = (at * y + gt * z).norm() / nc / (-by_hz);
            if (infres < tol.feasibility) {
                out.status = SolveStatus::Infeasible;
                return out;
            }
        }
        if (cx < 0.0) {
            const double ax = p ? (sf.a * x).norm() / nb : 0.0;
            const double ures = std::max(ax, (sf.g * x + s).norm() / nh) / (-cx);
            if (ures < tol.feasibility) {
                out.status = SolveStatus::Unbounded;
                return out;
            }
        }
        if (iter == tol.max_iterations) {
            out.status = SolveStatus::IterationLimit;
            out.x = x / tau;
            return out;
        }

        auto sc = Scaling::nesterov_todd(k, s, z);
        if (!sc || !kkt.factor(*sc)) return out;
        const VectorXd& lambda = sc->lambda;

        VectorXd x1, y1, z1;
        kkt.solve(-sf.c, sf.b, sf.h, x1, y1, z1);
        const double q1 = sf.c.dot(x1) + sf.b.dot(y1) + sf.h.dot(z1);

        struct Direction {
            VectorXd dx, dy, dz, ds;
            double dtau = 0, dkappa = 0;
        };
        auto direction = [&](double sigma, const VectorXd& ds_target, double dk_target) {
            const double f = 1.0 - sigma;
            const VectorXd wl = sc->apply_w(k, jordan_divide(k, lambda, ds_target));
            VectorXd x0, y0, z0;
            kkt.solve(-f * rx, -f * ry, -f * rz - wl, x0, y0, z0);
            const double e4 = -f * rt;
            const double q0 = sf.c.dot(x0) + sf.b.dot(y0) + sf.h.dot(z0);
            Direction d;
            d.dtau = (dk_target - tau * e4 + tau * q0) / (kappa - tau * q1);
            d.dx = x0 + d.dtau * x1;
            d.dy = y0 + d.dtau * y1;
            d.dz = z0 + d.dtau * z1;
            d.ds = wl - sc->apply_w2(k, d.dz);
            d.dkappa = (dk_target - kappa * d.dtau) / tau;
            return d;
        };
        auto step_length = [&](const Direction& d, double cap) {
            double a = std::min(max_step(k, s, d.ds, cap), max_step(k, z, d.dz, cap));
            if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        const VectorXd ll = jordan_product(k, lambda, lambda);
        const Direction aff = direction(0.0, -ll, -tau * kappa);
        const double alpha_aff = std::min(1.0, step_length(aff, 1.0));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        const VectorXd corr = jordan_product(k, sc->apply_winv(k, aff.ds), sc->apply_w(k, aff.dz));
        const Direction cmb =
            direction(sigma, -ll - corr + sigma * mu * e, -tau * kappa - aff.dtau * aff.dkappa + sigma * mu);
        const double alpha = std::min(1.0, 0.99 * step_length(cmb, 1.0 / 0.99));
        if (!(alpha > 1e-13) || !std::isfinite(alpha)) return out;

        x += alpha * cmb.dx;
        y += alpha * cmb.dy;
        z += alpha * cmb.dz;
        s += alpha * cmb.ds;
        tau += alpha * cmb.dtau;
        kappa += alpha * cmb.dkappa;
        if (interior_margin(k, s) <= 0.0 || interior_margin(k, z) <= 0.0 || !(tau > 0.0) || !(kappa > 0.0)) {
            return out;
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConicProgram
// ---------------------------------------------------------------------------

double AffineForm::eval(const VectorXd& x) const {
    return constant + dot_row(terms, x);
}

double LinearConstraint::eval(const VectorXd& x) const {
    return dot_row(terms, x);
}

ConicProgram::ConicProgram(int num_variables)
    : objective(VectorXd::Zero(num_variables)),
      lower(VectorXd::Constant(num_variables, -kInf)),
      upper(VectorXd::Constant(num_variables, kInf)) {}

void ConicProgram::validate() const {
    const int n = num_variables();
    if (lower.size() != n || upper.size() != n) throw DimensionError("bound vectors must match the variable count");
    auto check_row = [n](const SparseRow& row) {
        for (const auto& [j, a] : row) {
            if (j < 0 || j >= n) throw DimensionError("constraint references variable " + std::to_string(j));
            if (!std::isfinite(a)) throw InvalidParameter("non-finite constraint coefficient");
        }
    };
    for (const auto& c : inequalities) check_row(c.terms);
    for (const auto& c : equalities) check_row(c.terms);
    for (const auto& c : cones) {
        check_row(c.u.terms);
        check_row(c.v.terms);
        if (!(c.bound >= 0.0) || !std::isfinite(c.bound)) {
            throw InvalidParameter("second-order cone bound must be finite and nonnegative");
        }
    }
    if (!objective.allFinite()) throw InvalidParameter("objective must be finite");
}

double ConicProgram::max_violation(const VectorXd& x) const {
    double v = 0.0;
    for (int j = 0; j < num_variables(); ++j) {
        v = std::max(v, lower(j) - x(j));
        v = std::max(v, x(j) - upper(j));
    }
    for (const auto& c : inequalities) v = std::max(v, c.eval(x) - c.rhs);
    for (const auto& c : equalities) v = std::max(v, std::abs(c.eval(x) - c.rhs));
    for (const auto& c : cones) v = std::max(v, std::hypot(c.u.eval(x), c.v.eval(x)) - c.bound);
    return v;
}

std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration_limit";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

SolveResult solve_conic(const ConicProgram& program, const ToleranceConfig& tol) {
    program.validate();
    const int n0 = program.num_variables();

    SolveResult result;
    result.primal = VectorXd::Zero(n0);

    // --- presolve: substitute fixed variables -------------------------------
    VectorXd fixed = VectorXd::Zero(n0);
    std::vector<int> col(static_cast<std::size_t>(n0), -1);
    int n = 0;
    for (int j = 0; j < n0; ++j) {
        const double lo = program.lower(j);
        const double hi = program.upper(j);
        if (lo > hi) {
            result.status = SolveStatus::Infeasible;
            return result;
        }
        if (lo == hi) {
            fixed(j) = lo;
        } else {
            col[static_cast<std::size_t>(j)] = n++;
        }
    }
    auto reduce = [&](const SparseRow& row, double& constant) {
        SparseRow out;
        for (const auto& [j, a] : row) {
            if (a == 0.0) continue;
            const int c = col[static_cast<std::size_t>(j)];
            if (c < 0) {
                constant += a * fixed(j);
            } else {
                out.emplace_back(c, a);
            }
        }
        return out;
    };
    auto slack_ok = [&](double slack) { return slack >= -tol.feasibility * std::max(1.0, std::abs(slack)); };

    std::vector<Triplet> gt;
    std::vector<double> h;
    std::vector<int> used(static_cast<std::size_t>(n), 0);
    auto add_lp_row = [&](const SparseRow& row, double rhs) {
        const int r = static_cast<int>(h.size());
        for (const auto& [c, a] : row) {
            gt.emplace_back(r, c, a);
            used[static_cast<std::size_t>(c)] = 1;
        }
        h.push_back(rhs);
    };

    for (int j = 0; j < n0; ++j) {
        const int c = col[static_cast<std::size_t>(j)];
        if (c < 0) continue;
        if (std::isfinite(program.lower(j))) add_lp_row({{c, -1.0}}, -program.lower(j));
        if (std::isfinite(program.upper(j))) add_lp_row({{c, 1.0}}, program.upper(j));
    }
    for (const auto& ineq : program.inequalities) {
        double constant = 0.0;
        SparseRow row = reduce(ineq.terms, constant);
        const double rhs = ineq.rhs - constant;
        if (row.empty()) {
            if (!slack_ok(rhs)) {
                result.status = SolveStatus::Infeasible;
                return result;
            }
            continue;
        }
        add_lp_row(row, rhs);
    }
    const int lp_rows = static_cast<int>(h.size());

    std::vector<Triplet> at;
    std::vector<double> b;
    for (const auto& eq : program.equalities) {
        double constant = 0.0;
        SparseRow row = reduce(eq.terms, constant);
        const double rhs = eq.rhs - constant;
        if (row.empty()) {
            if (std::abs(rhs) > tol.feasibility * std::max(1.0, std::abs(eq.rhs))) {
                result.status = SolveStatus::Infeasible;
                return result;
            }
            continue;
        }
        const int r = static_cast<int>(b.size());
        for (const auto& [c, a] : row) {
            at.emplace_back(r, c, a);
            used[static_cast<std::size_t>(c)] = 1;
        }
        b.push_back(rhs);
    }

    Cones cones;
    cones.l = lp_rows;
    for (const auto& cone : program.cones) {
        double cu = cone.u.constant;
        double cv = cone.v.constant;
        SparseRow ru = reduce(cone.u.terms, cu);
        SparseRow rv = reduce(cone.v.terms, cv);
        if (ru.empty() && rv.empty()) {
            if (!slack_ok(cone.bound - std::hypot(cu, cv))) {
                result.status = SolveStatus::Infeasible;
                return result;
            }
            continue;
        }
        // s = (bound, u, v) = h - G x
        const int r = static_cast<int>(h.size());
        h.push_back(cone.bound);
        for (const auto& [c, a] : ru) {
            gt.emplace_back(r + 1, c, -a);
            used[static_cast<std::size_t>(c)] = 1;
        }
        h.push_back(cu);
        for (const auto& [c, a] : rv) {
            gt.emplace_back(r + 2, c, -a);
            used[static_cast<std::size_t>(c)] = 1;
        }
        h.push_back(cv);
        cones.soc.push_back(3);
    }

    // Variables touched by no constraint are unbounded unless costless.
    std::vector<int> final_col(static_cast<std::size_t>(n), -1);
    int nf = 0;
    for (int j = 0; j < n0; ++j) {
        const int c = col[static_cast<std::size_t>(j)];
        if (c < 0) continue;
        if (!used[static_cast<std::size_t>(c)]) {
            if (program.objective(j) != 0.0) {
                result.status = SolveStatus::Unbounded;
                return result;
            }
            continue;
        }
        final_col[static_cast<std::size_t>(c)] = nf++;
    }
    for (auto& t : gt) t = Triplet(t.row(), final_col[static_cast<std::size_t>(t.col())], t.value());
    for (auto& t : at) t = Triplet(t.row(), final_col[static_cast<std::size_t>(t.col())], t.value());

    StandardForm sf;
    sf.n = nf;
    sf.c = VectorXd::Zero(nf);
    for (int j = 0; j < n0; ++j) {
        const int c = col[static_cast<std::size_t>(j)];
        if (c >= 0 && final_col[static_cast<std::size_t>(c)] >= 0) {
            sf.c(final_col[static_cast<std::size_t>(c)]) = program.objective(j);
        }
    }
    sf.g.resize(static_cast<Eigen::Index>(h.size()), nf);
    sf.g.setFromTriplets(gt.begin(), gt.end());
    sf.h = Eigen::Map<const VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    sf.a.resize(static_cast<Eigen::Index>(b.size()), nf);
    sf.a.setFromTriplets(at.begin(), at.end());
    sf.b = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    sf.cones = cones;

    VectorXd xr = VectorXd::Zero(nf);
    if (nf > 0) {
        if (sf.g.rows() == 0) {
            // Equality-only programs never arise from the model builders.
            result.status = SolveStatus::NumericalFailure;
            return result;
        }
        HsdeOutcome hs = run_hsde(sf, tol);
        result.iterations = hs.iterations;
        result.status = hs.status;
        if (hs.x.size() == nf) xr = hs.x;
    } else {
        result.status = SolveStatus::Optimal;
    }

    for (int j = 0; j < n0; ++j) {
        const int c = col[static_cast<std::size_t>(j)];
        if (c < 0) {
            result.primal(j) = fixed(j);
        } else if (final_col[static_cast<std::size_t>(c)] >= 0) {
            result.primal(j) = xr(final_col[static_cast<std::size_t>(c)]);
        }
    }
    result.objective = program.evaluate(result.primal);
    result.residual = program.max_violation(result.primal);
    return result;
}

std::string to_json(const ConicProgram& program) {
    using nlohmann::json;
    auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    auto row_json = [](const SparseRow& row) {
        json arr = json::array();
        for (const auto& [j, a] : row) arr.push_back({j, a});
        return arr;
    };
    json j;
    j["schema_version"] = 1;
    j["num_variables"] = program.num_variables();
    j["objective"] = std::vector<double>(program.objective.data(), program.objective.data() + program.objective.size());
    j["lower"] = json::array();
    j["upper"] = json::array();
    for (int i = 0; i < program.num_variables(); ++i) {
        j["lower"].push_back(finite_or_null(program.lower(i)));
        j["upper"].push_back(finite_or_null(program.upper(i)));
    }
    j["inequalities"] = json::array();
    for (const auto& c : program.inequalities) j["inequalities"].push_back({{"terms", row_json(c.terms)}, {"rhs", c.rhs}});
    j["equalities"] = json::array();
    for (const auto& c : program.equalities) j["equalities"].push_back({{"terms", row_json(c.terms)}, {"rhs", c.rhs}});
    j["cones"] = json::array();
    for (const auto& c : program.cones) {
        j["cones"].push_back({{"u", {{"terms", row_json(c.u.terms)}, {"constant", c.u.constant}}},
                              {"v", {{"terms", row_json(c.v.terms)}, {"constant", c.v.constant}}},
                              {"bound", c.bound}});
    }
    return j.dump(2);
}

}  // namespace phaseopt
