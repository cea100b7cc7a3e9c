#include "ddpmot/flow.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace ddpmot {

PointCloud::PointCloud(std::size_t n, std::size_t d) : PointCloud(RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))) {}

PointCloud::PointCloud(RowMatrix pts) : points(std::move(pts)), ids(static_cast<std::size_t>(points.rows())) {
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
}

std::size_t FlowResult::failures() const { return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true)); }

namespace {

// Piecewise-linear density on a uniform grid, sampled by exact inversion of its CDF.
class LinearCdf {
public:
    LinearCdf(double a, double b) : a_(a), du_((b - a) / static_cast<double>(kSamplerGrid - 1)), cum_(kSamplerGrid) {}

    // Returns false when the density has no positive mass.
    bool build(const Eigen::VectorXd& values) {
        f_ = values.cwiseMax(0.0);
        cum_[0] = 0.0;
        for (std::size_t j = 1; j < kSamplerGrid; ++j) {
            cum_[j] = cum_[j - 1] + 0.5 * du_ * (f_[static_cast<Eigen::Index>(j - 1)] + f_[static_cast<Eigen::Index>(j)]);
        }
        return cum_.back() > 0.0 && std::isfinite(cum_.back());
    }

    double invert(double u) const {
        const double target = u * cum_.back();
        auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
        std::size_t j = static_cast<std::size_t>(std::distance(cum_.begin(), it));
        j = std::clamp<std::size_t>(j, 1, kSamplerGrid - 1) - 1;
        const double r = std::max(0.0, target - cum_[j]);
        const double f0 = f_[static_cast<Eigen::Index>(j)], f1 = f_[static_cast<Eigen::Index>(j + 1)];
        const double slope = (f1 - f0) / du_;
        // Solve f0 s + slope s^2 / 2 = r for s in [0, du] in the cancellation-free form.
        const double disc = std::sqrt(std::max(0.0, f0 * f0 + 2.0 * slope * r));
        const double denom = f0 + disc;
        const double s = denom > 0.0 ? 2.0 * r / denom : 0.0;
        return a_ + (static_cast<double>(j) + std::clamp(s / du_, 0.0, 1.0)) * du_;
    }

private:
    double a_;
    double du_;
    std::vector<double> cum_;
    Eigen::VectorXd f_;
};

}  // namespace

PointCloud sample_tt(const TTTensor& p, const ChebGrid& grid, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidInput("sample_tt: need at least one sample");
    if (p.dim() != grid.dim() || p.mode_sizes() != grid.mode_sizes()) {
        throw InvalidInput("sample_tt: density does not live on the grid");
    }
    const std::size_t d = p.dim(), m = grid.size();

    // Trailing marginals: right[k] = prod_{j>k} sum_i w_i G_j(i), a column of size R_{k+1}.
    std::vector<Eigen::VectorXd> right(d);
    right[d - 1] = Eigen::VectorXd::Ones(1);
    for (std::size_t k = d - 1; k-- > 0;) right[k] = p.core(k + 1).contract(grid.weights()) * right[k + 1];

    // Each core with the trailing marginal folded in: per mode an (R_k x N) matrix.
    std::vector<Eigen::MatrixXd> folded(d);
    for (std::size_t k = 0; k < d; ++k) {
        const TTCore& c = p.core(k);
        folded[k].resize(static_cast<Eigen::Index>(c.left), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) folded[k].col(static_cast<Eigen::Index>(i)) = c.slice(i) * right[k];
    }

    std::vector<double> fine(kSamplerGrid);
    for (std::size_t j = 0; j < kSamplerGrid; ++j) {
        fine[j] = grid.lower() + (grid.upper() - grid.lower()) * static_cast<double>(j) / static_cast<double>(kSamplerGrid - 1);
    }
    const Eigen::MatrixXd refine = grid.interpolation_matrix(fine);  // kSamplerGrid x N

    PointCloud cloud(n, d);
    Rng rng(seed);
    LinearCdf cdf(grid.lower(), grid.upper());

    // The first conditional is the same for every sample.
    LinearCdf first(grid.lower(), grid.upper());
    const bool first_ok = first.build(refine * folded[0].row(0).transpose());

    for (std::size_t s = 0; s < n; ++s) {
        Eigen::RowVectorXd left = Eigen::RowVectorXd::Ones(1);
        for (std::size_t k = 0; k < d; ++k) {
            const bool ok = k == 0 ? first_ok : cdf.build(refine * (left * folded[k]).transpose());
            if (!ok) {
                std::ostringstream msg;
                msg << "sample_tt: conditional density has no positive mass after prefix (";
                for (std::size_t j = 0; j < k; ++j) msg << (j ? ", " : "") << cloud.points(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
                msg << ")";
                throw NumericalError(msg.str(), {s, k});
            }
            const double x = (k == 0 ? first : cdf).invert(rng.uniform());
            cloud.points(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = x;
            if (k + 1 < d) left = left * p.core(k).contract(grid.basis(x));
        }
    }
    return cloud;
}

namespace {

struct WorkerTally {
    std::size_t clamped = 0;
    std::size_t floor_hits = 0;
};

class FlowStepper {
public:
    FlowStepper(const DensityTrajectory& traj, bool use_midpoints)
        : traj_(traj), d_(traj.grid.dim()), midpoints_(use_midpoints && traj.has_midpoints()) {}

    // dx/dt at stage time t_m (half = 0), t_m + h/2 (half = 1) or t_{m+1} (half = 2).
    std::vector<double> velocity(std::size_t m, int half, std::vector<double>& x, WorkerTally& tally) const {
        bool moved = false;
        for (auto& xi : x) {
            const double c = traj_.grid.clamp(xi);
            if (c != xi) moved = true;
            xi = c;
        }
        if (moved) ++tally.clamped;
        bool hit = false;
        std::vector<double> s;
        if (half == 0) {
            s = score_at(traj_, m, x, &hit);
        } else if (half == 2) {
            s = score_at(traj_, m + 1, x, &hit);
        } else if (midpoints_) {
            s = score_at_midpoint(traj_, m, x, &hit);
        } else {
            bool hit2 = false;
            s = score_at(traj_, m, x, &hit);
            const auto s1 = score_at(traj_, m + 1, x, &hit2);
            for (std::size_t k = 0; k < d_; ++k) s[k] = 0.5 * (s[k] + s1[k]);
            hit = hit || hit2;
        }
        if (hit) ++tally.floor_hits;
        for (std::size_t k = 0; k < d_; ++k) s[k] = -(x[k] + s[k]);
        return s;
    }

    // Returns false if the state became non-finite.
    bool integrate(std::vector<double>& x, FlowPath* path, WorkerTally& tally) const {
        const double h = traj_.h;
        std::vector<double> stage(d_);
        auto shifted = [&](const std::vector<double>& k, double a) {
            for (std::size_t j = 0; j < d_; ++j) stage[j] = x[j] + a * k[j];
            return stage;
        };
        for (std::size_t m = 0; m < traj_.steps; ++m) {
            auto k1 = velocity(m, 0, x, tally);
            auto y = shifted(k1, 0.5 * h);
            auto k2 = velocity(m, 1, y, tally);
            y = shifted(k2, 0.5 * h);
            auto k3 = velocity(m, 1, y, tally);
            y = shifted(k3, h);
            auto k4 = velocity(m, 2, y, tally);
            for (std::size_t j = 0; j < d_; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            for (double v : x) {
                if (!std::isfinite(v)) return false;
            }
            if (path) {
                path->times.push_back(traj_.time(m + 1));
                path->states.push_back(x);
            }
        }
        for (auto& xi : x) {
            const double c = traj_.grid.clamp(xi);
            if (c != xi) ++tally.clamped;
            xi = c;
        }
        return true;
    }

private:
    const DensityTrajectory& traj_;
    std::size_t d_;
    bool midpoints_;
};

}  // namespace

FlowResult flow_integrate(const DensityTrajectory& traj, const PointCloud& x0, const FlowOptions& opt) {
    if (traj.snapshots.size() != traj.steps + 1 || traj.steps == 0) {
        throw InvalidInput("flow_integrate: trajectory is incomplete");
    }
    if (x0.dim() != traj.grid.dim()) throw InvalidInput("flow_integrate: dimension mismatch");
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (!traj.grid.contains(x0.point(i))) throw DomainError("flow_integrate: start point outside the box");
    }

    const std::size_t n = x0.size();
    FlowResult out;
    out.x1 = x0;
    out.failed.assign(n, false);
    if (opt.record_paths) out.paths.resize(n);

    const FlowStepper stepper(traj, opt.use_midpoints);
    const std::size_t workers = std::clamp<std::size_t>(opt.workers, 1, std::max<std::size_t>(n, 1));
    std::vector<WorkerTally> tallies(workers);
    std::vector<char> failed(n, 0);

    auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            const auto p = x0.point(i);
            std::vector<double> x(p.begin(), p.end());
            FlowPath* path = nullptr;
            if (opt.record_paths) {
                path = &out.paths[i];
                path->id = x0.ids[i];
                path->times.push_back(0.0);
                path->states.push_back(x);
            }
            bool ok = false;
            try {
                ok = stepper.integrate(x, path, tallies[w]);
            } catch (const DomainError&) {
                // A NaN stage state cannot be located in the box.
            }
            if (ok) {
                std::copy(x.begin(), x.end(), out.x1.point(i).begin());
            } else {
                failed[i] = 1;
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }

    for (std::size_t i = 0; i < n; ++i) out.failed[i] = failed[i] != 0;
    for (const auto& t : tallies) {
        out.clamped += t.clamped;
        out.floor_hits += t.floor_hits;
    }
    return out;
}

double straightness_diagnostic(const FlowPath& path) {
    if (path.states.empty()) throw InvalidInput("straightness_diagnostic: empty path");
    const auto& a = path.states.front();
    const auto& b = path.states.back();
    const std::size_t d = a.size();
    double len2 = 0.0, start2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) len2 += (b[k] - a[k]) * (b[k] - a[k]), start2 += a[k] * a[k];
    const double len = std::sqrt(len2);
    // Displacements at the integrator's noise level count as a zero chord.
    if (len <= kStraightnessMinChord * (1.0 + std::sqrt(start2))) return 0.0;
    double worst = 0.0;
    for (const auto& s : path.states) {
        double along = 0.0;
        for (std::size_t k = 0; k < d; ++k) along += (s[k] - a[k]) * (b[k] - a[k]);
        along /= len2;
        double perp2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double r = s[k] - a[k] - along * (b[k] - a[k]);
            perp2 += r * r;
        }
        worst = std::max(worst, std::sqrt(perp2));
    }
    return worst / len;
}

std::vector<double> straightness_diagnostic(const std::vector<FlowPath>& paths) {
    if (paths.empty()) throw InvalidInput("straightness_diagnostic: no paths");
    std::vector<double> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(straightness_diagnostic(p));
    return out;
}

void write_paths_csv(std::ostream& out, const std::vector<FlowPath>& paths, std::size_t d) {
    out << "id,t";
    for (std::size_t k = 1; k <= d; ++k) out << ",x_" << k;
    out << '\n';
    const auto old = out.precision(17);
    for (const auto& p : paths) {
        for (std::size_t m = 0; m < p.states.size(); ++m) {
            out << p.id << ',' << p.times[m];
            for (double v : p.states[m]) out << ',' << v;
            out << '\n';
        }
    }
    out.precision(old);
}

}  // namespace ddpmot
