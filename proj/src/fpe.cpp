#include "ddpmot/fpe.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/tt_cross.hpp"
#include "ddpmot/tt_io.hpp"

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ddpmot {

std::string to_string(SplittingScheme s) { return s == SplittingScheme::strang ? "strang" : "exact_ou"; }
std::string to_string(ConvectionMethod m) { return m == ConvectionMethod::cross ? "cross" : "separable"; }

SplittingScheme parse_splitting(const std::string& s) {
    if (s == "strang") return SplittingScheme::strang;
    if (s == "exact_ou") return SplittingScheme::exact_ou;
    throw InvalidInput("unknown splitting scheme '" + s + "'");
}

ConvectionMethod parse_convection(const std::string& s) {
    if (s == "cross") return ConvectionMethod::cross;
    if (s == "separable") return ConvectionMethod::separable;
    throw InvalidInput("unknown convection method '" + s + "'");
}

HeatPropagator::HeatPropagator(const ChebGrid& grid, double tau) {
    if (tau < 0.0) throw InvalidInput("HeatPropagator: tau must be nonnegative");
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (tau == 0.0) {
        matrix_ = Eigen::MatrixXd::Identity(n, n);
        return;
    }
    matrix_ = Eigen::MatrixXd::Zero(n, n);
    if (n > 2) {
        const Eigen::MatrixXd interior = tau * grid.d2().block(1, 1, n - 2, n - 2);
        matrix_.block(1, 1, n - 2, n - 2) = interior.exp();
    }
    if (!matrix_.allFinite()) throw NumericalError("HeatPropagator: matrix exponential is not finite");
}

TTTensor HeatPropagator::apply(const TTTensor& p) const {
    TTTensor q = p;
    for (std::size_t k = 0; k < p.dim(); ++k) q = tt_mode_apply(q, matrix_, k);
    return q;
}

TTTensor diffusion_step(const TTTensor& p, const ChebGrid& grid, double tau) {
    if (p.dim() != grid.dim()) throw InvalidInput("diffusion_step: dimension mismatch");
    return HeatPropagator(grid, tau).apply(p);
}

TTTensor diffusion_halfstep(const TTTensor& p, const ChebGrid& grid, double h) {
    if (!(h > 0.0)) throw InvalidInput("diffusion_halfstep: h must be positive");
    return diffusion_step(p, grid, 0.5 * h);
}

ConvectionResult convection_step(const TTTensor& p, const ChebGrid& grid, double h, ConvectionMethod method,
                                 double cross_tol) {
    if (p.dim() != grid.dim()) throw InvalidInput("convection_step: dimension mismatch");
    if (h < 0.0) throw InvalidInput("convection_step: h must be nonnegative");
    if (h == 0.0) return {p, 0.0, false};

    const double factor = std::exp(h);
    const Eigen::MatrixXd dilation = factor * grid.dilation_matrix(factor);

    // Per-mode cores with every node slice already interpolated at e^h x_i.
    std::vector<TTCore> moved;
    moved.reserve(p.dim());
    for (std::size_t k = 0; k < p.dim(); ++k) moved.push_back(tt_mode_apply(p, dilation, k).core(k));

    if (method == ConvectionMethod::separable) return {TTTensor(std::move(moved)), 0.0, false};

    const std::size_t d = p.dim();
    EntryFunction entry = [&moved, d](std::span<const std::size_t> idx) {
        Eigen::RowVectorXd v = moved[0].slice(idx[0]);
        for (std::size_t k = 1; k < d; ++k) v = v * moved[k].slice(idx[k]);
        return v(0);
    };
    CrossOptions opt;
    opt.tol = cross_tol;
    const auto ranks = p.ranks();
    opt.start_ranks.assign(ranks.begin() + 1, ranks.end() - 1);
    // The exact result has the input ranks; the slack only matters if the
    // warm-started index sets turn out poorly conditioned.
    opt.max_rank = p.max_rank() + 2;
    opt.initial_right = tt_right_index_sets(TTTensor(moved));
    const auto sizes = p.mode_sizes();
    CrossResult cr = tt_cross(entry, sizes, opt);
    return {std::move(cr.tensor), cr.validation_error, cr.rank_capped};
}

namespace {

class SplitStep {
public:
    SplitStep(const ChebGrid& grid, double h, const FpeOptions& opt)
        : grid_(grid), h_(h), opt_(opt),
          heat_(grid, opt.splitting == SplittingScheme::strang ? 0.5 * h : 0.5 * std::tanh(h)) {}

    struct Outcome {
        TTTensor tensor;
        double cross_error = 0.0;
        bool rank_capped = false;
    };

    Outcome advance(const TTTensor& p) const {
        TTTensor q = heat_.apply(p);
        ConvectionResult conv = convection_step(q, grid_, h_, opt_.convection, opt_.cross_tol);
        q = heat_.apply(conv.tensor);
        q = tt_round(q, opt_.round_tol, opt_.max_rank);
        return {std::move(q), conv.cross_error, conv.rank_capped};
    }

private:
    const ChebGrid& grid_;
    double h_;
    const FpeOptions& opt_;
    HeatPropagator heat_;
};

double checked_mass(const TTTensor& p, const ChebGrid& grid, std::size_t step) {
    const double mass = tt_integrate(p, grid.quadrature());
    if (!std::isfinite(mass) || mass <= 0.0) {
        throw NumericalError("fpe_solve: density mass collapsed to " + std::to_string(mass) + " at step " +
                             std::to_string(step));
    }
    return mass;
}

}  // namespace

DensityTrajectory fpe_solve(const TTTensor& p0, const ChebGrid& grid, std::size_t steps, double t_max,
                            const FpeOptions& opt) {
    if (p0.dim() != grid.dim() || p0.mode_sizes() != grid.mode_sizes()) {
        throw InvalidInput("fpe_solve: initial density does not live on the grid");
    }
    if (steps < 1) throw InvalidInput("fpe_solve: need at least one time step");
    if (!(t_max > 0.0)) throw InvalidInput("fpe_solve: t_max must be positive");

    DensityTrajectory traj(grid);
    traj.steps = steps;
    traj.t_max = t_max;
    traj.h = t_max / static_cast<double>(steps);
    traj.splitting = opt.splitting;

    auto record = [&](const TTTensor& p, std::size_t step, double mass, double cross_error, bool capped) {
        const TTExtrema ext = tt_extrema(p);
        traj.snapshots.push_back(p);
        traj.snapshot_floor.push_back(opt.floor_factor * ext.max);
        traj.diagnostics.push_back({step, p.ranks(), mass, ext.min, ext.max, cross_error, capped});
        if (capped) ++traj.cross_warnings;
    };

    record(p0, 0, tt_integrate(p0, grid.quadrature()), 0.0, false);

    const SplitStep full(grid, traj.h, opt);
    const SplitStep half(grid, 0.5 * traj.h, opt);
    TTTensor p = p0;
    for (std::size_t m = 0; m < steps; ++m) {
        if (opt.midpoints) {
            auto mid = half.advance(p);
            if (mid.rank_capped) ++traj.cross_warnings;
            const double mass = checked_mass(mid.tensor, grid, m);
            TTTensor q = opt.renormalize ? tt_scale(mid.tensor, 1.0 / mass) : mid.tensor;
            traj.midpoint_floor.push_back(opt.floor_factor * tt_extrema(q).max);
            traj.midpoints.push_back(std::move(q));
        }
        auto next = full.advance(p);
        const double mass = checked_mass(next.tensor, grid, m + 1);
        p = opt.renormalize ? tt_scale(next.tensor, 1.0 / mass) : std::move(next.tensor);
        record(p, m + 1, mass, next.cross_error, next.rank_capped);
    }
    return traj;
}

std::vector<double> log_gradient(const TTTensor& p, const ChebGrid& grid, double floor, std::span<const double> x,
                                 bool* floored) {
    const ValueAndGradient vg = interp_value_and_grad(p, grid, x);
    const bool hit = vg.value < floor;
    if (floored) *floored = hit;
    const double denom = hit ? floor : vg.value;
    std::vector<double> s(vg.gradient.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = vg.gradient[k] / denom;
    return s;
}

std::vector<double> score_at(const DensityTrajectory& traj, std::size_t m, std::span<const double> x, bool* floored) {
    if (m > traj.steps) throw InvalidInput("score_at: step index out of range");
    return log_gradient(traj.snapshots[m], traj.grid, traj.snapshot_floor[m], x, floored);
}

std::vector<double> score_at_midpoint(const DensityTrajectory& traj, std::size_t m, std::span<const double> x,
                                      bool* floored) {
    if (m >= traj.midpoints.size()) throw InvalidInput("score_at_midpoint: no midpoint density for this step");
    return log_gradient(traj.midpoints[m], traj.grid, traj.midpoint_floor[m], x, floored);
}

namespace {

std::string numbered(const char* stem, std::size_t m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06zu.tt", stem, m);
    return buf;
}

}  // namespace

void save_trajectory(const DensityTrajectory& traj, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["grid"] = {{"d", traj.grid.dim()},
                        {"n", traj.grid.size()},
                        {"lower", traj.grid.lower()},
                        {"upper", traj.grid.upper()}};
    manifest["h"] = traj.h;
    manifest["t_max"] = traj.t_max;
    manifest["M"] = traj.steps;
    manifest["splitting"] = to_string(traj.splitting);
    manifest["cross_warnings"] = traj.cross_warnings;
    manifest["snapshot_floor"] = traj.snapshot_floor;
    manifest["midpoint_floor"] = traj.midpoint_floor;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : traj.diagnostics) {
        steps.push_back({{"step", s.step},
                         {"ranks", s.ranks},
                         {"mass_before_renorm", s.mass_before_renorm},
                         {"min_value", s.min_value},
                         {"max_value", s.max_value},
                         {"cross_error", s.cross_error},
                         {"rank_capped", s.rank_capped}});
    }
    manifest["steps"] = std::move(steps);
    for (std::size_t m = 0; m < traj.snapshots.size(); ++m) save_tt(dir / numbered("snapshot", m), traj.snapshots[m]);
    for (std::size_t m = 0; m < traj.midpoints.size(); ++m) save_tt(dir / numbered("midpoint", m), traj.midpoints[m]);
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

DensityTrajectory load_trajectory(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw InvalidInput("load_trajectory: no manifest in " + dir.string());
    const auto manifest = nlohmann::json::parse(in);
    const auto& g = manifest.at("grid");
    DensityTrajectory traj(ChebGrid(g.at("d").get<std::size_t>(), g.at("n").get<std::size_t>(),
                                    g.at("lower").get<double>(), g.at("upper").get<double>()));
    traj.h = manifest.at("h").get<double>();
    traj.t_max = manifest.at("t_max").get<double>();
    traj.steps = manifest.at("M").get<std::size_t>();
    traj.splitting = parse_splitting(manifest.at("splitting").get<std::string>());
    traj.cross_warnings = manifest.at("cross_warnings").get<std::size_t>();
    traj.snapshot_floor = manifest.at("snapshot_floor").get<std::vector<double>>();
    traj.midpoint_floor = manifest.at("midpoint_floor").get<std::vector<double>>();
    for (const auto& s : manifest.at("steps")) {
        traj.diagnostics.push_back({s.at("step").get<std::size_t>(), s.at("ranks").get<std::vector<std::size_t>>(),
                                    s.at("mass_before_renorm").get<double>(), s.at("min_value").get<double>(),
                                    s.at("max_value").get<double>(), s.at("cross_error").get<double>(),
                                    s.at("rank_capped").get<bool>()});
    }
    for (std::size_t m = 0; m <= traj.steps; ++m) traj.snapshots.push_back(load_tt(dir / numbered("snapshot", m)));
    for (std::size_t m = 0; m < traj.midpoint_floor.size(); ++m) {
        traj.midpoints.push_back(load_tt(dir / numbered("midpoint", m)));
    }
    return traj;
}

}  // namespace ddpmot
