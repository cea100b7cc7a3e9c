#pragma once

#include "ddpmot/cheb.hpp"
#include "ddpmot/tt.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ddpmot {

/// How the per-step diffusion / convection split is weighted.
///  - strang:   e^{(h/2)V} e^{hW} e^{(h/2)V}, second order in h.
///  - exact_ou: e^{tau V} e^{hW} e^{tau V} with tau = tanh(h)/2. For the linear
///              drift x the dilation and the heat flow compose into the exact
///              Ornstein-Uhlenbeck step, so the time discretization error vanishes.
enum class SplittingScheme { strang, exact_ou };

/// How the convection (dilation) step is realized on the TT cores.
///  - cross:     TT-cross re-interpolation of idx -> e^{dh} p(e^h x_idx).
///  - separable: the same map applied mode-wise as one interpolation matrix per mode.
enum class ConvectionMethod { cross, separable };

std::string to_string(SplittingScheme s);
std::string to_string(ConvectionMethod m);
SplittingScheme parse_splitting(const std::string& s);
ConvectionMethod parse_convection(const std::string& s);

struct FpeOptions {
    double round_tol = 1e-10;
    std::size_t max_rank = 50;
    double cross_tol = 1e-10;
    SplittingScheme splitting = SplittingScheme::exact_ou;
    ConvectionMethod convection = ConvectionMethod::cross;
    bool renormalize = true;
    /// Also store densities at (m + 1/2) h for the Runge-Kutta midpoint stages.
    bool midpoints = true;
    /// Score denominators are floored at floor_factor * (max node value).
    double floor_factor = 1e-12;
};

/// Heat semigroup exp(tau * D2) on one mode, with zero Dirichlet values on the
/// two boundary nodes (the densities are negligible there).
class HeatPropagator {
public:
    HeatPropagator(const ChebGrid& grid, double tau);
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    TTTensor apply(const TTTensor& p) const;

private:
    Eigen::MatrixXd matrix_;
};

/// Heat flow dp/dt = lap p for time tau, applied along every mode.
TTTensor diffusion_step(const TTTensor& p, const ChebGrid& grid, double tau);

/// One diffusion half step of the splitting: heat flow for time h/2.
TTTensor diffusion_halfstep(const TTTensor& p, const ChebGrid& grid, double h);

struct ConvectionResult {
    TTTensor tensor;
    double cross_error = 0.0;
    bool rank_capped = false;
};

/// Exact characteristics of dp/dt = div(x p) over time h: p_new(x) = e^{dh} p(e^h x),
/// with p taken as zero outside the box.
ConvectionResult convection_step(const TTTensor& p, const ChebGrid& grid, double h,
                                 ConvectionMethod method = ConvectionMethod::cross, double cross_tol = 1e-10);

struct StepDiagnostics {
    std::size_t step = 0;
    std::vector<std::size_t> ranks;
    double mass_before_renorm = 1.0;
    double min_value = 0.0;
    double max_value = 0.0;
    double cross_error = 0.0;
    bool rank_capped = false;
};

/// Normalized density snapshots p(., m h), m = 0..M, plus optional midpoints.
struct DensityTrajectory {
    ChebGrid grid;
    double h = 0.0;
    double t_max = 0.0;
    std::size_t steps = 0;
    SplittingScheme splitting = SplittingScheme::exact_ou;
    std::vector<TTTensor> snapshots;
    std::vector<TTTensor> midpoints;
    std::vector<double> snapshot_floor;
    std::vector<double> midpoint_floor;
    std::vector<StepDiagnostics> diagnostics;
    std::size_t cross_warnings = 0;

    explicit DensityTrajectory(ChebGrid g) : grid(std::move(g)) {}
    double time(std::size_t m) const { return static_cast<double>(m) * h; }
    bool has_midpoints() const { return midpoints.size() == steps; }
};

DensityTrajectory fpe_solve(const TTTensor& p0, const ChebGrid& grid, std::size_t steps, double t_max,
                            const FpeOptions& options = {});

/// grad p / max(p, floor) at x. Sets *floored when the floor was active.
std::vector<double> log_gradient(const TTTensor& p, const ChebGrid& grid, double floor, std::span<const double> x,
                                 bool* floored = nullptr);

/// Score of snapshot m at x.
std::vector<double> score_at(const DensityTrajectory& traj, std::size_t m, std::span<const double> x,
                             bool* floored = nullptr);
/// Score of the stored density at (m + 1/2) h.
std::vector<double> score_at_midpoint(const DensityTrajectory& traj, std::size_t m, std::span<const double> x,
                                      bool* floored = nullptr);

/// Directory with snapshot_%06d.tt (and midpoint_%06d.tt) files plus manifest.json.
void save_trajectory(const DensityTrajectory& traj, const std::filesystem::path& dir);
DensityTrajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace ddpmot
