#pragma once

#include "ddpmot/cheb.hpp"
#include "ddpmot/fpe.hpp"
#include "ddpmot/tt.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace ddpmot {

/// n points in R^d, one per row. ids[i] == i; pairing across clouds is by row.
struct PointCloud {
    RowMatrix points;
    std::vector<std::size_t> ids;

    PointCloud() = default;
    PointCloud(std::size_t n, std::size_t d);
    explicit PointCloud(RowMatrix pts);

    std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
    std::span<const double> point(std::size_t i) const {
        return {points.data() + i * dim(), dim()};
    }
    std::span<double> point(std::size_t i) { return {points.data() + i * dim(), dim()}; }
};

struct FlowPath {
    std::size_t id = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
};

/// Uniform points of the refined grid behind each one-dimensional inverse CDF.
inline constexpr std::size_t kSamplerGrid = 2048;

/// n i.i.d. draws from the interpolant of p by sequential conditionals.
/// A conditional without positive mass throws NumericalError whose index is
/// {sample, mode} and whose message lists the coordinates drawn so far.
PointCloud sample_tt(const TTTensor& p, const ChebGrid& grid, std::size_t n, std::uint64_t seed);

struct FlowOptions {
    std::size_t workers = 1;
    bool record_paths = false;
    /// Use the stored half-step densities when present; otherwise average the
    /// scores of the neighbouring snapshots at the midpoint stages.
    bool use_midpoints = true;
};

struct FlowResult {
    PointCloud x1;
    std::vector<FlowPath> paths;
    std::vector<bool> failed;
    std::size_t clamped = 0;
    std::size_t floor_hits = 0;
    std::size_t failures() const;
};

/// Classical RK4 for dx/dt = -(x + grad log p_t(x)) from 0 to t_max, one step per snapshot.
FlowResult flow_integrate(const DensityTrajectory& traj, const PointCloud& x0, const FlowOptions& options = {});

/// Relative chord length below which a path counts as not moving.
inline constexpr double kStraightnessMinChord = 1e-6;

/// Max distance from the states to the chord between first and last state, over
/// the chord length; 0 for a chord shorter than kStraightnessMinChord (1 + |x_0|).
double straightness_diagnostic(const FlowPath& path);
std::vector<double> straightness_diagnostic(const std::vector<FlowPath>& paths);

/// CSV with header id,t,x_1..x_d, one row per stored state.
void write_paths_csv(std::ostream& out, const std::vector<FlowPath>& paths, std::size_t d);

}  // namespace ddpmot
