#include "ddpmot/density.hpp"

#include "ddpmot/error.hpp"
#include "ddpmot/rng.hpp"
#include "ddpmot/tt_cross.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ddpmot {

double QuarticComponent::exponent(std::span<const double> x) const {
    const auto d = static_cast<Eigen::Index>(x.size());
    double q1 = 0.0, q2 = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ui = x[static_cast<std::size_t>(i)] - a1(i);
        const double vi = x[static_cast<std::size_t>(i)] - a2(i);
        for (Eigen::Index j = 0; j < d; ++j) {
            const double uj = x[static_cast<std::size_t>(j)] - a1(j);
            const double vj = x[static_cast<std::size_t>(j)] - a2(j);
            q1 += ui * Q1(i, j) * uj;
            q2 += vi * vi * Q2(i, j) * vj * vj;
        }
    }
    return q1 + q2;
}

double QuarticComponent::operator()(std::span<const double> x) const { return std::exp(-exponent(x)) / Z; }

double MixtureSpec::operator()(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& c : components) s += c(x);
    return s / static_cast<double>(components.size());
}

namespace {

Eigen::MatrixXd random_spd(Rng& rng, std::size_t d, const MixtureLaw& law) {
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    }
    Eigen::MatrixXd q = law.q_scale * a * a.transpose() + law.q_shift * Eigen::MatrixXd::Identity(n, n);
    return 0.5 * (q + q.transpose());
}

Eigen::VectorXd random_vector(Rng& rng, std::size_t d, double range) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-range, range);
    return v;
}

// Integral of exp(-exponent) over the box by tensor-product Clenshaw-Curtis.
double component_mass(const QuarticComponent& c, std::size_t d, double lo, double hi) {
    const std::size_t n = d <= 2 ? 129 : 97;
    const auto nodes = cheb_nodes(n, lo, hi);
    const auto w = cc_weights(n, lo, hi);
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d, nodes[0]);
    double total = 0.0;
    while (true) {
        double weight = 1.0;
        for (std::size_t k = 0; k < d; ++k) weight *= w[idx[k]];
        total += weight * std::exp(-c.exponent(x));
        std::size_t k = d;
        while (k-- > 0) {
            if (++idx[k] < n) {
                x[k] = nodes[idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = nodes[0];
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    return total;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j2 = 0; j2 < m.cols(); ++j2) m(i, j2) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j2)];
    }
    return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
        j.push_back(row);
    }
    return j;
}

std::vector<double> vector_of(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

MixtureSpec gen_quartic_mixture(std::size_t d, std::uint64_t seed, const MixtureLaw& law, std::pair<double, double> box) {
    if (d != 2 && d != 3) throw InvalidInput("gen_quartic_mixture: the quartic family is defined for d = 2 and 3");
    if (!(box.first < box.second)) throw InvalidInput("gen_quartic_mixture: empty box");
    Rng rng(seed);
    MixtureSpec m;
    m.d = d;
    m.seed = seed;
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(5));
    for (std::size_t c = 0; c < k; ++c) {
        QuarticComponent comp;
        comp.a1 = random_vector(rng, d, law.mean_range);
        comp.a2 = random_vector(rng, d, law.mean_range);
        comp.Q1 = random_spd(rng, d, law);
        comp.Q2 = law.q2_factor * random_spd(rng, d, law);
        comp.Z = component_mass(comp, d, box.first, box.second);
        m.components.push_back(std::move(comp));
    }
    return m;
}

TTTensor gen_tt_random(std::size_t d, std::uint64_t seed, const ChebGrid& grid, double smoothing) {
    if (d < 2) throw InvalidInput("gen_tt_random: d must be at least 2");
    if (grid.dim() != d) throw InvalidInput("gen_tt_random: grid dimension mismatch");
    if (smoothing < 0.0) throw InvalidInput("gen_tt_random: smoothing width must be nonnegative");
    const std::size_t n = grid.size();
    const auto& x = grid.nodes();
    const auto& w = grid.weights();

    Eigen::MatrixXd kernel = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (smoothing > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double r = (x[i] - x[j]) / smoothing;
                const double v = std::exp(-0.5 * r * r) * w[j];
                kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
                total += v;
            }
            kernel.row(static_cast<Eigen::Index>(i)) /= total;
        }
    }

    Rng rng(seed);
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        TTCore c(k == 0 ? 1 : 2, n, k + 1 == d ? 1 : 2);
        for (auto& v : c.values) v = rng.uniform();
        cores.push_back(std::move(c));
    }
    TTTensor q(std::move(cores));
    for (std::size_t k = 0; k < d; ++k) q = tt_mode_apply(q, kernel, k);

    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(-0.5 * x[i] * x[i]) / std::sqrt(2.0 * std::numbers::pi);
    const TTTensor p = tt_hadamard(q, TTTensor::rank_one(std::vector<std::vector<double>>(d, g)));
    const double mass = tt_integrate(p, grid.quadrature());
    if (!(mass > 0.0)) throw NumericalError("gen_tt_random: density has no mass");
    return tt_scale(p, 1.0 / mass);
}

GaussianSpec gen_gaussian(std::size_t d, std::uint64_t seed) {
    if (d < 1) throw InvalidInput("gen_gaussian: d must be positive");
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(d);
    const Eigen::VectorXd mean = random_vector(rng, d, 1.0);
    Eigen::VectorXd lambda(n);
    for (Eigen::Index i = 0; i < n; ++i) lambda(i) = rng.uniform(0.5, 1.5);
    Eigen::MatrixXd cov = lambda.asDiagonal();
    if (d <= 3) {
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
        }
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
        cov = q * lambda.asDiagonal() * q.transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
    }
    return GaussianSpec(mean, cov);
}

GaussianSpec rescaled(const GaussianSpec& spec, double scale, double center) {
    if (!(scale > 0.0)) throw InvalidInput("rescaled: scale must be positive");
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(spec.mean().size(), center);
    return GaussianSpec(c + (spec.mean() - c) / scale, spec.covariance() / (scale * scale));
}

TTTensor gaussian_tensor(const GaussianSpec& spec, const ChebGrid& grid) {
    const std::size_t d = spec.dim();
    if (grid.dim() != d) throw InvalidInput("gaussian_tensor: grid dimension mismatch");
    const Eigen::MatrixXd& cov = spec.covariance();
    const bool diagonal = (cov - Eigen::MatrixXd(cov.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    if (diagonal) {
        std::vector<std::vector<double>> factors(d, std::vector<double>(grid.size()));
        for (std::size_t k = 0; k < d; ++k) {
            const double var = cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            const double mu = spec.mean()(static_cast<Eigen::Index>(k));
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double r = grid.node(i) - mu;
                factors[k][i] = std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * std::numbers::pi * var);
            }
        }
        return TTTensor::rank_one(factors);
    }
    const DensityFunction pdf = [&spec](std::span<const double> x) {
        return spec.pdf(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
    };
    double count = 1.0;
    for (std::size_t k = 0; k < d; ++k) count *= static_cast<double>(grid.size());
    if (count <= 4e6) return tt_from_dense(sample_on_grid(grid, pdf), 1e-14);
    std::vector<double> x(d);
    EntryFunction entry = [&](std::span<const std::size_t> idx) {
        for (std::size_t k = 0; k < d; ++k) x[k] = grid.node(idx[k]);
        return pdf(x);
    };
    CrossOptions opt;
    opt.tol = 1e-12;
    opt.max_rank = 50;
    opt.round_tol = 1e-14;
    const auto sizes = grid.mode_sizes();
    return tt_cross(entry, sizes, opt).tensor;
}

namespace {

// p with core k restricted to node i: one boundary face as a (d-1)-way tensor.
TTTensor face(const TTTensor& p, std::size_t k, std::size_t i) {
    std::vector<TTCore> cores = p.cores();
    const TTCore& c = cores[k];
    TTCore fixed(c.left, 1, c.right);
    for (std::size_t a = 0; a < c.left; ++a) {
        for (std::size_t b = 0; b < c.right; ++b) fixed(a, 0, b) = c(a, i, b);
    }
    cores[k] = std::move(fixed);
    return TTTensor(std::move(cores));
}

double face_abs_max(const TTTensor& p, std::size_t k, std::size_t i) {
    const TTExtrema e = tt_extrema(face(p, k, i));
    return std::max(e.max, -e.min);
}

Eigen::MatrixXd centered_dilation(const ChebGrid& grid, double s) {
    const double c = 0.5 * (grid.lower() + grid.upper());
    std::vector<double> pts(grid.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = c + s * (grid.node(i) - c);
    return grid.interpolation_matrix(pts);
}

// Max |f| over all boundary-face nodes, or a negative value when there are too many.
double callable_boundary_max(const DensityFunction& f, const ChebGrid& grid, std::size_t limit) {
    const std::size_t d = grid.dim(), n = grid.size();
    double count = 2.0 * static_cast<double>(d);
    for (std::size_t k = 1; k < d; ++k) count *= static_cast<double>(n);
    if (count > static_cast<double>(limit)) return -1.0;
    double worst = 0.0;
    std::vector<std::size_t> idx(d);
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t side : {std::size_t{0}, n - 1}) {
            std::fill(idx.begin(), idx.end(), 0);
            idx[k] = side;
            while (true) {
                for (std::size_t j = 0; j < d; ++j) x[j] = grid.node(idx[j]);
                worst = std::max(worst, std::abs(f(x)));
                std::size_t j = d;
                while (j-- > 0) {
                    if (j == k) continue;
                    if (++idx[j] < n) break;
                    idx[j] = 0;
                }
                if (j == static_cast<std::size_t>(-1)) break;
            }
        }
    }
    return worst;
}

CertifiedDensity finish(TTTensor t, const ChebGrid& grid, double scale, std::size_t rescales, double ratio) {
    CertifiedDensity out;
    out.mass = tt_integrate(t, grid.quadrature());
    if (!(out.mass > 0.0) || !std::isfinite(out.mass)) throw NumericalError("normalize_and_certify: density has no mass");
    out.tensor = tt_scale(t, 1.0 / out.mass);
    out.scale = scale;
    out.rescales = rescales;
    out.boundary_ratio = ratio;
    return out;
}

void check_certify_options(const CertifyOptions& opt) {
    if (!(opt.rescale > 1.0)) throw InvalidInput("normalize_and_certify: rescale factor must exceed 1");
    if (!(opt.boundary_ratio > 0.0)) throw InvalidInput("normalize_and_certify: boundary ratio must be positive");
}

}  // namespace

double boundary_ratio(const TTTensor& p) {
    const double peak = tt_extrema(p).max;
    if (!(peak > 0.0)) throw NumericalError("boundary_ratio: tensor has no positive entry");
    const auto sizes = p.mode_sizes();
    double worst = 0.0;
    for (std::size_t k = 0; k < p.dim(); ++k) {
        worst = std::max({worst, face_abs_max(p, k, 0), face_abs_max(p, k, sizes[k] - 1)});
    }
    return worst / peak;
}

CertifiedDensity normalize_and_certify(const DensityFunction& f, const ChebGrid& grid, const CertifyOptions& opt) {
    check_certify_options(opt);
    const double c = 0.5 * (grid.lower() + grid.upper());
    const auto sizes = grid.mode_sizes();
    double scale = 1.0;
    double ratio = 0.0;
    for (std::size_t attempt = 0; attempt <= opt.max_rescales; ++attempt, scale *= opt.rescale) {
        const DensityFunction g = [&f, c, scale](std::span<const double> x) {
            std::vector<double> y(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = c + scale * (x[k] - c);
            return f(y);
        };
        std::vector<double> x(grid.dim());
        EntryFunction entry = [&](std::span<const std::size_t> idx) {
            for (std::size_t k = 0; k < idx.size(); ++k) x[k] = grid.node(idx[k]);
            return g(x);
        };
        CrossOptions copt;
        copt.tol = opt.cross_tol;
        copt.max_rank = opt.cross_max_rank;
        copt.round_tol = opt.round_tol;
        CrossResult cr = tt_cross(entry, sizes, copt);

        const double peak = tt_extrema(cr.tensor).max;
        if (!(peak > 0.0)) throw NumericalError("normalize_and_certify: density has no positive node value");
        const double edge = callable_boundary_max(g, grid, 4'000'000);
        ratio = edge >= 0.0 ? edge / peak : boundary_ratio(cr.tensor);
        if (ratio <= opt.boundary_ratio) {
            CertifiedDensity out = finish(std::move(cr.tensor), grid, scale, attempt, ratio);
            out.cross_error = cr.validation_error;
            out.cross_rank_capped = cr.rank_capped;
            return out;
        }
    }
    throw NumericalError("normalize_and_certify: boundary certificate not reached after " +
                         std::to_string(opt.max_rescales) + " rescales (ratio " + std::to_string(ratio) + ")");
}

CertifiedDensity normalize_and_certify(const TTTensor& p, const ChebGrid& grid, const CertifyOptions& opt) {
    check_certify_options(opt);
    if (p.dim() != grid.dim() || p.mode_sizes() != grid.mode_sizes()) {
        throw InvalidInput("normalize_and_certify: tensor does not live on the grid");
    }
    const double ratio = boundary_ratio(p);
    if (ratio > opt.boundary_ratio) {
        throw NumericalError("normalize_and_certify: grid tensor fails the boundary certificate (ratio " +
                             std::to_string(ratio) + ") and has no values beyond the box to rescale with");
    }
    return finish(p, grid, 1.0, 0, ratio);
}

CertifiedDensity normalize_and_certify(const GaussianSpec& spec, const ChebGrid& grid, const CertifyOptions& opt) {
    check_certify_options(opt);
    const double c = 0.5 * (grid.lower() + grid.upper());
    double scale = 1.0;
    double ratio = 0.0;
    for (std::size_t attempt = 0; attempt <= opt.max_rescales; ++attempt, scale *= opt.rescale) {
        TTTensor t = gaussian_tensor(rescaled(spec, scale, c), grid);
        ratio = boundary_ratio(t);
        if (ratio <= opt.boundary_ratio) return finish(std::move(t), grid, scale, attempt, ratio);
    }
    throw NumericalError("normalize_and_certify: boundary certificate not reached after " +
                         std::to_string(opt.max_rescales) + " rescales (ratio " + std::to_string(ratio) + ")");
}

void to_json(nlohmann::json& j, const QuarticComponent& c) {
    j = {{"a1", vector_of(c.a1)},
         {"a2", vector_of(c.a2)},
         {"Q1", matrix_to_json(c.Q1)},
         {"Q2", matrix_to_json(c.Q2)},
         {"Z", c.Z}};
}

void to_json(nlohmann::json& j, const MixtureSpec& m) {
    j = {{"d", m.d}, {"seed", m.seed}, {"K", m.K()}, {"components", m.components}};
}

void from_json(const nlohmann::json& j, MixtureSpec& m) {
    j.at("d").get_to(m.d);
    j.at("seed").get_to(m.seed);
    m.components.clear();
    for (const auto& c : j.at("components")) {
        QuarticComponent comp;
        const auto a1 = c.at("a1").get<std::vector<double>>();
        const auto a2 = c.at("a2").get<std::vector<double>>();
        comp.a1 = Eigen::Map<const Eigen::VectorXd>(a1.data(), static_cast<Eigen::Index>(a1.size()));
        comp.a2 = Eigen::Map<const Eigen::VectorXd>(a2.data(), static_cast<Eigen::Index>(a2.size()));
        comp.Q1 = matrix_from_json(c.at("Q1"));
        comp.Q2 = matrix_from_json(c.at("Q2"));
        comp.Z = c.at("Z").get<double>();
        m.components.push_back(std::move(comp));
    }
}

}  // namespace ddpmot
