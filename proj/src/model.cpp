#include "fpca/model.hpp"

#include <cmath>
#include <sstream>

#include "fpca/errors.hpp"

namespace fpca {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

BasisFunction BasisFunction::fourier_sin(int k, Interval domain) {
    if (k < 1) throw ValidationError("fourier_sin needs k >= 1");
    BasisFunction b;
    b.kind_ = Kind::fourier_sin;
    b.k_ = k;
    b.domain_ = domain;
    return b;
}

BasisFunction BasisFunction::fourier_cos(int k, Interval domain) {
    if (k < 0) throw ValidationError("fourier_cos needs k >= 0");
    BasisFunction b;
    b.kind_ = Kind::fourier_cos;
    b.k_ = k;
    b.domain_ = domain;
    return b;
}

BasisFunction BasisFunction::custom(std::function<double(double)> f, Interval domain) {
    if (!f) throw ValidationError("custom basis needs a callable");
    BasisFunction b;
    b.kind_ = Kind::custom;
    b.domain_ = domain;
    b.fn_ = std::move(f);
    return b;
}

double BasisFunction::operator()(double t) const {
    const double len = domain_.length();
    const double s = (t - domain_.a) / len;
    switch (kind_) {
        case Kind::fourier_sin:
            return std::sqrt(2.0 / len) * std::sin(k_ * kPi * s);
        case Kind::fourier_cos:
            if (k_ == 0) return std::sqrt(1.0 / len);
            return std::sqrt(2.0 / len) * std::cos(k_ * kPi * s);
        case Kind::custom:
            return fn_(t);
    }
    return 0.0;
}

double BasisFunction::second_derivative(double t) const {
    const double len = domain_.length();
    switch (kind_) {
        case Kind::fourier_sin:
        case Kind::fourier_cos: {
            if (kind_ == Kind::fourier_cos && k_ == 0) return 0.0;
            const double freq = k_ * kPi / len;
            return -freq * freq * (*this)(t);
        }
        case Kind::custom: {
            // central differences on the default 2001-point step; shifted
            // stencil at the boundary
            const double h = len / 2000.0;
            double u = t;
            if (u < domain_.a + h) u = domain_.a + h;
            if (u > domain_.b - h) u = domain_.b - h;
            return (fn_(u + h) - 2.0 * fn_(u) + fn_(u - h)) / (h * h);
        }
    }
    return 0.0;
}

std::string BasisFunction::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::fourier_sin: os << "sin:" << k_; break;
        case Kind::fourier_cos: os << "cos:" << k_; break;
        case Kind::custom: os << "custom"; break;
    }
    return os.str();
}

double MeanFunction::value(double t, Interval domain) const {
    const double len = domain.length();
    const double s = (t - domain.a) / len;
    const double scale = std::sqrt(2.0 / len);
    double v = constant + linear * t;
    for (std::size_t k = 0; k < sin_coeffs.size(); ++k)
        v += sin_coeffs[k] * scale * std::sin((k + 1) * kPi * s);
    for (std::size_t k = 0; k < cos_coeffs.size(); ++k)
        v += cos_coeffs[k] * scale * std::cos((k + 1) * kPi * s);
    return v;
}

double MeanFunction::second_derivative(double t, Interval domain) const {
    const double len = domain.length();
    const double s = (t - domain.a) / len;
    const double scale = std::sqrt(2.0 / len);
    double v = 0.0;
    for (std::size_t k = 0; k < sin_coeffs.size(); ++k) {
        const double freq = (k + 1) * kPi / len;
        v -= sin_coeffs[k] * scale * freq * freq * std::sin((k + 1) * kPi * s);
    }
    for (std::size_t k = 0; k < cos_coeffs.size(); ++k) {
        const double freq = (k + 1) * kPi / len;
        v -= cos_coeffs[k] * scale * freq * freq * std::cos((k + 1) * kPi * s);
    }
    return v;
}

ScoreLaw score_law_from_string(const std::string& name) {
    if (name == "gaussian") return ScoreLaw::gaussian;
    if (name == "uniform") return ScoreLaw::uniform;
    throw ValidationError("unknown score law: " + name);
}

std::string to_string(ScoreLaw law) {
    return law == ScoreLaw::gaussian ? "gaussian" : "uniform";
}

DesignDensity DesignDensity::uniform(Interval domain) {
    return DesignDensity(0.0, domain);
}

DesignDensity DesignDensity::beta_mix(double weight, Interval domain) {
    if (!(weight >= 0.0 && weight < 1.0))
        throw ValidationError("beta_mix weight must lie in [0, 1) to keep f > 0");
    return DesignDensity(weight, domain);
}

double DesignDensity::operator()(double t) const {
    const double len = domain_.length();
    if (t < domain_.a || t > domain_.b) return 0.0;
    const double s = (t - domain_.a) / len;
    const double bump = 6.0 * s * (1.0 - s);
    return ((1.0 - weight_) + weight_ * bump) / len;
}

double DesignDensity::sample(Rng& rng) const {
    double s;
    if (weight_ == 0.0) {
        s = rng.uniform();
    } else if (rng.uniform() < weight_) {
        // Beta(2,2) as the median of three uniforms
        double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
        const double lo = std::min(u1, std::min(u2, u3));
        const double hi = std::max(u1, std::max(u2, u3));
        s = u1 + u2 + u3 - lo - hi;
    } else {
        s = rng.uniform();
    }
    return domain_.a + domain_.length() * s;
}

double DesignDensity::min_value() const {
    return (1.0 - weight_) / domain_.length();
}

std::string DesignDensity::describe() const {
    if (weight_ == 0.0) return "uniform";
    std::ostringstream os;
    os << "beta_mix:" << weight_;
    return os.str();
}

TrajectoryModel::TrajectoryModel(Interval domain, MeanFunction mean,
                                 std::vector<Component> components, ScoreLaw score_law,
                                 double noise_sd, DesignDensity density)
    : domain_(domain),
      mean_(std::move(mean)),
      components_(std::move(components)),
      score_law_(score_law),
      noise_sd_(noise_sd),
      density_(density) {
    if (!(domain_.a < domain_.b)) throw ValidationError("model domain is empty");
    if (noise_sd_ < 0.0) throw ValidationError("noise_sd must be >= 0");
}

double TrajectoryModel::covariance(double u, double v) const {
    double s = 0.0;
    for (const auto& c : components_) s += c.theta * c.psi(u) * c.psi(v);
    return s;
}

double TrajectoryModel::fourth_cumulant(int j) const {
    const double theta = components_.at(j).theta;
    switch (score_law_) {
        case ScoreLaw::gaussian: return 0.0;
        case ScoreLaw::uniform: return -1.2 * theta * theta;  // E[z^4] = (9/5) theta^2
    }
    throw ValidationError("score law without fourth-moment support");
}

double TrajectoryModel::fourth_product_moment(double u, double v, double w, double z) const {
    double s = covariance(u, v) * covariance(w, z) + covariance(u, w) * covariance(v, z) +
               covariance(u, z) * covariance(v, w);
    for (int j = 0; j < rank(); ++j) {
        const auto& psi = components_[j].psi;
        s += fourth_cumulant(j) * psi(u) * psi(v) * psi(w) * psi(z);
    }
    return s;
}

double TrajectoryModel::beta4(double u, double v, double w, double z) const {
    return fourth_product_moment(u, v, w, z) - covariance(u, v) * covariance(w, z);
}

void TrajectoryModel::validate(int quadrature_points, double orthonormal_tol) const {
    for (int j = 0; j < rank(); ++j) {
        if (components_[j].theta < 0.0)
            throw ValidationError("component eigenvalues must be >= 0");
        if (j > 0 && !(components_[j - 1].theta > components_[j].theta)) {
            std::ostringstream os;
            os << "component eigenvalues must be strictly decreasing; theta_" << j
               << " = " << components_[j - 1].theta << " vs theta_" << (j + 1) << " = "
               << components_[j].theta;
            throw ValidationError(os.str());
        }
    }
    const Grid grid = Grid::uniform(quadrature_points, domain_.a, domain_.b);
    Eigen::MatrixXd tab(grid.size(), rank());
    for (int j = 0; j < rank(); ++j)
        for (int g = 0; g < grid.size(); ++g) tab(g, j) = components_[j].psi(grid.node(g));
    for (int j = 0; j < rank(); ++j) {
        for (int k = j; k < rank(); ++k) {
            const double ip = grid.inner(tab.col(j), tab.col(k));
            const double target = (j == k) ? 1.0 : 0.0;
            if (std::abs(ip - target) > orthonormal_tol) {
                std::ostringstream os;
                os << "eigenfunction basis is not orthonormal: <psi_" << (j + 1) << ", psi_"
                   << (k + 1) << "> = " << ip;
                throw ValidationError(os.str());
            }
        }
    }
    if (density_.min_value() <= 0.0)
        throw ValidationError("design density must be bounded away from zero");
    Eigen::VectorXd f(grid.size());
    for (int g = 0; g < grid.size(); ++g) f[g] = density_(grid.node(g));
    const double mass = grid.integrate(f);
    if (std::abs(mass - 1.0) > 1e-6)
        throw ValidationError("design density does not integrate to one");
}

SurfaceEstimate true_covariance(const TrajectoryModel& model, const Grid& grid) {
    if (grid.a() < model.domain().a || grid.b() > model.domain().b)
        throw ValidationError("grid extends outside the model domain");
    const int g = grid.size();
    Eigen::MatrixXd tab(g, model.rank());
    for (int j = 0; j < model.rank(); ++j)
        for (int i = 0; i < g; ++i) tab(i, j) = model.components()[j].psi(grid.node(i));
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(g, g);
    for (int i = 0; i < g; ++i) {
        for (int k = i; k < g; ++k) {
            double s = 0.0;
            for (int j = 0; j < model.rank(); ++j)
                s += model.components()[j].theta * tab(i, j) * tab(k, j);
            values(i, k) = s;
            values(k, i) = s;
        }
    }
    return SurfaceEstimate{grid, std::move(values), 0.0, true};
}

double fourth_moment(const TrajectoryModel& model, double t1, double t2) {
    return model.fourth_product_moment(t1, t1, t2, t2);
}

}  // namespace fpca
