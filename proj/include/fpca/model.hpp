#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "fpca/estimates.hpp"
#include "fpca/grid.hpp"
#include "fpca/rng.hpp"

namespace fpca {

struct Interval {
    double a = 0.0;
    double b = 1.0;
    double length() const { return b - a; }
};

// Orthonormal basis function on an interval. Built-ins carry analytic second
// derivatives; custom functions fall back to central differences.
class BasisFunction {
  public:
    static BasisFunction fourier_sin(int k, Interval domain = {});
    static BasisFunction fourier_cos(int k, Interval domain = {});  // k == 0 is the constant
    static BasisFunction custom(std::function<double(double)> f, Interval domain = {});

    double operator()(double t) const;
    double second_derivative(double t) const;
    bool analytic() const { return kind_ != Kind::custom; }
    std::string describe() const;

  private:
    enum class Kind { fourier_sin, fourier_cos, custom };
    Kind kind_;
    int k_ = 0;
    Interval domain_;
    std::function<double(double)> fn_;
};

// mean(t) = constant + linear * t + sum s_k sqrt(2/L) sin(k pi (t-a)/L)
//                                 + sum c_k sqrt(2/L) cos(k pi (t-a)/L)
struct MeanFunction {
    double constant = 0.0;
    double linear = 0.0;
    std::vector<double> sin_coeffs;  // index 0 <-> k = 1
    std::vector<double> cos_coeffs;

    double value(double t, Interval domain) const;
    double second_derivative(double t, Interval domain) const;
};

enum class ScoreLaw { gaussian, uniform };

ScoreLaw score_law_from_string(const std::string& name);
std::string to_string(ScoreLaw law);

// Sampling density of observation times; must stay bounded away from zero.
class DesignDensity {
  public:
    static DesignDensity uniform(Interval domain = {});
    // (1 - weight) * uniform + weight * Beta(2,2) bump, weight in [0, 1)
    static DesignDensity beta_mix(double weight, Interval domain = {});

    double operator()(double t) const;
    double sample(Rng& rng) const;
    double min_value() const;
    bool is_uniform() const { return weight_ == 0.0; }
    std::string describe() const;

  private:
    DesignDensity(double weight, Interval domain) : weight_(weight), domain_(domain) {}
    double weight_;
    Interval domain_;
};

struct Component {
    double theta;
    BasisFunction psi;
};

// Ground-truth process: X(t) = mu(t) + sum_j zeta_j psi_j(t), observed with
// i.i.d. noise of standard deviation noise_sd at times drawn from the design
// density.
class TrajectoryModel {
  public:
    TrajectoryModel(Interval domain, MeanFunction mean, std::vector<Component> components,
                    ScoreLaw score_law, double noise_sd, DesignDensity density);

    const Interval& domain() const { return domain_; }
    const MeanFunction& mean() const { return mean_; }
    const std::vector<Component>& components() const { return components_; }
    int rank() const { return static_cast<int>(components_.size()); }
    ScoreLaw score_law() const { return score_law_; }
    double noise_sd() const { return noise_sd_; }
    const DesignDensity& density() const { return density_; }

    double mean_value(double t) const { return mean_.value(t, domain_); }
    double mean_second_derivative(double t) const {
        return mean_.second_derivative(t, domain_);
    }

    // covariance kernel psi(u, v) = sum_j theta_j psi_j(u) psi_j(v)
    double covariance(double u, double v) const;

    // E[zeta_j^4] - 3 theta_j^2; zero for Gaussian scores
    double fourth_cumulant(int j) const;

    // E{x(u) x(v) x(w) x(z)} for x = X - mu, via independent-score pairings
    double fourth_product_moment(double u, double v, double w, double z) const;

    // beta(u,v,w,z) = E{x(u)x(v)x(w)x(z)} - psi(u,v) psi(w,z)
    double beta4(double u, double v, double w, double z) const;

    // Throws ValidationError with a diagnostic when the component list is not
    // strictly ordered, the basis is not orthonormal in quadrature, or the
    // design density is invalid.
    void validate(int quadrature_points = 1001, double orthonormal_tol = 1e-8) const;

  private:
    Interval domain_;
    MeanFunction mean_;
    std::vector<Component> components_;
    ScoreLaw score_law_;
    double noise_sd_;
    DesignDensity density_;
};

// psi(u, v) tabulated on grid x grid; exactly symmetric
SurfaceEstimate true_covariance(const TrajectoryModel& model, const Grid& grid);

// E{x(t1)^2 x(t2)^2}
double fourth_moment(const TrajectoryModel& model, double t1, double t2);

}  // namespace fpca
