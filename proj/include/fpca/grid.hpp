#pragma once

#include <Eigen/Core>

namespace fpca {

// Discretization of L2 on a closed interval: strictly increasing nodes
// covering [a, b] with trapezoid quadrature weights summing to b - a.
class Grid {
  public:
    Grid(Eigen::VectorXd nodes, double a, double b);

    static Grid uniform(int size, double a = 0.0, double b = 1.0);

    int size() const { return static_cast<int>(nodes_.size()); }
    double a() const { return a_; }
    double b() const { return b_; }
    double node(int g) const { return nodes_[g]; }
    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    // trapezoid integral of tabulated values
    double integrate(const Eigen::VectorXd& values) const {
        return weights_.dot(values);
    }

    double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
        return (weights_.array() * f.array() * g.array()).sum();
    }

    double norm(const Eigen::VectorXd& f) const;

    bool same_as(const Grid& other) const;

  private:
    Eigen::VectorXd nodes_;
    Eigen::VectorXd weights_;
    double a_;
    double b_;
};

}  // namespace fpca
