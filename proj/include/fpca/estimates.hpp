#pragma once

#include <Eigen/Core>

#include "fpca/grid.hpp"

namespace fpca {

// A function of one argument tabulated on a grid.
struct CurveEstimate {
    Grid grid;
    Eigen::VectorXd values;
    double bandwidth = 0.0;  // 0 for exact tabulations
};

// A function of two arguments tabulated on grid x grid.
struct SurfaceEstimate {
    Grid grid;
    Eigen::MatrixXd values;
    double bandwidth = 0.0;
    bool symmetric = false;
};

}  // namespace fpca
