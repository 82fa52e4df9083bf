#include "fpca/grid.hpp"

#include <cmath>

#include "fpca/errors.hpp"

namespace fpca {

Grid::Grid(Eigen::VectorXd nodes, double a, double b)
    : nodes_(std::move(nodes)), a_(a), b_(b) {
    const int g = static_cast<int>(nodes_.size());
    if (g < 2) throw ValidationError("grid needs at least 2 nodes");
    if (!(a < b)) throw ValidationError("grid interval is empty");
    for (int i = 1; i < g; ++i) {
        if (!(nodes_[i] > nodes_[i - 1]))
            throw ValidationError("grid nodes must be strictly increasing");
    }
    if (nodes_[0] != a || nodes_[g - 1] != b)
        throw ValidationError("grid nodes must cover the interval endpoints");
    weights_.resize(g);
    weights_[0] = 0.5 * (nodes_[1] - nodes_[0]);
    for (int i = 1; i + 1 < g; ++i)
        weights_[i] = 0.5 * (nodes_[i + 1] - nodes_[i - 1]);
    weights_[g - 1] = 0.5 * (nodes_[g - 1] - nodes_[g - 2]);
}

Grid Grid::uniform(int size, double a, double b) {
    if (size < 2) throw ValidationError("grid needs at least 2 nodes");
    Eigen::VectorXd nodes(size);
    const double step = (b - a) / (size - 1);
    for (int i = 0; i < size; ++i) nodes[i] = a + step * i;
    nodes[size - 1] = b;
    return Grid(std::move(nodes), a, b);
}

double Grid::norm(const Eigen::VectorXd& f) const {
    return std::sqrt((weights_.array() * f.array().square()).sum());
}

bool Grid::same_as(const Grid& other) const {
    return nodes_.size() == other.nodes_.size() && nodes_ == other.nodes_;
}

}  // namespace fpca
