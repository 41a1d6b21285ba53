#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace kiml::learners {

/// CART regression tree. A sample goes left when x[feature] < threshold.
struct RegressionTree {
    struct Node {
        int feature = -1;  ///< -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;  ///< mean target of the training rows reaching the node
        std::size_t samples = 0;
    };
    std::vector<Node> nodes;  ///< nodes[0] is the root
    int input_dim = 0;

    [[nodiscard]] double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    [[nodiscard]] std::size_t leaf_count() const;
    [[nodiscard]] int depth() const;
};

struct TreeParams {
    std::optional<int> max_depth;
    int min_samples_split = 2;
};

/// Greedy variance-reduction splits over every midpoint between consecutive
/// distinct feature values. Ties go to the lower feature index, then the lower
/// threshold. The result depends only on the multiset of training rows.
[[nodiscard]] RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params);

void to_json(nlohmann::json& j, const RegressionTree& t);
void from_json(const nlohmann::json& j, RegressionTree& t);

}  // namespace kiml::learners
