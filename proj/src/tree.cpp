#include "kiml/tree.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace kiml::learners {

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        k = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim) throw std::invalid_argument("RegressionTree::predict: dimension mismatch");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
    return out;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k].feature >= 0) {
            d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
            d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
        }
        best = std::max(best, d[k]);
    }
    return best;
}

namespace {

struct Builder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const TreeParams& params;
    RegressionTree tree;

    // Sorting the targets makes the sum independent of row order.
    double mean_of(const std::vector<std::size_t>& rows) const {
        std::vector<double> v;
        v.reserve(rows.size());
        for (auto r : rows) v.push_back(y[static_cast<Eigen::Index>(r)]);
        std::sort(v.begin(), v.end());
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }

    int build(std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        const double mean = mean_of(rows);
        tree.nodes.back().value = mean;
        tree.nodes.back().samples = rows.size();

        const bool depth_ok = !params.max_depth || depth < *params.max_depth;
        double sse = 0.0;
        for (auto r : rows) sse += (y[static_cast<Eigen::Index>(r)] - mean) * (y[static_cast<Eigen::Index>(r)] - mean);
        if (!depth_ok || static_cast<int>(rows.size()) < params.min_samples_split || sse <= 0.0) return id;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = -1.0;
        std::vector<std::size_t> order = rows;
        for (Eigen::Index f = 0; f < x.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double xa = x(static_cast<Eigen::Index>(a), f);
                const double xb = x(static_cast<Eigen::Index>(b), f);
                if (xa != xb) return xa < xb;
                return y[static_cast<Eigen::Index>(a)] < y[static_cast<Eigen::Index>(b)];
            });
            const double total = static_cast<double>(rows.size());
            double sum_all = 0.0;
            for (auto r : order) sum_all += y[static_cast<Eigen::Index>(r)] - mean;
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                left_sum += y[static_cast<Eigen::Index>(order[k])] - mean;
                const double xl = x(static_cast<Eigen::Index>(order[k]), f);
                const double xr = x(static_cast<Eigen::Index>(order[k + 1]), f);
                if (!(xl < xr)) continue;
                const double nl = static_cast<double>(k + 1);
                const double nr = total - nl;
                const double right_sum = sum_all - left_sum;
                // SSE reduction = nl*mean_l^2 + nr*mean_r^2 - n*mean^2 (centred data).
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - sum_all * sum_all / total;
                const double threshold = xl + 0.5 * (xr - xl);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = threshold;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto r : rows) {
            (x(static_cast<Eigen::Index>(r), best_feature) < best_threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(std::move(left), depth + 1);
        const int rr = build(std::move(right), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = rr;
        return id;
    }
};

}  // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_tree: row count mismatch");
    if (x.rows() < 2) throw std::invalid_argument("fit_tree: need at least two rows");
    if (params.min_samples_split < 2) throw std::invalid_argument("fit_tree: min_samples_split must be >= 2");
    Builder b{x, y, params, {}};
    b.tree.input_dim = static_cast<int>(x.cols());
    std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    b.build(std::move(rows), 0);
    return std::move(b.tree);
}

void to_json(nlohmann::json& j, const RegressionTree& t) {
    // Nested form: {"value", "samples"} for leaves, plus {"feature", "threshold", "left", "right"} for splits.
    std::function<nlohmann::json(int)> emit = [&](int k) {
        const auto& n = t.nodes[static_cast<std::size_t>(k)];
        nlohmann::json node{{"value", n.value}, {"samples", n.samples}};
        if (n.feature >= 0) {
            node["feature"] = n.feature;
            node["threshold"] = n.threshold;
            node["left"] = emit(n.left);
            node["right"] = emit(n.right);
        }
        return node;
    };
    j = {{"input_dim", t.input_dim}, {"root", emit(0)}};
}

void from_json(const nlohmann::json& j, RegressionTree& t) {
    t.nodes.clear();
    t.input_dim = j.at("input_dim").get<int>();
    std::function<int(const nlohmann::json&)> read = [&](const nlohmann::json& node) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.push_back({});
        t.nodes.back().value = node.at("value").get<double>();
        t.nodes.back().samples = node.at("samples").get<std::size_t>();
        if (node.contains("feature")) {
            const int feature = node.at("feature").get<int>();
            const double threshold = node.at("threshold").get<double>();
            const int l = read(node.at("left"));
            const int r = read(node.at("right"));
            auto& n = t.nodes[static_cast<std::size_t>(id)];
            n.feature = feature;
            n.threshold = threshold;
            n.left = l;
            n.right = r;
        }
        return id;
    };
    read(j.at("root"));
}

}  // namespace kiml::learners
