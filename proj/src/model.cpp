#include "foolshap/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace foolshap {

using nlohmann::json;

double LogisticModel::predict(std::span<const double> x) const {
    if (x.size() < weights_.size())
        throw std::invalid_argument("logistic: input shorter than weight vector");
    double z = bias_;
    for (std::size_t i = 0; i < weights_.size(); ++i) z += weights_[i] * x[i];
    return 1.0 / (1.0 + std::exp(-z));
}

std::vector<int> LogisticModel::active_features(int d) const {
    std::vector<int> idx;
    for (int i = 0; i < d && i < static_cast<int>(weights_.size()); ++i)
        if (weights_[i] != 0.0) idx.push_back(i);
    return idx;
}

json LogisticModel::to_json() const {
    return json{{"kind", "logistic"},
                {"params", {{"weights", weights_}, {"bias", bias_}}}};
}

double Tree::eval(std::span<const double> x) const {
    if (nodes.empty()) throw std::runtime_error("tree: empty node list");
    int cur = 0;
    for (std::size_t guard = 0; guard <= nodes.size(); ++guard) {
        const TreeNode& n = nodes[cur];
        if (n.feature < 0) return n.value;
        if (n.feature >= static_cast<int>(x.size()))
            throw std::out_of_range("tree: split feature out of range");
        cur = (x[n.feature] <= n.threshold) ? n.left : n.right;
        if (cur < 0 || cur >= static_cast<int>(nodes.size()))
            throw std::runtime_error("tree: child index out of range");
    }
    throw std::runtime_error("tree: cycle detected in node structure");
}

TreeEnsembleModel::TreeEnsembleModel(std::vector<Tree> trees) : trees_(std::move(trees)) {
    if (trees_.empty()) throw std::invalid_argument("tree-ensemble: no trees");
    for (const Tree& t : trees_) {
        if (t.nodes.empty()) throw std::invalid_argument("tree-ensemble: empty tree");
        for (const TreeNode& n : t.nodes) {
            if (n.feature >= 0) {
                if (n.left < 0 || n.right < 0 ||
                    n.left >= static_cast<int>(t.nodes.size()) ||
                    n.right >= static_cast<int>(t.nodes.size()))
                    throw std::invalid_argument("tree-ensemble: malformed internal node");
            }
        }
    }
}

double TreeEnsembleModel::predict(std::span<const double> x) const {
    double s = 0.0;
    for (const Tree& t : trees_) s += t.eval(x);
    return s / static_cast<double>(trees_.size());
}

std::vector<int> TreeEnsembleModel::active_features(int d) const {
    std::set<int> used;
    for (const Tree& t : trees_)
        for (const TreeNode& n : t.nodes)
            if (n.feature >= 0 && n.feature < d) used.insert(n.feature);
    return {used.begin(), used.end()};
}

json TreeEnsembleModel::to_json() const {
    json trees = json::array();
    for (const Tree& t : trees_) {
        json nodes = json::array();
        for (const TreeNode& n : t.nodes) {
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"value", n.value}});
        }
        trees.push_back({{"nodes", nodes}});
    }
    return json{{"kind", "tree-ensemble"}, {"params", {{"trees", trees}}}};
}

double ThresholdToyModel::predict(std::span<const double> x) const {
    if (h_ >= static_cast<int>(x.size()) || m_ >= static_cast<int>(x.size()))
        throw std::out_of_range("threshold-toy: feature index out of range");
    double logit = step_ * (x[h_] < h_thresh_ ? 1.0 : 0.0) - m_coef_ * (x[m_] - m_center_);
    return 1.0 / (1.0 + std::exp(logit));
}

std::vector<int> ThresholdToyModel::active_features(int) const { return {h_, m_}; }

json ThresholdToyModel::to_json() const {
    return json{{"kind", "threshold-toy"},
                {"params",
                 {{"height_index", h_},
                  {"mass_index", m_},
                  {"height_threshold", h_thresh_},
                  {"step", step_},
                  {"mass_coef", m_coef_},
                  {"mass_center", m_center_}}}};
}

json FunctionModel::to_json() const {
    throw std::runtime_error("function model is not serializable");
}

ModelPtr model_from_json(const json& j) {
    if (!j.contains("kind") || !j.contains("params"))
        throw std::invalid_argument("model json: missing 'kind' or 'params'");
    const std::string kind = j.at("kind").get<std::string>();
    const json& p = j.at("params");
    if (kind == "logistic") {
        return std::make_shared<LogisticModel>(
            p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>());
    }
    if (kind == "tree-ensemble") {
        std::vector<Tree> trees;
        for (const json& tj : p.at("trees")) {
            Tree t;
            for (const json& nj : tj.at("nodes")) {
                TreeNode n;
                n.feature = nj.value("feature", -1);
                n.threshold = nj.value("threshold", 0.0);
                n.left = nj.value("left", -1);
                n.right = nj.value("right", -1);
                n.value = nj.value("value", 0.0);
                t.nodes.push_back(n);
            }
            trees.push_back(std::move(t));
        }
        return std::make_shared<TreeEnsembleModel>(std::move(trees));
    }
    if (kind == "threshold-toy") {
        return std::make_shared<ThresholdToyModel>(
            p.at("height_index").get<int>(), p.at("mass_index").get<int>(),
            p.value("height_threshold", 160.0), p.value("step", 100.0),
            p.value("mass_coef", 0.3), p.value("mass_center", 28.0));
    }
    throw std::invalid_argument("model json: unknown kind '" + kind + "'");
}

ModelPtr load_model_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("model json parse error in " + path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

void save_model_json(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path.string());
    out << model.to_json().dump(2) << "\n";
}

std::uint64_t model_hash(const Model& model) {
    const std::string s = model.to_json().dump();
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace foolshap
