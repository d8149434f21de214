// Opaque predictors mapping a feature vector to a probability in [0,1].
// Concrete kinds: linear-logistic, tree ensembles described as node lists,
// and the threshold-toy labelling rule used by the synthetic generator.

#ifndef FOOLSHAP_MODEL_HPP
#define FOOLSHAP_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace foolshap {

class Model {
public:
    virtual ~Model() = default;

    // must be safe to call from multiple threads concurrently
    virtual double predict(std::span<const double> x) const = 0;

    // indices of features the model actually reads; by default all d.
    // Features outside this set receive an exactly-zero attribution.
    virtual std::vector<int> active_features(int d) const {
        std::vector<int> all(d);
        for (int i = 0; i < d; ++i) all[i] = i;
        return all;
    }

    virtual std::string kind() const = 0;
    virtual nlohmann::json to_json() const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

class LogisticModel : public Model {
public:
    LogisticModel(std::vector<double> weights, double bias)
        : weights_(std::move(weights)), bias_(bias) {}

    double predict(std::span<const double> x) const override;
    std::vector<int> active_features(int d) const override;
    std::string kind() const override { return "logistic"; }
    nlohmann::json to_json() const override;

    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }

private:
    std::vector<double> weights_;
    double bias_;
};

struct TreeNode {
    int feature = -1;   // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;      // x[feature] <= threshold
    int right = -1;
    double value = 0.0; // leaf value, already a probability
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double eval(std::span<const double> x) const;
};

// prediction = mean of per-tree leaf values
class TreeEnsembleModel : public Model {
public:
    explicit TreeEnsembleModel(std::vector<Tree> trees);

    double predict(std::span<const double> x) const override;
    std::vector<int> active_features(int d) const override;
    std::string kind() const override { return "tree-ensemble"; }
    nlohmann::json to_json() const override;

    const std::vector<Tree>& trees() const { return trees_; }

private:
    std::vector<Tree> trees_;
};

// The generative hiring probability of the synthetic data:
// P = 1 / (1 + exp(step * 1(x[h] < h_threshold) - m_coef * (x[m] - m_center)))
class ThresholdToyModel : public Model {
public:
    ThresholdToyModel(int height_index, int mass_index,
                      double height_threshold = 160.0, double step = 100.0,
                      double mass_coef = 0.3, double mass_center = 28.0)
        : h_(height_index), m_(mass_index), h_thresh_(height_threshold),
          step_(step), m_coef_(mass_coef), m_center_(mass_center) {}

    double predict(std::span<const double> x) const override;
    std::vector<int> active_features(int d) const override;
    std::string kind() const override { return "threshold-toy"; }
    nlohmann::json to_json() const override;

private:
    int h_, m_;
    double h_thresh_, step_, m_coef_, m_center_;
};

// Wraps an arbitrary callable; used in tests. Not serializable.
class FunctionModel : public Model {
public:
    explicit FunctionModel(std::function<double(std::span<const double>)> fn)
        : fn_(std::move(fn)) {}

    double predict(std::span<const double> x) const override { return fn_(x); }
    std::string kind() const override { return "function"; }
    nlohmann::json to_json() const override;

private:
    std::function<double(std::span<const double>)> fn_;
};

ModelPtr model_from_json(const nlohmann::json& j);
ModelPtr load_model_json(const std::filesystem::path& path);
void save_model_json(const Model& model, const std::filesystem::path& path);

// stable 64-bit hash of the canonical JSON form, used as a cache key
std::uint64_t model_hash(const Model& model);

}  // namespace foolshap

#endif
