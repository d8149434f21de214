// Synthetic data generation, CSV ingestion with schema sidecar, group
// splitting on the sensitive feature, and demographic parity.

#ifndef FOOLSHAP_DATA_HPP
#define FOOLSHAP_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "foolshap/model.hpp"

namespace foolshap {

struct Dataset {
    std::vector<std::vector<double>> rows;
    std::vector<int> target;              // binary labels
    std::vector<std::string> feature_names;
    int sensitive_index = -1;

    int n() const { return static_cast<int>(rows.size()); }
    int d() const { return static_cast<int>(feature_names.size()); }
};

struct GroupSplit {
    std::vector<int> d0;  // row ids with x_s = 0
    std::vector<int> d1;  // row ids with x_s = 1
};

struct Schema {
    std::string sensitive;
    std::string target;
    std::vector<std::string> categorical;  // columns to one-hot encode
};

// Hiring toy data: columns (S, H, M, N1, N2), binary target.
// S=1 codes the advantaged group (men in the source study).
Dataset generate_toy(int n, std::uint64_t seed);

GroupSplit split_by_sensitive(const Dataset& ds);

// mean f over D0 minus mean f over D1
double demographic_parity(const Model& f, const GroupSplit& split, const Dataset& ds);

Schema load_schema(const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path);
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path,
                      const std::filesystem::path& schema_path);

// Logistic regression via Newton/IRLS with a small ridge term.
// Deterministic; used to produce the attack model for the toy data.
LogisticModel fit_logistic(const Dataset& ds, double ridge = 1e-6, int max_iters = 50);

// model outputs over selected rows
std::vector<double> model_outputs(const Model& f, const Dataset& ds,
                                  const std::vector<int>& ids);

std::vector<std::vector<double>> gather_rows(const Dataset& ds, const std::vector<int>& ids);

}  // namespace foolshap

#endif
