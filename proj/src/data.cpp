#include "foolshap/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "foolshap/rng.hpp"
#include "json.hpp"

namespace foolshap {

using nlohmann::json;

Dataset generate_toy(int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_toy: n must be >= 1");
    Dataset ds;
    ds.feature_names = {"S", "H", "M", "N1", "N2"};
    ds.sensitive_index = 0;
    ds.rows.reserve(n);
    ds.target.reserve(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double s = rng.bernoulli(0.5) ? 1.0 : 0.0;
        double h = s > 0.5 ? rng.normal(177.0, 7.0) : rng.normal(163.0, 7.0);
        double eps = rng.normal();
        double m = s > 0.5 ? 0.186 * h + 5.0 * eps : 0.128 * h + 4.0 * eps;
        double n1 = rng.normal();
        double n2 = rng.normal();
        double p = 1.0 / (1.0 + std::exp(100.0 * (h < 160.0 ? 1.0 : 0.0) - 0.3 * (m - 28.0)));
        int y = rng.bernoulli(p) ? 1 : 0;
        ds.rows.push_back({s, h, m, n1, n2});
        ds.target.push_back(y);
    }
    return ds;
}

GroupSplit split_by_sensitive(const Dataset& ds) {
    if (ds.sensitive_index < 0 || ds.sensitive_index >= ds.d())
        throw std::invalid_argument("split_by_sensitive: sensitive index out of range");
    GroupSplit split;
    for (int i = 0; i < ds.n(); ++i) {
        double v = ds.rows[i][ds.sensitive_index];
        if (v == 0.0) split.d0.push_back(i);
        else if (v == 1.0) split.d1.push_back(i);
        else throw std::runtime_error("split_by_sensitive: non-binary sensitive value at row " +
                                      std::to_string(i));
    }
    return split;
}

double demographic_parity(const Model& f, const GroupSplit& split, const Dataset& ds) {
    if (split.d0.empty() || split.d1.empty())
        throw std::invalid_argument("demographic_parity: empty group");
    double m0 = 0.0, m1 = 0.0;
    for (int i : split.d0) m0 += f.predict(ds.rows[i]);
    for (int i : split.d1) m1 += f.predict(ds.rows[i]);
    return m0 / static_cast<double>(split.d0.size()) - m1 / static_cast<double>(split.d1.size());
}

Schema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("schema parse error in " + path.string() + ": " + e.what());
    }
    Schema s;
    if (!j.contains("sensitive") || !j.contains("target"))
        throw std::runtime_error("schema " + path.string() + ": fields 'sensitive' and 'target' are required");
    s.sensitive = j.at("sensitive").get<std::string>();
    s.target = j.at("target").get<std::string>();
    if (j.contains("categorical")) s.categorical = j.at("categorical").get<std::vector<std::string>>();
    return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

Dataset load_dataset_csv(const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path) {
    Schema schema = load_schema(schema_path);
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + csv_path.string());

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(csv_path.string() + ": missing header row");
    std::vector<std::string> header = split_csv_line(line);

    std::set<std::string> cat(schema.categorical.begin(), schema.categorical.end());
    int target_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == schema.target) target_col = static_cast<int>(c);
    if (target_col < 0)
        throw std::runtime_error(csv_path.string() + ": target column '" + schema.target + "' not found");
    bool sensitive_found = false;
    for (const std::string& h : header)
        if (h == schema.sensitive) sensitive_found = true;
    if (!sensitive_found)
        throw std::runtime_error(csv_path.string() + ": sensitive column '" + schema.sensitive + "' not found");
    if (cat.count(schema.sensitive))
        throw std::runtime_error("schema: sensitive column may not be categorical");

    // first pass: raw cells
    std::vector<std::vector<std::string>> raw;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error(csv_path.string() + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        raw.push_back(std::move(cells));
    }
    if (raw.empty()) throw std::runtime_error(csv_path.string() + ": no data rows");

    // collect category levels for one-hot columns
    std::map<int, std::vector<std::string>> levels;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!cat.count(header[c])) continue;
        std::set<std::string> vals;
        for (const auto& r : raw) vals.insert(r[c]);
        levels[static_cast<int>(c)] = {vals.begin(), vals.end()};
    }

    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (static_cast<int>(c) == target_col) continue;
        auto it = levels.find(static_cast<int>(c));
        if (it == levels.end()) {
            ds.feature_names.push_back(header[c]);
        } else {
            for (const std::string& v : it->second)
                ds.feature_names.push_back(header[c] + "=" + v);
        }
    }
    for (std::size_t k = 0; k < ds.feature_names.size(); ++k)
        if (ds.feature_names[k] == schema.sensitive) ds.sensitive_index = static_cast<int>(k);
    if (ds.sensitive_index < 0)
        throw std::runtime_error("sensitive column '" + schema.sensitive + "' vanished during encoding");

    for (std::size_t r = 0; r < raw.size(); ++r) {
        std::vector<double> row;
        row.reserve(ds.feature_names.size());
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (static_cast<int>(c) == target_col) continue;
            auto it = levels.find(static_cast<int>(c));
            if (it == levels.end()) {
                try {
                    row.push_back(std::stod(raw[r][c]));
                } catch (const std::exception&) {
                    throw std::runtime_error(csv_path.string() + ":" + std::to_string(r + 2) +
                                             ": field '" + header[c] + "' is not numeric: '" + raw[r][c] + "'");
                }
            } else {
                for (const std::string& v : it->second)
                    row.push_back(raw[r][c] == v ? 1.0 : 0.0);
            }
        }
        double sv = row[ds.sensitive_index];
        if (sv != 0.0 && sv != 1.0)
            throw std::runtime_error(csv_path.string() + ":" + std::to_string(r + 2) +
                                     ": sensitive column '" + schema.sensitive + "' must be 0 or 1, got " +
                                     std::to_string(sv));
        int y;
        try {
            double yd = std::stod(raw[r][target_col]);
            if (yd != 0.0 && yd != 1.0) throw std::runtime_error("non-binary");
            y = static_cast<int>(yd);
        } catch (const std::exception&) {
            throw std::runtime_error(csv_path.string() + ":" + std::to_string(r + 2) +
                                     ": target column '" + schema.target + "' must be 0 or 1");
        }
        ds.rows.push_back(std::move(row));
        ds.target.push_back(y);
    }
    return ds;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path,
                      const std::filesystem::path& schema_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + csv_path.string());
    for (int c = 0; c < ds.d(); ++c) out << ds.feature_names[c] << ",";
    out << "Y\n";
    out.precision(17);
    for (int i = 0; i < ds.n(); ++i) {
        for (int c = 0; c < ds.d(); ++c) out << ds.rows[i][c] << ",";
        out << ds.target[i] << "\n";
    }
    json schema{{"sensitive", ds.feature_names[ds.sensitive_index]},
                {"target", "Y"},
                {"categorical", json::array()}};
    std::ofstream sout(schema_path);
    if (!sout) throw std::runtime_error("cannot write schema file: " + schema_path.string());
    sout << schema.dump(2) << "\n";
}

LogisticModel fit_logistic(const Dataset& ds, double ridge, int max_iters) {
    const int n = ds.n();
    const int d = ds.d();
    const int p = d + 1;  // bias last
    std::vector<double> beta(p, 0.0);

    std::vector<double> hess(p * p), grad(p), eta(n), mu(n);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::fill(hess.begin(), hess.end(), 0.0);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            double z = beta[d];
            for (int c = 0; c < d; ++c) z += beta[c] * ds.rows[i][c];
            double m = 1.0 / (1.0 + std::exp(-z));
            double w = std::max(m * (1.0 - m), 1e-10);
            double resid = static_cast<double>(ds.target[i]) - m;
            for (int a = 0; a < p; ++a) {
                double xa = (a == d) ? 1.0 : ds.rows[i][a];
                grad[a] += xa * resid;
                for (int b = a; b < p; ++b) {
                    double xb = (b == d) ? 1.0 : ds.rows[i][b];
                    hess[a * p + b] += w * xa * xb;
                }
            }
        }
        for (int a = 0; a < p; ++a) {
            hess[a * p + a] += ridge * n;
            grad[a] -= ridge * n * beta[a];
            for (int b = 0; b < a; ++b) hess[a * p + b] = hess[b * p + a];
        }
        // solve hess * step = grad by Gaussian elimination with partial pivoting
        std::vector<double> A(hess);
        std::vector<double> rhs(grad);
        std::vector<int> piv(p);
        for (int a = 0; a < p; ++a) piv[a] = a;
        for (int col = 0; col < p; ++col) {
            int best = col;
            for (int r = col + 1; r < p; ++r)
                if (std::abs(A[r * p + col]) > std::abs(A[best * p + col])) best = r;
            if (best != col) {
                for (int c = 0; c < p; ++c) std::swap(A[col * p + c], A[best * p + c]);
                std::swap(rhs[col], rhs[best]);
            }
            double pivv = A[col * p + col];
            if (std::abs(pivv) < 1e-14) throw std::runtime_error("fit_logistic: singular system");
            for (int r = col + 1; r < p; ++r) {
                double fct = A[r * p + col] / pivv;
                if (fct == 0.0) continue;
                for (int c = col; c < p; ++c) A[r * p + c] -= fct * A[col * p + c];
                rhs[r] -= fct * rhs[col];
            }
        }
        std::vector<double> step(p);
        for (int r = p - 1; r >= 0; --r) {
            double s = rhs[r];
            for (int c = r + 1; c < p; ++c) s -= A[r * p + c] * step[c];
            step[r] = s / A[r * p + r];
        }
        double maxstep = 0.0;
        for (int a = 0; a < p; ++a) {
            beta[a] += step[a];
            maxstep = std::max(maxstep, std::abs(step[a]));
        }
        if (maxstep < 1e-10) break;
    }
    std::vector<double> w(beta.begin(), beta.begin() + d);
    return LogisticModel(std::move(w), beta[d]);
}

std::vector<double> model_outputs(const Model& f, const Dataset& ds,
                                  const std::vector<int>& ids) {
    std::vector<double> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(f.predict(ds.rows[i]));
    return out;
}

std::vector<std::vector<double>> gather_rows(const Dataset& ds, const std::vector<int>& ids) {
    std::vector<std::vector<double>> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(ds.rows[i]);
    return out;
}

}  // namespace foolshap
