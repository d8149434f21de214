// Command-line front end: synthetic data generation, the background-biasing
// attack with optional baselines, the audit detector, its calibration, and
// plain GSV reports. Everything is deterministic given --seed; outputs are
// tidy CSV/JSON for downstream plotting.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "foolshap/attack.hpp"
#include "foolshap/data.hpp"
#include "foolshap/detection.hpp"
#include "foolshap/shapley.hpp"
#include "foolshap/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace foolshap;

namespace {

struct AttackCli {
    std::string dataset;
    std::string schema;
    std::string model;
    std::string config;
    std::string sensitive;
    std::string out = ".";
    std::vector<std::string> baselines;
    std::vector<std::string> multi_sensitive;
    double budget = 30.0;  // seconds, brute-force baseline
    AttackConfig cfg;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed while writing " + path.string());
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Dataset load_dataset(const AttackCli& a) {
    Dataset ds = load_dataset_csv(a.dataset, a.schema);
    if (!a.sensitive.empty()) {
        auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), a.sensitive);
        if (it == ds.feature_names.end())
            throw std::runtime_error("--sensitive: no feature named '" + a.sensitive + "'");
        ds.sensitive_index = static_cast<int>(it - ds.feature_names.begin());
    }
    return ds;
}

ModelPtr load_or_fit_model(const std::string& model_path, const Dataset& ds) {
    if (!model_path.empty()) return load_model_json(model_path);
    return std::make_shared<LogisticModel>(fit_logistic(ds));
}

// JSON config file with flag overrides: a field is applied only when the
// matching flag was not passed on the command line.
void apply_config(const CLI::App& cmd, AttackCli& a) {
    if (a.config.empty()) return;
    std::ifstream in(a.config);
    if (!in) throw std::runtime_error("config: cannot open " + a.config);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: " + a.config + ": " + e.what());
    }
    auto want = [&](const char* flag) { return cmd.count(flag) == 0; };
    try {
        if (j.contains("dataset") && want("--dataset")) a.dataset = j.at("dataset");
        if (j.contains("schema") && want("--schema")) a.schema = j.at("schema");
        if (j.contains("model") && want("--model")) a.model = j.at("model");
        if (j.contains("sensitive") && want("--sensitive")) a.sensitive = j.at("sensitive");
        if (j.contains("out") && want("--out")) a.out = j.at("out");
        if (j.contains("m") && want("--m")) a.cfg.m = j.at("m");
        if (j.contains("tau") && want("--tau")) a.cfg.tau = j.at("tau");
        if (j.contains("alpha") && want("--alpha")) a.cfg.alpha = j.at("alpha");
        if (j.contains("lambda_min") && want("--lambda-min")) a.cfg.lambda_min = j.at("lambda_min");
        if (j.contains("lambda_max") && want("--lambda-max")) a.cfg.lambda_max = j.at("lambda_max");
        if (j.contains("grid") && want("--grid")) a.cfg.grid_size = j.at("grid");
        if (j.contains("seed") && want("--seed")) a.cfg.seed = j.at("seed");
        if (j.contains("threads") && want("--threads")) a.cfg.threads = j.at("threads");
        if (j.contains("detection_reps") && want("--detection-reps"))
            a.cfg.detection_reps = j.at("detection_reps");
        if (j.contains("budget") && want("--budget")) a.budget = j.at("budget");
        if (j.contains("baseline") && want("--baseline"))
            a.baselines = j.at("baseline").get<std::vector<std::string>>();
        if (j.contains("multi_sensitive") && want("--multi-sensitive"))
            a.multi_sensitive = j.at("multi_sensitive").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw std::runtime_error("config: " + a.config + ": " + e.what());
    }
}

void write_ecdf_csv(const fs::path& path, const Model& f, const Dataset& ds,
                    const GroupSplit& split, const std::vector<int>& s0p,
                    const std::vector<int>& s1p) {
    std::string csv = "group,source,value,ecdf\n";
    auto emit = [&](int group, const char* source, std::vector<double> vals) {
        std::sort(vals.begin(), vals.end());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            csv += std::to_string(group);
            csv += ",";
            csv += source;
            csv += "," + fmt(vals[i]) + "," +
                   fmt(static_cast<double>(i + 1) / vals.size()) + "\n";
        }
    };
    emit(0, "full", model_outputs(f, ds, split.d0));
    emit(0, "subset", model_outputs(f, ds, s0p));
    emit(1, "full", model_outputs(f, ds, split.d1));
    emit(1, "subset", model_outputs(f, ds, s1p));
    write_text(path, csv);
}

json attack_result_json(const AttackResult& r, const AttackCli& a) {
    json j;
    j["method"] = r.method;
    j["seed"] = a.cfg.seed;
    j["m"] = a.cfg.m;
    j["tau"] = a.cfg.tau;
    j["alpha"] = a.cfg.alpha;
    j["chosen_lambda"] = r.chosen_lambda;
    j["phi_before"] = r.phi_before;
    j["phi_after"] = r.phi_after;
    j["amplitude_reduction"] = r.amplitude_reduction;
    j["detection_rate"] = r.detection_rate;
    j["acceptance_detection_rate"] = r.acceptance_detection_rate;
    j["fell_back_to_uniform"] = r.fell_back_to_uniform;
    j["wasserstein_cost"] = r.weights.wasserstein_cost;
    j["s0_prime"] = r.s0_prime;
    j["s1_prime"] = r.s1_prime;
    j["gsv_before"] = r.gsv_before.phi;
    j["gsv_after"] = r.gsv_after.phi;
    j["feature_names"] = r.gsv_before.feature_names;
    return j;
}

int run_attack(const CLI::App& cmd, AttackCli& a) {
    apply_config(cmd, a);
    if (a.dataset.empty() || a.schema.empty())
        throw std::runtime_error("attack: --dataset and --schema are required "
                                 "(directly or via --config)");
    fs::create_directories(a.out);
    Dataset ds = load_dataset(a);
    GroupSplit split = split_by_sensitive(ds);
    ModelPtr model = load_or_fit_model(a.model, ds);
    if (a.model.empty()) save_model_json(*model, fs::path(a.out) / "model.json");

    AttackResult res = fool_shap(*model, ds, split, a.cfg);

    json out = attack_result_json(res, a);

    // multi-sensitive variant: joint weights shrinking several features at once
    if (!a.multi_sensitive.empty()) {
        std::vector<int> feats;
        for (const std::string& name : a.multi_sensitive) {
            auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
            if (it == ds.feature_names.end())
                throw std::runtime_error("--multi-sensitive: no feature named '" + name + "'");
            feats.push_back(static_cast<int>(it - ds.feature_names.begin()));
        }
        BackgroundCoefficients bc =
            per_background_coeffs(*model, gather_rows(ds, res.s0_prime),
                                  gather_rows(ds, split.d1), ds.sensitive_index,
                                  a.cfg.enum_cap, a.cfg.threads);
        std::vector<std::vector<double>> coeff_rows;
        double l1_before = 0.0;
        for (int k : feats) {
            coeff_rows.push_back(bc.per_feature[k]);
            double m = 0.0;
            for (double c : bc.per_feature[k]) m += c;
            l1_before += std::abs(m / bc.per_feature[k].size());
        }
        std::vector<double> outputs = model_outputs(*model, ds, split.d1);

        double best_l1 = l1_before;
        std::optional<BackgroundWeights> best;
        Rng rng(a.cfg.seed + 17);
        for (const LambdaTrace& t : res.trace) {
            BackgroundWeights bw = compute_weights_multi(coeff_rows, outputs, t.lambda);
            double l1 = 0.0;
            for (const auto& row : coeff_rows) l1 += std::abs(weighted_gsv(row, bw.omega));
            Rng det_rng = rng.child(static_cast<std::uint64_t>(&t - res.trace.data()));
            double rate = detection_rate(bw.omega, *model, ds, split, res.s0_prime, a.cfg.m,
                                         a.cfg.alpha, a.cfg.detection_reps, det_rng);
            if (l1 < best_l1 && rate < a.cfg.tau) {
                best_l1 = l1;
                best = std::move(bw);
            }
        }
        json multi;
        multi["features"] = a.multi_sensitive;
        multi["l1_before"] = l1_before;
        multi["l1_after"] = best_l1;
        multi["fell_back_to_uniform"] = !best.has_value();
        out["multi_sensitive"] = multi;
        if (best) {
            std::string csv = "instance_id,omega\n";
            for (std::size_t j = 0; j < best->omega.size(); ++j)
                csv += std::to_string(split.d1[j]) + "," + fmt(best->omega[j]) + "\n";
            write_text(fs::path(a.out) / "weights_multi.csv", csv);
        }
    }

    // baselines under the same foreground sample
    for (const std::string& b : a.baselines) {
        if (b == "brute") {
            Rng rng(a.cfg.seed + 1);
            AttackResult brute = brute_force_attack(
                *model, ds, split, res.s0_prime, a.cfg.m,
                std::chrono::duration<double>(a.budget), rng, std::nullopt, a.cfg.enum_cap);
            json bj;
            bj["method"] = brute.method;
            bj["draws"] = brute.draws;
            bj["phi_before"] = brute.phi_before;
            bj["phi_after"] = brute.phi_after;
            bj["amplitude_reduction"] = brute.amplitude_reduction;
            write_text(fs::path(a.out) / "brute.json", bj.dump(2) + "\n");
        } else if (b == "genetic") {
            Rng rng(a.cfg.seed + 2);
            std::vector<int> s1_init(res.s1_prime);
            std::vector<double> f_d0 = model_outputs(*model, ds, split.d0);
            std::vector<double> f_d1 = model_outputs(*model, ds, split.d1);
            std::vector<double> f_s0p = model_outputs(*model, ds, res.s0_prime);
            Rng audit(a.cfg.seed + 3);
            DetectorFn detector = [&](const std::vector<std::vector<double>>& rows) {
                std::vector<double> f_fake(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i)
                    f_fake[i] = model->predict(rows[i]);
                return detect_fraud(f_d0, f_d1, f_s0p, f_fake, a.cfg.alpha,
                                    static_cast<int>(rows.size()), audit);
            };
            GeneticOptions opt;
            AttackResult gen = genetic_attack(*model, ds, split, res.s0_prime, s1_init,
                                              ds.sensitive_index, opt, detector, rng,
                                              a.cfg.enum_cap);
            json gj;
            gj["method"] = gen.method;
            gj["phi_before"] = gen.phi_before;
            gj["phi_after"] = gen.phi_after;
            gj["amplitude_reduction"] = gen.amplitude_reduction;
            gj["early_stop"] = gen.genetic_early_stop;
            write_text(fs::path(a.out) / "genetic.json", gj.dump(2) + "\n");
        } else {
            throw std::runtime_error("--baseline: unknown baseline '" + b +
                                     "' (expected brute or genetic)");
        }
    }

    write_text(fs::path(a.out) / "result.json", out.dump(2) + "\n");

    {
        std::string csv = "lambda,weighted_gsv_s,detection_rate,wasserstein_cost,accepted\n";
        for (const LambdaTrace& t : res.trace)
            csv += fmt(t.lambda) + "," + fmt(t.weighted_gsv_s) + "," +
                   fmt(t.detection_rate) + "," + fmt(t.wasserstein_cost) + "," +
                   (t.accepted ? "1" : "0") + "\n";
        write_text(fs::path(a.out) / "trace.csv", csv);
    }
    {
        std::string csv = "feature,gsv_before,gsv_after\n";
        for (int k = 0; k < ds.d(); ++k)
            csv += ds.feature_names[k] + "," + fmt(res.gsv_before.phi[k]) + "," +
                   fmt(res.gsv_after.phi[k]) + "\n";
        write_text(fs::path(a.out) / "gsv.csv", csv);
    }
    {
        std::string csv = "instance_id,omega\n";
        for (std::size_t j = 0; j < res.weights.omega.size(); ++j)
            csv += std::to_string(split.d1[j]) + "," + fmt(res.weights.omega[j]) + "\n";
        write_text(fs::path(a.out) / "weights.csv", csv);
    }
    if (!res.weights.coupling.empty()) {
        std::string csv = "i,j,pi\n";
        for (auto [i, jx, pi] : res.weights.coupling)
            csv += std::to_string(i) + "," + std::to_string(jx) + "," + fmt(pi) + "\n";
        write_text(fs::path(a.out) / "coupling.csv", csv);
    }
    write_ecdf_csv(fs::path(a.out) / "ecdf.csv", *model, ds, split, res.s0_prime,
                   res.s1_prime);

    std::cout << "amplitude reduction " << res.amplitude_reduction << ", detection rate "
              << res.detection_rate << ", lambda " << res.chosen_lambda
              << (res.fell_back_to_uniform ? " (fell back to uniform)" : "") << "\n";
    return 0;
}

std::vector<int> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open id file " + path);
    std::vector<int> ids;
    int v;
    while (in >> v) ids.push_back(v);
    if (ids.empty()) throw std::runtime_error("id file " + path + " is empty");
    return ids;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Background-biasing attacks on group Shapley explanations, "
                 "with audit-side detection"};
    app.require_subcommand(1);

    // gen-toy
    auto* gen = app.add_subcommand("gen-toy", "generate the synthetic hiring dataset");
    int gen_n = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".";
    gen->add_option("--n", gen_n, "number of rows")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory");

    // attack
    auto* att = app.add_subcommand("attack", "run the weight-biasing attack");
    AttackCli a;
    att->add_option("--dataset", a.dataset, "dataset CSV");
    att->add_option("--schema", a.schema, "schema JSON");
    att->add_option("--model", a.model, "model JSON (fits a logistic model if omitted)");
    att->add_option("--config", a.config, "JSON config; explicit flags win");
    att->add_option("--sensitive", a.sensitive, "sensitive feature name override");
    att->add_option("--m", a.cfg.m, "audit subset size");
    att->add_option("--tau", a.cfg.tau, "detection-rate acceptance threshold");
    att->add_option("--alpha", a.cfg.alpha, "detector significance level");
    att->add_option("--lambda-min", a.cfg.lambda_min, "grid lower end (auto if negative)");
    att->add_option("--lambda-max", a.cfg.lambda_max, "grid upper end (auto if negative)");
    att->add_option("--grid", a.cfg.grid_size, "lambda grid size");
    att->add_option("--seed", a.cfg.seed, "attack seed");
    att->add_option("--threads", a.cfg.threads, "worker threads");
    att->add_option("--detection-reps", a.cfg.detection_reps, "detector replicates per lambda");
    att->add_option("--out", a.out, "output directory");
    att->add_option("--baseline", a.baselines, "baselines to run: brute, genetic");
    att->add_option("--budget", a.budget, "brute-force wall-clock budget, seconds");
    att->add_option("--multi-sensitive", a.multi_sensitive,
                    "feature names for the joint multi-feature variant");

    // detect
    auto* det = app.add_subcommand("detect", "run the audit detector on submitted subsets");
    std::string det_dataset, det_schema, det_model, det_s0, det_s1, det_sensitive;
    double det_alpha = 0.05;
    std::uint64_t det_seed = 0;
    det->add_option("--dataset", det_dataset, "dataset CSV")->required();
    det->add_option("--schema", det_schema, "schema JSON")->required();
    det->add_option("--model", det_model, "model JSON (fits a logistic model if omitted)");
    det->add_option("--sensitive", det_sensitive, "sensitive feature name override");
    det->add_option("--s0-ids", det_s0, "file of S0' row ids, one per line")->required();
    det->add_option("--s1-ids", det_s1, "file of S1' row ids, one per line")->required();
    det->add_option("--alpha", det_alpha, "significance level");
    det->add_option("--seed", det_seed, "audit seed");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "false-positive rate of the detector");
    std::string cal_dataset, cal_schema, cal_model, cal_out, cal_sensitive;
    double cal_alpha = 0.05;
    int cal_m = 200, cal_reps = 1000, cal_threads = 1;
    std::uint64_t cal_seed = 0;
    cal->add_option("--dataset", cal_dataset, "dataset CSV")->required();
    cal->add_option("--schema", cal_schema, "schema JSON")->required();
    cal->add_option("--model", cal_model, "model JSON (fits a logistic model if omitted)");
    cal->add_option("--sensitive", cal_sensitive, "sensitive feature name override");
    cal->add_option("--alpha", cal_alpha, "significance level");
    cal->add_option("--m", cal_m, "subset size");
    cal->add_option("--reps", cal_reps, "replicates");
    cal->add_option("--seed", cal_seed, "seed");
    cal->add_option("--threads", cal_threads, "worker threads");
    cal->add_option("--out", cal_out, "output JSON path (stdout if omitted)");

    // gsv
    auto* gsv = app.add_subcommand("gsv", "plug-in global Shapley values of group disparity");
    std::string gsv_dataset, gsv_schema, gsv_model, gsv_out, gsv_sensitive;
    int gsv_m = 100, gsv_threads = 1;
    std::uint64_t gsv_seed = 0;
    gsv->add_option("--dataset", gsv_dataset, "dataset CSV")->required();
    gsv->add_option("--schema", gsv_schema, "schema JSON")->required();
    gsv->add_option("--model", gsv_model, "model JSON (fits a logistic model if omitted)");
    gsv->add_option("--sensitive", gsv_sensitive, "sensitive feature name override");
    gsv->add_option("--m", gsv_m, "sample size per group");
    gsv->add_option("--seed", gsv_seed, "sampling seed");
    gsv->add_option("--threads", gsv_threads, "worker threads");
    gsv->add_option("--out", gsv_out, "output CSV path (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (gen_n <= 0) {
                std::cerr << "gen-toy: --n must be a positive row count\n"
                          << gen->help();
                return 1;
            }
            fs::create_directories(gen_out);
            Dataset ds = generate_toy(gen_n, gen_seed);
            save_dataset_csv(ds, fs::path(gen_out) / "toy.csv",
                             fs::path(gen_out) / "toy.schema.json");
            std::cout << "wrote " << (fs::path(gen_out) / "toy.csv").string() << " ("
                      << ds.n() << " rows) and toy.schema.json\n";
            return 0;
        }
        if (att->parsed()) return run_attack(*att, a);
        if (det->parsed()) {
            AttackCli tmp;
            tmp.dataset = det_dataset;
            tmp.schema = det_schema;
            tmp.sensitive = det_sensitive;
            Dataset ds = load_dataset(tmp);
            GroupSplit split = split_by_sensitive(ds);
            ModelPtr model = load_or_fit_model(det_model, ds);
            std::vector<int> s0 = read_id_file(det_s0);
            std::vector<int> s1 = read_id_file(det_s1);
            if (s0.size() != s1.size())
                throw std::runtime_error("detect: S0' and S1' must have equal size");
            Rng rng(det_seed);
            bool flagged = detect_fraud(model_outputs(*model, ds, split.d0),
                                        model_outputs(*model, ds, split.d1),
                                        model_outputs(*model, ds, s0),
                                        model_outputs(*model, ds, s1), det_alpha,
                                        static_cast<int>(s0.size()), rng);
            json j;
            j["flagged"] = flagged;
            j["alpha"] = det_alpha;
            j["m"] = static_cast<int>(s0.size());
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (cal->parsed()) {
            AttackCli tmp;
            tmp.dataset = cal_dataset;
            tmp.schema = cal_schema;
            tmp.sensitive = cal_sensitive;
            Dataset ds = load_dataset(tmp);
            GroupSplit split = split_by_sensitive(ds);
            ModelPtr model = load_or_fit_model(cal_model, ds);
            CalibrationReport rep = calibrate_detector(
                model_outputs(*model, ds, split.d0), model_outputs(*model, ds, split.d1),
                cal_alpha, cal_m, cal_reps, cal_seed, cal_threads);
            json j;
            j["alpha"] = rep.alpha;
            j["M"] = rep.m;
            j["reps"] = rep.reps;
            j["fpr"] = rep.fpr;
            j["per_test_rejection_counts"] = rep.per_test_rejections;
            std::string text = j.dump(2) + "\n";
            if (cal_out.empty())
                std::cout << text;
            else
                write_text(cal_out, text);
            return 0;
        }
        if (gsv->parsed()) {
            AttackCli tmp;
            tmp.dataset = gsv_dataset;
            tmp.schema = gsv_schema;
            tmp.sensitive = gsv_sensitive;
            Dataset ds = load_dataset(tmp);
            GroupSplit split = split_by_sensitive(ds);
            ModelPtr model = load_or_fit_model(gsv_model, ds);
            Rng rng(gsv_seed);
            auto draw = [&](const std::vector<int>& pool) {
                int n = static_cast<int>(pool.size());
                std::vector<int> ids;
                if (gsv_m <= n) {
                    for (int p : rng.sample_without_replacement(n, gsv_m))
                        ids.push_back(pool[p]);
                } else {
                    for (int i = 0; i < gsv_m; ++i) ids.push_back(pool[rng.uniform_int(n)]);
                }
                return ids;
            };
            auto s0 = draw(split.d0);
            auto s1 = draw(split.d1);
            AttributionVector phi = global_shapley_mc(*model, gather_rows(ds, s0),
                                                      gather_rows(ds, s1), 15, gsv_threads);
            std::string csv = "feature,gsv\n";
            for (int k = 0; k < ds.d(); ++k)
                csv += ds.feature_names[k] + "," + fmt(phi.phi[k]) + "\n";
            if (gsv_out.empty())
                std::cout << csv;
            else
                write_text(gsv_out, csv);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
