#pragma once

#include <json.hpp>

#include "drcb/io.hpp"
#include "drcb/metrics.hpp"

namespace drcb {

// Reference tables transcribed from the published study: the judge's 10x10
// confusion matrix on real data, the per-class recall columns for real and
// generated data, and the published summary numbers recomputed by
// run_fixture_checks.
struct PaperFixtures {
    ConfusionMatrix confusion_real;
    std::vector<double> real_recall, gen_recall, class_rca;
    double accuracy_real = 0.0;        // global, from the per-class table
    double accuracy_generated = 0.0;
    double global_rca = 0.0;
    double overall_accuracy = 0.0;     // from the confusion matrix's source table
    double class0_precision = 0.0, class0_recall = 0.0;
};

inline PaperFixtures builtin_fixtures() {
    PaperFixtures f;
    f.confusion_real = ConfusionMatrix(10);
    const std::int64_t rows[10][10] = {
        {77, 2, 4, 3, 0, 2, 2, 7, 2, 1},  {1, 87, 1, 0, 0, 2, 0, 4, 2, 0},
        {7, 6, 68, 2, 0, 5, 0, 3, 7, 0},  {2, 3, 2, 70, 1, 2, 13, 2, 0, 3},
        {4, 1, 0, 9, 68, 7, 6, 0, 1, 4},  {0, 0, 0, 2, 10, 66, 4, 1, 2, 8},
        {1, 0, 0, 3, 0, 6, 84, 0, 1, 3},  {9, 6, 7, 3, 0, 0, 0, 67, 6, 2},
        {3, 3, 0, 1, 0, 2, 1, 2, 84, 2},  {1, 0, 0, 3, 1, 5, 2, 4, 0, 82}};
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) f.confusion_real.at(i, j) = rows[i][j];
    f.real_recall = {0.77, 0.90, 0.69, 0.71, 0.68, 0.71, 0.86, 0.67, 0.86, 0.84};
    f.gen_recall = {0.38, 0.50, 0.02, 0.14, 0.36, 0.21, 0.14, 0.15, 0.07, 0.11};
    f.class_rca = {0.50, 0.55, 0.02, 0.19, 0.53, 0.30, 0.17, 0.23, 0.08, 0.13};
    f.accuracy_real = 0.770;
    f.accuracy_generated = 0.208;
    f.global_rca = 0.27;
    f.overall_accuracy = 0.768;
    f.class0_precision = 0.73;
    f.class0_recall = 0.77;
    return f;
}

inline nlohmann::json fixtures_to_json(const PaperFixtures& f) {
    nlohmann::json conf = nlohmann::json::array();
    for (int i = 0; i < f.confusion_real.K; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < f.confusion_real.K; ++j) row.push_back(f.confusion_real.at(i, j));
        conf.push_back(row);
    }
    return nlohmann::json{{"confusion_real", conf},
                          {"real_recall", f.real_recall},
                          {"gen_recall", f.gen_recall},
                          {"class_rca", f.class_rca},
                          {"accuracy_real", f.accuracy_real},
                          {"accuracy_generated", f.accuracy_generated},
                          {"global_rca", f.global_rca},
                          {"overall_accuracy", f.overall_accuracy},
                          {"class0_precision", f.class0_precision},
                          {"class0_recall", f.class0_recall}};
}

inline PaperFixtures fixtures_from_json(const nlohmann::json& j) {
    PaperFixtures f;
    const auto& conf = j.at("confusion_real");
    int k = static_cast<int>(conf.size());
    if (k == 0) throw std::invalid_argument("fixtures: empty confusion matrix");
    f.confusion_real = ConfusionMatrix(k);
    for (int i = 0; i < k; ++i) {
        if (static_cast<int>(conf[static_cast<std::size_t>(i)].size()) != k)
            throw std::invalid_argument("fixtures: confusion matrix not square");
        for (int c = 0; c < k; ++c)
            f.confusion_real.at(i, c) =
                conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<std::int64_t>();
    }
    f.real_recall = j.at("real_recall").get<std::vector<double>>();
    f.gen_recall = j.at("gen_recall").get<std::vector<double>>();
    f.class_rca = j.at("class_rca").get<std::vector<double>>();
    if (f.real_recall.size() != static_cast<std::size_t>(k) ||
        f.gen_recall.size() != static_cast<std::size_t>(k) ||
        f.class_rca.size() != static_cast<std::size_t>(k))
        throw std::invalid_argument("fixtures: recall columns must have K entries");
    f.accuracy_real = j.at("accuracy_real").get<double>();
    f.accuracy_generated = j.at("accuracy_generated").get<double>();
    f.global_rca = j.at("global_rca").get<double>();
    f.overall_accuracy = j.at("overall_accuracy").get<double>();
    f.class0_precision = j.at("class0_precision").get<double>();
    f.class0_recall = j.at("class0_recall").get<double>();
    return f;
}

inline PaperFixtures load_fixtures(const std::string& path) {
    std::string blob = read_file(path);
    if (blob.find_first_not_of(" \t\r\n") == std::string::npos)
        throw std::invalid_argument("fixtures: " + path + " is empty");
    return fixtures_from_json(nlohmann::json::parse(blob));
}

struct FixtureCheck {
    std::string name;
    double expected, got, tol;
    bool pass;
};

// Recomputes every published summary quantity from the raw tables.
inline std::vector<FixtureCheck> run_fixture_checks(const PaperFixtures& f) {
    std::vector<FixtureCheck> out;
    auto check = [&out](const std::string& name, double expected, double got, double tol) {
        out.push_back({name, expected, got, tol, std::abs(expected - got) <= tol});
    };

    PRF1Summary s = prf1(f.confusion_real);
    check("overall_accuracy", f.overall_accuracy, f.confusion_real.accuracy(), 1e-3);
    check("class0_precision", f.class0_precision,
          s.per_class[0].precision.defined ? s.per_class[0].precision.value : -1.0, 5e-3);
    check("class0_recall", f.class0_recall,
          s.per_class[0].recall.defined ? s.per_class[0].recall.value : -1.0, 5e-3);
    check("global_rca", f.global_rca, rca(f.accuracy_generated, f.accuracy_real), 5e-3);
    for (std::size_t c = 0; c < f.class_rca.size(); ++c) {
        MetricCell ratio = class_relative_recall(f.gen_recall[c], f.real_recall[c]);
        check("class" + std::to_string(c) + "_rca", f.class_rca[c],
              ratio.defined ? ratio.value : -1.0, 1e-2);
    }
    return out;
}

}  // namespace drcb
