// Pipeline driver: dataset generation, judge and generator training,
// sampling, evaluation, report rendering, and reference-table checks.
//
// Exit codes: 0 success, 1 config/usage/computation error, 2 missing
// prerequisite artifact.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "drcb/drcb.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitMissingPrereq = 2;

struct MissingPrereq : std::runtime_error {
    using std::runtime_error::runtime_error;
};

drcb::json load_config_json(const std::string& path) {
    if (path.empty()) return drcb::json::object();
    std::string blob;
    try {
        blob = drcb::read_file(path);
    } catch (const std::exception& e) {
        throw MissingPrereq(std::string("config file: ") + e.what());
    }
    return drcb::json::parse(blob);  // parse_error -> exit 1 via main handler
}

void apply_seed_override(drcb::json& cfg, const std::vector<std::uint64_t>& seed_flag) {
    if (!seed_flag.empty()) cfg["seed"] = seed_flag.back();
}

void require_exists(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw MissingPrereq(what + " not found: " + path);
}

void write_resolved_config(const std::string& out_dir, const drcb::json& resolved) {
    namespace fs = std::filesystem;
    fs::path base(out_dir);
    fs::path target = fs::is_directory(base) || !base.has_extension()
                          ? base / "config.resolved.json"
                          : base.parent_path() / (base.filename().string() + ".config.json");
    drcb::write_file_atomic(target.string(), resolved.dump(2) + "\n");
}

int cmd_datagen(const std::string& config_path, const std::string& out_dir,
                const std::vector<std::uint64_t>& seed_flag) {
    drcb::json cfg_json = load_config_json(config_path);
    apply_seed_override(cfg_json, seed_flag);
    drcb::DatasetConfig cfg = drcb::parse_dataset_config(cfg_json);
    auto [train, test] = drcb::build_dataset(cfg);
    drcb::write_dataset(out_dir, train, test, cfg);
    write_resolved_config(out_dir, drcb::dataset_config_to_json(cfg));
    std::cout << "datagen: wrote " << train.size() << " train + " << test.size() << " test samples to "
              << out_dir << "\n";
    return 0;
}

int cmd_train_oracle(const std::string& data_dir, const std::string& config_path,
                     const std::string& out_path, const std::vector<std::uint64_t>& seed_flag) {
    require_exists(data_dir, "dataset directory");
    require_exists((std::filesystem::path(data_dir) / "manifest.json").string(), "dataset manifest");
    drcb::json cfg_json = load_config_json(config_path);
    apply_seed_override(cfg_json, seed_flag);
    drcb::OracleRunConfig cfg = drcb::parse_oracle_config(cfg_json);

    auto [train, test] = drcb::load_dataset(data_dir);
    cfg.model.resolution = train.images.dim(2);
    int K = 0;
    for (int l : train.labels) K = std::max(K, l + 1);
    for (int l : test.labels) K = std::max(K, l + 1);
    cfg.model.classes = K;

    drcb::Oracle oracle(cfg.model, cfg.train.seed);
    drcb::OracleTrainResult res = drcb::train_oracle(oracle, train.images, train.labels, test.images,
                                                     test.labels, cfg.train, &std::cout);
    drcb::json meta = res.metadata;
    {
        // per-class P/R/F1 on the held-out split, recorded into the checkpoint
        drcb::PRF1Summary s =
            drcb::prf1(drcb::confusion(test.labels, oracle.classify(test.images), K));
        drcb::json per = drcb::json::array();
        for (const auto& pc : s.per_class)
            per.push_back({{"precision", pc.precision.defined ? pc.precision.value : -1.0},
                           {"recall", pc.recall.defined ? pc.recall.value : -1.0},
                           {"f1", pc.f1.defined ? pc.f1.value : -1.0},
                           {"support", pc.support}});
        meta["per_class"] = per;
    }
    oracle.save(out_path, meta);
    write_resolved_config(out_path, drcb::oracle_config_to_json(cfg));
    std::cout << "train-oracle: best test accuracy " << res.test_accuracy << " (step "
              << res.best_step << ") -> " << out_path << "\n";
    return 0;
}

int cmd_train_ddpm(const std::string& data_dir, const std::string& config_path,
                   const std::string& out_path, const std::vector<std::uint64_t>& seed_flag) {
    require_exists(data_dir, "dataset directory");
    require_exists((std::filesystem::path(data_dir) / "manifest.json").string(), "dataset manifest");
    drcb::json cfg_json = load_config_json(config_path);
    apply_seed_override(cfg_json, seed_flag);
    drcb::DdpmRunConfig cfg = drcb::parse_ddpm_config(cfg_json);

    auto [train, test] = drcb::load_dataset(data_dir);
    (void)test;
    int K = 0;
    for (int l : train.labels) K = std::max(K, l + 1);

    drcb::DenoiserConfig mc = drcb::default_denoiser_config(train.images.dim(2), K);
    mc.base = cfg.base;
    mc.emb_dim = cfg.emb_dim;
    if (!cfg.mults.empty()) mc.mults = cfg.mults;

    drcb::Denoiser model(mc, cfg.train.seed);
    drcb::NoiseSchedule sched = drcb::default_schedule(cfg.T);
    auto losses =
        drcb::train_denoiser(model, train.images, train.labels, sched, cfg.train, &std::cout);
    model.save(out_path, drcb::json{{"T", cfg.T}, {"steps", cfg.train.steps},
                                    {"seed", cfg.train.seed}, {"final_loss", losses.back()}});
    write_resolved_config(out_path, drcb::ddpm_config_to_json(cfg, mc));
    std::cout << "train-ddpm: " << cfg.train.steps << " steps, final loss " << losses.back()
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_sample(const std::string& model_path, const std::string& config_path,
               const std::string& out_dir, const std::vector<std::uint64_t>& seed_flag) {
    require_exists(model_path, "denoiser checkpoint");
    drcb::json cfg_json = load_config_json(config_path);
    apply_seed_override(cfg_json, seed_flag);
    drcb::SampleRunConfig cfg = drcb::parse_sample_config(cfg_json);

    drcb::json meta;
    drcb::Denoiser model = drcb::Denoiser::load(model_path, &meta);
    int T = meta.at("T").get<int>();
    drcb::NoiseSchedule sched = drcb::default_schedule(T);

    int K = model.config().classes;
    std::vector<int> labels;
    for (int c = 0; c < K; ++c)
        for (int i = 0; i < cfg.per_class; ++i) labels.push_back(c);

    drcb::SampleOpts opts;
    opts.batch_size = cfg.batch;
    opts.deterministic = cfg.deterministic;
    opts.variance = cfg.variance == "beta" ? drcb::SamplerVariance::beta
                                           : drcb::SamplerVariance::posterior;
    drcb::Tensor images = drcb::sample_chains(model.predictor(), sched, labels, 3,
                                              model.config().resolution, model.config().resolution,
                                              cfg.seed, opts);
    drcb::write_sample_set(out_dir, images, labels, cfg.seed, T);
    write_resolved_config(out_dir, drcb::sample_config_to_json(cfg));
    std::cout << "sample: wrote " << images.dim(0) << " images to " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& samples_dir,
                 const std::string& oracle_path, const std::string& config_path,
                 const std::string& out_dir, const std::vector<std::uint64_t>& seed_flag) {
    require_exists(data_dir, "dataset directory");
    require_exists(samples_dir, "samples directory");
    require_exists(oracle_path, "oracle checkpoint");
    drcb::json cfg_json = load_config_json(config_path);
    apply_seed_override(cfg_json, seed_flag);
    drcb::EvalOptions opts = drcb::parse_eval_config(cfg_json);

    drcb::Oracle oracle = drcb::Oracle::load(oracle_path);
    auto [train, test] = drcb::load_dataset(data_dir);
    (void)train;
    drcb::SampleSet gen = drcb::load_sample_set(samples_dir);

    {
        int K = oracle.config().classes;
        std::vector<int> count(static_cast<std::size_t>(K), 0);
        for (int c : gen.intended)
            if (c >= 0 && c < K) ++count[static_cast<std::size_t>(c)];
        std::string missing;
        for (int c = 0; c < K; ++c)
            if (count[static_cast<std::size_t>(c)] == 0)
                missing += (missing.empty() ? "" : ", ") + std::to_string(c);
        if (!missing.empty())
            throw MissingPrereq("generated set missing classes: " + missing);
    }

    drcb::EvalReport report =
        drcb::evaluate(oracle, test.images, test.labels, gen.images, gen.intended, opts);
    drcb::write_report(out_dir, report);
    write_resolved_config(out_dir, drcb::eval_config_to_json(opts));
    std::cout << "evaluate: acc_real " << report.acc_real << " acc_gen " << report.acc_gen
              << " RCA " << report.global_rca << " oracle-FID " << report.frechet_score
              << " -> " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& report_path, const std::string& out_dir) {
    require_exists(report_path, "evaluation report");
    drcb::json j = drcb::json::parse(drcb::read_file(report_path));

    auto parse_conf = [](const drcb::json& rows) {
        int k = static_cast<int>(rows.size());
        drcb::ConfusionMatrix m(k);
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < k; ++c)
                m.at(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]
                                 .get<std::int64_t>();
        return m;
    };
    drcb::ConfusionMatrix conf_real = parse_conf(j.at("confusion_real"));
    drcb::ConfusionMatrix conf_gen = parse_conf(j.at("confusion_generated"));
    std::vector<drcb::MetricCell> class_rca;
    for (const auto& c : j.at("class_rca"))
        class_rca.push_back({c.value("value", 0.0), c.at("defined").get<bool>()});

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    drcb::write_file_atomic((fs::path(out_dir) / "confusion_real.svg").string(),
                            drcb::confusion_heatmap_svg(conf_real, "judge on real data"));
    drcb::write_file_atomic((fs::path(out_dir) / "confusion_generated.svg").string(),
                            drcb::confusion_heatmap_svg(conf_gen, "judge on generated samples"));
    drcb::write_file_atomic((fs::path(out_dir) / "class_rca.svg").string(),
                            drcb::rca_bar_svg(class_rca));

    // Table-style CSV rebuilt from the stored report
    drcb::EvalReport r;
    r.K = conf_real.K;
    r.conf_real = conf_real;
    r.conf_gen = conf_gen;
    r.prf_real = drcb::prf1(conf_real);
    r.prf_gen = drcb::prf1(conf_gen);
    r.class_rca = class_rca;
    drcb::write_file_atomic((fs::path(out_dir) / "per_class.csv").string(),
                            drcb::per_class_table_csv(r));
    std::cout << "report: wrote SVG/CSV artifacts to " << out_dir << "\n";
    return 0;
}

int cmd_fixtures_check(const std::string& fixtures_path) {
    drcb::PaperFixtures f = drcb::load_fixtures(fixtures_path);
    std::vector<drcb::FixtureCheck> checks = drcb::run_fixture_checks(f);
    bool all_pass = true;
    std::printf("%-18s %10s %10s %8s  %s\n", "check", "expected", "got", "tol", "result");
    for (const auto& c : checks) {
        std::printf("%-18s %10.4f %10.4f %8.4f  %s\n", c.name.c_str(), c.expected, c.got, c.tol,
                    c.pass ? "pass" : "FAIL");
        all_pass = all_pass && c.pass;
    }
    if (!all_pass) {
        for (const auto& c : checks)
            if (!c.pass)
                std::fprintf(stderr, "fixtures-check: %s off by %+.5f (tol %.5f)\n", c.name.c_str(),
                             c.got - c.expected, c.tol);
        return kExitError;
    }
    std::cout << "fixtures-check: all " << checks.size() << " checks pass\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"class-conditional diffusion pipeline with a calibrated semantic-consistency evaluator"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, model_path, samples_dir, oracle_path, report_path;
    std::string fixtures_path = "fixtures/paper_tables.json";
    std::vector<std::uint64_t> seed_flag;
    int threads = 1;

    app.add_option("--threads", threads, "compute threads (default 1, deterministic)");

    auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", config_path, "JSON config path");
        sub->add_option("--seed", seed_flag, "seed override");
        if (needs_out) sub->add_option("--out", out_path, "output path")->required();
    };

    CLI::App* sc_datagen = app.add_subcommand("datagen", "generate a labeled synthetic dataset");
    add_common(sc_datagen, true);

    CLI::App* sc_oracle = app.add_subcommand("train-oracle", "train the judge classifier");
    add_common(sc_oracle, true);
    sc_oracle->add_option("--data", data_dir, "dataset directory")->required();

    CLI::App* sc_ddpm = app.add_subcommand("train-ddpm", "train the conditional denoiser");
    add_common(sc_ddpm, true);
    sc_ddpm->add_option("--data", data_dir, "dataset directory")->required();

    CLI::App* sc_sample = app.add_subcommand("sample", "draw class-conditional samples");
    add_common(sc_sample, true);
    sc_sample->add_option("--model", model_path, "denoiser checkpoint")->required();

    CLI::App* sc_eval = app.add_subcommand("evaluate", "score samples against the judge");
    add_common(sc_eval, true);
    sc_eval->add_option("--data", data_dir, "dataset directory")->required();
    sc_eval->add_option("--samples", samples_dir, "generated sample directory")->required();
    sc_eval->add_option("--oracle", oracle_path, "oracle checkpoint")->required();

    CLI::App* sc_report = app.add_subcommand("report", "render SVG/CSV from a report");
    sc_report->add_option("--report", report_path, "report.json path")->required();
    sc_report->add_option("--out", out_path, "output directory")->required();

    CLI::App* sc_fix = app.add_subcommand("fixtures-check", "verify transcribed reference tables");
    sc_fix->add_option("--fixtures", fixtures_path, "fixtures JSON path");

    CLI11_PARSE(app, argc, argv);
    drcb::set_compute_threads(threads);

    try {
        if (sc_datagen->parsed()) return cmd_datagen(config_path, out_path, seed_flag);
        if (sc_oracle->parsed()) return cmd_train_oracle(data_dir, config_path, out_path, seed_flag);
        if (sc_ddpm->parsed()) return cmd_train_ddpm(data_dir, config_path, out_path, seed_flag);
        if (sc_sample->parsed()) return cmd_sample(model_path, config_path, out_path, seed_flag);
        if (sc_eval->parsed())
            return cmd_evaluate(data_dir, samples_dir, oracle_path, config_path, out_path, seed_flag);
        if (sc_report->parsed()) return cmd_report(report_path, out_path);
        if (sc_fix->parsed()) return cmd_fixtures_check(fixtures_path);
    } catch (const MissingPrereq& e) {
        std::cerr << "error (missing prerequisite): " << e.what() << "\n";
        return kExitMissingPrereq;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
