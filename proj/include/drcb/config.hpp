#pragma once

#include <json.hpp>

#include "drcb/datagen.hpp"
#include "drcb/evaluate.hpp"
#include "drcb/resnet.hpp"
#include "drcb/unet.hpp"

namespace drcb {

// Config documents are strict: any key outside the declared schema is an
// error, so typos fail loudly instead of silently running defaults.
inline void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                           const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument(ctx + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::invalid_argument(ctx + ": unknown field \"" + it.key() + "\"");
    }
}

template <typename T>
T jget(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config field \"" + key + "\" has the wrong type");
    }
}

// Keys every subcommand document may carry.
inline const std::vector<std::string> kEnvelopeKeys = {"seed", "out_dir", "resolution"};

inline std::vector<std::string> with_envelope(std::vector<std::string> keys) {
    keys.insert(keys.end(), kEnvelopeKeys.begin(), kEnvelopeKeys.end());
    return keys;
}

inline DatasetConfig parse_dataset_config(const json& j) {
    reject_unknown(j,
                   with_envelope({"classes", "train_per_class", "test_per_class", "similarity",
                                  "label_noise", "occlusion_rate", "occluder_max_px", "jitter"}),
                   "datagen config");
    DatasetConfig c;
    c.classes = jget(j, "classes", c.classes);
    c.train_per_class = jget(j, "train_per_class", c.train_per_class);
    c.test_per_class = jget(j, "test_per_class", c.test_per_class);
    c.resolution = jget(j, "resolution", c.resolution);
    c.similarity = jget(j, "similarity", c.similarity);
    c.label_noise = jget(j, "label_noise", c.label_noise);
    c.occlusion_rate = jget(j, "occlusion_rate", c.occlusion_rate);
    c.occluder_max_px = jget(j, "occluder_max_px", c.occluder_max_px);
    if (j.contains("jitter")) {
        const json& jj = j.at("jitter");
        reject_unknown(jj, {"translate_px", "rotation_rad", "brightness", "mouth"},
                       "datagen config jitter");
        c.jitter.translate_px = jget(jj, "translate_px", c.jitter.translate_px);
        c.jitter.rotation_rad = jget(jj, "rotation_rad", c.jitter.rotation_rad);
        c.jitter.brightness = jget(jj, "brightness", c.jitter.brightness);
        c.jitter.mouth = jget(jj, "mouth", c.jitter.mouth);
    }
    c.seed = jget<std::uint64_t>(j, "seed", c.seed);
    c.validate();
    return c;
}

struct OracleRunConfig {
    OracleConfig model;
    OracleTrainConfig train;
};

inline OracleRunConfig parse_oracle_config(const json& j) {
    reject_unknown(j,
                   with_envelope({"widths", "blocks_per_stage", "steps", "batch", "lr",
                                  "weight_decay", "eval_every"}),
                   "oracle config");
    OracleRunConfig c;
    c.model.widths = jget(j, "widths", c.model.widths);
    c.model.blocks_per_stage = jget(j, "blocks_per_stage", c.model.blocks_per_stage);
    c.model.resolution = jget(j, "resolution", c.model.resolution);
    c.train.steps = jget(j, "steps", c.train.steps);
    c.train.batch = jget(j, "batch", c.train.batch);
    c.train.lr = jget(j, "lr", c.train.lr);
    c.train.weight_decay = jget(j, "weight_decay", c.train.weight_decay);
    c.train.eval_every = jget(j, "eval_every", c.train.eval_every);
    c.train.seed = jget<std::uint64_t>(j, "seed", c.train.seed);
    return c;
}

inline json oracle_config_to_json(const OracleRunConfig& c) {
    return json{{"widths", c.model.widths},
                {"blocks_per_stage", c.model.blocks_per_stage},
                {"resolution", c.model.resolution},
                {"steps", c.train.steps},
                {"batch", c.train.batch},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"eval_every", c.train.eval_every},
                {"seed", c.train.seed}};
}

struct DdpmRunConfig {
    int T = 200;
    int base = 32;
    std::vector<int> mults;  // empty = choose by resolution
    int emb_dim = 64;
    DenoiserTrainConfig train;
};

inline DdpmRunConfig parse_ddpm_config(const json& j) {
    reject_unknown(
        j, with_envelope({"T", "base", "mults", "emb_dim", "steps", "batch", "lr", "weight_decay",
                          "log_every"}),
        "ddpm config");
    DdpmRunConfig c;
    c.T = jget(j, "T", c.T);
    c.base = jget(j, "base", c.base);
    c.mults = jget(j, "mults", c.mults);
    c.emb_dim = jget(j, "emb_dim", c.emb_dim);
    c.train.steps = jget(j, "steps", c.train.steps);
    c.train.batch = jget(j, "batch", c.train.batch);
    c.train.lr = jget(j, "lr", c.train.lr);
    c.train.weight_decay = jget(j, "weight_decay", c.train.weight_decay);
    c.train.log_every = jget(j, "log_every", c.train.log_every);
    c.train.seed = jget<std::uint64_t>(j, "seed", c.train.seed);
    if (c.T < 1) throw std::invalid_argument("ddpm config: T must be >= 1");
    return c;
}

inline json ddpm_config_to_json(const DdpmRunConfig& c, const DenoiserConfig& model) {
    return json{{"T", c.T},
                {"base", model.base},
                {"mults", model.mults},
                {"emb_dim", model.emb_dim},
                {"resolution", model.resolution},
                {"steps", c.train.steps},
                {"batch", c.train.batch},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"log_every", c.train.log_every},
                {"seed", c.train.seed}};
}

struct SampleRunConfig {
    int per_class = 500;
    int batch = 64;
    std::string variance = "posterior";  // or "beta"
    bool deterministic = false;
    std::uint64_t seed = 0;
};

inline SampleRunConfig parse_sample_config(const json& j) {
    reject_unknown(j, with_envelope({"per_class", "batch", "variance", "deterministic"}),
                   "sample config");
    SampleRunConfig c;
    c.per_class = jget(j, "per_class", c.per_class);
    c.batch = jget(j, "batch", c.batch);
    c.variance = jget(j, "variance", c.variance);
    c.deterministic = jget(j, "deterministic", c.deterministic);
    c.seed = jget<std::uint64_t>(j, "seed", c.seed);
    if (c.per_class < 1) throw std::invalid_argument("sample config: per_class must be >= 1");
    if (c.variance != "posterior" && c.variance != "beta")
        throw std::invalid_argument("sample config: variance must be \"posterior\" or \"beta\"");
    return c;
}

inline json sample_config_to_json(const SampleRunConfig& c) {
    return json{{"per_class", c.per_class},
                {"batch", c.batch},
                {"variance", c.variance},
                {"deterministic", c.deterministic},
                {"seed", c.seed}};
}

inline EvalOptions parse_eval_config(const json& j) {
    reject_unknown(j, with_envelope({"samples_per_class", "is_splits", "diversity_pairs"}),
                   "eval config");
    EvalOptions c;
    c.samples_per_class = jget(j, "samples_per_class", c.samples_per_class);
    c.is_splits = jget(j, "is_splits", c.is_splits);
    c.diversity_pairs = jget(j, "diversity_pairs", c.diversity_pairs);
    c.seed = jget<std::uint64_t>(j, "seed", c.seed);
    if (c.is_splits < 1 || c.diversity_pairs < 1)
        throw std::invalid_argument("eval config: splits/pairs must be >= 1");
    return c;
}

inline json eval_config_to_json(const EvalOptions& c) {
    return json{{"samples_per_class", c.samples_per_class},
                {"is_splits", c.is_splits},
                {"diversity_pairs", c.diversity_pairs},
                {"seed", c.seed}};
}

}  // namespace drcb
