#pragma once

#include <cstdio>

#include <json.hpp>

#include "drcb/image.hpp"
#include "drcb/rng.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

using json = nlohmann::json;

// Procedural "synthetic identity" faces: an anti-aliased glyph (oval face,
// hair band, eyes, mouth) whose geometry and palette are drawn per class.
// The similarity knob s shrinks identity spread around a shared mean, so
// s -> 1 collapses the classes onto one another; per-sample jitters provide
// intra-class variation.

struct JitterConfig {
    double translate_px = 1.5;
    double rotation_rad = 0.12;
    double brightness = 0.15;
    double mouth = 0.25;
};

struct DatasetConfig {
    int classes = 4;
    int train_per_class = 500;
    int test_per_class = 100;
    int resolution = 16;
    double similarity = 0.2;     // s in [0,1]
    double label_noise = 0.0;    // rho in [0,1)
    double occlusion_rate = 0.0;
    int occluder_max_px = 5;
    JitterConfig jitter;
    std::uint64_t seed = 0;

    void validate() const {
        if (classes < 2) throw std::invalid_argument("DatasetConfig: classes must be >= 2");
        if (resolution < 8) throw std::invalid_argument("DatasetConfig: resolution must be >= 8");
        if (similarity < 0.0 || similarity > 1.0)
            throw std::invalid_argument("DatasetConfig: similarity must be in [0,1]");
        if (label_noise < 0.0 || label_noise >= 1.0)
            throw std::invalid_argument("DatasetConfig: label_noise must be in [0,1)");
        if (occlusion_rate < 0.0 || occlusion_rate > 1.0)
            throw std::invalid_argument("DatasetConfig: occlusion_rate must be in [0,1]");
        if (train_per_class < 1 || test_per_class < 1)
            throw std::invalid_argument("DatasetConfig: per-class counts must be >= 1");
        if (occluder_max_px < 1)
            throw std::invalid_argument("DatasetConfig: occluder_max_px must be >= 1");
    }
};

// Parameter vector layout for one identity. All geometry is in canvas units
// (unit square, y down, face frame centered at the canvas center).
struct IdentitySpec {
    int class_id = 0;
    double face_rx, face_ry;   // oval radii
    double eye_dx;             // half eye separation
    double eye_r;
    double mouth_curve;        // + smile, - frown
    double hair_h;             // fraction of face height under hair
    double hue[3];             // base skin tone in [0,1]

    std::vector<double> param_vector() const {
        return {face_rx, face_ry, eye_dx, eye_r, mouth_curve, hair_h, hue[0], hue[1], hue[2]};
    }
};

struct JitterDraw {
    double dx = 0.0, dy = 0.0;  // canvas units
    double rot = 0.0;
    double brightness = 0.0;
    double mouth = 0.0;
};

namespace facegen {

struct ParamRange {
    double base, spread;
};

// Base identity distribution. Spreads are sized so that geometry stays on
// canvas after the default maximum jitter.
inline constexpr ParamRange kFaceRx{0.30, 0.040};
inline constexpr ParamRange kFaceRy{0.36, 0.040};
inline constexpr ParamRange kEyeDx{0.125, 0.035};
inline constexpr ParamRange kEyeR{0.045, 0.015};
inline constexpr ParamRange kMouthCurve{0.0, 0.60};
inline constexpr ParamRange kHairH{0.30, 0.13};
inline constexpr ParamRange kHue[3] = {{0.76, 0.17}, {0.60, 0.17}, {0.50, 0.17}};

inline double draw(const ParamRange& r, double scale, Rng& rng) {
    return r.base + scale * r.spread * rng.uniform(-1.0, 1.0);
}

}  // namespace facegen

inline std::vector<IdentitySpec> sample_identities(const DatasetConfig& cfg) {
    cfg.validate();
    double scale = 1.0 - cfg.similarity;
    // Geometry must fit after maximum translation jitter.
    double max_extent = facegen::kFaceRy.base + facegen::kFaceRy.spread;
    if (max_extent + cfg.jitter.translate_px / cfg.resolution > 0.5)
        throw std::invalid_argument("sample_identities: translate_px too large for resolution");

    Rng rng = Rng::stream(cfg.seed, 0x1de0);
    std::vector<IdentitySpec> specs;
    specs.reserve(static_cast<std::size_t>(cfg.classes));
    for (int c = 0; c < cfg.classes; ++c) {
        IdentitySpec s;
        s.class_id = c;
        s.face_rx = facegen::draw(facegen::kFaceRx, scale, rng);
        s.face_ry = facegen::draw(facegen::kFaceRy, scale, rng);
        s.eye_dx = facegen::draw(facegen::kEyeDx, scale, rng);
        s.eye_r = facegen::draw(facegen::kEyeR, scale, rng);
        s.mouth_curve = facegen::draw(facegen::kMouthCurve, scale, rng);
        s.hair_h = facegen::draw(facegen::kHairH, scale, rng);
        for (int i = 0; i < 3; ++i) s.hue[i] = facegen::draw(facegen::kHue[i], scale, rng);
        specs.push_back(s);
    }
    return specs;
}

namespace facegen {

inline double coverage(double signed_dist, double px) {
    return std::clamp(0.5 - signed_dist / px, 0.0, 1.0);
}

inline void blend(double color[3], const double src[3], double alpha) {
    for (int i = 0; i < 3; ++i) color[i] = color[i] * (1.0 - alpha) + src[i] * alpha;
}

}  // namespace facegen

// Deterministic render of one identity under one jitter draw. Output (3,H,W)
// in [-1,1].
inline Tensor render(const IdentitySpec& spec, const JitterDraw& jit, int resolution) {
    int R = resolution;
    double px = 1.0 / R;
    double cx = 0.5 + jit.dx, cy = 0.5 + jit.dy;
    double cosr = std::cos(-jit.rot), sinr = std::sin(-jit.rot);

    const double bg[3] = {0.10, 0.11, 0.13};
    const double skin[3] = {spec.hue[0], spec.hue[1], spec.hue[2]};
    const double hair[3] = {spec.hue[0] * 0.30, spec.hue[1] * 0.22, spec.hue[2] * 0.40};
    const double eye_col[3] = {0.06, 0.06, 0.10};
    const double mouth_col[3] = {0.55, 0.15, 0.18};

    double mc = spec.mouth_curve + jit.mouth;
    // mouth polyline in face-local coords
    constexpr int kMouthPts = 13;
    double mx[kMouthPts], my[kMouthPts];
    for (int i = 0; i < kMouthPts; ++i) {
        double t = -1.0 + 2.0 * i / (kMouthPts - 1);
        mx[i] = 0.11 * t;
        my[i] = 0.165 + 0.05 * mc * (t * t - 1.0);
    }

    Tensor img({3, R, R});
    for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
            double pcx = (x + 0.5) * px, pcy = (y + 0.5) * px;
            // face-local frame: translate then rotate
            double dx0 = pcx - cx, dy0 = pcy - cy;
            double fx = cosr * dx0 - sinr * dy0;
            double fy = sinr * dx0 + cosr * dy0;

            double color[3] = {bg[0], bg[1], bg[2]};

            // face oval
            double r_norm = std::sqrt((fx * fx) / (spec.face_rx * spec.face_rx) +
                                      (fy * fy) / (spec.face_ry * spec.face_ry));
            double d_oval = (r_norm - 1.0) * std::min(spec.face_rx, spec.face_ry);
            double a_oval = facegen::coverage(d_oval, px);
            facegen::blend(color, skin, a_oval);

            // hair band: oval interior above the hairline
            double hairline = -spec.face_ry * (1.0 - 2.0 * spec.hair_h);
            double a_hair = a_oval * facegen::coverage(fy - hairline, px);
            facegen::blend(color, hair, a_hair);

            // eyes
            for (int e = 0; e < 2; ++e) {
                double ex = (e == 0 ? -spec.eye_dx : spec.eye_dx);
                double d_eye = std::sqrt((fx - ex) * (fx - ex) + (fy + 0.10) * (fy + 0.10)) - spec.eye_r;
                facegen::blend(color, eye_col, facegen::coverage(d_eye, px));
            }

            // mouth: distance to sampled polyline, stroked
            double d_mouth = 1e9;
            for (int i = 0; i + 1 < kMouthPts; ++i) {
                double ax = mx[i], ay = my[i], bx = mx[i + 1], by = my[i + 1];
                double abx = bx - ax, aby = by - ay;
                double t = ((fx - ax) * abx + (fy - ay) * aby) / (abx * abx + aby * aby);
                t = std::clamp(t, 0.0, 1.0);
                double qx = ax + t * abx - fx, qy = ay + t * aby - fy;
                d_mouth = std::min(d_mouth, std::sqrt(qx * qx + qy * qy));
            }
            facegen::blend(color, mouth_col, facegen::coverage(d_mouth - 0.020, px));

            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(color[c] * (1.0 + jit.brightness), 0.0, 1.0);
                img.data()[(static_cast<std::size_t>(c) * R + y) * R + x] = 2.0 * v - 1.0;
            }
        }
    return img;
}

// Structured non-face texture, the "false positive" corruption image.
inline Tensor render_distractor(Rng& rng, int resolution) {
    int R = resolution;
    int kind = rng.uniform_int(3);
    double c1[3], c2[3];
    for (int i = 0; i < 3; ++i) {
        c1[i] = rng.uniform(0.15, 0.9);
        c2[i] = rng.uniform(0.1, 0.85);
    }
    double angle = rng.uniform(0.0, M_PI);
    double period = rng.uniform(2.5, 6.0) / R;
    double ca = std::cos(angle), sa = std::sin(angle);
    int blob_n = 3 + rng.uniform_int(3);
    std::vector<double> bx(static_cast<std::size_t>(blob_n)), by(static_cast<std::size_t>(blob_n)),
        br(static_cast<std::size_t>(blob_n));
    for (int i = 0; i < blob_n; ++i) {
        bx[static_cast<std::size_t>(i)] = rng.uniform(0.15, 0.85);
        by[static_cast<std::size_t>(i)] = rng.uniform(0.15, 0.85);
        br[static_cast<std::size_t>(i)] = rng.uniform(0.06, 0.2);
    }

    Tensor img({3, R, R});
    for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
            double u = (x + 0.5) / R, v = (y + 0.5) / R;
            double m = 0.0;
            if (kind == 0) {  // stripes
                m = 0.5 + 0.5 * std::sin(2.0 * M_PI * (u * ca + v * sa) / period);
            } else if (kind == 1) {  // checker
                int q = static_cast<int>(std::floor(u / period)) + static_cast<int>(std::floor(v / period));
                m = (q % 2 + 2) % 2 ? 1.0 : 0.0;
            } else {  // blobs
                for (int i = 0; i < blob_n; ++i) {
                    double d = std::hypot(u - bx[static_cast<std::size_t>(i)],
                                          v - by[static_cast<std::size_t>(i)]);
                    m = std::max(m, std::clamp(1.0 - d / br[static_cast<std::size_t>(i)], 0.0, 1.0));
                }
            }
            for (int c = 0; c < 3; ++c) {
                double col = c1[c] * m + c2[c] * (1.0 - m);
                img.data()[(static_cast<std::size_t>(c) * R + y) * R + x] = 2.0 * col - 1.0;
            }
        }
    return img;
}

struct ManifestEntry {
    std::string path;  // relative to the dataset root; empty if in-memory only
    int label = 0;
    std::string split;
    bool corrupted = false;
};

struct LabeledDataset {
    Tensor images;  // (N,3,H,W) in [-1,1]
    std::vector<int> labels;
    std::string split;
    std::vector<ManifestEntry> entries;
    std::vector<JitterDraw> jitters;  // per sample, for the disjointness contract

    int size() const { return images.defined() ? images.dim(0) : 0; }
};

namespace detail_datagen {

// One deterministic stream per sample, keyed by a globally unique index, so
// any parallel generation schedule reproduces the sequential output.
inline std::uint64_t sample_key(const DatasetConfig& cfg, bool train, int cls, int i) {
    std::uint64_t base = train ? 0 : static_cast<std::uint64_t>(cfg.classes) * cfg.train_per_class;
    std::uint64_t per = train ? cfg.train_per_class : cfg.test_per_class;
    return 0x5a17 + base + static_cast<std::uint64_t>(cls) * per + static_cast<std::uint64_t>(i);
}

inline void apply_occluder(Tensor& img, Rng& rng, int max_px) {
    int R = img.dim(1);
    int w = 2 + rng.uniform_int(std::max(1, max_px - 1));
    int h = 2 + rng.uniform_int(std::max(1, max_px - 1));
    int x0 = rng.uniform_int(std::max(1, R - w));
    int y0 = rng.uniform_int(std::max(1, R - h));
    double shade = rng.uniform(-0.9, -0.3);  // dark opaque block
    for (int c = 0; c < 3; ++c)
        for (int y = y0; y < y0 + h && y < R; ++y)
            for (int x = x0; x < x0 + w && x < R; ++x)
                img.data()[(static_cast<std::size_t>(c) * R + y) * R + x] = shade;
}

struct SampleOut {
    Tensor image;
    int label;
    bool corrupted;
    JitterDraw jitter;
};

inline SampleOut make_sample(const DatasetConfig& cfg, const std::vector<IdentitySpec>& ids, bool train,
                             int cls, int i) {
    Rng rng = Rng::stream(cfg.seed, sample_key(cfg, train, cls, i));
    JitterDraw jit;
    double tpx = cfg.jitter.translate_px / cfg.resolution;
    jit.dx = rng.uniform(-tpx, tpx);
    jit.dy = rng.uniform(-tpx, tpx);
    jit.rot = rng.uniform(-cfg.jitter.rotation_rad, cfg.jitter.rotation_rad);
    jit.brightness = rng.uniform(-cfg.jitter.brightness, cfg.jitter.brightness);
    jit.mouth = rng.uniform(-cfg.jitter.mouth, cfg.jitter.mouth);

    SampleOut out;
    out.jitter = jit;
    out.label = cls;
    out.corrupted = false;

    bool corrupt = rng.uniform() < cfg.label_noise;
    bool mismatch_mode = rng.uniform() < 0.5;  // vs distractor image
    if (corrupt && mismatch_mode) {
        // identity mismatch: label swapped to a uniformly different class
        int other = rng.uniform_int(cfg.classes - 1);
        if (other >= cls) ++other;
        out.image = render(ids[static_cast<std::size_t>(cls)], jit, cfg.resolution);
        out.label = other;
        out.corrupted = true;
    } else if (corrupt) {
        // false positive: structured non-face texture under the original label
        out.image = render_distractor(rng, cfg.resolution);
        out.corrupted = true;
    } else {
        out.image = render(ids[static_cast<std::size_t>(cls)], jit, cfg.resolution);
    }

    if (rng.uniform() < cfg.occlusion_rate) apply_occluder(out.image, rng, cfg.occluder_max_px);
    return out;
}

inline LabeledDataset build_split(const DatasetConfig& cfg, const std::vector<IdentitySpec>& ids,
                                  bool train) {
    int per = train ? cfg.train_per_class : cfg.test_per_class;
    int n = cfg.classes * per;
    LabeledDataset ds;
    ds.split = train ? "train" : "test";
    ds.images = Tensor({n, 3, cfg.resolution, cfg.resolution});
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.entries.resize(static_cast<std::size_t>(n));
    ds.jitters.resize(static_cast<std::size_t>(n));
    std::size_t img_elems = static_cast<std::size_t>(3) * cfg.resolution * cfg.resolution;
    for (int cls = 0; cls < cfg.classes; ++cls)
        for (int i = 0; i < per; ++i) {
            int idx = cls * per + i;
            auto s = make_sample(cfg, ids, train, cls, i);
            std::copy_n(s.image.raw(), img_elems, ds.images.raw() + idx * img_elems);
            ds.labels[static_cast<std::size_t>(idx)] = s.label;
            ds.jitters[static_cast<std::size_t>(idx)] = s.jitter;
            ds.entries[static_cast<std::size_t>(idx)] = {"", s.label, ds.split, s.corrupted};
        }
    return ds;
}

}  // namespace detail_datagen

// Pure function of (config, seed): training and evaluation splits with exact
// per-class counts. Corruption (identity mismatch / distractor, 50/50) and
// occlusion are applied per sample at the configured rates.
inline std::pair<LabeledDataset, LabeledDataset> build_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    auto ids = sample_identities(cfg);
    return {detail_datagen::build_split(cfg, ids, true), detail_datagen::build_split(cfg, ids, false)};
}

// ---------------------------------------------------------------------------
// Disk format: PPM files + manifest.json
// ---------------------------------------------------------------------------

inline json dataset_config_to_json(const DatasetConfig& c) {
    return json{{"classes", c.classes},
                {"train_per_class", c.train_per_class},
                {"test_per_class", c.test_per_class},
                {"resolution", c.resolution},
                {"similarity", c.similarity},
                {"label_noise", c.label_noise},
                {"occlusion_rate", c.occlusion_rate},
                {"occluder_max_px", c.occluder_max_px},
                {"jitter",
                 {{"translate_px", c.jitter.translate_px},
                  {"rotation_rad", c.jitter.rotation_rad},
                  {"brightness", c.jitter.brightness},
                  {"mouth", c.jitter.mouth}}},
                {"seed", c.seed}};
}

inline void write_dataset(const std::string& dir, LabeledDataset& train, LabeledDataset& test,
                          const DatasetConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "train");
    fs::create_directories(fs::path(dir) / "test");
    json manifest;
    manifest["config"] = dataset_config_to_json(cfg);
    manifest["samples"] = json::array();
    for (LabeledDataset* ds : {&train, &test}) {
        for (int i = 0; i < ds->size(); ++i) {
            auto& e = ds->entries[static_cast<std::size_t>(i)];
            char name[64];
            std::snprintf(name, sizeof(name), "%s/%05d_c%d.ppm", ds->split.c_str(), i, e.label);
            e.path = name;
            write_ppm((fs::path(dir) / name).string(), slice_image(ds->images, i));
            manifest["samples"].push_back(
                {{"path", e.path}, {"label", e.label}, {"split", e.split}, {"corrupted", e.corrupted}});
        }
    }
    write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline std::pair<LabeledDataset, LabeledDataset> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    json manifest = json::parse(read_file((fs::path(dir) / "manifest.json").string()));
    LabeledDataset train, test;
    train.split = "train";
    test.split = "test";
    std::vector<Tensor> timg, eimg;
    for (const auto& s : manifest.at("samples")) {
        ManifestEntry e{s.at("path").get<std::string>(), s.at("label").get<int>(),
                        s.at("split").get<std::string>(), s.at("corrupted").get<bool>()};
        Tensor img = read_ppm((fs::path(dir) / e.path).string());
        if (e.split == "train") {
            timg.push_back(img);
            train.labels.push_back(e.label);
            train.entries.push_back(e);
        } else {
            eimg.push_back(img);
            test.labels.push_back(e.label);
            test.entries.push_back(e);
        }
    }
    if (timg.empty() || eimg.empty())
        throw std::runtime_error("load_dataset: " + dir + " has an empty split");
    train.images = stack_images(timg);
    test.images = stack_images(eimg);
    return {std::move(train), std::move(test)};
}

}  // namespace drcb
