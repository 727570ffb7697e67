// Copyright 2026 The aopvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aopvos/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "aopvos/correlation.hpp"
#include "aopvos/errors.hpp"
#include "aopvos/rng.hpp"

namespace aopvos {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first exception
// is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

std::string mode_name(ReferenceMode m) { return m == ReferenceMode::base ? "base" : "mf"; }

ReferenceMode parse_ref_mode(const std::string& s) {
    if (s == "base")
        return ReferenceMode::base;
    if (s == "mf" || s == "multi_frame" || s == "multi-frame")
        return ReferenceMode::multi_frame;
    throw ConfigError("unknown reference schedule '" + s + "' (expected base or mf)");
}

InferenceMode parse_inference_mode(const std::string& s) {
    if (s == "full")
        return InferenceMode::full;
    if (s == "matching-only" || s == "matching_only")
        return InferenceMode::matching_only;
    throw ConfigError("unknown mode '" + s + "' (expected full or matching-only)");
}

ProxyMode parse_proxy_mode(const std::string& s) {
    if (s == "clustered")
        return ProxyMode::clustered;
    if (s == "grid")
        return ProxyMode::grid;
    throw ConfigError("unknown proxy mode '" + s + "' (expected clustered or grid)");
}

} // namespace

std::vector<std::size_t> ReferenceSchedule::select(std::size_t t) const {
    if (t < 2)
        throw ArgumentError("reference selection needs a target frame t >= 2");
    std::vector<std::size_t> out;
    if (mode == ReferenceMode::base) {
        out.push_back(1);
        if (t - 1 != 1)
            out.push_back(t - 1);
        return out;
    }
    if (delta == 0)
        throw ConfigError("multi-frame reference stride must be >= 1");
    for (std::size_t r = 1; r < t; r += delta)
        out.push_back(r);
    if (out.back() != t - 1)
        out.push_back(t - 1);
    return out;
}

bool ReferenceSchedule::is_anchor(std::size_t frame) const {
    if (frame == 1)
        return true;
    return mode == ReferenceMode::multi_frame && delta > 0 && (frame - 1) % delta == 0;
}

void PipelineConfig::validate() const {
    clusters.validate();
    cascade.validate();
    encoder.validate();
    if (proto_channels == 0 || sim_channels == 0)
        throw ConfigError("proto_channels and sim_channels must be positive");
    if (refs.mode == ReferenceMode::multi_frame && refs.delta == 0)
        throw ConfigError("delta must be >= 1");
    if (kmeans.restarts == 0)
        throw ConfigError("kmeans restarts must be >= 1");
}

void PipelineConfig::set_stages(std::size_t stages) {
    if (stages == 0)
        throw ConfigError("stages must be >= 1");
    cascade.num_stages = stages;
    cascade.upsample_stages.clear();
    for (std::size_t s : {stages - std::min<std::size_t>(stages, 2), stages - 1})
        if (s >= 1)
            cascade.upsample_stages.insert(s);
    cascade.lowlevel_stage = std::max<std::size_t>(1, stages - 1);
}

ProtoMapConfig PipelineConfig::proto_config() const {
    return {encoder.output_channels, clusters.size(), sim_channels, proto_channels};
}

CalibrationDims PipelineConfig::calibration_dims() const {
    return {proto_channels, clusters.size() * encoder.output_channels, encoder.low_level_channels};
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["clusters"] = clusters.to_string();
    j["proxy_mode"] = proxy_mode == ProxyMode::clustered ? "clustered" : "grid";
    j["beta"] = cascade.beta;
    j["stages"] = cascade.num_stages;
    j["upsample_stages"] = std::vector<std::size_t>(cascade.upsample_stages.begin(), cascade.upsample_stages.end());
    j["lowlevel_stage"] = cascade.lowlevel_stage;
    j["proto_channels"] = proto_channels;
    j["sim_channels"] = sim_channels;
    j["encoder"] = {{"output_channels", encoder.output_channels},
                    {"low_level_channels", encoder.low_level_channels},
                    {"num_random_layers", encoder.num_random_layers}};
    j["refs"] = mode_name(refs.mode);
    j["delta"] = refs.delta;
    j["seed"] = seed;
    j["mode"] = mode == InferenceMode::full ? "full" : "matching-only";
    j["weights"] = weights ? nlohmann::json(weights->string()) : nlohmann::json(nullptr);
    j["kmeans"] = {{"max_iter", kmeans.max_iter}, {"tol", kmeans.tol}, {"restarts", kmeans.restarts}};
    j["threads"] = threads;
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        if (j.contains("clusters"))
            c.clusters = ClusterSchedule::parse(j.at("clusters").get<std::string>());
        if (j.contains("proxy_mode"))
            c.proxy_mode = parse_proxy_mode(j.at("proxy_mode").get<std::string>());
        if (j.contains("stages"))
            c.set_stages(j.at("stages").get<std::size_t>());
        if (j.contains("beta"))
            c.cascade.beta = j.at("beta").get<double>();
        if (j.contains("upsample_stages")) {
            const auto v = j.at("upsample_stages").get<std::vector<std::size_t>>();
            c.cascade.upsample_stages = {v.begin(), v.end()};
        }
        if (j.contains("lowlevel_stage"))
            c.cascade.lowlevel_stage = j.at("lowlevel_stage").get<std::size_t>();
        if (j.contains("proto_channels"))
            c.proto_channels = j.at("proto_channels").get<std::size_t>();
        if (j.contains("sim_channels"))
            c.sim_channels = j.at("sim_channels").get<std::size_t>();
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            c.encoder.output_channels = e.value("output_channels", c.encoder.output_channels);
            c.encoder.low_level_channels = e.value("low_level_channels", c.encoder.low_level_channels);
            c.encoder.num_random_layers = e.value("num_random_layers", c.encoder.num_random_layers);
        }
        if (j.contains("refs"))
            c.refs.mode = parse_ref_mode(j.at("refs").get<std::string>());
        if (j.contains("delta"))
            c.refs.delta = j.at("delta").get<std::size_t>();
        if (j.contains("seed"))
            c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("mode"))
            c.mode = parse_inference_mode(j.at("mode").get<std::string>());
        if (j.contains("weights") && !j.at("weights").is_null())
            c.weights = fs::path(j.at("weights").get<std::string>());
        if (j.contains("kmeans")) {
            const auto& k = j.at("kmeans");
            c.kmeans.max_iter = k.value("max_iter", c.kmeans.max_iter);
            c.kmeans.tol = k.value("tol", c.kmeans.tol);
            c.kmeans.restarts = k.value("restarts", c.kmeans.restarts);
        }
        if (j.contains("threads"))
            c.threads = j.at("threads").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

ParamTable model_parameter_table(const PipelineConfig& cfg) {
    ParamTable t = encoder_parameter_table(cfg.encoder);
    for (auto& p : proto_parameter_table(cfg.proto_config()))
        t.push_back(std::move(p));
    for (auto& p : calibration_parameter_table(cfg.cascade, cfg.calibration_dims()))
        t.push_back(std::move(p));
    return t;
}

WeightBundle load_model_weights(const PipelineConfig& cfg) {
    const auto table = model_parameter_table(cfg);
    if (cfg.weights)
        return load_weights(*cfg.weights, table);
    return init_weights(cfg.seed, table);
}

std::vector<LabelMask> propagate_frames(const std::string& sequence_id, const std::vector<Image>& frames,
                                        const LabelMask& first_mask, const PipelineConfig& cfg,
                                        const WeightBundle& weights) {
    cfg.validate();
    if (frames.empty())
        throw ArgumentError("sequence '" + sequence_id + "' has no frames");
    const std::size_t h = frames.front().height();
    const std::size_t w = frames.front().width();
    for (const auto& f : frames)
        if (f.height() != h || f.width() != w)
            throw DataError("sequence '" + sequence_id + "' mixes frame sizes");
    if (first_mask.height() != h || first_mask.width() != w)
        throw DataError("sequence '" + sequence_id + "': first annotation size differs from the frames");

    const std::size_t num_objects = first_mask.num_objects();
    const std::uint64_t seq_seed = derive_seed(cfg.seed, {fnv1a64(sequence_id)});
    const ProtoMapConfig proto_cfg = cfg.proto_config();
    const CalibrationDims dims = cfg.calibration_dims();

    // Per reference frame: features, labels at feature resolution and the
    // single-reference proxy set of every object (0 = background).
    struct Reference {
        FeatureMap features;
        LabelMask mask;
        std::vector<ProxySet> proxies;
    };
    std::map<std::size_t, Reference> cache;
    auto add_reference = [&](std::size_t frame, FeatureMap features, const LabelMask& full_mask) {
        Reference ref{std::move(features), downsample_mask(full_mask, kEncoderStride), {}};
        const ReferenceView view{frame, &ref.features, &ref.mask};
        for (std::size_t obj = 0; obj <= num_objects; ++obj)
            ref.proxies.push_back(build_adaptive_proxy({&view, 1}, obj, cfg.clusters, seq_seed, cfg.proxy_mode,
                                                       cfg.kmeans));
        cache[frame] = std::move(ref);
    };

    std::vector<LabelMask> predictions;
    predictions.reserve(frames.size());
    predictions.push_back(first_mask);
    add_reference(1, encode(frames[0], cfg.encoder, weights).features, first_mask);

    for (std::size_t t = 2; t <= frames.size(); ++t) {
        EncoderOutput enc = encode(frames[t - 1], cfg.encoder, weights);
        const auto ref_ids = cfg.refs.select(t);

        std::vector<ProxySet> proxies(num_objects + 1);
        for (std::size_t obj = 0; obj <= num_objects; ++obj) {
            proxies[obj].object = obj;
            for (auto r : ref_ids) {
                const auto& entries = cache.at(r).proxies[obj].entries;
                proxies[obj].entries.insert(proxies[obj].entries.end(), entries.begin(), entries.end());
            }
        }

        LabelMask pred;
        if (cfg.mode == InferenceMode::matching_only) {
            pred = upsample_mask(nearest_proxy_classify(enc.features, proxies), kEncoderStride, h, w);
        } else {
            std::vector<FeatureMap> protos;
            protos.reserve(proxies.size());
            for (const auto& p : proxies)
                protos.push_back(generate_proto_map(enc.features, p, weights, proto_cfg));
            pred = merge_masks(cascade_calibrate(protos, proxies, enc.low_level, weights, cfg.cascade, dims,
                                                 cfg.clusters.size(), h, w));
        }
        predictions.push_back(pred);

        add_reference(t, std::move(enc.features), pred);
        if (t - 1 >= 2 && !cfg.refs.is_anchor(t - 1))
            cache.erase(t - 1);
    }
    return predictions;
}

std::vector<LabelMask> propagate_sequence(const SequenceRecord& record, const PipelineConfig& cfg,
                                          const WeightBundle& weights) {
    try {
        std::vector<Image> frames;
        frames.reserve(record.frames.size());
        for (const auto& p : record.frames)
            frames.push_back(read_image(p));
        const LabelMask first = read_label_png(record.first_annotation, record.num_objects);
        return propagate_frames(record.id, frames, first, cfg, weights);
    } catch (const DataError& e) {
        throw DataError("sequence '" + record.id + "': " + e.what());
    }
}

void infer_dataset(const std::vector<SequenceRecord>& records, const PipelineConfig& cfg,
                   const WeightBundle& weights, const fs::path& out_dir) {
    parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
        save_predictions(records[i], propagate_sequence(records[i], cfg, weights), out_dir);
    });
}

std::vector<std::optional<LabelMask>> load_ground_truth(const SequenceRecord& record) {
    std::vector<std::optional<LabelMask>> gt;
    gt.reserve(record.ground_truth.size());
    for (const auto& p : record.ground_truth)
        gt.push_back(p ? std::optional<LabelMask>(read_label_png(*p)) : std::nullopt);
    return gt;
}

std::vector<SequenceScore> evaluate_predictions(const fs::path& pred_dir, const fs::path& gt_root) {
    const auto records = load_dataset(gt_root);
    std::vector<SequenceScore> scores;
    for (const auto& rec : records) {
        std::vector<LabelMask> preds;
        for (const auto& f : rec.frames) {
            const fs::path p = pred_dir / rec.id / (f.stem().string() + ".png");
            if (!fs::exists(p))
                throw DataError("missing prediction " + p.string());
            preds.push_back(read_label_png(p));
        }
        scores.push_back(score_sequence(rec.id, preds, load_ground_truth(rec), rec.num_objects));
    }
    return scores;
}

RobustnessReport run_robustness(const fs::path& root, const PipelineConfig& cfg, const WeightBundle& weights,
                                const RobustnessOptions& opts) {
    const auto records = load_dataset(root);
    if (records.empty())
        throw DataError("no sequences under " + root.string());

    struct Loaded {
        std::vector<Image> frames;
        LabelMask first;
        std::vector<std::optional<LabelMask>> gt;
    };
    std::vector<Loaded> data(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (const auto& p : records[i].frames)
            data[i].frames.push_back(read_image(p));
        data[i].first = read_label_png(records[i].first_annotation, records[i].num_objects);
        data[i].gt = load_ground_truth(records[i]);
    }

    auto score = [&](const PerturbationSpec& spec) {
        std::vector<SequenceScore> scores(records.size());
        parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
            std::vector<Image> frames;
            frames.reserve(data[i].frames.size());
            for (std::size_t f = 0; f < data[i].frames.size(); ++f)
                frames.push_back(perturb_frame(data[i].frames[f], spec, frame_seed(spec.seed, records[i].id, f)));
            const auto preds = propagate_frames(records[i].id, frames, data[i].first, cfg, weights);
            scores[i] = score_sequence(records[i].id, preds, data[i].gt, records[i].num_objects);
        });
        return jf_mean(scores);
    };

    const double q_c = score({PerturbationKind::identity, 0, cfg.seed});
    std::optional<double> identity;
    if (opts.include_identity)
        identity = score({PerturbationKind::identity, 0, cfg.seed});
    const auto specs = opts.perturbations.empty() ? benchmark_perturbations(cfg.seed) : opts.perturbations;
    std::vector<RobustnessRow> rows;
    for (const auto& spec : specs)
        rows.push_back({spec.label(), score(spec)});
    return make_robustness_report(q_c, std::move(rows), identity);
}

SequenceRecord synthesize_sequence(const fs::path& root, const SynthOptions& opts) {
    static constexpr std::uint8_t kColors[][3] = {
        {220, 40, 40}, {40, 200, 60}, {50, 80, 230}, {230, 210, 40}, {200, 60, 200}, {40, 210, 210},
    };
    static constexpr std::uint8_t kBackground[3] = {110, 110, 110};
    constexpr std::size_t kMargin = 8;

    if (opts.objects == 0 || opts.objects > std::size(kColors))
        throw ArgumentError("synth supports 1.." + std::to_string(std::size(kColors)) + " objects");
    if (opts.frames < 2)
        throw ArgumentError("synth needs at least 2 frames");
    const std::size_t band = opts.height / opts.objects;
    if (band < opts.square + 2 * kEncoderStride || opts.width < opts.square + 2 * kMargin + kEncoderStride)
        throw ArgumentError("synth canvas too small for the requested objects");

    CounterRng rng(derive_seed(opts.seed, {fnv1a64("synth")}));
    struct Square {
        std::ptrdiff_t x, y, vx;
    };
    const std::size_t slots = (opts.width - opts.square - 2 * kMargin) / kEncoderStride + 1;
    std::vector<Square> squares;
    for (std::size_t i = 0; i < opts.objects; ++i) {
        const std::size_t y = (i * band + (band - opts.square) / 2) / kEncoderStride * kEncoderStride;
        const std::size_t x = kMargin + rng.below(slots) * kEncoderStride;
        const std::ptrdiff_t vx = (rng.next() >> 63) ? 4 : -4;
        squares.push_back({static_cast<std::ptrdiff_t>(x), static_cast<std::ptrdiff_t>(y), vx});
    }

    const fs::path img_dir = root / "JPEGImages" / opts.sequence_id;
    const fs::path ann_dir = root / "Annotations" / opts.sequence_id;
    fs::create_directories(img_dir);
    fs::create_directories(ann_dir);

    SequenceRecord rec;
    rec.id = opts.sequence_id;
    rec.num_objects = opts.objects;
    const auto lo = static_cast<std::ptrdiff_t>(kMargin);
    const auto hi = static_cast<std::ptrdiff_t>(opts.width - kMargin - opts.square);
    for (std::size_t f = 0; f < opts.frames; ++f) {
        Image img(opts.height, opts.width);
        for (std::size_t p = 0; p < opts.height * opts.width; ++p)
            std::copy_n(kBackground, 3, img.data().begin() + p * 3);
        LabelMask mask(opts.height, opts.width, opts.objects);
        for (std::size_t i = 0; i < squares.size(); ++i) {
            const auto& s = squares[i];
            for (std::size_t y = 0; y < opts.square; ++y)
                for (std::size_t x = 0; x < opts.square; ++x) {
                    const auto py = static_cast<std::size_t>(s.y) + y;
                    const auto px = static_cast<std::size_t>(s.x) + x;
                    std::copy_n(kColors[i], 3, img.data().begin() + (py * opts.width + px) * 3);
                    mask.at(py, px) = static_cast<Label>(i + 1);
                }
        }
        char stem[16];
        std::snprintf(stem, sizeof stem, "%05zu", f * 5);
        const fs::path frame_path = img_dir / (std::string(stem) + ".png");
        const fs::path ann_path = ann_dir / (std::string(stem) + ".png");
        write_png_rgb(img, frame_path);
        write_label_png(mask, ann_path);
        rec.frames.push_back(frame_path);
        rec.ground_truth.push_back(ann_path);

        for (auto& s : squares) {
            if (s.x + s.vx < lo || s.x + s.vx > hi)
                s.vx = -s.vx;
            s.x += s.vx;
        }
    }
    rec.first_annotation = rec.ground_truth.front().value();
    return rec;
}

} // namespace aopvos
