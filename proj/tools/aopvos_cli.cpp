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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aopvos/dataset.hpp"
#include "aopvos/errors.hpp"
#include "aopvos/metrics.hpp"
#include "aopvos/perturbation.hpp"
#include "aopvos/pipeline.hpp"
#include "aopvos/rng.hpp"
#include "aopvos/weights.hpp"

namespace fs = std::filesystem;
using namespace aopvos;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kConfig = 4 };

struct ModelFlags {
    std::optional<std::string> config;
    std::optional<std::string> mode;
    std::optional<std::string> refs;
    std::optional<std::size_t> delta;
    std::optional<std::string> clusters;
    std::optional<double> beta;
    std::optional<std::size_t> stages;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> weights;
    std::optional<std::size_t> threads;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON configuration file");
        app->add_option("--mode", mode, "full | matching-only");
        app->add_option("--refs", refs, "base | mf");
        app->add_option("--delta", delta, "multi-frame reference stride");
        app->add_option("--clusters", clusters, "cluster schedule, e.g. 1,16,full");
        app->add_option("--beta", beta, "confidence gate percentile");
        app->add_option("--stages", stages, "number of calibration stages");
        app->add_option("--seed", seed, "seed for weights, clustering and perturbations");
        app->add_option("--weights", weights, "weight manifest (seeded weights when omitted)");
        app->add_option("--threads", threads, "worker threads");
    }

    PipelineConfig resolve() const {
        nlohmann::json j = config ? PipelineConfig::load(*config).to_json() : PipelineConfig{}.to_json();
        if (mode)
            j["mode"] = *mode;
        if (refs)
            j["refs"] = *refs;
        if (delta)
            j["delta"] = *delta;
        if (clusters)
            j["clusters"] = *clusters;
        if (stages) {
            j["stages"] = *stages;
            j.erase("upsample_stages");
            j.erase("lowlevel_stage");
        }
        if (beta)
            j["beta"] = *beta;
        if (seed)
            j["seed"] = *seed;
        if (weights)
            j["weights"] = *weights;
        if (threads)
            j["threads"] = *threads;
        PipelineConfig cfg = PipelineConfig::from_json(j);
        cfg.encoder.seed = cfg.seed;
        return cfg;
    }
};

int run_infer(const std::string& data, const std::string& out, const ModelFlags& flags) {
    const PipelineConfig cfg = flags.resolve();
    const auto records = load_dataset(data);
    const WeightBundle weights = load_model_weights(cfg);
    infer_dataset(records, cfg, weights, out);
    std::printf("wrote predictions for %zu sequence(s) to %s\n", records.size(), out.c_str());
    return kOk;
}

int run_eval(const std::string& pred, const std::string& gt, const std::optional<std::string>& categories,
             const std::string& report, const std::optional<std::string>& decay, std::size_t bins) {
    const auto scores = evaluate_predictions(pred, gt);
    std::optional<SplitScores> split;
    if (categories)
        split = split_scores(scores, read_category_manifest(*categories));
    write_scores_csv(scores, split, report);

    std::vector<std::vector<double>> per_seq;
    for (const auto& s : scores) {
        std::vector<double> curve(s.num_frames, 0.0);
        std::vector<bool> seen(s.num_frames, false);
        for (const auto& [frame, v] : s.frame_jf()) {
            curve[frame] = v;
            seen[frame] = true;
        }
        // Keep only scored frames, positioned by their index within the sequence.
        std::vector<double> ordered;
        for (std::size_t f = 0; f < curve.size(); ++f)
            if (seen[f])
                ordered.push_back(curve[f]);
        per_seq.push_back(std::move(ordered));
    }
    const fs::path decay_path = decay ? fs::path(*decay) : fs::path(report).replace_extension(".decay.csv");
    write_decay_csv(temporal_decay_curve(per_seq, bins), decay_path);

    std::printf("J %.4f  F %.4f  J&F %.4f\n", j_mean(scores), f_mean(scores), jf_mean(scores));
    if (split) {
        auto show = [](const char* name, const std::optional<double>& v) {
            if (v)
                std::printf("%s %.4f  ", name, *v);
            else
                std::printf("%s n/a  ", name);
        };
        show("J_s", split->j_seen);
        show("J_u", split->j_unseen);
        show("F_s", split->f_seen);
        show("F_u", split->f_unseen);
        std::printf("\n");
    }
    return kOk;
}

int run_robustness_cmd(const std::string& data, const std::string& report, bool identity, const ModelFlags& flags) {
    const PipelineConfig cfg = flags.resolve();
    const WeightBundle weights = load_model_weights(cfg);
    RobustnessOptions opts;
    opts.include_identity = identity;
    const auto r = run_robustness(data, cfg, weights, opts);
    write_robustness_csv(r, report);
    std::printf("Q_c %.4f\n", r.q_c);
    if (r.identity)
        std::printf("identity %.4f\n", *r.identity);
    for (const auto& row : r.perturbations)
        std::printf("%s %.4f\n", row.label.c_str(), row.score);
    std::printf("Q_p %.4f  R_p %.4f\n", r.q_p, r.r_p);
    return kOk;
}

int run_proxies(const std::string& data, const std::string& sequence, std::size_t frame, const std::string& out,
                const ModelFlags& flags) {
    const PipelineConfig cfg = flags.resolve();
    const auto records = load_dataset(data);
    const SequenceRecord* rec = nullptr;
    for (const auto& r : records)
        if (r.id == sequence)
            rec = &r;
    if (!rec)
        throw DataError("no sequence '" + sequence + "' under " + data);
    if (frame == 0 || frame > rec->frames.size())
        throw ArgumentError("frame must be in 1.." + std::to_string(rec->frames.size()));
    const WeightBundle weights = load_model_weights(cfg);
    const auto preds = propagate_sequence(*rec, cfg, weights);
    const EncoderOutput enc = encode(read_image(rec->frames[frame - 1]), cfg.encoder, weights);
    const LabelMask mask = downsample_mask(preds[frame - 1], kEncoderStride);
    const ReferenceView view{frame, &enc.features, &mask};
    const std::uint64_t seq_seed = derive_seed(cfg.seed, {fnv1a64(rec->id)});
    WeightBundle dump;
    for (std::size_t obj = 0; obj <= rec->num_objects; ++obj)
        dump.merge(proxy_set_to_bundle(
            build_adaptive_proxy({&view, 1}, obj, cfg.clusters, seq_seed, cfg.proxy_mode, cfg.kmeans)));
    save_weights(dump, out);
    std::printf("wrote proxies of frame %zu of %s to %s\n", frame, sequence.c_str(), out.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aopvos: adaptive-proxy video object segmentation and robustness benchmark"};
    app.require_subcommand(1);

    std::string data, out, pred, gt, report, kind, sequence;
    std::optional<std::string> categories, decay;
    double param = 0.0;
    std::uint64_t seed = 0;
    std::size_t frames = 5, objects = 2, bins = 10, frame = 1;
    bool no_identity = false;

    ModelFlags infer_flags, robust_flags, init_flags, print_flags, proxy_flags;

    auto* infer = app.add_subcommand("infer", "predict masks for every sequence of a dataset");
    infer->add_option("--data", data, "dataset root")->required();
    infer->add_option("--out", out, "output directory")->required();
    infer_flags.attach(infer);

    auto* perturb = app.add_subcommand("perturb", "write a perturbed copy of a dataset");
    perturb->add_option("--data", data, "dataset root")->required();
    perturb->add_option("--out", out, "output root")->required();
    perturb->add_option("--kind", kind, "gaussian-noise | salt-pepper | gaussian-blur")->required();
    perturb->add_option("--param", param, "sigma, point count or kernel size")->required();
    perturb->add_option("--seed", seed, "seed");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", pred, "prediction directory")->required();
    eval->add_option("--gt", gt, "dataset root with Annotations")->required();
    eval->add_option("--categories", categories, "seen/unseen manifest CSV");
    eval->add_option("--report", report, "per-sequence CSV")->required();
    eval->add_option("--decay", decay, "decay-curve CSV (default <report>.decay.csv)");
    eval->add_option("--bins", bins, "decay-curve bins")->check(CLI::PositiveNumber);

    auto* robust = app.add_subcommand("robustness", "clean run plus the six benchmark perturbations");
    robust->add_option("--data", data, "dataset root")->required();
    robust->add_option("--report", report, "report CSV")->required();
    robust->add_flag("--no-identity", no_identity, "omit the identity sanity row");
    robust_flags.attach(robust);

    auto* synth = app.add_subcommand("synth", "generate a coloured-square fixture sequence");
    synth->add_option("--out", out, "dataset root")->required();
    synth->add_option("--frames", frames, "frame count");
    synth->add_option("--objects", objects, "object count");
    synth->add_option("--seed", seed, "seed");

    auto* init = app.add_subcommand("init-weights", "write seeded model weights");
    init->add_option("--out", out, "manifest path")->required();
    init_flags.attach(init);

    auto* print = app.add_subcommand("print-config", "print the effective configuration");
    print_flags.attach(print);

    auto* proxies = app.add_subcommand("proxies", "dump the proxies of one frame for inspection");
    proxies->add_option("--data", data, "dataset root")->required();
    proxies->add_option("--sequence", sequence, "sequence id")->required();
    proxies->add_option("--frame", frame, "1-based frame index");
    proxies->add_option("--out", out, "manifest path")->required();
    proxy_flags.attach(proxies);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*infer)
            return run_infer(data, out, infer_flags);
        if (*perturb) {
            PerturbationSpec spec{parse_perturbation_kind(kind), param, seed};
            spec.validate();
            perturb_dataset(data, spec, out);
            std::printf("wrote %s to %s\n", spec.label().c_str(), out.c_str());
            return kOk;
        }
        if (*eval)
            return run_eval(pred, gt, categories, report, decay, bins);
        if (*robust)
            return run_robustness_cmd(data, report, !no_identity, robust_flags);
        if (*synth) {
            SynthOptions opts;
            opts.frames = frames;
            opts.objects = objects;
            opts.seed = seed;
            const auto rec = synthesize_sequence(out, opts);
            std::printf("wrote %zu frames of %s under %s\n", rec.frames.size(), rec.id.c_str(), out.c_str());
            return kOk;
        }
        if (*init) {
            const PipelineConfig cfg = init_flags.resolve();
            save_weights(init_weights(cfg.seed, model_parameter_table(cfg)), out);
            std::printf("wrote weights to %s\n", out.c_str());
            return kOk;
        }
        if (*print) {
            std::cout << print_flags.resolve().to_json().dump(2) << "\n";
            return kOk;
        }
        if (*proxies)
            return run_proxies(data, sequence, frame, out, proxy_flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
