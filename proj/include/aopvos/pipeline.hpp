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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aopvos/calibration.hpp"
#include "aopvos/correlation.hpp"
#include "aopvos/dataset.hpp"
#include "aopvos/encoder.hpp"
#include "aopvos/metrics.hpp"
#include "aopvos/perturbation.hpp"
#include "aopvos/proxy.hpp"
#include "aopvos/weights.hpp"

namespace aopvos {

enum class ReferenceMode { base, multi_frame };

struct ReferenceSchedule {
    ReferenceMode mode = ReferenceMode::base;
    std::size_t delta = 5;

    // 1-based reference frames for target frame t >= 2, strictly increasing:
    //   base        {1, t-1}
    //   multi_frame {1, 1+delta, 1+2 delta, ...} below t, plus t-1
    std::vector<std::size_t> select(std::size_t t) const;
    // Whether frame `frame` can be a reference of some later target (other
    // than as the immediately previous frame).
    bool is_anchor(std::size_t frame) const;
};

enum class InferenceMode { full, matching_only };

struct PipelineConfig {
    ClusterSchedule clusters;
    ProxyMode proxy_mode = ProxyMode::clustered;
    CascadeConfig cascade;
    std::size_t proto_channels = 32;
    std::size_t sim_channels = 8;
    EncoderConfig encoder;
    ReferenceSchedule refs;
    std::uint64_t seed = 0;
    InferenceMode mode = InferenceMode::full;
    std::optional<std::filesystem::path> weights; // seeded weights when unset
    KMeansOptions kmeans;
    std::size_t threads = 1;

    void validate() const;
    // Resets the cascade layout for `stages` stages: upsampling on the two
    // stages before the last, low-level fusion on the penultimate stage.
    void set_stages(std::size_t stages);

    ProtoMapConfig proto_config() const;
    CalibrationDims calibration_dims() const;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);
};

// Every parameter of the model (encoder, proto-map generator, cascade).
ParamTable model_parameter_table(const PipelineConfig& cfg);

// Loads cfg.weights (validated against the table) or seeds them from cfg.seed.
WeightBundle load_model_weights(const PipelineConfig& cfg);

// Predicts masks for every frame of an in-memory sequence. Frame 0's output
// is `first_mask`; later frames use their own predictions as references.
std::vector<LabelMask> propagate_frames(const std::string& sequence_id, const std::vector<Image>& frames,
                                        const LabelMask& first_mask, const PipelineConfig& cfg,
                                        const WeightBundle& weights);

// Same, reading frames and the first annotation from disk. Ground truth of
// later frames is never opened.
std::vector<LabelMask> propagate_sequence(const SequenceRecord& record, const PipelineConfig& cfg,
                                          const WeightBundle& weights);

// Runs propagate_sequence over every record with cfg.threads workers and
// writes predictions under `out_dir`.
void infer_dataset(const std::vector<SequenceRecord>& records, const PipelineConfig& cfg,
                   const WeightBundle& weights, const std::filesystem::path& out_dir);

// Ground-truth masks per frame (nullopt where no annotation file exists).
std::vector<std::optional<LabelMask>> load_ground_truth(const SequenceRecord& record);

// Scores a prediction tree laid out like Annotations/ against `gt_root`.
std::vector<SequenceScore> evaluate_predictions(const std::filesystem::path& pred_dir,
                                                const std::filesystem::path& gt_root);

struct RobustnessOptions {
    bool include_identity = true;
    std::vector<PerturbationSpec> perturbations; // benchmark six when empty
};

// Clean run plus one run per perturbation (frames perturbed in memory).
RobustnessReport run_robustness(const std::filesystem::path& root, const PipelineConfig& cfg,
                                const WeightBundle& weights, const RobustnessOptions& opts = {});

struct SynthOptions {
    std::size_t frames = 5;
    std::size_t objects = 2;
    std::uint64_t seed = 0;
    std::size_t height = 64;
    std::size_t width = 96;
    std::size_t square = 16;
    std::string sequence_id = "synth0000";
};

// Coloured squares translating on a flat background, aligned to the
// encoder stride; writes frames, per-frame annotations and returns the record.
SequenceRecord synthesize_sequence(const std::filesystem::path& root, const SynthOptions& opts);

} // namespace aopvos
