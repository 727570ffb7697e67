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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aopvos/tensor.hpp"

namespace aopvos {

// IoU of object `object` between two label maps; 1 when both are empty.
double region_j(const LabelMask& pred, const LabelMask& gt, std::size_t object);

// Object pixels with at least one 4-neighbour outside the object (the image
// border counts as outside). Row-major flags.
std::vector<bool> boundary_pixels(const LabelMask& mask, std::size_t object);

// ceil(0.008 * image diagonal), the usual DAVIS radius.
std::size_t default_boundary_tolerance(std::size_t height, std::size_t width);

// Boundary F-measure; matches are found by dilating each boundary with a
// Euclidean disk of radius `tolerance`.
double boundary_f(const LabelMask& pred, const LabelMask& gt, std::size_t object,
                  std::optional<std::size_t> tolerance = std::nullopt);

struct FrameScore {
    std::size_t frame = 0; // 0-based frame index
    double j = 0.0;
    double f = 0.0;
};

struct SequenceScore {
    std::string id;
    std::size_t num_frames = 0;
    // Scored frames per object (1..N); objects never present in the ground
    // truth have no entry.
    std::map<std::size_t, std::vector<FrameScore>> objects;

    double mean_j(std::size_t object) const;
    double mean_f(std::size_t object) const;
    // Per scored frame: mean over present objects of (J + F) / 2, by frame.
    std::vector<std::pair<std::size_t, double>> frame_jf() const;
};

// Scores frames 2.. against the available ground truth. The first frame is
// the given annotation and is never scored.
SequenceScore score_sequence(const std::string& id, std::span<const LabelMask> predictions,
                             std::span<const std::optional<LabelMask>> ground_truth, std::size_t num_objects);

// Mean over sequences of the mean over objects of (mean J + mean F) / 2.
double jf_mean(std::span<const SequenceScore> scores);
double j_mean(std::span<const SequenceScore> scores);
double f_mean(std::span<const SequenceScore> scores);

enum class Category { seen, unseen };
using CategoryManifest = std::map<std::pair<std::string, std::size_t>, Category>;

// CSV rows "sequence,object,seen|unseen"; '#' starts a comment.
CategoryManifest read_category_manifest(const std::filesystem::path& path);

struct SplitScores {
    std::optional<double> j_seen, j_unseen, f_seen, f_unseen;
};

// Means of per-object J and F within each category; an empty partition
// stays unset.
SplitScores split_scores(std::span<const SequenceScore> scores, const CategoryManifest& manifest);

// Q_p: mean of the per-perturbation scores.
double after_perturbation_accuracy(std::span<const double> q_eps);
// R_p = Q_c - Q_p.
double perturbation_robustness(double q_c, double q_p);

struct DecayBin {
    double center_percent = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
};

// Buckets every scored frame by its normalized position index / (len - 1)
// into `bins` equal intervals (last one closed) and averages per bin across
// sequences. Empty bins are reported with count 0 and mean 0.
std::vector<DecayBin> temporal_decay_curve(const std::vector<std::vector<double>>& per_sequence, std::size_t bins);

struct RobustnessRow {
    std::string label;
    double score = 0.0; // J&F on the perturbed data
};

struct RobustnessReport {
    double q_c = 0.0;
    std::optional<double> identity; // sanity row, not part of Q_p
    std::vector<RobustnessRow> perturbations;
    double q_p = 0.0;
    double r_p = 0.0;
};

RobustnessReport make_robustness_report(double q_c, std::vector<RobustnessRow> rows,
                                        std::optional<double> identity = std::nullopt);

void write_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path);
void write_scores_csv(std::span<const SequenceScore> scores, const std::optional<SplitScores>& split,
                      const std::filesystem::path& path);
void write_decay_csv(std::span<const DecayBin> bins, const std::filesystem::path& path);

} // namespace aopvos
