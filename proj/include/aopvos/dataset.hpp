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
#include <optional>
#include <string>
#include <vector>

#include "aopvos/tensor.hpp"

namespace aopvos {

// One video of a JPEGImages/Annotations tree.
struct SequenceRecord {
    std::string id;
    std::vector<std::filesystem::path> frames;            // sorted by numeric stem
    std::filesystem::path first_annotation;
    std::vector<std::optional<std::filesystem::path>> ground_truth; // per frame, when present
    std::size_t num_objects = 0;
};

// Reads `root/JPEGImages/<seq>/<frame>.png|jpg` and `root/Annotations/<seq>/<frame>.png`.
// Sequences sorted by id; num_objects = max label of the first annotation.
std::vector<SequenceRecord> load_dataset(const std::filesystem::path& root);

// Frame stems compare numerically when both are digit strings.
bool frame_stem_less(const std::filesystem::path& a, const std::filesystem::path& b);

Image read_image(const std::filesystem::path& path); // PNG or JPEG
void write_png_rgb(const Image& image, const std::filesystem::path& path);

// Indexed-palette PNG; pixel value = label. Non-palette files raise FormatError.
LabelMask read_label_png(const std::filesystem::path& path, std::optional<std::size_t> num_objects = std::nullopt);
void write_label_png(const LabelMask& mask, const std::filesystem::path& path);

// Writes `<out>/<seq>/<frame stem>.png` for every frame.
void save_predictions(const SequenceRecord& record, const std::vector<LabelMask>& predictions,
                      const std::filesystem::path& out_dir);

} // namespace aopvos
