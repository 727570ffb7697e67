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

#include "aopvos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "aopvos/errors.hpp"

namespace aopvos {

namespace {

void check_sizes(const LabelMask& a, const LabelMask& b) {
    if (a.height() != b.height() || a.width() != b.width())
        throw DimensionError("prediction and ground truth differ in size");
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

// Flags every pixel within `radius` (Euclidean) of a set pixel.
std::vector<bool> dilate_disk(const std::vector<bool>& src, std::size_t h, std::size_t w, std::size_t radius) {
    std::vector<bool> out(src.size(), false);
    const auto r = static_cast<std::ptrdiff_t>(radius);
    std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> offsets;
    for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx)
            if (dy * dy + dx * dx <= r * r)
                offsets.emplace_back(dy, dx);
    const auto hh = static_cast<std::ptrdiff_t>(h);
    const auto ww = static_cast<std::ptrdiff_t>(w);
    for (std::ptrdiff_t y = 0; y < hh; ++y)
        for (std::ptrdiff_t x = 0; x < ww; ++x) {
            if (!src[static_cast<std::size_t>(y * ww + x)])
                continue;
            for (auto [dy, dx] : offsets) {
                const auto ny = y + dy, nx = x + dx;
                if (ny >= 0 && ny < hh && nx >= 0 && nx < ww)
                    out[static_cast<std::size_t>(ny * ww + nx)] = true;
            }
        }
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

} // namespace

double region_j(const LabelMask& pred, const LabelMask& gt, std::size_t object) {
    check_sizes(pred, gt);
    std::size_t inter = 0, uni = 0;
    const auto p = pred.labels();
    const auto g = gt.labels();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool a = p[i] == object;
        const bool b = g[i] == object;
        inter += a && b;
        uni += a || b;
    }
    if (uni == 0)
        return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<bool> boundary_pixels(const LabelMask& mask, std::size_t object) {
    const std::size_t h = mask.height(), w = mask.width();
    std::vector<bool> b(h * w, false);
    auto inside = [&](std::size_t y, std::size_t x) { return mask.at(y, x) == object; };
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!inside(y, x))
                continue;
            const bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w || !inside(y - 1, x) ||
                              !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1);
            b[y * w + x] = edge;
        }
    return b;
}

std::size_t default_boundary_tolerance(std::size_t height, std::size_t width) {
    const double diag = std::sqrt(static_cast<double>(height * height + width * width));
    return static_cast<std::size_t>(std::ceil(0.008 * diag));
}

double boundary_f(const LabelMask& pred, const LabelMask& gt, std::size_t object,
                  std::optional<std::size_t> tolerance) {
    check_sizes(pred, gt);
    const std::size_t h = pred.height(), w = pred.width();
    const std::size_t tol = tolerance.value_or(default_boundary_tolerance(h, w));
    const auto pb = boundary_pixels(pred, object);
    const auto gb = boundary_pixels(gt, object);
    const auto n_pred = static_cast<std::size_t>(std::count(pb.begin(), pb.end(), true));
    const auto n_gt = static_cast<std::size_t>(std::count(gb.begin(), gb.end(), true));
    if (n_pred == 0 && n_gt == 0)
        return 1.0;
    if (n_pred == 0 || n_gt == 0)
        return 0.0;

    const auto gd = dilate_disk(gb, h, w, tol);
    const auto pd = dilate_disk(pb, h, w, tol);
    std::size_t pred_hit = 0, gt_hit = 0;
    for (std::size_t i = 0; i < pb.size(); ++i) {
        pred_hit += pb[i] && gd[i];
        gt_hit += gb[i] && pd[i];
    }
    const double precision = static_cast<double>(pred_hit) / static_cast<double>(n_pred);
    const double recall = static_cast<double>(gt_hit) / static_cast<double>(n_gt);
    if (precision + recall == 0.0)
        return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double SequenceScore::mean_j(std::size_t object) const {
    const auto& frames = objects.at(object);
    std::vector<double> v;
    for (const auto& s : frames)
        v.push_back(s.j);
    return mean_of(v);
}

double SequenceScore::mean_f(std::size_t object) const {
    const auto& frames = objects.at(object);
    std::vector<double> v;
    for (const auto& s : frames)
        v.push_back(s.f);
    return mean_of(v);
}

std::vector<std::pair<std::size_t, double>> SequenceScore::frame_jf() const {
    std::map<std::size_t, std::vector<double>> by_frame;
    for (const auto& [obj, frames] : objects)
        for (const auto& s : frames)
            by_frame[s.frame].push_back((s.j + s.f) / 2.0);
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [frame, v] : by_frame)
        out.emplace_back(frame, mean_of(v));
    return out;
}

SequenceScore score_sequence(const std::string& id, std::span<const LabelMask> predictions,
                             std::span<const std::optional<LabelMask>> ground_truth, std::size_t num_objects) {
    if (predictions.size() != ground_truth.size())
        throw ArgumentError("score_sequence: prediction and ground-truth counts differ for '" + id + "'");
    SequenceScore s;
    s.id = id;
    s.num_frames = predictions.size();
    for (std::size_t f = 1; f < predictions.size(); ++f) {
        if (!ground_truth[f])
            continue;
        const LabelMask& gt = *ground_truth[f];
        for (std::size_t obj = 1; obj <= num_objects; ++obj) {
            if (gt.count(obj) == 0)
                continue;
            s.objects[obj].push_back({f, region_j(predictions[f], gt, obj), boundary_f(predictions[f], gt, obj)});
        }
    }
    return s;
}

namespace {

template <typename PerObject>
double sequence_average(std::span<const SequenceScore> scores, PerObject per_object) {
    if (scores.empty())
        throw ArgumentError("no sequence scores to average");
    std::vector<double> per_seq;
    for (const auto& s : scores) {
        if (s.objects.empty())
            continue;
        std::vector<double> per_obj;
        for (const auto& [obj, frames] : s.objects)
            per_obj.push_back(per_object(s, obj));
        per_seq.push_back(mean_of(per_obj));
    }
    if (per_seq.empty())
        throw ArgumentError("no scored objects in any sequence");
    return mean_of(per_seq);
}

} // namespace

double jf_mean(std::span<const SequenceScore> scores) {
    return sequence_average(scores, [](const SequenceScore& s, std::size_t o) { return (s.mean_j(o) + s.mean_f(o)) / 2.0; });
}

double j_mean(std::span<const SequenceScore> scores) {
    return sequence_average(scores, [](const SequenceScore& s, std::size_t o) { return s.mean_j(o); });
}

double f_mean(std::span<const SequenceScore> scores) {
    return sequence_average(scores, [](const SequenceScore& s, std::size_t o) { return s.mean_f(o); });
}

CategoryManifest read_category_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read category manifest " + path.string());
    CategoryManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::stringstream ss(line);
        std::string seq, obj, cat;
        std::getline(ss, seq, ',');
        std::getline(ss, obj, ',');
        std::getline(ss, cat);
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        seq = trim(seq);
        cat = trim(cat);
        std::size_t object = 0;
        try {
            object = std::stoul(trim(obj));
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad object id '" + obj + "'");
        }
        if (cat == "seen")
            m[{seq, object}] = Category::seen;
        else if (cat == "unseen")
            m[{seq, object}] = Category::unseen;
        else
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": category must be seen or unseen");
    }
    return m;
}

SplitScores split_scores(std::span<const SequenceScore> scores, const CategoryManifest& manifest) {
    std::vector<double> js, ju, fs, fu;
    for (const auto& s : scores)
        for (const auto& [obj, frames] : s.objects) {
            auto it = manifest.find({s.id, obj});
            if (it == manifest.end())
                throw DataError("object " + std::to_string(obj) + " of sequence '" + s.id +
                                "' is missing from the category manifest");
            if (it->second == Category::seen) {
                js.push_back(s.mean_j(obj));
                fs.push_back(s.mean_f(obj));
            } else {
                ju.push_back(s.mean_j(obj));
                fu.push_back(s.mean_f(obj));
            }
        }
    SplitScores out;
    if (!js.empty()) {
        out.j_seen = mean_of(js);
        out.f_seen = mean_of(fs);
    }
    if (!ju.empty()) {
        out.j_unseen = mean_of(ju);
        out.f_unseen = mean_of(fu);
    }
    return out;
}

double after_perturbation_accuracy(std::span<const double> q_eps) {
    if (q_eps.empty())
        throw ArgumentError("after_perturbation_accuracy: no perturbation scores");
    return mean_of({q_eps.begin(), q_eps.end()});
}

double perturbation_robustness(double q_c, double q_p) { return q_c - q_p; }

std::vector<DecayBin> temporal_decay_curve(const std::vector<std::vector<double>>& per_sequence, std::size_t bins) {
    if (bins == 0)
        throw ArgumentError("temporal_decay_curve: need at least one bin");
    std::vector<double> sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (const auto& seq : per_sequence) {
        if (seq.empty())
            throw ArgumentError("temporal_decay_curve: sequence without scored frames");
        const std::size_t len = seq.size();
        for (std::size_t i = 0; i < len; ++i) {
            // floor(bins * i / (len - 1)) in integers, so bin edges are exact.
            std::size_t b = len == 1 ? 0 : (i * bins) / (len - 1);
            b = std::min(b, bins - 1);
            sum[b] += seq[i];
            ++count[b];
        }
    }
    std::vector<DecayBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].center_percent = 100.0 * (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
        out[b].count = count[b];
        out[b].mean = count[b] ? sum[b] / static_cast<double>(count[b]) : 0.0;
    }
    return out;
}

RobustnessReport make_robustness_report(double q_c, std::vector<RobustnessRow> rows, std::optional<double> identity) {
    RobustnessReport r;
    r.q_c = q_c;
    r.identity = identity;
    r.perturbations = std::move(rows);
    std::vector<double> scores;
    for (const auto& row : r.perturbations)
        scores.push_back(row.score);
    r.q_p = after_perturbation_accuracy(scores);
    r.r_p = perturbation_robustness(q_c, r.q_p);
    return r;
}

void write_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write report " + path.string());
    out << "row,score,drop\n";
    out << "clean," << fmt(report.q_c) << ",0\n";
    if (report.identity)
        out << "identity," << fmt(*report.identity) << "," << fmt(report.q_c - *report.identity) << "\n";
    for (const auto& row : report.perturbations)
        out << '"' << row.label << "\"," << fmt(row.score) << "," << fmt(report.q_c - row.score) << "\n";
    out << "Q_p," << fmt(report.q_p) << ",\n";
    out << "R_p," << fmt(report.r_p) << ",\n";
}

void write_scores_csv(std::span<const SequenceScore> scores, const std::optional<SplitScores>& split,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write report " + path.string());
    out << "sequence,object,frames,J,F,JF\n";
    for (const auto& s : scores)
        for (const auto& [obj, frames] : s.objects) {
            const double j = s.mean_j(obj), f = s.mean_f(obj);
            out << s.id << "," << obj << "," << frames.size() << "," << fmt(j) << "," << fmt(f) << ","
                << fmt((j + f) / 2.0) << "\n";
        }
    out << "overall,,," << fmt(j_mean(scores)) << "," << fmt(f_mean(scores)) << "," << fmt(jf_mean(scores)) << "\n";
    if (split) {
        auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
        out << "seen,,," << opt(split->j_seen) << "," << opt(split->f_seen) << ",\n";
        out << "unseen,,," << opt(split->j_unseen) << "," << opt(split->f_unseen) << ",\n";
    }
}

void write_decay_csv(std::span<const DecayBin> bins, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write decay curve " + path.string());
    out << "position_percent,mean_jf,frames\n";
    for (const auto& b : bins)
        out << fmt(b.center_percent) << "," << fmt(b.mean) << "," << b.count << "\n";
}

} // namespace aopvos
