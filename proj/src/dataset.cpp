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

#include "aopvos/dataset.hpp"

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "aopvos/errors.hpp"

namespace aopvos {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f)
        throw IoError("cannot open " + path.string());
    return f;
}

bool is_image_ext(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Palette used by the DAVIS / YouTube-VOS annotation tools.
std::vector<png_color> label_palette() {
    std::vector<png_color> pal(256);
    for (unsigned i = 0; i < 256; ++i) {
        unsigned r = 0, g = 0, b = 0, c = i;
        for (unsigned j = 0; j < 8; ++j) {
            r |= ((c >> 0) & 1u) << (7 - j);
            g |= ((c >> 1) & 1u) << (7 - j);
            b |= ((c >> 2) & 1u) << (7 - j);
            c >>= 3;
        }
        pal[i] = {static_cast<png_byte>(r), static_cast<png_byte>(g), static_cast<png_byte>(b)};
    }
    return pal;
}

Image read_png_rgb(const fs::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, data.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return Image(img.height, img.width, std::move(data));
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Image read_jpeg(const fs::path& path) {
    FilePtr file = open_file(path, "rb");
    jpeg_decompress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> data;
    std::size_t h = 0, w = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw FormatError("cannot decode JPEG " + path.string() + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    h = cinfo.output_height;
    w = cinfo.output_width;
    data.resize(h * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = data.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return Image(h, w, std::move(data));
}

} // namespace

bool frame_stem_less(const fs::path& a, const fs::path& b) {
    const auto sa = a.stem().string();
    const auto sb = b.stem().string();
    auto digits = [](const std::string& s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    if (digits(sa) && digits(sb)) {
        auto strip = [](const std::string& s) {
            const auto p = s.find_first_not_of('0');
            return p == std::string::npos ? std::string("0") : s.substr(p);
        };
        const auto na = strip(sa), nb = strip(sb);
        if (na.size() != nb.size())
            return na.size() < nb.size();
        if (na != nb)
            return na < nb;
    }
    return sa < sb;
}

std::vector<SequenceRecord> load_dataset(const fs::path& root) {
    std::vector<SequenceRecord> out;
    const fs::path images = root / "JPEGImages";
    if (!fs::exists(images))
        return out;
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(images))
        if (e.is_directory())
            ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());

    for (const auto& id : ids) {
        SequenceRecord rec;
        rec.id = id;
        for (const auto& e : fs::directory_iterator(images / id))
            if (e.is_regular_file() && is_image_ext(e.path()))
                rec.frames.push_back(e.path());
        std::sort(rec.frames.begin(), rec.frames.end(), frame_stem_less);
        if (rec.frames.empty())
            throw DataError("sequence '" + id + "' has no frames");

        const fs::path ann_dir = root / "Annotations" / id;
        for (const auto& f : rec.frames) {
            const fs::path gt = ann_dir / (f.stem().string() + ".png");
            rec.ground_truth.push_back(fs::exists(gt) ? std::optional<fs::path>(gt) : std::nullopt);
        }
        if (!rec.ground_truth.front())
            throw DataError("sequence '" + id + "' is missing the first-frame annotation " +
                            (ann_dir / (rec.frames.front().stem().string() + ".png")).string());
        rec.first_annotation = *rec.ground_truth.front();
        const LabelMask first = read_label_png(rec.first_annotation);
        const auto labels = first.labels();
        rec.num_objects = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
        out.push_back(std::move(rec));
    }
    return out;
}

Image read_image(const fs::path& path) {
    if (!fs::exists(path))
        throw IoError("missing image " + path.string());
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg")
        return read_jpeg(path);
    return read_png_rgb(path);
}

void write_png_rgb(const Image& image, const fs::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.data().data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + img.message);
}

LabelMask read_label_png(const fs::path& path, std::optional<std::size_t> num_objects) {
    FilePtr file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    std::vector<Label> labels;
    std::vector<png_bytep> rows;
    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("cannot decode PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type != PNG_COLOR_TYPE_PALETTE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("annotation " + path.string() + " is not an indexed-palette PNG");
    }
    if (bit_depth < 8)
        png_set_packing(png);
    png_read_update_info(png, info);
    labels.resize(static_cast<std::size_t>(w) * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = labels.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    const std::size_t n = num_objects.value_or(max_label);
    if (max_label > n)
        throw DataError("annotation " + path.string() + " has label " + std::to_string(max_label) +
                        " beyond the sequence's " + std::to_string(n) + " objects");
    return LabelMask(h, w, n, std::move(labels));
}

void write_label_png(const LabelMask& mask, const fs::path& path) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    const auto palette = label_palette();
    std::vector<png_bytep> rows(mask.height());
    std::vector<Label> copy(mask.labels().begin(), mask.labels().end());
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("cannot write PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width()), static_cast<png_uint_32>(mask.height()), 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
    png_write_info(png, info);
    for (std::size_t y = 0; y < mask.height(); ++y)
        rows[y] = copy.data() + y * mask.width();
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_predictions(const SequenceRecord& record, const std::vector<LabelMask>& predictions,
                      const fs::path& out_dir) {
    if (predictions.size() != record.frames.size())
        throw ArgumentError("save_predictions: one mask per frame required");
    const fs::path dir = out_dir / record.id;
    fs::create_directories(dir);
    for (std::size_t f = 0; f < predictions.size(); ++f)
        write_label_png(predictions[f], dir / (record.frames[f].stem().string() + ".png"));
}

} // namespace aopvos
