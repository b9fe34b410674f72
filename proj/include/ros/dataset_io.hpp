#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "ros/dataset.hpp"
#include "ros/errors.hpp"

namespace ros {

namespace fs = std::filesystem;

inline Image decode_image_file(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);  // BGR, 8-bit
    if (m.empty()) throw IoError("cannot read image: " + path);
    Image img(m.rows, m.cols, 3);
    for (int y = 0; y < m.rows; ++y) {
        const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            img.at(y, x, 0) = row[x][2] / 255.0f;
            img.at(y, x, 1) = row[x][1] / 255.0f;
            img.at(y, x, 2) = row[x][0] / 255.0f;
        }
    }
    return img;
}

inline void encode_image_file(const Image& img, const std::string& path) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            auto q = [&](int c) {
                float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
                return static_cast<unsigned char>(v * 255.0f + 0.5f);
            };
            row[x] = cv::Vec3b(q(2), q(1), q(0));
        }
    }
    if (!cv::imwrite(path, m)) throw IoError("cannot write image: " + path);
}

inline Image center_crop_square(const Image& img) {
    if (img.square()) return img;
    int n = std::min(img.height, img.width);
    int oy = (img.height - n) / 2, ox = (img.width - n) / 2;
    Image out(n, n, img.channels);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y + oy, x + ox, c);
    return out;
}

inline Image resize_bilinear(const Image& img, int size) {
    if (img.height == size && img.width == size) return img;
    Image out(size, size, img.channels);
    const double sy = static_cast<double>(img.height) / size;
    const double sx = static_cast<double>(img.width) / size;
    for (int y = 0; y < size; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        int y1 = std::min(y0 + 1, img.height - 1);
        double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            int x1 = std::min(x0 + 1, img.width - 1);
            double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < img.channels; ++c) {
                double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
                double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

/// Write `set` as root/<domain>/<class_name>/<sample_id>.png.
inline void export_image_folder(const Dataset& set, const std::string& root,
                                const std::string& domain_name) {
    for (const Sample& s : set.samples) {
        if (s.class_label < 0 || s.class_label >= static_cast<int>(set.class_names.size()))
            throw ValidationError("export_image_folder: sample label outside class list");
        fs::path dir = fs::path(root) / domain_name / set.class_names[s.class_label];
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        char name[32];
        std::snprintf(name, sizeof(name), "%06d.png", s.sample_id);
        encode_image_file(s.image, (dir / name).string());
    }
}

struct FolderLoadOptions {
    std::string source_domain;
    std::string target_domain;
    int n_known = 0;
    std::string class_list_path;    // one name per line; line order defines the class order
    int image_size = 32;            // images are center-cropped square then resized
    int known_window_start = 0;     // known split = ordered[start, start + n_known)
};

struct FolderDataset {
    Dataset source;
    Dataset target;
    ClassSplit split;
};

namespace detail {

inline std::vector<std::string> list_class_dirs(const fs::path& domain_dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(domain_dir))
        if (e.is_directory()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());  // case-sensitive lexicographic
    return names;
}

inline std::vector<std::string> list_image_files(const fs::path& class_dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(class_dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace detail

/// Load root/<domain>/<class>/<image> pairs. Class ids follow case-sensitive
/// lexicographic order over the target domain's class directories (or the
/// explicit class-list file); the first n_known names are the known split.
/// Source keeps only known classes; target keeps everything with its full
/// ordered-list label for evaluation.
inline FolderDataset load_image_folder(const std::string& root, const FolderLoadOptions& opt) {
    fs::path src_dir = fs::path(root) / opt.source_domain;
    fs::path tgt_dir = fs::path(root) / opt.target_domain;
    if (!fs::is_directory(src_dir)) throw IoError("missing domain directory: " + src_dir.string());
    if (!fs::is_directory(tgt_dir)) throw IoError("missing domain directory: " + tgt_dir.string());

    std::vector<std::string> listed;
    int n_known = opt.n_known;
    if (!opt.class_list_path.empty()) {
        std::ifstream in(opt.class_list_path);
        if (!in) throw IoError("cannot read class list: " + opt.class_list_path);
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) listed.push_back(line);
        }
        if (n_known <= 0 || n_known > static_cast<int>(listed.size()))
            throw ValidationError("load_image_folder: n_known out of range for class list");
    } else {
        listed = detail::list_class_dirs(tgt_dir);
        if (n_known <= 0 || n_known > static_cast<int>(listed.size()))
            throw ValidationError("load_image_folder: n_known out of range (" +
                                  std::to_string(listed.size()) + " classes found)");
    }
    if (opt.known_window_start < 0 ||
        opt.known_window_start + n_known > static_cast<int>(listed.size()))
        throw ValidationError("load_image_folder: known window out of range");

    // final ids: known window first, then the remaining classes in order
    std::vector<std::string> ordered;
    ordered.insert(ordered.end(), listed.begin() + opt.known_window_start,
                   listed.begin() + opt.known_window_start + n_known);
    for (int c = 0; c < static_cast<int>(listed.size()); ++c)
        if (c < opt.known_window_start || c >= opt.known_window_start + n_known)
            ordered.push_back(listed[static_cast<std::size_t>(c)]);

    FolderDataset out;
    out.split.known_class_ids.assign(ordered.begin(), ordered.begin() + n_known);
    out.split.unknown_class_ids.assign(ordered.begin() + n_known, ordered.end());
    out.source.class_names = ordered;
    out.target.class_names = ordered;

    auto load_one = [&](const fs::path& file) {
        Image img = center_crop_square(decode_image_file(file.string()));
        if (opt.image_size > 0) img = resize_bilinear(img, opt.image_size);
        return img;
    };

    int sid = 0;
    for (int c = 0; c < n_known; ++c) {
        fs::path cdir = src_dir / ordered[c];
        if (!fs::is_directory(cdir))
            throw ValidationError("known class '" + ordered[c] + "' absent from source domain");
        for (const std::string& f : detail::list_image_files(cdir)) {
            Sample s;
            s.image = load_one(f);
            s.class_label = c;
            s.sample_id = sid++;
            s.domain_tag = Domain::source;
            out.source.samples.push_back(std::move(s));
        }
    }

    int tid = 0;
    for (int c = 0; c < static_cast<int>(ordered.size()); ++c) {
        fs::path cdir = tgt_dir / ordered[c];
        if (!fs::is_directory(cdir)) continue;  // class may be absent from this shift
        for (const std::string& f : detail::list_image_files(cdir)) {
            Sample s;
            s.image = load_one(f);
            s.class_label = c;
            s.sample_id = tid++;
            s.domain_tag = Domain::target;
            out.target.samples.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace ros
