#pragma once

#include <cctype>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ros/dataset.hpp"
#include "ros/losses.hpp"
#include "ros/network.hpp"
#include "ros/stage1.hpp"

namespace ros {

/// Flat, human-editable experiment description. Serializes to a canonical
/// key=value form whose FNV-1a hash (output_dir excluded) names the output
/// tree; identical hashes mean identical experiment inputs.
struct ExperimentConfig {
    // dataset: "synthetic" or "folder"
    std::string dataset = "synthetic";
    // "full" two-stage pipeline, or "source_only" negative control that
    // trains the (n_known+1)-way classifier on source data alone
    std::string pipeline = "full";
    // known split = class window [known_window_start, ... + n_known)
    int known_window_start = 0;
    // synthetic parameters
    int n_known = 6;
    int n_unknown = 6;
    int image_size = 32;
    int samples_per_class = 200;
    double color_shift = 0.3;
    double noise_level = 0.05;
    std::uint64_t synth_seed = 7;
    // folder parameters
    std::string data_root;
    std::string source_domain;
    std::string target_domain;
    std::string class_list;  // optional explicit ordering file

    // network
    std::vector<int> encoder_widths = {8, 16, 32, 128};
    std::string encoder_trainable = "all";  // all | last | none

    // optimization
    int epochs_stage1 = 8;
    int epochs_stage2 = 8;
    int batch_size = 32;
    double base_lr = 0.0003;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double head_lr_multiplier = 10.0;
    double unknown_lr_multiplier = 2.0;
    double lr_gamma = 10.0;
    double lr_power = 0.75;
    double lambda_1_1 = 3.0;
    double lambda_1_2 = 0.1;
    double lambda_2_1 = 0.1;
    double lambda_2_2 = 3.0;
    double center_alpha = 0.5;

    // runs
    std::vector<std::uint64_t> seeds = {0, 1, 2};

    // ablation switches
    bool no_anchor_s1 = false;
    bool no_anchor_s2 = false;
    bool no_center_loss = false;
    bool no_rot_score = false;
    bool no_ent_score = false;
    bool no_entropy_s2 = false;
    bool stage2_transfer = true;

    std::string output_dir = "out";

    // -- typed access helpers -------------------------------------------------

    SyntheticSpec synthetic_spec() const {
        SyntheticSpec s;
        s.n_known = n_known;
        s.n_unknown = n_unknown;
        s.image_size = image_size;
        s.samples_per_class = samples_per_class;
        s.color_shift = color_shift;
        s.noise_level = noise_level;
        s.seed = synth_seed;
        return s;
    }

    EncoderSpec encoder_spec() const {
        EncoderSpec e;
        for (int i = 0; i < 4; ++i) e.widths[static_cast<std::size_t>(i)] = encoder_widths[static_cast<std::size_t>(i)];
        return e;
    }

    LossWeights loss_weights() const {
        LossWeights w;
        w.lambda_1_1 = lambda_1_1;
        w.lambda_1_2 = no_center_loss ? 0.0 : lambda_1_2;
        w.lambda_2_1 = no_entropy_s2 ? 0.0 : lambda_2_1;
        w.lambda_2_2 = lambda_2_2;
        return w;
    }

    int encoder_first_trainable_block() const {
        if (encoder_trainable == "all") return 0;
        if (encoder_trainable == "last") return 3;
        if (encoder_trainable == "none") return 4;
        throw ValidationError("encoder_trainable must be all|last|none");
    }

    TrainOptions train_options(int stage, std::uint64_t seed) const {
        TrainOptions t;
        t.epochs = stage == 1 ? epochs_stage1 : epochs_stage2;
        t.batch_size = batch_size;
        t.base_lr = base_lr;
        t.momentum = momentum;
        t.weight_decay = weight_decay;
        t.head_lr_multiplier = head_lr_multiplier;
        t.unknown_lr_multiplier = unknown_lr_multiplier;
        t.schedule.gamma = lr_gamma;
        t.schedule.power = lr_power;
        t.weights = loss_weights();
        t.center_alpha = center_alpha;
        t.no_anchor = stage == 1 ? no_anchor_s1 : no_anchor_s2;
        t.encoder_first_trainable_block = encoder_first_trainable_block();
        t.seed = derive_seed({seed, static_cast<std::uint64_t>(stage)});
        return t;
    }

    ScoreMode score_mode() const {
        if (no_rot_score && no_ent_score)
            throw ValidationError("no_rot_score and no_ent_score cannot both be set: "
                                  "the normality score would be undefined");
        if (no_rot_score) return ScoreMode::entropy_only;
        if (no_ent_score) return ScoreMode::rotation_only;
        return ScoreMode::full;
    }

    void validate() const {
        if (dataset != "synthetic" && dataset != "folder")
            throw ValidationError("dataset must be synthetic|folder");
        if (pipeline != "full" && pipeline != "source_only")
            throw ValidationError("pipeline must be full|source_only");
        if (known_window_start < 0)
            throw ValidationError("known_window_start must be >= 0");
        if (dataset == "synthetic") synthetic_spec().validate();
        if (dataset == "folder") {
            if (data_root.empty()) throw ValidationError("folder dataset needs data_root");
            if (source_domain.empty() || target_domain.empty())
                throw ValidationError("folder dataset needs source_domain and target_domain");
            if (n_known < 1) throw ValidationError("n_known must be >= 1");
            if (image_size < 16) throw ValidationError("image_size must be >= 16");
        }
        if (encoder_widths.size() != 4)
            throw ValidationError("encoder_widths must list four block widths");
        for (int w : encoder_widths)
            if (w < 1) throw ValidationError("encoder_widths entries must be >= 1");
        if (epochs_stage1 < 1 || epochs_stage2 < 1)
            throw ValidationError("epochs_stage1/epochs_stage2 must be >= 1");
        if (seeds.empty()) throw ValidationError("at least one seed is required");
        if (lr_gamma < 0 || lr_power < 0)
            throw ValidationError("lr schedule parameters must be >= 0");
        if (unknown_lr_multiplier <= 0)
            throw ValidationError("unknown_lr_multiplier must be > 0");
        (void)encoder_first_trainable_block();
        (void)score_mode();
        train_options(1, 0).validate();
        train_options(2, 0).validate();
    }

    // -- serialization --------------------------------------------------------

    std::string serialize(bool include_output_dir = true) const {
        std::ostringstream out;
        auto num = [](double v) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            return std::string(buf);
        };
        out << "dataset = " << dataset << '\n';
        out << "pipeline = " << pipeline << '\n';
        out << "known_window_start = " << known_window_start << '\n';
        out << "n_known = " << n_known << '\n';
        out << "n_unknown = " << n_unknown << '\n';
        out << "image_size = " << image_size << '\n';
        out << "samples_per_class = " << samples_per_class << '\n';
        out << "color_shift = " << num(color_shift) << '\n';
        out << "noise_level = " << num(noise_level) << '\n';
        out << "synth_seed = " << synth_seed << '\n';
        out << "data_root = " << data_root << '\n';
        out << "source_domain = " << source_domain << '\n';
        out << "target_domain = " << target_domain << '\n';
        out << "class_list = " << class_list << '\n';
        out << "encoder_widths = ";
        for (std::size_t i = 0; i < encoder_widths.size(); ++i)
            out << (i ? "," : "") << encoder_widths[i];
        out << '\n';
        out << "encoder_trainable = " << encoder_trainable << '\n';
        out << "epochs_stage1 = " << epochs_stage1 << '\n';
        out << "epochs_stage2 = " << epochs_stage2 << '\n';
        out << "batch_size = " << batch_size << '\n';
        out << "base_lr = " << num(base_lr) << '\n';
        out << "momentum = " << num(momentum) << '\n';
        out << "weight_decay = " << num(weight_decay) << '\n';
        out << "head_lr_multiplier = " << num(head_lr_multiplier) << '\n';
        out << "unknown_lr_multiplier = " << num(unknown_lr_multiplier) << '\n';
        out << "lr_gamma = " << num(lr_gamma) << '\n';
        out << "lr_power = " << num(lr_power) << '\n';
        out << "lambda_1_1 = " << num(lambda_1_1) << '\n';
        out << "lambda_1_2 = " << num(lambda_1_2) << '\n';
        out << "lambda_2_1 = " << num(lambda_2_1) << '\n';
        out << "lambda_2_2 = " << num(lambda_2_2) << '\n';
        out << "center_alpha = " << num(center_alpha) << '\n';
        out << "seeds = ";
        for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
        out << '\n';
        out << "no_anchor_s1 = " << (no_anchor_s1 ? "true" : "false") << '\n';
        out << "no_anchor_s2 = " << (no_anchor_s2 ? "true" : "false") << '\n';
        out << "no_center_loss = " << (no_center_loss ? "true" : "false") << '\n';
        out << "no_rot_score = " << (no_rot_score ? "true" : "false") << '\n';
        out << "no_ent_score = " << (no_ent_score ? "true" : "false") << '\n';
        out << "no_entropy_s2 = " << (no_entropy_s2 ? "true" : "false") << '\n';
        out << "stage2_transfer = " << (stage2_transfer ? "true" : "false") << '\n';
        if (include_output_dir) out << "output_dir = " << output_dir << '\n';
        return out.str();
    }

    /// Generic setter shared by the file parser and CLI overrides.
    void set(const std::string& key, const std::string& value) {
        auto to_int = [&](const std::string& v) {
            try {
                std::size_t pos = 0;
                int r = std::stoi(v, &pos);
                if (pos != v.size()) throw std::invalid_argument(v);
                return r;
            } catch (const std::exception&) {
                throw ValidationError("config: bad integer for " + key + ": '" + value + "'");
            }
        };
        auto to_u64 = [&](const std::string& v) {
            try {
                std::size_t pos = 0;
                unsigned long long r = std::stoull(v, &pos);
                if (pos != v.size()) throw std::invalid_argument(v);
                return static_cast<std::uint64_t>(r);
            } catch (const std::exception&) {
                throw ValidationError("config: bad integer for " + key + ": '" + value + "'");
            }
        };
        auto to_double = [&](const std::string& v) {
            try {
                std::size_t pos = 0;
                double r = std::stod(v, &pos);
                if (pos != v.size()) throw std::invalid_argument(v);
                return r;
            } catch (const std::exception&) {
                throw ValidationError("config: bad number for " + key + ": '" + value + "'");
            }
        };
        auto to_bool = [&](const std::string& v) {
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw ValidationError("config: bad boolean for " + key + ": '" + value + "'");
        };
        auto split_list = [](const std::string& v) {
            std::vector<std::string> parts;
            std::string cur;
            for (char c : v) {
                if (c == ',') {
                    parts.push_back(cur);
                    cur.clear();
                } else if (!std::isspace(static_cast<unsigned char>(c))) {
                    cur += c;
                }
            }
            if (!cur.empty()) parts.push_back(cur);
            return parts;
        };

        if (key == "dataset") dataset = value;
        else if (key == "pipeline") pipeline = value;
        else if (key == "known_window_start") known_window_start = to_int(value);
        else if (key == "n_known") n_known = to_int(value);
        else if (key == "n_unknown") n_unknown = to_int(value);
        else if (key == "image_size") image_size = to_int(value);
        else if (key == "samples_per_class") samples_per_class = to_int(value);
        else if (key == "color_shift") color_shift = to_double(value);
        else if (key == "noise_level") noise_level = to_double(value);
        else if (key == "synth_seed") synth_seed = to_u64(value);
        else if (key == "data_root") data_root = value;
        else if (key == "source_domain") source_domain = value;
        else if (key == "target_domain") target_domain = value;
        else if (key == "class_list") class_list = value;
        else if (key == "encoder_widths") {
            encoder_widths.clear();
            for (const std::string& p : split_list(value)) encoder_widths.push_back(to_int(p));
        } else if (key == "encoder_trainable") encoder_trainable = value;
        else if (key == "epochs_stage1") epochs_stage1 = to_int(value);
        else if (key == "epochs_stage2") epochs_stage2 = to_int(value);
        else if (key == "batch_size") batch_size = to_int(value);
        else if (key == "base_lr") base_lr = to_double(value);
        else if (key == "momentum") momentum = to_double(value);
        else if (key == "weight_decay") weight_decay = to_double(value);
        else if (key == "head_lr_multiplier") head_lr_multiplier = to_double(value);
        else if (key == "unknown_lr_multiplier") unknown_lr_multiplier = to_double(value);
        else if (key == "lr_gamma") lr_gamma = to_double(value);
        else if (key == "lr_power") lr_power = to_double(value);
        else if (key == "lambda_1_1") lambda_1_1 = to_double(value);
        else if (key == "lambda_1_2") lambda_1_2 = to_double(value);
        else if (key == "lambda_2_1") lambda_2_1 = to_double(value);
        else if (key == "lambda_2_2") lambda_2_2 = to_double(value);
        else if (key == "center_alpha") center_alpha = to_double(value);
        else if (key == "seeds") {
            seeds.clear();
            for (const std::string& p : split_list(value)) seeds.push_back(to_u64(p));
        } else if (key == "no_anchor_s1") no_anchor_s1 = to_bool(value);
        else if (key == "no_anchor_s2") no_anchor_s2 = to_bool(value);
        else if (key == "no_center_loss") no_center_loss = to_bool(value);
        else if (key == "no_rot_score") no_rot_score = to_bool(value);
        else if (key == "no_ent_score") no_ent_score = to_bool(value);
        else if (key == "no_entropy_s2") no_entropy_s2 = to_bool(value);
        else if (key == "stage2_transfer") stage2_transfer = to_bool(value);
        else if (key == "output_dir") output_dir = value;
        else throw ValidationError("config: unknown key '" + key + "'");
    }

    static ExperimentConfig parse(std::istream& in) {
        ExperimentConfig cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                std::size_t a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                std::size_t b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError("config: expected key = value", line_no);
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            cfg.set(key, value);
        }
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read config: " + path);
        return parse(in);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write config: " + path);
        out << serialize(true);
    }

    /// FNV-1a 64 over the canonical serialization, output_dir excluded.
    std::string hash() const {
        std::string body = serialize(false);
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : body) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return std::string(buf);
    }
};

}  // namespace ros
