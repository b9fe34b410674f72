#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ros/errors.hpp"
#include "ros/image.hpp"
#include "ros/rng.hpp"

namespace ros {

enum class Domain { source, target };

/// One image with its class label. Source labels live in [0, n_known);
/// target labels keep the full ordered-class-list index and are read only
/// at evaluation time.
struct Sample {
    Image image;
    int class_label = -1;
    int sample_id = -1;
    Domain domain_tag = Domain::source;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;  // full ordered list this set was indexed against

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Ordered known/unknown class split. Ids are positions in the ordered
/// class list, so known ids are always 0..n_known-1.
struct ClassSplit {
    std::vector<std::string> known_class_ids;
    std::vector<std::string> unknown_class_ids;

    int n_known() const { return static_cast<int>(known_class_ids.size()); }
    int n_total() const { return n_known() + static_cast<int>(unknown_class_ids.size()); }

    double openness() const {
        return 1.0 - static_cast<double>(n_known()) / static_cast<double>(n_total());
    }
};

/// z = 4*y + i. Bijective with (class, rotation); the inverse is
/// y = z / 4, i = z % 4.
inline int make_multi_rotation_label(int y, int i) {
    if (y < 0) throw DomainError("make_multi_rotation_label: negative class label");
    if (i < 0 || i > 3)
        throw DomainError("make_multi_rotation_label: rotation index must be in {0,1,2,3}");
    return 4 * y + i;
}

inline int make_multi_rotation_label(int y, int i, int n_classes) {
    if (y >= n_classes)
        throw DomainError("make_multi_rotation_label: class label " + std::to_string(y) +
                          " out of range for " + std::to_string(n_classes) + " classes");
    return make_multi_rotation_label(y, i);
}

inline std::pair<int, int> split_multi_rotation_label(int z) {
    if (z < 0) throw DomainError("split_multi_rotation_label: negative label");
    return {z / 4, z % 4};
}

/// (anchor, rotated, rotation index, multi-rotation label) tuple.
struct RotatedQuadruple {
    Image anchor;
    Image rotated;
    int rotation_index = 0;
    int multi_rotation_label = 0;
    int sample_id = -1;
};

/// Expand labeled samples into all four rotations: 4N quadruples, one per
/// rotation index in {0..3}.
inline std::vector<RotatedQuadruple> build_rotation_set(const std::vector<Sample>& samples) {
    std::vector<RotatedQuadruple> out;
    out.reserve(samples.size() * 4);
    for (const Sample& s : samples) {
        for (int i = 0; i < 4; ++i) {
            RotatedQuadruple q;
            q.anchor = s.image;
            q.rotated = rot90(s.image, i);
            q.rotation_index = i;
            q.multi_rotation_label = make_multi_rotation_label(s.class_label, i);
            q.sample_id = s.sample_id;
            out.push_back(std::move(q));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark generator
// ---------------------------------------------------------------------------

/// Parameters of the procedural benchmark. Classes are oriented glyphs with
/// a canonical orientation; the target domain applies a color shift and
/// additive noise. Unknown classes appear only in the target.
struct SyntheticSpec {
    int n_known = 6;
    int n_unknown = 6;
    int image_size = 32;
    int samples_per_class = 200;
    double color_shift = 0.3;
    double noise_level = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_known < 2) throw ValidationError("SyntheticSpec: n_known must be >= 2");
        if (n_unknown < 0) throw ValidationError("SyntheticSpec: n_unknown must be >= 0");
        if (image_size < 16) throw ValidationError("SyntheticSpec: image_size must be >= 16");
        if (samples_per_class < 1)
            throw ValidationError("SyntheticSpec: samples_per_class must be >= 1");
        if (color_shift < 0.0 || noise_level < 0.0)
            throw ValidationError("SyntheticSpec: shift parameters must be >= 0");
    }
};

namespace detail {

struct GlyphPrimitive {
    bool disc = false;     // disc or axis-aligned bar (in canonical pose)
    double cx = 0.5, cy = 0.5;
    double half_w = 0.1, half_h = 0.1;  // for discs half_w is the radius
};

struct Glyph {
    std::vector<GlyphPrimitive> prims;
    float color[3] = {1.0f, 1.0f, 1.0f};
};

inline void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
    double r, g, b;
    int sector = static_cast<int>(h * 6.0) % 6;
    double f = h * 6.0 - std::floor(h * 6.0);
    double p = v * (1.0 - s), q = v * (1.0 - f * s), t = v * (1.0 - (1.0 - f) * s);
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<float>(r);
    rgb[1] = static_cast<float>(g);
    rgb[2] = static_cast<float>(b);
}

/// Class template: a few bars/discs scattered off-center so the glyph has
/// no rotational symmetry, plus a well separated hue per class.
inline Glyph make_glyph(std::uint64_t seed, int class_index) {
    Rng rng(derive_seed({seed, 0xC1A55u, static_cast<std::uint64_t>(class_index)}));
    Glyph g;
    int n_prims = 3 + static_cast<int>(rng.next_below(3));  // 3..5
    for (int p = 0; p < n_prims; ++p) {
        GlyphPrimitive prim;
        prim.disc = rng.next_below(2) == 0;
        prim.cx = rng.uniform(0.22, 0.78);
        prim.cy = rng.uniform(0.22, 0.78);
        if (prim.disc) {
            prim.half_w = prim.half_h = rng.uniform(0.06, 0.14);
        } else {
            prim.half_w = rng.uniform(0.05, 0.24);
            prim.half_h = rng.uniform(0.04, 0.10);
            if (rng.next_below(2) == 0) std::swap(prim.half_w, prim.half_h);
        }
        g.prims.push_back(prim);
    }
    // tab in a fixed corner breaks any accidental rotational symmetry
    GlyphPrimitive tab;
    tab.disc = false;
    tab.cx = 0.18;
    tab.cy = 0.18 + 0.08 * rng.uniform();
    tab.half_w = rng.uniform(0.10, 0.16);
    tab.half_h = rng.uniform(0.03, 0.05);
    g.prims.push_back(tab);

    double hue = std::fmod(0.61803398875 * (class_index + 1), 1.0);
    hsv_to_rgb(hue, rng.uniform(0.55, 0.85), rng.uniform(0.75, 1.0), g.color);
    return g;
}

inline bool inside(const GlyphPrimitive& p, double x, double y) {
    double dx = x - p.cx, dy = y - p.cy;
    if (p.disc) return dx * dx + dy * dy <= p.half_w * p.half_w;
    return std::abs(dx) <= p.half_w && std::abs(dy) <= p.half_h;
}

/// Rasterize one sample of `glyph` with per-sample pose jitter around the
/// canonical orientation. 2x2 supersampling softens edges a little.
inline Image render_sample(const Glyph& glyph, int size, Rng& rng) {
    double angle = rng.uniform(-0.20, 0.20);  // radians, ~±11.5 deg
    double scale = rng.uniform(0.85, 1.15);
    double tx = rng.uniform(-0.06, 0.06);
    double ty = rng.uniform(-0.06, 0.06);
    double fg_jitter = rng.uniform(0.85, 1.10);
    double bg = rng.uniform(0.05, 0.12);

    double ca = std::cos(angle), sa = std::sin(angle);
    Image img(size, size, 3, static_cast<float>(bg));
    for (int py = 0; py < size; ++py) {
        for (int px = 0; px < size; ++px) {
            int hits = 0;
            for (int sub = 0; sub < 4; ++sub) {
                double x = (px + 0.25 + 0.5 * (sub % 2)) / size - 0.5 - tx;
                double y = (py + 0.25 + 0.5 * (sub / 2)) / size - 0.5 - ty;
                // invert rotation and scale to reach canonical glyph space
                double gx = (ca * x + sa * y) / scale + 0.5;
                double gy = (-sa * x + ca * y) / scale + 0.5;
                for (const auto& prim : glyph.prims) {
                    if (inside(prim, gx, gy)) {
                        ++hits;
                        break;
                    }
                }
            }
            if (hits > 0) {
                double cov = hits / 4.0;
                for (int c = 0; c < 3; ++c) {
                    double fg = glyph.color[c] * fg_jitter;
                    img.at(py, px, c) =
                        static_cast<float>(cov * fg + (1.0 - cov) * img.at(py, px, c));
                }
            }
        }
    }
    clamp01(img);
    return img;
}

/// Fixed per-domain color transform plus per-pixel noise.
inline void apply_domain_shift(Image& img, const SyntheticSpec& spec, Rng& rng) {
    const double s = spec.color_shift;
    const double gain[3] = {1.0 + 0.45 * s, 1.0 - 0.30 * s, 1.0 + 0.10 * s};
    const double bias[3] = {0.12 * s, -0.06 * s, 0.10 * s};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.at(y, x, c) * gain[c] + bias[c];
                v += rng.normal(0.0, spec.noise_level);
                img.at(y, x, c) = static_cast<float>(v);
            }
    clamp01(img);
}

}  // namespace detail

struct SyntheticDataset {
    Dataset source;
    Dataset target;
    ClassSplit split;
};

/// Procedural OSDA benchmark: deterministic in the spec (same spec, same
/// bytes). The known split is the contiguous class window
/// [window_start, window_start + n_known) of the n_known + n_unknown glyph
/// family; the remaining classes are target-private. Source holds only the
/// known window; target holds every class under the configured shift.
/// Glyphs and per-sample draws depend on (seed, class, sample) alone, so
/// different windows share class identities.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, int window_start = 0) {
    spec.validate();
    const int n_total = spec.n_known + spec.n_unknown;
    if (window_start < 0 || window_start + spec.n_known > n_total)
        throw ValidationError("generate_synthetic: known window out of range");

    auto class_name = [](int c) {
        return "class_" + std::string(c < 10 ? "0" : "") + std::to_string(c);
    };
    std::vector<int> known_ids, unknown_ids;
    for (int c = window_start; c < window_start + spec.n_known; ++c) known_ids.push_back(c);
    for (int c = 0; c < n_total; ++c)
        if (c < window_start || c >= window_start + spec.n_known) unknown_ids.push_back(c);

    SyntheticDataset out;
    std::vector<int> label_of(static_cast<std::size_t>(n_total), -1);
    for (std::size_t i = 0; i < known_ids.size(); ++i) {
        out.split.known_class_ids.push_back(class_name(known_ids[i]));
        label_of[static_cast<std::size_t>(known_ids[i])] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < unknown_ids.size(); ++i) {
        out.split.unknown_class_ids.push_back(class_name(unknown_ids[i]));
        label_of[static_cast<std::size_t>(unknown_ids[i])] =
            spec.n_known + static_cast<int>(i);
    }
    std::vector<std::string> all_names = out.split.known_class_ids;
    all_names.insert(all_names.end(), out.split.unknown_class_ids.begin(),
                     out.split.unknown_class_ids.end());
    out.source.class_names = all_names;
    out.target.class_names = all_names;

    std::vector<detail::Glyph> glyphs;
    glyphs.reserve(static_cast<std::size_t>(n_total));
    for (int c = 0; c < n_total; ++c) glyphs.push_back(detail::make_glyph(spec.seed, c));

    int source_id = 0, target_id = 0;
    for (int c = 0; c < n_total; ++c) {
        const bool known = label_of[static_cast<std::size_t>(c)] < spec.n_known;
        for (int s = 0; s < spec.samples_per_class; ++s) {
            if (known) {
                Rng rng(derive_seed({spec.seed, 1u, static_cast<std::uint64_t>(c),
                                     static_cast<std::uint64_t>(s)}));
                Sample smp;
                smp.image = detail::render_sample(glyphs[static_cast<std::size_t>(c)],
                                                  spec.image_size, rng);
                smp.class_label = label_of[static_cast<std::size_t>(c)];
                smp.sample_id = source_id++;
                smp.domain_tag = Domain::source;
                out.source.samples.push_back(std::move(smp));
            }
            Rng rng(derive_seed({spec.seed, 2u, static_cast<std::uint64_t>(c),
                                 static_cast<std::uint64_t>(s)}));
            Sample smp;
            smp.image = detail::render_sample(glyphs[static_cast<std::size_t>(c)],
                                              spec.image_size, rng);
            detail::apply_domain_shift(smp.image, spec, rng);
            smp.class_label = label_of[static_cast<std::size_t>(c)];
            smp.sample_id = target_id++;
            smp.domain_tag = Domain::target;
            out.target.samples.push_back(std::move(smp));
        }
    }
    return out;
}

}  // namespace ros
