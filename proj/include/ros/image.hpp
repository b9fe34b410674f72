#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ros/errors.hpp"

namespace ros {

/// Dense H x W x C image, float values in [0,1], channel-interleaved rows.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;  // size = height * width * channels

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool square() const { return height == width; }

    bool operator==(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels && data == o.data;
    }
};

/// Rotate a square image clockwise by i * 90 degrees. Exact pixel
/// permutation, no interpolation, so composed rotations obey the cyclic
/// group law bit-for-bit. i = 0 returns a value-identical copy.
inline Image rot90(const Image& img, int i) {
    if (!img.square())
        throw ShapeError("rot90: image must be square, got " + std::to_string(img.height) + "x" +
                         std::to_string(img.width));
    if (i < 0 || i > 3)
        throw DomainError("rot90: rotation index must be in {0,1,2,3}, got " + std::to_string(i));

    const int n = img.height;
    Image out(n, n, img.channels);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int sy, sx;  // source pixel feeding out(y, x)
            switch (i) {
                case 0: sy = y; sx = x; break;
                case 1: sy = n - 1 - x; sx = y; break;       // clockwise quarter turn
                case 2: sy = n - 1 - y; sx = n - 1 - x; break;
                default: sy = x; sx = n - 1 - y; break;      // i == 3
            }
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

inline void clamp01(Image& img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace ros
