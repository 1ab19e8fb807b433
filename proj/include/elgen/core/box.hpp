#pragma once

#include <algorithm>
#include <string>

#include "elgen/core/error.hpp"

namespace elgen {

// Axis-aligned pixel box: top-left corner (x1, y1) inclusive, bottom-right
// corner (x2, y2) exclusive.
struct BoxSpec {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    int64_t area() const { return static_cast<int64_t>(width()) * height(); }

    bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }
    bool contains(double x, double y) const {
        return x >= x1 && x < x2 && y >= y1 && y < y2;
    }

    void validate(int image_w, int image_h) const {
        if (!(x1 < x2 && y1 < y2))
            throw ParameterError("box: corners must satisfy x1 < x2, y1 < y2");
        if (x1 < 0 || y1 < 0 || x2 > image_w || y2 > image_h)
            throw ParameterError("box: outside image bounds");
    }

    static double iou(const BoxSpec& a, const BoxSpec& b) {
        const int ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
        const int ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
        const double inter = std::max(0, ix2 - ix1) * static_cast<double>(std::max(0, iy2 - iy1));
        const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
        return uni > 0 ? inter / uni : 0.0;
    }
};

}  // namespace elgen
