#pragma once

#include <string>

#include "elgen/core/tensor.hpp"

namespace elgen::corpus {

// 8-bit grayscale PNG. Luminance maps linearly: byte k <-> k / 255.
void write_gray_png(const std::string& path, const TensorD& image01);
TensorD read_gray_png(const std::string& path);

}  // namespace elgen::corpus
