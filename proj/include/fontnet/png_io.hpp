#pragma once

#include <string>

#include "fontnet/tensor.hpp"

namespace fontnet {

// 8-bit grayscale PNG <-> [0,1] HxW tensor
Tensor read_gray_png(const std::string& path);
void write_gray_png(const std::string& path, const Tensor& pixels);

}  // namespace fontnet
