#pragma once

#include <string>
#include <vector>

#include "trce/tensor.hpp"

namespace trce {

// 8-bit binary PGM (P5); pixel values mapped from [-1, 1].
void write_pgm(const Tensor& image, int width, int height, const std::string& path);
std::string pgm_bytes(const Tensor& image, int width, int height);

// Grid montage with 2-pixel separators; cols = ceil(sqrt(n)).
Tensor montage(const std::vector<Tensor>& images, int width, int height, int& out_w, int& out_h);

}  // namespace trce
