#include "trce/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "trce/errors.hpp"

namespace trce {

std::string pgm_bytes(const Tensor& image, int width, int height) {
    if (static_cast<std::size_t>(width) * height != image.numel())
        throw InvalidArgument("pgm: image size does not match dimensions");
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + image.numel());
    for (double v : image.data) {
        const double mapped = std::lround((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
        out.push_back(static_cast<char>(static_cast<unsigned char>(mapped)));
    }
    return out;
}

void write_pgm(const Tensor& image, int width, int height, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    const std::string bytes = pgm_bytes(image, width, height);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

Tensor montage(const std::vector<Tensor>& images, int width, int height, int& out_w, int& out_h) {
    const int n = static_cast<int>(images.size());
    if (n == 0) {
        out_w = out_h = 0;
        return Tensor({1, 0});
    }
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    const int sep = 2;
    out_w = cols * width + (cols - 1) * sep;
    out_h = rows * height + (rows - 1) * sep;
    Tensor sheet = Tensor::full({1, out_w * out_h}, -1.0);
    for (int i = 0; i < n; ++i) {
        const int r = i / cols, c = i % cols;
        const int oy = r * (height + sep), ox = c * (width + sep);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                sheet.data[static_cast<std::size_t>(oy + y) * out_w + ox + x] =
                    images[static_cast<std::size_t>(i)].data[static_cast<std::size_t>(y) * width +
                                                             x];
    }
    return sheet;
}

}  // namespace trce
