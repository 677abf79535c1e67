#pragma once

#include "drcb/io.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

// Images are (3,H,W) tensors with values in [-1,1]; on disk they are binary
// PPM (P6, maxval 255) with pixel = round((v+1)*127.5).

inline std::string encode_ppm(const Tensor& img) {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("encode_ppm: expected (3,H,W) image, got " + shape_str(img.shape()));
    int H = img.dim(1), W = img.dim(2);
    std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(H) * W * 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.data()[(static_cast<std::size_t>(c) * H + y) * W + x];
                v = std::clamp(v, -1.0, 1.0);
                int byte = static_cast<int>(std::lround((v + 1.0) * 127.5));
                out.push_back(static_cast<char>(std::clamp(byte, 0, 255)));
            }
    return out;
}

inline void write_ppm(const std::string& path, const Tensor& img) {
    write_file_atomic(path, encode_ppm(img));
}

inline Tensor decode_ppm(const std::string& blob, const std::string& origin = "<memory>") {
    std::istringstream in(blob);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("decode_ppm: " + origin + " is not a P6 PPM");
    // Skip comment lines between header fields.
    auto next_int = [&in, &origin]() {
        while (true) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            int v;
            if (!(in >> v)) throw std::runtime_error("decode_ppm: bad header in " + origin);
            return v;
        }
    };
    w = next_int();
    h = next_int();
    maxval = next_int();
    if (maxval != 255) throw std::runtime_error("decode_ppm: unsupported maxval in " + origin);
    in.get();  // single whitespace after maxval
    std::size_t need = static_cast<std::size_t>(w) * h * 3;
    std::streamoff pos = in.tellg();
    if (blob.size() - static_cast<std::size_t>(pos) < need)
        throw std::runtime_error("decode_ppm: truncated pixel data in " + origin);
    Tensor img({3, h, w});
    const unsigned char* px = reinterpret_cast<const unsigned char*>(blob.data()) + pos;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.data()[(static_cast<std::size_t>(c) * h + y) * w + x] =
                    static_cast<double>(px[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 127.5 - 1.0;
    return img;
}

inline Tensor read_ppm(const std::string& path) { return decode_ppm(read_file(path), path); }

// Stacks (3,H,W) images into a (N,3,H,W) batch.
inline Tensor stack_images(const std::vector<Tensor>& images) {
    if (images.empty()) throw std::invalid_argument("stack_images: empty list");
    const auto& s = images.front().shape();
    Tensor out({static_cast<int>(images.size()), s[0], s[1], s[2]});
    std::size_t per = images.front().numel();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != s)
            throw std::invalid_argument("stack_images: mixed shapes " + shape_str(s) + " vs " +
                                        shape_str(images[i].shape()));
        std::copy_n(images[i].raw(), per, out.raw() + i * per);
    }
    return out;
}

inline Tensor slice_image(const Tensor& batch, int index) {
    Tensor img({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::copy_n(batch.raw() + static_cast<std::size_t>(index) * img.numel(), img.numel(), img.raw());
    return img;
}

}  // namespace drcb
