#include "ldmres/image_io.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

namespace ldmres {

namespace {

// Reads the next header token, skipping whitespace and '#' comment lines.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(char(ch));
    }
    if (tok.empty())
        throw ParseError(path + ": truncated header");
    return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw ParseError(path + ": non-positive dimension");
        return v;
    } catch (const std::logic_error&) {
        throw ParseError(path + ": bad header field '" + tok + "'");
    }
}

}  // namespace

Tensor4 load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open image: " + path);

    const std::string magic = next_token(in, path);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw ParseError(path + ": unknown magic '" + magic + "' (expected P5 or P6)");

    const int w = parse_dim(next_token(in, path), path);
    const int h = parse_dim(next_token(in, path), path);
    const int maxval = parse_dim(next_token(in, path), path);
    if (maxval != 255)
        throw ParseError(path + ": unsupported maxval " + std::to_string(maxval));
    // A single whitespace byte separates the header from the payload; the
    // token reader has already consumed it.

    std::vector<unsigned char> bytes(std::size_t(w) * h * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (std::size_t(in.gcount()) != bytes.size())
        throw ParseError(path + ": truncated pixel payload");

    Tensor4 out(1, channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.at(0, c, y, x) = float(bytes[(std::size_t(y) * w + x) * channels + c]) / 255.0f;
    return out;
}

namespace {

void write_pnm(const Tensor4& t, const std::string& path, bool color) {
    const Shape4 d = t.dims();
    const int channels = color ? 3 : 1;
    if (d.n != 1 || d.c != channels)
        throw ShapeError(std::string(color ? "save_ppm" : "save_pgm") +
                         ": expected (1," + std::to_string(channels) + ",h,w), got " + d.str());

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write image: " + path);
    out << (color ? "P6" : "P5") << "\n" << d.w << " " << d.h << "\n255\n";

    std::vector<unsigned char> bytes(std::size_t(d.w) * d.h * channels);
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x)
            for (int c = 0; c < channels; ++c) {
                float v = t.at(0, c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                bytes[(std::size_t(y) * d.w + x) * channels + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out)
        throw IoError("short write: " + path);
}

}  // namespace

void save_pgm(const Tensor4& gray, const std::string& path) { write_pnm(gray, path, false); }
void save_ppm(const Tensor4& rgb, const std::string& path) { write_pnm(rgb, path, true); }

void save_mask(const Tensor4& mask, const std::string& path) {
    const Shape4 d = mask.dims();
    if (d.n != 1 || d.c != 1)
        throw ShapeError("save_mask: expected (1,1,h,w), got " + d.str());
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] != 0.0f && mask[i] != 1.0f)
            throw NumericError("save_mask: mask is not binary");
    save_pgm(mask, path);
}

void save_overlay(const Tensor4& pred_mask, const Tensor4& gt_mask, const std::string& path) {
    require_same_shape(pred_mask, gt_mask, "save_overlay");
    const Shape4 d = pred_mask.dims();
    Tensor4 rgb(1, 3, d.h, d.w);
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
            const bool p = pred_mask.at(0, 0, y, x) != 0.0f;
            const bool g = gt_mask.at(0, 0, y, x) != 0.0f;
            if (p && g)
                rgb.at(0, 1, y, x) = 1.0f;  // true positive: green
            else if (p && !g)
                rgb.at(0, 0, y, x) = 1.0f;  // false positive: red
            else if (!p && g)
                rgb.at(0, 2, y, x) = 1.0f;  // false negative: blue
        }
    save_ppm(rgb, path);
}

Tensor4 load_mask(const std::string& path) {
    Tensor4 t = load_image(path);
    if (t.dims().c != 1)
        throw ParseError(path + ": mask must be grayscale (P5)");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != 0.0f && t[i] != 1.0f)
            throw ParseError(path + ": mask is not binary (byte values must be 0 or 255)");
    }
    return t;
}

}  // namespace ldmres
