#include "ldmres/data.hpp"

#include <algorithm>
#include <numbers>

namespace ldmres {

Tensor4 zscore_normalize(const Tensor4& image) {
    const Shape4 d = image.dims();
    Tensor4 out(d);
    const int plane = d.h * d.w;
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            const float* ip = image.plane(n, c);
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < plane; ++i) {
                sum += ip[i];
                sq += double(ip[i]) * ip[i];
            }
            const double mean = sum / plane;
            const double var = std::max(0.0, sq / plane - mean * mean);
            const float inv = float(1.0 / (std::sqrt(var) + 1e-8));
            float* op = out.plane(n, c);
            for (int i = 0; i < plane; ++i)
                op[i] = (ip[i] - float(mean)) * inv;
        }
    }
    return out;
}

Tensor4 flip_horizontal(const Tensor4& t) {
    const Shape4 d = t.dims();
    Tensor4 out(d);
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x)
                    out.at(n, c, y, x) = t.at(n, c, y, d.w - 1 - x);
    return out;
}

Tensor4 flip_vertical(const Tensor4& t) {
    const Shape4 d = t.dims();
    Tensor4 out(d);
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x)
                    out.at(n, c, y, x) = t.at(n, c, d.h - 1 - y, x);
    return out;
}

Tensor4 rotate(const Tensor4& t, float degrees, Interp interp) {
    const Shape4 d = t.dims();
    Tensor4 out(d);
    const double rad = double(degrees) * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (d.h - 1) / 2.0, cx = (d.w - 1) / 2.0;

    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            const float* ip = t.plane(n, c);
            float* op = out.plane(n, c);
            for (int y = 0; y < d.h; ++y) {
                for (int x = 0; x < d.w; ++x) {
                    // Inverse map: rotate the output coordinate back into the
                    // source image.
                    const double dy = y - cy, dx = x - cx;
                    const double sy = cy + (sn * dx + cs * dy);
                    const double sx = cx + (cs * dx - sn * dy);
                    float v = 0.0f;
                    if (interp == Interp::Nearest) {
                        const int ry = int(std::lround(sy)), rx = int(std::lround(sx));
                        if (ry >= 0 && ry < d.h && rx >= 0 && rx < d.w)
                            v = ip[ry * d.w + rx];
                    } else {
                        const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
                        const double fy = sy - y0, fx = sx - x0;
                        auto sample = [&](int yy, int xx) -> double {
                            if (yy < 0 || yy >= d.h || xx < 0 || xx >= d.w) return 0.0;
                            return ip[yy * d.w + xx];
                        };
                        v = float((1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                                  fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1)));
                    }
                    op[y * d.w + x] = v;
                }
            }
        }
    }
    return out;
}

Tensor4 adjust_brightness(const Tensor4& image, float delta) {
    Tensor4 out(image.dims());
    for (std::size_t i = 0; i < image.size(); ++i)
        out[i] = image[i] + delta;
    return out;
}

Tensor4 adjust_contrast(const Tensor4& image, float factor) {
    const Shape4 d = image.dims();
    Tensor4 out(d);
    const int plane = d.h * d.w;
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            const float* ip = image.plane(n, c);
            double sum = 0.0;
            for (int i = 0; i < plane; ++i) sum += ip[i];
            const float mean = float(sum / plane);
            float* op = out.plane(n, c);
            for (int i = 0; i < plane; ++i)
                op[i] = mean + factor * (ip[i] - mean);
        }
    }
    return out;
}

void augment(Tensor4& image, Tensor4& mask, const AugmentPolicy& policy, Rng& draw) {
    if (image.dims().h != mask.dims().h || image.dims().w != mask.dims().w)
        throw ShapeError("augment: image and mask spatial dims differ");

    if (policy.hflip && draw.coin()) {
        image = flip_horizontal(image);
        mask = flip_horizontal(mask);
    }
    if (policy.vflip && draw.coin()) {
        image = flip_vertical(image);
        mask = flip_vertical(mask);
    }
    const float angle = float(draw.uniform(policy.rotation_min_deg, policy.rotation_max_deg));
    image = rotate(image, angle, Interp::Bilinear);
    mask = rotate(mask, angle, Interp::Nearest);

    image = adjust_brightness(image, float(draw.uniform(policy.brightness_lo, policy.brightness_hi)));
    image = adjust_contrast(image, float(draw.uniform(policy.contrast_lo, policy.contrast_hi)));
}

std::vector<Patch> extract_patches(const Tensor4& image, int size) {
    if (size <= 0 || size % 8 != 0)
        throw Error("extract_patches: patch size must be a positive multiple of 8");
    const Shape4 d = image.dims();
    if (d.n != 1)
        throw ShapeError("extract_patches: expected a single image, got " + d.str());

    const int rows = (d.h + size - 1) / size;
    const int cols = (d.w + size - 1) / size;

    std::vector<Patch> patches;
    patches.reserve(std::size_t(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int q = 0; q < cols; ++q) {
            Patch p;
            p.y = r * size;
            p.x = q * size;
            p.data = Tensor4(1, d.c, size, size);
            for (int c = 0; c < d.c; ++c) {
                const float* ip = image.plane(0, c);
                float* op = p.data.plane(0, c);
                for (int y = 0; y < size; ++y) {
                    const int sy = p.y + y;
                    if (sy >= d.h) break;  // zero padding below
                    for (int x = 0; x < size && p.x + x < d.w; ++x)
                        op[y * size + x] = ip[sy * d.w + p.x + x];
                }
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

}  // namespace ldmres
