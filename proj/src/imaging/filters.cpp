#include "leafdx/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace leafdx {

Plane mean_filter(const Plane& p, int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "mean_filter radius must be >= 1");
    const int w = p.width(), h = p.height();
    const double norm = 1.0 / (2 * radius + 1);

    // Separable: horizontal then vertical running sums over clamped samples.
    Plane horiz(w, h);
    for (int y = 0; y < h; ++y) {
        double sum = 0.0;
        for (int k = -radius; k <= radius; ++k) sum += p.clamped(k, y);
        for (int x = 0; x < w; ++x) {
            horiz(x, y) = sum * norm;
            sum += p.clamped(x + radius + 1, y) - p.clamped(x - radius, y);
        }
    }
    Plane out(w, h);
    for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        for (int k = -radius; k <= radius; ++k) sum += horiz.clamped(x, k);
        for (int y = 0; y < h; ++y) {
            out(x, y) = sum * norm;
            sum += horiz.clamped(x, y + radius + 1) - horiz.clamped(x, y - radius);
        }
    }
    return out;
}

Raster mean_filter(const Raster& img, int radius) {
    Raster out(img.width(), img.height(), img.channels());
    for (int c = 0; c < img.channels(); ++c) {
        const Plane filtered = mean_filter(channel_plane(img, c), radius);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) out.at(x, y, c) = to_byte(filtered(x, y));
    }
    return out;
}

int otsu_cut(std::span<const std::uint64_t, 256> histogram) {
    std::uint64_t total_n = 0, total_s = 0;
    for (int i = 0; i < 256; ++i) {
        total_n += histogram[i];
        total_s += histogram[i] * static_cast<std::uint64_t>(i);
    }
    std::uint64_t n0 = 0, s0 = 0;
    int best = -1;
    double best_var = -1.0;
    for (int k = 0; k < 255; ++k) {
        n0 += histogram[k];
        s0 += histogram[k] * static_cast<std::uint64_t>(k);
        const std::uint64_t n1 = total_n - n0, s1 = total_s - s0;
        if (n0 == 0 || n1 == 0) continue;
        const double d = static_cast<double>(s0) / static_cast<double>(n0) -
                         static_cast<double>(s1) / static_cast<double>(n1);
        const double var = static_cast<double>(n0) * static_cast<double>(n1) * d * d;
        if (var > best_var) {
            best_var = var;
            best = k;
        }
    }
    if (best < 0) throw Error(ErrorCode::DegenerateHistogram, "otsu: all samples in one bin");
    return best;
}

double otsu_threshold(const Plane& p) {
    std::array<std::uint64_t, 256> hist{};
    for (double v : p.data()) ++hist[bin256(v)];
    return (otsu_cut(hist) + 0.5) / 255.0;
}

Plane sobel_magnitude(const Plane& p) {
    if (p.width() < 3 || p.height() < 3)
        throw Error(ErrorCode::ImageTooSmall, "sobel: image smaller than 3x3 kernel");
    Plane out(p.width(), p.height());
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            const double tl = p.clamped(x - 1, y - 1), tc = p.clamped(x, y - 1),
                         tr = p.clamped(x + 1, y - 1);
            const double ml = p.clamped(x - 1, y), mr = p.clamped(x + 1, y);
            const double bl = p.clamped(x - 1, y + 1), bc = p.clamped(x, y + 1),
                         br = p.clamped(x + 1, y + 1);
            const double gx = (tr + 2 * mr + br) - (tl + 2 * ml + bl);
            const double gy = (bl + 2 * bc + br) - (tl + 2 * tc + tr);
            out(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

Plane local_entropy(const Plane& p, int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "local_entropy radius must be >= 1");
    const int w = p.width(), h = p.height();
    const int side = 2 * radius + 1;
    const int n = side * side;

    // n*log2(n) table so the window sum can be updated incrementally.
    std::vector<double> nlogn(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) nlogn[i] = i * std::log2(static_cast<double>(i));

    Grid<std::uint8_t> bins(w, h);
    for (std::size_t i = 0; i < p.size(); ++i) bins[i] = static_cast<std::uint8_t>(bin256(p[i]));

    Plane out(w, h);
    std::array<int, 256> hist{};
    const double log_n = std::log2(static_cast<double>(n));
    for (int y = 0; y < h; ++y) {
        hist.fill(0);
        double acc = 0.0;
        auto add = [&](int b, int delta) {
            acc -= nlogn[hist[b]];
            hist[b] += delta;
            acc += nlogn[hist[b]];
        };
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) add(bins.clamped(dx, y + dy), 1);
        for (int x = 0; x < w; ++x) {
            // H = log2(n) - (1/n) * sum c*log2(c)
            const double e = log_n - acc / n;
            out(x, y) = e < 1e-9 ? 0.0 : e;  // absorb running-sum drift
            if (x + 1 == w) break;
            for (int dy = -radius; dy <= radius; ++dy) {
                add(bins.clamped(x - radius, y + dy), -1);
                add(bins.clamped(x + radius + 1, y + dy), 1);
            }
        }
    }
    return out;
}

BinaryMask threshold_above(const Plane& p, double t) {
    BinaryMask out(p.width(), p.height());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > t;
    return out;
}

}  // namespace leafdx
