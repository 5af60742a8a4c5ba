#include "leafdx/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace leafdx {

std::array<int, 2> glcm_offset(GlcmAngle angle) {
    switch (angle) {
        case GlcmAngle::Deg0: return {0, 1};
        case GlcmAngle::Deg45: return {-1, 1};
        case GlcmAngle::Deg90: return {-1, 0};
        case GlcmAngle::Deg135: return {-1, -1};
    }
    throw Error(ErrorCode::InvalidArgument, "glcm: unsupported angle");
}

int quantise_level(double v, int levels) {
    const int q = static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * levels));
    return std::min(q, levels - 1);
}

GreyCooccurrence glcm(const Plane& p, const BinaryMask& mask, GlcmAngle angle, int levels,
                      int distance) {
    if (!p.same_shape(mask)) throw Error(ErrorCode::DimensionMismatch, "glcm: mask size differs");
    if (levels < 2) throw Error(ErrorCode::InvalidArgument, "glcm: levels must be >= 2");
    if (distance < 1) throw Error(ErrorCode::InvalidArgument, "glcm: distance must be >= 1");

    GreyCooccurrence g;
    g.levels = levels;
    g.angle = angle;
    g.distance = distance;
    g.cells.assign(static_cast<std::size_t>(levels) * levels, 0.0);

    const auto [dr, dc] = glcm_offset(angle);
    std::vector<std::uint64_t> counts(g.cells.size(), 0);
    std::uint64_t total = 0;
    for (int row = 0; row < p.height(); ++row)
        for (int col = 0; col < p.width(); ++col) {
            const int nr = row + dr * distance, nc = col + dc * distance;
            if (!mask(col, row) || !p.contains(nc, nr) || !mask(nc, nr)) continue;
            const int i = quantise_level(p(col, row), levels);
            const int j = quantise_level(p(nc, nr), levels);
            ++counts[static_cast<std::size_t>(i) * levels + j];
            ++total;
        }
    if (total == 0) {
        g.no_pairs = true;
        return g;
    }
    for (std::size_t k = 0; k < counts.size(); ++k)
        g.cells[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    return g;
}

GlcmStats glcm_stats(const GreyCooccurrence& g) {
    GlcmStats s;
    const int n = g.levels;
    double mu_i = 0, mu_j = 0, total = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = g.at(i, j);
            total += v;
            mu_i += i * v;
            mu_j += j * v;
        }
    if (total <= 0.0) return s;

    double var_i = 0, var_j = 0, cov = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = g.at(i, j);
            if (v == 0.0) continue;
            const double d = i - j;
            s.contrast += d * d * v;
            s.energy += v * v;
            s.homogeneity += v / (1.0 + std::abs(d));
            s.entropy -= v * std::log2(v);
            var_i += (i - mu_i) * (i - mu_i) * v;
            var_j += (j - mu_j) * (j - mu_j) * v;
            cov += (i - mu_i) * (j - mu_j) * v;
        }
    const double sd_i = std::sqrt(var_i), sd_j = std::sqrt(var_j);
    s.correlation = (sd_i > 1e-12 && sd_j > 1e-12) ? cov / (sd_i * sd_j) : 0.0;
    return s;
}

}  // namespace leafdx
