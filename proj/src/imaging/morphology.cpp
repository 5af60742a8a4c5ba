#include "leafdx/imaging.hpp"

#include <deque>
#include <limits>

namespace leafdx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher lower envelope of parabolas, in place on f.
void distance_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    int k = 0;
    int first = -1;
    for (int q = 0; q < n; ++q)
        if (f[q] < kInf) {
            first = q;
            break;
        }
    if (first < 0) return;  // all infinite

    v[0] = first;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = first + 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * (q - p));
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
    f.swap(d);
}

// Squared EDT over a grid where `seed(x, y)` marks zero-distance sites.
Plane edt(int w, int h, const auto& seed) {
    Plane out(w, h);
    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int x = 0; x < w; ++x) {
        f.resize(h);
        d.resize(h);
        for (int y = 0; y < h; ++y) f[y] = seed(x, y) ? 0.0 : kInf;
        distance_1d(f, d, v, z);
        for (int y = 0; y < h; ++y) out(x, y) = f[y];
    }
    for (int y = 0; y < h; ++y) {
        f.resize(w);
        d.resize(w);
        for (int x = 0; x < w; ++x) f[x] = out(x, y);
        distance_1d(f, d, v, z);
        for (int x = 0; x < w; ++x) out(x, y) = f[x];
    }
    return out;
}

}  // namespace

Plane squared_distance_to(const BinaryMask& m) {
    return edt(m.width(), m.height(), [&](int x, int y) { return m(x, y) != 0; });
}

BinaryMask dilate(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    const Plane d = squared_distance_to(m);
    BinaryMask out(m.width(), m.height());
    const double r2 = static_cast<double>(radius) * radius;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] <= r2;
    return out;
}

BinaryMask erode(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    // Distance to the background, with a one-pixel ring outside the image
    // counted as background.
    const int w = m.width() + 2, h = m.height() + 2;
    const Plane d = edt(w, h, [&](int x, int y) {
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) return true;
        return m(x - 1, y - 1) == 0;
    });
    BinaryMask out(m.width(), m.height());
    const double r2 = static_cast<double>(radius) * radius;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) out(x, y) = d(x + 1, y + 1) > r2;
    return out;
}

BinaryMask open(const BinaryMask& m, int radius) { return dilate(erode(m, radius), radius); }

BinaryMask reconstruct(const BinaryMask& mask, const BinaryMask& marker) {
    if (!mask.same_shape(marker))
        throw Error(ErrorCode::DimensionMismatch, "reconstruct: marker and mask differ in size");
    const int w = mask.width(), h = mask.height();
    BinaryMask out(w, h);
    std::deque<int> queue;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && marker[i]) {
            out[i] = 1;
            queue.push_back(static_cast<int>(i));
        }
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        const int x = i % w, y = i / w;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if ((dx == 0 && dy == 0) || !mask.contains(nx, ny)) continue;
                if (mask(nx, ny) && !out(nx, ny)) {
                    out(nx, ny) = 1;
                    queue.push_back(ny * w + nx);
                }
            }
    }
    return out;
}

BinaryMask morphology(const BinaryMask& m, MorphOp op, int se_radius, const BinaryMask* marker) {
    switch (op) {
        case MorphOp::Erode: return erode(m, se_radius);
        case MorphOp::Dilate: return dilate(m, se_radius);
        case MorphOp::Open: return open(m, se_radius);
        case MorphOp::Reconstruct:
            if (marker == nullptr)
                throw Error(ErrorCode::InvalidArgument, "reconstruct requires a marker");
            return reconstruct(m, *marker);
    }
    return m;
}

BinaryMask fill_holes(const BinaryMask& m) {
    const int w = m.width(), h = m.height();
    BinaryMask outside(w, h);
    std::deque<int> queue;
    auto seed = [&](int x, int y) {
        if (!m(x, y) && !outside(x, y)) {
            outside(x, y) = 1;
            queue.push_back(y * w + x);
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    constexpr int dx4[] = {1, -1, 0, 0};
    constexpr int dy4[] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        const int x = i % w, y = i / w;
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx4[k], ny = y + dy4[k];
            if (m.contains(nx, ny)) seed(nx, ny);
        }
    }
    BinaryMask out(w, h);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = !outside[i];
    return out;
}

BinaryMask inner_boundary(const BinaryMask& m) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1 ||
                              !m(x - 1, y) || !m(x + 1, y) || !m(x, y - 1) || !m(x, y + 1);
            out(x, y) = edge;
        }
    return out;
}

namespace {

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
    if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "mask sizes differ");
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(a[i] != 0, b[i] != 0);
    return out;
}

}  // namespace

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p && q; });
}
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p || q; });
}
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p && !q; });
}
BinaryMask mask_not(const BinaryMask& a) {
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = !a[i];
    return out;
}

}  // namespace leafdx
