#include "leafdx/imaging.hpp"

#include <algorithm>
#include <deque>
#include <queue>

namespace leafdx {

LabelMap connected_components(const BinaryMask& m, Connectivity conn) {
    const int w = m.width(), h = m.height();
    LabelMap out(w, h);
    std::int32_t next = 0;
    std::deque<int> queue;
    for (int start = 0; start < w * h; ++start) {
        if (!m[start] || out[start]) continue;
        out[start] = ++next;
        queue.push_back(start);
        while (!queue.empty()) {
            const int i = queue.front();
            queue.pop_front();
            const int x = i % w, y = i / w;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (conn == Connectivity::Four && dx != 0 && dy != 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (!m.contains(nx, ny)) continue;
                    const int j = ny * w + nx;
                    if (m[j] && !out[j]) {
                        out[j] = next;
                        queue.push_back(j);
                    }
                }
        }
    }
    return out;
}

std::vector<Rect> label_boxes(const LabelMap& labels) {
    const std::int32_t n = labels.max_label();
    struct Bounds {
        int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    };
    std::vector<Bounds> b(static_cast<std::size_t>(n) + 1);
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            const auto l = labels(x, y);
            if (l <= 0) continue;
            auto& e = b[l];
            e.x0 = std::min(e.x0, x);
            e.y0 = std::min(e.y0, y);
            e.x1 = std::max(e.x1, x);
            e.y1 = std::max(e.y1, y);
        }
    std::vector<Rect> out(b.size());
    for (std::size_t i = 1; i < b.size(); ++i)
        if (b[i].x1 >= 0) out[i] = {b[i].x0, b[i].y0, b[i].x1 - b[i].x0 + 1, b[i].y1 - b[i].y0 + 1};
    return out;
}

BinaryMask label_mask(const LabelMap& labels, std::int32_t label) {
    BinaryMask out(labels.width(), labels.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i] == label;
    return out;
}

LabelMap watershed(const Plane& gradient, const LabelMap& markers) {
    if (!gradient.same_shape(markers))
        throw Error(ErrorCode::DimensionMismatch, "watershed: gradient and markers differ in size");
    const int w = gradient.width(), h = gradient.height();

    struct Entry {
        double level;
        std::uint64_t order;
        int index;
        std::int32_t label;
    };
    auto later = [](const Entry& a, const Entry& b) {
        if (a.level != b.level) return a.level > b.level;
        return a.order > b.order;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> queue(later);

    LabelMap out = markers;
    std::uint64_t order = 0;
    bool any = false;
    constexpr int dx4[] = {1, -1, 0, 0};
    constexpr int dy4[] = {0, 0, 1, -1};
    auto push_neighbours = [&](int i, std::int32_t label) {
        const int x = i % w, y = i / w;
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx4[k], ny = y + dy4[k];
            if (!out.contains(nx, ny)) continue;
            const int j = ny * w + nx;
            if (out[j] == 0) queue.push({gradient[j], order++, j, label});
        }
    };
    for (int i = 0; i < w * h; ++i) {
        if (out[i] < 0) throw Error(ErrorCode::InvalidArgument, "watershed: negative marker label");
        if (out[i] > 0) {
            any = true;
            push_neighbours(i, out[i]);
        }
    }
    if (!any) throw Error(ErrorCode::NoMarkers, "watershed: no markers");

    while (!queue.empty()) {
        const Entry e = queue.top();
        queue.pop();
        if (out[e.index] != 0) continue;
        out[e.index] = e.label;
        push_neighbours(e.index, e.label);
    }
    return out;
}

}  // namespace leafdx
