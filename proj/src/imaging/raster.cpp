#include "leafdx/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace leafdx {

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (auto b : data()) n += b != 0;
    return n;
}

std::int32_t LabelMap::max_label() const {
    std::int32_t m = 0;
    for (auto v : data()) m = std::max(m, v);
    return m;
}

Raster::Raster(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::InvalidArgument, "raster dimensions must be >= 1");
    if (channels != 1 && channels != 3)
        throw Error(ErrorCode::InvalidArgument, "raster must have 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Raster::Raster(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::InvalidArgument, "raster dimensions must be >= 1");
    if (channels != 1 && channels != 3)
        throw Error(ErrorCode::InvalidArgument, "raster must have 1 or 3 channels");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
        throw Error(ErrorCode::DimensionMismatch, "raster data length does not match dimensions");
}

Raster Raster::crop(int x, int y, int w, int h) const {
    if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > width_ || y + h > height_)
        throw Error(ErrorCode::InvalidArgument, "crop rectangle outside raster");
    Raster out(w, h, channels_);
    for (int r = 0; r < h; ++r) {
        const auto* src = &data_[(static_cast<std::size_t>(y + r) * width_ + x) * channels_];
        std::copy(src, src + static_cast<std::size_t>(w) * channels_,
                  out.data().begin() + static_cast<std::ptrdiff_t>(r) * w * channels_);
    }
    return out;
}

std::uint8_t to_byte(double v) {
    const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(scaled);
}

int bin256(double v) { return to_byte(v); }

Raster resize_max_side(const Raster& img, int limit) {
    if (limit < 1) throw Error(ErrorCode::InvalidArgument, "resize limit must be >= 1");
    const int longest = std::max(img.width(), img.height());
    if (longest <= limit) return img;

    const double ratio = static_cast<double>(limit) / longest;
    const int nw = std::max(1, static_cast<int>(std::lround(img.width() * ratio)));
    const int nh = std::max(1, static_cast<int>(std::lround(img.height() * ratio)));
    const double sx = static_cast<double>(img.width()) / nw;
    const double sy = static_cast<double>(img.height()) / nh;

    Raster out(nw, nh, img.channels());
    for (int y = 0; y < nh; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < nw; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double tx = fx - x0;
            for (int c = 0; c < img.channels(); ++c) {
                const double top = img.at(x0, y0, c) * (1 - tx) + img.at(x1, y0, c) * tx;
                const double bot = img.at(x0, y1, c) * (1 - tx) + img.at(x1, y1, c) * tx;
                out.at(x, y, c) = to_byte((top * (1 - ty) + bot * ty) / 255.0);
            }
        }
    }
    return out;
}

namespace {

void require_rgb(const Raster& img, const char* what) {
    if (img.channels() != 3)
        throw Error(ErrorCode::InvalidArgument, std::string(what) + ": expected 3 channels");
}

}  // namespace

Plane rgb_to_grey(const Raster& img) {
    require_rgb(img, "rgb_to_grey");
    Plane out(img.width(), img.height());
    auto src = img.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
        out[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    }
    return out;
}

Hsv rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    Hsv out;
    out.v = mx;
    out.s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) return out;
    double h;
    if (mx == r)
        h = (g - b) / delta;
    else if (mx == g)
        h = 2.0 + (b - r) / delta;
    else
        h = 4.0 + (r - g) / delta;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
    if (h >= 1.0) h -= 1.0;
    out.h = h;
    return out;
}

HsvPlanes rgb_to_hsv(const Raster& img) {
    require_rgb(img, "rgb_to_hsv");
    HsvPlanes out{Plane(img.width(), img.height()), Plane(img.width(), img.height()),
                  Plane(img.width(), img.height())};
    auto src = img.data();
    for (std::size_t i = 0; i < out.h.size(); ++i) {
        const Hsv px = rgb_to_hsv(src[3 * i] / 255.0, src[3 * i + 1] / 255.0, src[3 * i + 2] / 255.0);
        out.h[i] = px.h;
        out.s[i] = px.s;
        out.v[i] = px.v;
    }
    return out;
}

Plane channel_plane(const Raster& img, int c) {
    if (c < 0 || c >= img.channels())
        throw Error(ErrorCode::InvalidArgument, "channel index out of range");
    Plane out(img.width(), img.height());
    auto src = img.data();
    const int n = img.channels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[n * i + c] / 255.0;
    return out;
}

}  // namespace leafdx
