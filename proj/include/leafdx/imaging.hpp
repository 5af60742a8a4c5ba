#pragma once

// Raster containers and the low-level image algorithms the pipeline is
// built from. Everything here is a pure function of its inputs.

#include "leafdx/error.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace leafdx {

/// Row-major 2D grid of samples. Width and height are always >= 1.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw Error(ErrorCode::InvalidArgument, "grid dimensions must be >= 1");
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }
    Grid(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 1 || height < 1)
            throw Error(ErrorCode::InvalidArgument, "grid dimensions must be >= 1");
        if (data_.size() != static_cast<std::size_t>(width) * height)
            throw Error(ErrorCode::DimensionMismatch, "grid data length does not match dimensions");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int x, int y) const {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    /// Replicated-border read.
    const T& clamped(int x, int y) const {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return (*this)(x, y);
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    bool same_shape(const auto& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Real-valued single-channel image; samples in [0,1] unless the producing
/// function documents otherwise.
class Plane : public Grid<double> {
public:
    using Grid<double>::Grid;
};

/// One byte per pixel, 0 or 1.
class BinaryMask : public Grid<std::uint8_t> {
public:
    using Grid<std::uint8_t>::Grid;

    std::size_t count() const;
};

/// 0 = unlabelled; region ids are positive.
class LabelMap : public Grid<std::int32_t> {
public:
    using Grid<std::int32_t>::Grid;

    std::int32_t max_label() const;
};

/// 8-bit interleaved image with 1 or 3 channels.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, int channels, std::uint8_t fill = 0);
    Raster(int width, int height, int channels, std::vector<std::uint8_t> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }

    std::uint8_t& at(int x, int y, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::array<std::uint8_t, 3> rgb(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * channels_;
        if (channels_ == 1) return {data_[i], data_[i], data_[i]};
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set_rgb(int x, int y, std::array<std::uint8_t, 3> v) {
        const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * channels_;
        for (int c = 0; c < channels_; ++c) data_[i + c] = v[c];
    }

    std::span<std::uint8_t> data() noexcept { return data_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }

    /// Copy of the rectangle [x, x+w) x [y, y+h); must lie inside the raster.
    Raster crop(int x, int y, int w, int h) const;

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const noexcept { return x + w; }
    int bottom() const noexcept { return y + h; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Quantise a [0,1] sample to 0..255 with round-half-up.
std::uint8_t to_byte(double v);

/// Index of the 256-bin histogram bin holding v.
int bin256(double v);

// ---------------------------------------------------------------------------
// Colour and resampling

/// Longer side reduced to `limit` (aspect preserved, rounded) with bilinear
/// resampling; images already within the limit come back unchanged.
Raster resize_max_side(const Raster& img, int limit);

/// BT.601 luma in [0,1].
Plane rgb_to_grey(const Raster& img);

struct Hsv {
    double h = 0.0;  // [0,1), fraction of a full turn
    double s = 0.0;
    double v = 0.0;
};

/// Hexcone HSV of one pixel given channels in [0,1]; achromatic hue is 0.
Hsv rgb_to_hsv(double r, double g, double b);

struct HsvPlanes {
    Plane h;
    Plane s;
    Plane v;
};

HsvPlanes rgb_to_hsv(const Raster& img);

/// Channel c of a 3-channel raster as a [0,1] plane.
Plane channel_plane(const Raster& img, int c);

// ---------------------------------------------------------------------------
// Filtering and thresholding (all borders replicate the edge sample)

/// Box average over a (2r+1)^2 window.
Plane mean_filter(const Plane& p, int radius);

/// Mean filter applied per channel of an 8-bit raster.
Raster mean_filter(const Raster& img, int radius);

/// Otsu's threshold over the 256-bin histogram. Returns t = (k + 0.5) / 255
/// where k is the last bin of the lower class, so the upper class is v > t.
/// Throws DegenerateHistogram when every sample falls into one bin.
double otsu_threshold(const Plane& p);

/// Same search on a precomputed histogram; returns the cut bin k.
int otsu_cut(std::span<const std::uint64_t, 256> histogram);

/// Gradient magnitude with the unnormalised 3x3 Sobel pair, so a unit step
/// gives magnitude 4 beside the edge. Values are not rescaled.
Plane sobel_magnitude(const Plane& p);

/// Shannon entropy (bits) of the 256-bin histogram in each (2r+1)^2 window.
Plane local_entropy(const Plane& p, int radius);

/// Pixels of p strictly above t.
BinaryMask threshold_above(const Plane& p, double t);

// ---------------------------------------------------------------------------
// Binary morphology with a disc structuring element (pixels outside the image
// count as background)

enum class MorphOp { Erode, Dilate, Open, Reconstruct };

BinaryMask erode(const BinaryMask& m, int radius);
BinaryMask dilate(const BinaryMask& m, int radius);
BinaryMask open(const BinaryMask& m, int radius);
/// Geodesic dilation (8-connected) of marker AND mask inside mask, to stability.
BinaryMask reconstruct(const BinaryMask& mask, const BinaryMask& marker);

BinaryMask morphology(const BinaryMask& m, MorphOp op, int se_radius,
                      const BinaryMask* marker = nullptr);

/// Squared Euclidean distance of every pixel to the nearest set pixel of m.
/// Pixels of m get 0; an empty mask gives +infinity everywhere.
Plane squared_distance_to(const BinaryMask& m);

/// Background regions not connected to the image border are set.
BinaryMask fill_holes(const BinaryMask& m);

/// Foreground pixels with at least one 4-neighbour in the background (or
/// on the image border).
BinaryMask inner_boundary(const BinaryMask& m);

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_not(const BinaryMask& a);

// ---------------------------------------------------------------------------
// Regions

enum class Connectivity { Four = 4, Eight = 8 };

LabelMap connected_components(const BinaryMask& m, Connectivity conn);

/// Tight bounding box of every label 1..N (index 0 unused).
std::vector<Rect> label_boxes(const LabelMap& labels);

/// Pixels whose label equals `label`.
BinaryMask label_mask(const LabelMap& labels, std::int32_t label);

/// Marker-controlled watershed by priority flooding. Every pixel ends with
/// exactly one marker label; ties in gradient are flooded first-in first-out.
LabelMap watershed(const Plane& gradient, const LabelMap& markers);

// ---------------------------------------------------------------------------
// Hough transform

/// Line x*cos(theta) + y*sin(theta) = rho, theta measured in degrees.
struct LineParam {
    double rho = 0.0;
    double theta = 0.0;  // [0,180)
    int score = 0;
};

struct AngleRange {
    double lo = 0.0;  // degrees; may lie outside [0,180), wrap is honoured
    double hi = 180.0;
};

/// Accumulator peaks with at least `min_votes`, suppressed in a 5x5 cell
/// neighbourhood and sorted by score (ties by theta, then rho).
std::vector<LineParam> hough_lines(const BinaryMask& m, double theta_step, int min_votes,
                                   std::optional<AngleRange> theta_range = std::nullopt);

/// Total least-squares refit of a line to the set pixels within `band` px.
/// Returns the input line when fewer than two pixels qualify.
LineParam refine_line(const BinaryMask& m, const LineParam& line, double band);

/// Angular distance between two line normals, modulo 180 degrees.
double line_angle_distance(double theta_a, double theta_b);

// ---------------------------------------------------------------------------
// Grey-level co-occurrence

enum class GlcmAngle { Deg0 = 0, Deg45 = 45, Deg90 = 90, Deg135 = 135 };

inline constexpr std::array<GlcmAngle, 4> kGlcmAngles = {
    GlcmAngle::Deg0, GlcmAngle::Deg45, GlcmAngle::Deg90, GlcmAngle::Deg135};

/// (row, col) offset of the neighbour for each angle.
std::array<int, 2> glcm_offset(GlcmAngle angle);

struct GreyCooccurrence {
    int levels = 8;
    GlcmAngle angle = GlcmAngle::Deg0;
    int distance = 1;
    std::vector<double> cells;  // levels*levels, row = reference level
    bool no_pairs = false;

    double at(int i, int j) const { return cells[static_cast<std::size_t>(i) * levels + j]; }
};

/// Uniform quantiser onto `levels` bins over [0,1].
int quantise_level(double v, int levels);

/// Ordered pairs (p, p+offset) with both pixels inside the mask, normalised.
GreyCooccurrence glcm(const Plane& p, const BinaryMask& mask, GlcmAngle angle,
                      int levels = 8, int distance = 1);

struct GlcmStats {
    double contrast = 0.0;
    double correlation = 0.0;
    double energy = 0.0;
    double homogeneity = 0.0;
    double entropy = 0.0;
};

GlcmStats glcm_stats(const GreyCooccurrence& g);

}  // namespace leafdx
