#include "leafdx/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace leafdx {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool in_range(double theta, const AngleRange& r) {
    for (double t : {theta, theta - 180.0, theta + 180.0})
        if (t >= r.lo && t <= r.hi) return true;
    return false;
}

}  // namespace

double line_angle_distance(double theta_a, double theta_b) {
    double d = std::fmod(std::abs(theta_a - theta_b), 180.0);
    return std::min(d, 180.0 - d);
}

std::vector<LineParam> hough_lines(const BinaryMask& m, double theta_step, int min_votes,
                                   std::optional<AngleRange> theta_range) {
    if (!(theta_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "hough: theta_step must be > 0");
    const int n_theta = static_cast<int>(std::ceil(180.0 / theta_step - 1e-9));
    const int max_rho = static_cast<int>(std::ceil(std::hypot(m.width(), m.height()))) + 1;
    const int n_rho = 2 * max_rho + 1;
    // Wrapping theta across 0/180 is only exact when the step divides 180.
    const bool wraps = std::abs(n_theta * theta_step - 180.0) < 1e-9;

    std::vector<double> cos_t(n_theta), sin_t(n_theta);
    std::vector<char> active(n_theta, 1);
    for (int t = 0; t < n_theta; ++t) {
        const double theta = t * theta_step;
        cos_t[t] = std::cos(theta * kDegToRad);
        sin_t[t] = std::sin(theta * kDegToRad);
        if (theta_range) active[t] = in_range(theta, *theta_range);
    }

    std::vector<int> acc(static_cast<std::size_t>(n_theta) * n_rho, 0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            for (int t = 0; t < n_theta; ++t) {
                if (!active[t]) continue;
                const int r = static_cast<int>(std::lround(x * cos_t[t] + y * sin_t[t])) + max_rho;
                ++acc[static_cast<std::size_t>(t) * n_rho + r];
            }
        }

    auto cell = [&](int t, int r, std::size_t& index) -> int {
        if (t < 0 || t >= n_theta) {
            if (!wraps) return -1;
            t = (t + n_theta) % n_theta;
            r = n_rho - 1 - r;  // rho flips sign across the wrap
        }
        if (r < 0 || r >= n_rho) return -1;
        index = static_cast<std::size_t>(t) * n_rho + r;
        return acc[index];
    };

    std::vector<LineParam> peaks;
    for (int t = 0; t < n_theta; ++t) {
        if (!active[t]) continue;
        for (int r = 0; r < n_rho; ++r) {
            const std::size_t here = static_cast<std::size_t>(t) * n_rho + r;
            const int score = acc[here];
            if (score < min_votes || score == 0) continue;
            bool peak = true;
            for (int dt = -2; dt <= 2 && peak; ++dt)
                for (int dr = -2; dr <= 2; ++dr) {
                    if (dt == 0 && dr == 0) continue;
                    std::size_t idx = 0;
                    const int other = cell(t + dt, r + dr, idx);
                    if (other > score || (other == score && idx < here)) {
                        peak = false;
                        break;
                    }
                }
            if (peak) peaks.push_back({static_cast<double>(r - max_rho), t * theta_step, score});
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const LineParam& a, const LineParam& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.theta != b.theta) return a.theta < b.theta;
        return a.rho < b.rho;
    });
    return peaks;
}

LineParam refine_line(const BinaryMask& m, const LineParam& line, double band) {
    const double c = std::cos(line.theta * kDegToRad), s = std::sin(line.theta * kDegToRad);
    double n = 0, sx = 0, sy = 0;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m(x, y) && std::abs(x * c + y * s - line.rho) <= band) {
                n += 1;
                sx += x;
                sy += y;
            }
    if (n < 2) return line;
    const double mx = sx / n, my = sy / n;
    double cxx = 0, cxy = 0, cyy = 0;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m(x, y) && std::abs(x * c + y * s - line.rho) <= band) {
                cxx += (x - mx) * (x - mx);
                cxy += (x - mx) * (y - my);
                cyy += (y - my) * (y - my);
            }
    // Normal = eigenvector of the smaller eigenvalue of the scatter matrix.
    const double direction = 0.5 * std::atan2(2 * cxy, cxx - cyy);
    double theta = direction / kDegToRad + 90.0;
    double nx = std::cos(theta * kDegToRad), ny = std::sin(theta * kDegToRad);
    // Keep the normal on the same side as the original.
    if (nx * c + ny * s < 0) {
        theta += 180.0;
        nx = -nx;
        ny = -ny;
    }
    double rho = mx * nx + my * ny;
    theta = std::fmod(theta, 360.0);
    if (theta < 0) theta += 360.0;
    if (theta >= 180.0) {
        theta -= 180.0;
        rho = -rho;
    }
    return {rho, theta, line.score};
}

}  // namespace leafdx
