#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace unisync {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Head placement for one frame. Pixel coordinates, x right, y down; theta rotates
/// the face about its centre.
struct PoseFrame {
    Point2 center;
    double theta = 0.0;
    Point2 eye_left, eye_right;
    Point2 mouth_center;
    Point2 mouth_left, mouth_right;

    /// centre, eyes, mouth corners
    std::array<Point2, 5> keypoints() const noexcept {
        return {center, eye_left, eye_right, mouth_left, mouth_right};
    }
};

struct PoseTrack {
    double head_radius = 0.0;
    std::vector<PoseFrame> frames;

    std::size_t size() const noexcept { return frames.size(); }
};

}  // namespace unisync
