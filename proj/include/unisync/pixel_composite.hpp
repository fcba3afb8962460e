#pragma once

#include <cstddef>
#include <vector>

#include "unisync/frames.hpp"
#include "unisync/pose_track.hpp"

namespace unisync {

struct CompositeSpec {
    int dilate_radius = 6;
    double blur_sigma = 4.0;

    void validate() const;
};

struct RawMask {
    FrameSequence mask;    // single channel, 0 or 1
    bool clipped = false;  // some mouth keypoint fell outside the frame
};

/// Filled rectangle around the two mouth corners, grown on every side by 20% of the
/// larger side of their bounding box. Edges are rounded to whole pixels.
RawMask mask_from_pose(const PoseTrack& track, std::size_t height, std::size_t width);

/// Max over a (2r+1) x (2r+1) square window, clipped at the frame edge.
FrameSequence dilate(const FrameSequence& mask, int radius);

/// Normalized Gaussian taps of half-width ceil(3 sigma).
std::vector<float> gaussian_kernel(double sigma);

/// Horizontal then vertical pass with edge-clamped indexing, clamped to [0, 1].
FrameSequence gaussian_blur(const FrameSequence& mask, double sigma);

/// gaussian_blur(dilate(raw))
FrameSequence soft_mask(const FrameSequence& raw, const CompositeSpec& spec);

/// weight * x_gen + (1 - weight) * x_video per pixel, with a single-channel weight
/// broadcast over colour channels.
FrameSequence blend(const FrameSequence& x_gen, const FrameSequence& x_video, const FrameSequence& weight);

/// Largest absolute forward difference of the weight along x or y; 1 for a hard step.
double boundary_grad(const FrameSequence& weight);

/// Peak slope of the blurred edge, 1 / (sigma sqrt(2 pi)), with 5% slack for truncation.
double boundary_grad_bound(double sigma);

}  // namespace unisync
