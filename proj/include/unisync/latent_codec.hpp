#pragma once

#include "unisync/frames.hpp"
#include "unisync/grid.hpp"

namespace unisync {

/// Mean-pool / nearest-upsample stand-in for a video autoencoder.
struct CodecSpec {
    std::size_t spatial_factor = 4;
    std::size_t temporal_factor = 1;
};

/// Non-overlapping temporal x spatial x spatial mean pooling of every channel. No clamping.
Grid pool_latent(const Grid& pixels, const CodecSpec& spec);
/// Nearest-neighbour upsampling. No clamping.
Grid upsample_latent(const Grid& latent, const CodecSpec& spec);

/// (1, C, F/pf, H/ps, W/ps) latent of a frame sequence.
Grid encode_frames(const FrameSequence& frames, const CodecSpec& spec);
/// Upsampled and clamped to [0, 1]. Latent must have B = 1.
FrameSequence decode_latent(const Grid& latent, const CodecSpec& spec);

/// Channel concatenation; `a` occupies the leading channels.
Grid concat_channels(const Grid& a, const Grid& b);

/// Latent cell is 1 iff any pixel of its pooling block is non-zero. Input must be a
/// single-channel binary sequence; output is (1, 1, f, h, w).
Grid latent_mask_from_pixel_mask(const FrameSequence& mask, const CodecSpec& spec);

}  // namespace unisync
