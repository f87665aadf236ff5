#pragma once

// Video files for the CLI. Tensors are [T,H,W,3] with pixels in [-1, 1].
//
// Raw format: "LFQV", u32 T, u32 H, u32 W (little-endian), then float32 LE
// samples in planar order [T][C][H][W] with C = 3.
// PNG mode: a single .png file (T = 1) or a directory of *.png frames taken
// in lexicographic order. 8-bit RGB; v maps to v / 127.5 - 1.

#include <filesystem>

#include "lfqv/tensor.hpp"

namespace lfqv::video {

inline constexpr char kRawMagic[4] = {'L', 'F', 'Q', 'V'};
inline constexpr std::size_t kRawHeaderBytes = 16;

// Throws FormatError naming the offending field.
Tensor read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const Tensor& video);

Tensor read_png(const std::filesystem::path& path);
// Writes one frame; the tensor must have T = 1.
void write_png(const std::filesystem::path& path, const Tensor& video);
Tensor read_png_dir(const std::filesystem::path& dir);
// Writes frame_00000.png, frame_00001.png, ... into dir (created if needed).
void write_png_dir(const std::filesystem::path& dir, const Tensor& video);

// Dispatch on the path: a directory or a path ending in '/' uses PNG
// frames, a ".png" suffix a single PNG, anything else the raw format.
Tensor read_video(const std::filesystem::path& path);
void write_video(const std::filesystem::path& path, const Tensor& video);

}  // namespace lfqv::video
