#include "lfqv/video_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "binio.hpp"
#include "lfqv/errors.hpp"

namespace lfqv::video {

namespace fs = std::filesystem;

namespace {

VideoDims rgb_dims(const Tensor& video, const char* what) {
  if (video.rank() != 4) throw DimensionError(std::string(what) + ": expected [T,H,W,3] video");
  VideoDims d = video_dims(video.shape(), what);
  if (d.c != 3) throw DimensionError(std::string(what) + ": expected 3 channels");
  return d;
}

std::uint8_t to_byte(double v) {
  const double s = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(s);
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

// Returns H x W x 3 bytes.
std::vector<std::uint8_t> decode_png(const fs::path& path, std::int64_t& h, std::int64_t& w) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FormatError("cannot open '" + path.string() + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("png signature: '" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png: out of memory");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png data: '" + path.string() + "' is corrupt");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  h = png_get_image_height(png, info);
  w = png_get_image_width(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png channels: '" + path.string() + "' is not convertible to RGB");
  }
  pixels.resize(static_cast<std::size_t>(h * w * 3));
  rows.resize(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + y * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

void encode_png(const fs::path& path, const std::uint8_t* rgb, std::int64_t h, std::int64_t w) {
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("png: out of memory");
  }
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png: writing '" + path.string() + "' failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::int64_t y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = rgb + y * w * 3;
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Tensor read_raw(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kRawMagic, 4) != 0) {
    throw FormatError("video magic: expected \"LFQV\" in '" + path.string() + "'");
  }
  const auto t = binio::get_le<std::uint32_t>(is, "video T");
  const auto h = binio::get_le<std::uint32_t>(is, "video H");
  const auto w = binio::get_le<std::uint32_t>(is, "video W");
  if (t == 0) throw FormatError("video T: must be >= 1");
  if (h == 0) throw FormatError("video H: must be >= 1");
  if (w == 0) throw FormatError("video W: must be >= 1");
  if (std::uint64_t{t} * h * w > (1ull << 28)) throw FormatError("video T*H*W: implausibly large");
  Tensor v(Shape{t, h, w, 3});
  for (std::int64_t f = 0; f < t; ++f)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          v[((f * h + y) * w + x) * 3 + c] = binio::get_f32(is, "video payload");
        }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("video payload: trailing bytes in '" + path.string() + "'");
  }
  return v;
}

void write_raw(const fs::path& path, const Tensor& video) {
  const VideoDims d = rgb_dims(video, "write_raw");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  os.write(kRawMagic, 4);
  binio::put_le(os, static_cast<std::uint32_t>(d.t));
  binio::put_le(os, static_cast<std::uint32_t>(d.h));
  binio::put_le(os, static_cast<std::uint32_t>(d.w));
  for (std::int64_t f = 0; f < d.t; ++f)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < d.h; ++y)
        for (std::int64_t x = 0; x < d.w; ++x) {
          binio::put_f32(os, static_cast<float>(video[((f * d.h + y) * d.w + x) * 3 + c]));
        }
  if (!os) throw FormatError("write to '" + path.string() + "' failed");
}

Tensor read_png(const fs::path& path) {
  std::int64_t h = 0, w = 0;
  const auto px = decode_png(path, h, w);
  Tensor v(Shape{1, h, w, 3});
  for (std::size_t i = 0; i < px.size(); ++i) v[static_cast<std::int64_t>(i)] = px[i] / 127.5 - 1.0;
  return v;
}

void write_png(const fs::path& path, const Tensor& video) {
  const VideoDims d = rgb_dims(video, "write_png");
  if (d.t != 1) throw DimensionError("write_png: single-frame video required");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(video.size()));
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(video[static_cast<std::int64_t>(i)]);
  encode_png(path, px.data(), d.h, d.w);
}

Tensor read_png_dir(const fs::path& dir) {
  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") frames.push_back(e.path());
  }
  if (frames.empty()) throw FormatError("png directory '" + dir.string() + "' holds no frames");
  std::sort(frames.begin(), frames.end());
  std::int64_t h = 0, w = 0;
  std::vector<std::uint8_t> all;
  for (const auto& p : frames) {
    std::int64_t fh = 0, fw = 0;
    auto px = decode_png(p, fh, fw);
    if (all.empty()) {
      h = fh;
      w = fw;
    } else if (fh != h || fw != w) {
      throw FormatError("png frame size: '" + p.string() + "' differs from the first frame");
    }
    all.insert(all.end(), px.begin(), px.end());
  }
  Tensor v(Shape{static_cast<std::int64_t>(frames.size()), h, w, 3});
  for (std::size_t i = 0; i < all.size(); ++i) v[static_cast<std::int64_t>(i)] = all[i] / 127.5 - 1.0;
  return v;
}

void write_png_dir(const fs::path& dir, const Tensor& video) {
  const VideoDims d = rgb_dims(video, "write_png_dir");
  fs::create_directories(dir);
  const std::int64_t frame = d.h * d.w * 3;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(frame));
  for (std::int64_t f = 0; f < d.t; ++f) {
    for (std::int64_t i = 0; i < frame; ++i) {
      px[static_cast<std::size_t>(i)] = to_byte(video[f * frame + i]);
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05lld.png", static_cast<long long>(f));
    encode_png(dir / name, px.data(), d.h, d.w);
  }
}

namespace {
bool is_dir_path(const fs::path& p) {
  const std::string s = p.string();
  return fs::is_directory(p) || (!s.empty() && s.back() == '/');
}
}  // namespace

Tensor read_video(const fs::path& path) {
  if (is_dir_path(path)) return read_png_dir(path);
  if (path.extension() == ".png") return read_png(path);
  return read_raw(path);
}

void write_video(const fs::path& path, const Tensor& video) {
  if (is_dir_path(path)) return write_png_dir(path, video);
  if (path.extension() == ".png") return write_png(path, video);
  write_raw(path, video);
}

}  // namespace lfqv::video
