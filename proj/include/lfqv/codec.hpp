#pragma once

// Token bitstream: fixed-width packed token indices behind an 18-byte
// header, plus reconstruction metrics. Layout is in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lfqv/lfq.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv::codec {

inline constexpr char kBitstreamMagic[4] = {'L', 'F', 'Q', 'T'};
inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 18;

struct BitstreamHeader {
  int dim = 1;                            // D, bits per token
  std::int64_t t = 1, h = 1, w = 1;       // token grid
  std::int64_t orig_t = 1, orig_h = 1, orig_w = 1;
  bool operator==(const BitstreamHeader&) const = default;
};

struct TokenBitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> payload;

  std::int64_t payload_bits() const { return header.t * header.h * header.w * header.dim; }
};

// Packs D bits per token, raster order, least-significant bit first within
// each byte. Throws DomainError if an index needs more than D bits or a
// field does not fit its wire width.
std::vector<std::uint8_t> pack_payload(const lfq::TokenGrid& grid);
lfq::TokenGrid unpack_payload(const std::vector<std::uint8_t>& payload, int dim, std::int64_t t,
                              std::int64_t h, std::int64_t w);

std::vector<std::uint8_t> pack(const lfq::TokenGrid& grid, std::int64_t orig_t,
                               std::int64_t orig_h, std::int64_t orig_w);
// Throws FormatError naming the offending field.
TokenBitstream parse(const std::vector<std::uint8_t>& bytes);
lfq::TokenGrid unpack(const std::vector<std::uint8_t>& bytes);

// Payload bits per original pixel, header excluded.
double bits_per_pixel(const BitstreamHeader& header);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Pixels in [-1, 1] are mapped to [0, 1] first. Throws DimensionError on
// shape mismatch.
double mse(const Tensor& ref, const Tensor& test);
// +inf for identical inputs.
double psnr(const Tensor& ref, const Tensor& test);
std::string format_psnr(double db);

struct TokenHistogram {
  std::int64_t total = 0;
  std::int64_t distinct = 0;
  std::vector<std::pair<std::uint32_t, std::int64_t>> top;  // by count desc, index asc
};
TokenHistogram histogram(const lfq::TokenGrid& grid, std::size_t top_n = 8);

}  // namespace lfqv::codec
