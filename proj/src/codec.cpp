#include "lfqv/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_map>

#include "lfqv/errors.hpp"

namespace lfqv::codec {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::int64_t v, const char* field) {
  if (v < 1 || v > 0xFFFF) {
    throw DomainError(std::string("bitstream field ") + field + " = " + std::to_string(v) +
                      " does not fit u16");
  }
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

std::int64_t get_u16(const std::vector<std::uint8_t>& b, std::size_t at, const char* field) {
  const std::int64_t v = b[at] | (b[at + 1] << 8);
  if (v == 0) throw FormatError(std::string("bitstream field ") + field + " is zero");
  return v;
}

}  // namespace

std::vector<std::uint8_t> pack_payload(const lfq::TokenGrid& grid) {
  if (grid.dim < 1 || grid.dim > lfq::kMaxDim) {
    throw DomainError("bitstream field D = " + std::to_string(grid.dim) + " outside [1, 32]");
  }
  if (static_cast<std::int64_t>(grid.indices.size()) != grid.count()) {
    throw DomainError("token grid holds " + std::to_string(grid.indices.size()) +
                      " indices for extents " + std::to_string(grid.count()));
  }
  const auto bits = static_cast<std::uint64_t>(grid.count()) * static_cast<std::uint64_t>(grid.dim);
  std::vector<std::uint8_t> out((bits + 7) / 8, 0);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < grid.indices.size(); ++i) {
    const std::uint64_t v = grid.indices[i];
    if (v >= grid.codebook_size()) {
      throw DomainError("token " + std::to_string(i) + " = " + std::to_string(v) +
                        " overflows D = " + std::to_string(grid.dim) + " bits");
    }
    for (int b = 0; b < grid.dim; ++b, ++pos) {
      if ((v >> b) & 1u) out[pos / 8] |= static_cast<std::uint8_t>(1u << (pos % 8));
    }
  }
  return out;
}

lfq::TokenGrid unpack_payload(const std::vector<std::uint8_t>& payload, int dim, std::int64_t t,
                              std::int64_t h, std::int64_t w) {
  lfq::TokenGrid g;
  g.t = t;
  g.h = h;
  g.w = w;
  g.dim = dim;
  const auto bits = static_cast<std::uint64_t>(g.count()) * static_cast<std::uint64_t>(dim);
  if (payload.size() != (bits + 7) / 8) {
    throw FormatError("bitstream payload: " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string((bits + 7) / 8));
  }
  g.indices.resize(static_cast<std::size_t>(g.count()));
  std::uint64_t pos = 0;
  for (auto& idx : g.indices) {
    std::uint64_t v = 0;
    for (int b = 0; b < dim; ++b, ++pos) {
      if ((payload[pos / 8] >> (pos % 8)) & 1u) v |= std::uint64_t{1} << b;
    }
    idx = static_cast<std::uint32_t>(v);
  }
  for (; pos < payload.size() * 8; ++pos) {
    if ((payload[pos / 8] >> (pos % 8)) & 1u) throw FormatError("bitstream payload: nonzero pad bits");
  }
  return g;
}

std::vector<std::uint8_t> pack(const lfq::TokenGrid& grid, std::int64_t orig_t,
                               std::int64_t orig_h, std::int64_t orig_w) {
  std::vector<std::uint8_t> out(kBitstreamMagic, kBitstreamMagic + 4);
  out.push_back(kBitstreamVersion);
  if (grid.dim < 1 || grid.dim > lfq::kMaxDim) {
    throw DomainError("bitstream field D = " + std::to_string(grid.dim) + " outside [1, 32]");
  }
  out.push_back(static_cast<std::uint8_t>(grid.dim));
  put_u16(out, grid.t, "T'");
  put_u16(out, grid.h, "H'");
  put_u16(out, grid.w, "W'");
  put_u16(out, orig_t, "T");
  put_u16(out, orig_h, "H");
  put_u16(out, orig_w, "W");
  const auto payload = pack_payload(grid);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

TokenBitstream parse(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw FormatError("bitstream header: truncated (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kBitstreamMagic, 4) != 0) {
    throw FormatError("bitstream magic: expected \"LFQT\"");
  }
  if (bytes[4] != kBitstreamVersion) {
    throw FormatError("bitstream version: unsupported " + std::to_string(bytes[4]));
  }
  TokenBitstream s;
  s.header.dim = bytes[5];
  if (s.header.dim < 1 || s.header.dim > lfq::kMaxDim) {
    throw FormatError("bitstream field D: " + std::to_string(s.header.dim) + " outside [1, 32]");
  }
  s.header.t = get_u16(bytes, 6, "T'");
  s.header.h = get_u16(bytes, 8, "H'");
  s.header.w = get_u16(bytes, 10, "W'");
  s.header.orig_t = get_u16(bytes, 12, "T");
  s.header.orig_h = get_u16(bytes, 14, "H");
  s.header.orig_w = get_u16(bytes, 16, "W");
  s.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
  const auto expected = static_cast<std::size_t>((s.payload_bits() + 7) / 8);
  if (s.payload.size() != expected) {
    throw FormatError("bitstream payload: " + std::to_string(s.payload.size()) +
                      " bytes, expected " + std::to_string(expected));
  }
  return s;
}

lfq::TokenGrid unpack(const std::vector<std::uint8_t>& bytes) {
  const TokenBitstream s = parse(bytes);
  return unpack_payload(s.payload, s.header.dim, s.header.t, s.header.h, s.header.w);
}

double bits_per_pixel(const BitstreamHeader& h) {
  if (h.orig_t < 1 || h.orig_h < 1 || h.orig_w < 1) {
    throw DomainError("bits_per_pixel: original dimensions must be >= 1");
  }
  if (h.dim < 1) throw DomainError("bits_per_pixel: D must be >= 1");
  const double bits = static_cast<double>(h.t * h.h * h.w) * h.dim;
  return bits / static_cast<double>(h.orig_t * h.orig_h * h.orig_w);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write to '" + path.string() + "' failed");
}

double mse(const Tensor& ref, const Tensor& test) {
  if (ref.shape() != test.shape()) {
    throw DimensionError("metrics: shape " + shape_str(ref.shape()) + " vs " +
                         shape_str(test.shape()));
  }
  double acc = 0.0;
  for (std::int64_t i = 0; i < ref.size(); ++i) {
    const double d = 0.5 * (ref[i] - test[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(ref.size());
}

double psnr(const Tensor& ref, const Tensor& test) {
  const double m = mse(ref, test);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

TokenHistogram histogram(const lfq::TokenGrid& grid, std::size_t top_n) {
  std::unordered_map<std::uint32_t, std::int64_t> counts;
  for (auto v : grid.indices) ++counts[v];
  TokenHistogram h;
  h.total = static_cast<std::int64_t>(grid.indices.size());
  h.distinct = static_cast<std::int64_t>(counts.size());
  h.top.assign(counts.begin(), counts.end());
  std::sort(h.top.begin(), h.top.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (h.top.size() > top_n) h.top.resize(top_n);
  return h;
}

}  // namespace lfqv::codec
