#pragma once

// Versioned binary container for model checkpoints and training state.
// Layout is documented in docs/formats.md.

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lfqv/tensor.hpp"
#include "lfqv/tokenizer.hpp"

namespace lfqv::io {

inline constexpr char kCheckpointMagic[4] = {'L', 'F', 'Q', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Container {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_container(std::ostream& os, const Container& c);
Container read_container(std::istream& is);
void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path);

// Model tensors are stored as "param/<name>"; the config as "model.*" meta.
void add_model(Container& c, const tok::TokenizerModel& model);
// prefix selects which tensor family forms the weights ("param/" or "ema/").
tok::TokenizerModel model_from_container(const Container& c, const std::string& prefix = "param/");

void save_model(const std::filesystem::path& path, const tok::TokenizerModel& model);
tok::TokenizerModel load_model(const std::filesystem::path& path, bool use_ema = false);

// Flat "key = value" text; '#' starts a comment. Throws FormatError naming
// the line on syntax errors.
std::map<std::string, std::string> parse_kv(std::istream& is);
std::map<std::string, std::string> load_kv(const std::filesystem::path& path);

}  // namespace lfqv::io
