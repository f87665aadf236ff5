#include "lfqv/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "lfqv/errors.hpp"

namespace lfqv::io {

const Tensor* Container::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void write_container(std::ostream& os, const Container& c) {
  os.write(kCheckpointMagic, 4);
  binio::put_le(os, kCheckpointVersion);
  binio::put_le(os, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    binio::put_str(os, k);
    binio::put_str(os, v);
  }
  binio::put_le(os, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    binio::put_str(os, name);
    binio::put_le(os, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) binio::put_le(os, static_cast<std::uint64_t>(e));
    for (double v : t.data()) binio::put_f64(os, v);
  }
  if (!os) throw FormatError("checkpoint write failed");
}

Container read_container(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint magic: expected \"LFQC\"");
  }
  const auto version = binio::get_le<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version: unsupported " + std::to_string(version));
  }
  Container c;
  const auto nmeta = binio::get_le<std::uint32_t>(is, "meta count");
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = binio::get_str(is, "meta key");
    c.meta[k] = binio::get_str(is, "meta value");
  }
  const auto ntensors = binio::get_le<std::uint32_t>(is, "tensor count");
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    std::string name = binio::get_str(is, "tensor name");
    const auto rank = binio::get_le<std::uint8_t>(is, "tensor rank");
    if (rank > kMaxRank) throw FormatError("tensor rank of '" + name + "' exceeds 5");
    Shape shape(rank);
    for (auto& e : shape) {
      const auto d = binio::get_le<std::uint64_t>(is, "tensor extent");
      if (d == 0 || d > (1ull << 32)) throw FormatError("tensor extent of '" + name + "' invalid");
      e = static_cast<std::int64_t>(d);
    }
    std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : data) v = binio::get_f64(is, "tensor payload");
    c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  write_container(os, c);
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  return read_container(is);
}

void add_model(Container& c, const tok::TokenizerModel& model) {
  for (const auto& [k, v] : model.config().to_kv()) c.meta[k] = v;
  for (const auto& p : model.params().items()) c.tensors.emplace_back("param/" + p.name, p.value);
}

tok::TokenizerModel model_from_container(const Container& c, const std::string& prefix) {
  tok::TokenizerConfig cfg;
  try {
    cfg = tok::TokenizerConfig::from_kv(c.meta);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  tok::ParameterSet params;
  for (const auto& [name, t] : c.tensors) {
    if (name.rfind(prefix, 0) == 0) params.add(name.substr(prefix.size()), t);
  }
  if (params.size() == 0) throw FormatError("checkpoint holds no '" + prefix + "' tensors");
  return tok::TokenizerModel(cfg, std::move(params));
}

void save_model(const std::filesystem::path& path, const tok::TokenizerModel& model) {
  Container c;
  add_model(c, model);
  save_container(path, c);
}

tok::TokenizerModel load_model(const std::filesystem::path& path, bool use_ema) {
  return model_from_container(load_container(path), use_ema ? "ema/" : "param/");
}

std::map<std::string, std::string> parse_kv(std::istream& is) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> load_kv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config '" + path.string() + "'");
  return parse_kv(is);
}

}  // namespace lfqv::io
