#include "urcod/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace urcod {
namespace {

constexpr char kMagic[4] = {'U', 'R', 'C', 'K'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void Checkpoint::add_params(const nn::ParamList& list) {
  for (const auto& p : list) params.emplace_back(p.name, p.var->value);
}

void Checkpoint::restore_params(const nn::ParamList& list) const {
  std::map<std::string, const nn::Tensor*> index;
  for (const auto& [name, tensor] : params) index[name] = &tensor;
  for (const auto& p : list) {
    auto it = index.find(p.name);
    if (it == index.end())
      throw std::runtime_error("checkpoint is missing parameter " + p.name);
    if (!it->second->same_shape(p.var->value))
      throw std::runtime_error("checkpoint shape mismatch for parameter " + p.name);
    p.var->value = *it->second;
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor.channels()));
    write_u32(out, static_cast<std::uint32_t>(tensor.height()));
    write_u32(out, static_cast<std::uint32_t>(tensor.width()));
    for (const auto& plane : tensor.ch)
      out.write(reinterpret_cast<const char*>(plane.data()),
                static_cast<std::streamsize>(plane.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  const std::uint32_t n_meta = read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(in);
    ckpt.meta[k] = read_string(in);
  }
  const std::uint32_t n_params = read_u32(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = read_string(in);
    const int c = static_cast<int>(read_u32(in));
    const int h = static_cast<int>(read_u32(in));
    const int w = static_cast<int>(read_u32(in));
    nn::Tensor t = nn::Tensor::zeros(c, h, w);
    for (auto& plane : t.ch)
      in.read(reinterpret_cast<char*>(plane.data()),
              static_cast<std::streamsize>(plane.size() * sizeof(double)));
    ckpt.params.emplace_back(std::move(name), std::move(t));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  return ckpt;
}

std::string Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("checkpoint meta key missing: " + key);
  return it->second;
}

double Checkpoint::meta_num(const std::string& key) const { return std::stod(meta_at(key)); }

}  // namespace urcod
