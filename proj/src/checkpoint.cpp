#include "pcdgan/checkpoint.hpp"

#include <cstdio>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "pcdgan/error.hpp"

namespace pcdgan::nn {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

Checkpoint snapshot(std::uint64_t arch_hash, const std::vector<Parameter>& params) {
  Checkpoint c;
  c.arch_hash = arch_hash;
  for (const auto& p : params) {
    c.params.push_back({p.name, p.tensor.shape(),
                        std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())});
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("checkpoint: cannot open " + path + " for writing");
  out << kCheckpointMagic << '\n';
  out << "arch " << hex64(ckpt.arch_hash) << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
  char buf[64];
  for (const auto& p : ckpt.params) {
    out << "param " << p.name << ' ' << p.shape.size();
    for (auto d : p.shape) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", p.values[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) throw LoadError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("checkpoint: file not found: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw LoadError("checkpoint: bad magic header in " + path);
  }
  Checkpoint c;
  bool saw_arch = false, saw_end = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "arch") {
      std::string hex;
      ls >> hex;
      c.arch_hash = std::stoull(hex, nullptr, 16);
      saw_arch = true;
    } else if (kind == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      c.meta[key] = value;
    } else if (kind == "param") {
      SavedParam p;
      std::size_t rank = 0;
      ls >> p.name >> rank;
      for (std::size_t i = 0; i < rank; ++i) {
        std::size_t d = 0;
        ls >> d;
        p.shape.push_back(d);
      }
      if (!ls) throw LoadError("checkpoint: malformed param header: " + line);
      std::string body;
      if (!std::getline(in, body)) throw LoadError("checkpoint: missing values for " + p.name);
      std::istringstream bs(body);
      std::string tok;
      while (bs >> tok) p.values.push_back(std::strtod(tok.c_str(), nullptr));
      if (p.values.size() != ad::numel(p.shape)) {
        throw LoadError("checkpoint: value count mismatch for " + p.name);
      }
      c.params.push_back(std::move(p));
    } else if (kind == "end") {
      saw_end = true;
      break;
    } else if (!kind.empty()) {
      throw LoadError("checkpoint: unknown record '" + kind + "'");
    }
  }
  if (!saw_arch || !saw_end) throw LoadError("checkpoint: truncated file " + path);
  return c;
}

void restore(const Checkpoint& ckpt, std::uint64_t expected_arch_hash,
             const std::vector<Parameter>& params) {
  if (ckpt.arch_hash != expected_arch_hash) {
    throw LoadError(fmt::format("checkpoint: architecture hash {} does not match model {}",
                                hex64(ckpt.arch_hash), hex64(expected_arch_hash)));
  }
  for (const auto& p : params) {
    const SavedParam* found = nullptr;
    for (const auto& s : ckpt.params) {
      if (s.name == p.name) found = &s;
    }
    if (!found) throw LoadError("checkpoint: missing parameter " + p.name);
    if (found->shape != p.tensor.shape()) {
      throw LoadError("checkpoint: shape mismatch for " + p.name);
    }
    ad::Tensor t = p.tensor;
    std::copy(found->values.begin(), found->values.end(), t.mutable_values().begin());
  }
}

}  // namespace pcdgan::nn
