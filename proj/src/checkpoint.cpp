#include "bagcn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "bagcn/report.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts need byte swapping");

namespace bagcn {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'G', 'C', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  std::uint32_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return v;
}
std::uint64_t get_u64(std::ifstream& f, const std::string& path) {
  std::uint64_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return v;
}

void put_array(std::ofstream& f, const std::string& name, const double* data, std::uint64_t rows,
               std::uint64_t cols) {
  put_u32(f, static_cast<std::uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(f, rows);
  put_u64(f, cols);
  f.write(reinterpret_cast<const char*>(data),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

struct NamedArray {
  std::string name;
  Mat value;
};

NamedArray get_array(std::ifstream& f, const std::string& path) {
  NamedArray a;
  const std::uint32_t name_len = get_u32(f, path);
  if (name_len > 4096) throw std::runtime_error(path + ": implausible array name length");
  a.name.resize(name_len);
  if (!f.read(a.name.data(), name_len)) throw std::runtime_error(path + ": truncated checkpoint");
  const std::uint64_t rows = get_u64(f, path);
  const std::uint64_t cols = get_u64(f, path);
  if (rows > (1ull << 32) || cols > (1ull << 32) || rows * cols > (1ull << 34)) {
    throw std::runtime_error(path + ": implausible array shape for '" + a.name + "'");
  }
  a.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!f.read(reinterpret_cast<char*>(a.value.data()),
              static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamSet& ps) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");

  f.write(kMagic, sizeof(kMagic));
  put_u32(f, kVersion);
  const std::string cfg_json = config_to_json(cfg);
  put_u32(f, static_cast<std::uint32_t>(cfg_json.size()));
  f.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

  const bool has_bn = ps.bn_c.mean.size() > 0;
  std::uint32_t count = static_cast<std::uint32_t>(ps.params.size()) + (has_bn ? 4u : 0u);
  put_u32(f, count);
  for (const Param& p : ps.params) {
    put_array(f, p.name, p.value.data(), static_cast<std::uint64_t>(p.value.rows()),
              static_cast<std::uint64_t>(p.value.cols()));
  }
  if (has_bn) {
    put_array(f, "bn_c.mean", ps.bn_c.mean.data(), 1,
              static_cast<std::uint64_t>(ps.bn_c.mean.size()));
    put_array(f, "bn_c.var", ps.bn_c.var.data(), 1,
              static_cast<std::uint64_t>(ps.bn_c.var.size()));
    put_array(f, "bn_ego.mean", ps.bn_ego.mean.data(), 1,
              static_cast<std::uint64_t>(ps.bn_ego.mean.size()));
    put_array(f, "bn_ego.var", ps.bn_ego.var.data(), 1,
              static_cast<std::uint64_t>(ps.bn_ego.var.size()));
  }
  f.flush();
  if (!f) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");

  char magic[8];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(f, path);
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = get_u32(f, path);
  if (cfg_len > (1u << 20)) throw std::runtime_error(path + ": implausible config length");
  std::string cfg_json(cfg_len, '\0');
  if (!f.read(cfg_json.data(), cfg_len)) throw std::runtime_error(path + ": truncated checkpoint");

  Checkpoint ck;
  ck.config = config_from_json_text(cfg_json, path);

  const std::uint32_t count = get_u32(f, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a = get_array(f, path);
    if (a.name == "bn_c.mean") {
      ck.params.bn_c.mean = a.value.row(0);
    } else if (a.name == "bn_c.var") {
      ck.params.bn_c.var = a.value.row(0);
    } else if (a.name == "bn_ego.mean") {
      ck.params.bn_ego.mean = a.value.row(0);
    } else if (a.name == "bn_ego.var") {
      ck.params.bn_ego.var = a.value.row(0);
    } else {
      const ParamInfo* info = nullptr;
      for (const ParamInfo& pi : param_registry()) {
        if (a.name == pi.name) {
          info = &pi;
          break;
        }
      }
      if (!info) throw std::runtime_error(path + ": unknown parameter '" + a.name + "'");
      Param p;
      p.id = info->id;
      p.name = info->name;
      p.decay = info->decay;
      p.value = std::move(a.value);
      ck.params.params.push_back(std::move(p));
    }
  }
  // parameters are written in id order; enforce it on read so downstream
  // code can rely on the ParamSet ordering invariant
  for (std::size_t i = 1; i < ck.params.params.size(); ++i) {
    if (ck.params.params[i - 1].id >= ck.params.params[i].id) {
      throw std::runtime_error(path + ": parameters out of order");
    }
  }
  return ck;
}

void save_matrix(const std::string& path, const Mat& m) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  put_u64(f, static_cast<std::uint64_t>(m.rows()));
  put_u64(f, static_cast<std::uint64_t>(m.cols()));
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(static_cast<std::uint64_t>(m.size()) * sizeof(double)));
  f.flush();
  if (!f) throw std::runtime_error(path + ": write failed");
}

Mat load_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open");
  std::uint64_t rows = 0, cols = 0;
  if (!f.read(reinterpret_cast<char*>(&rows), sizeof(rows)) ||
      !f.read(reinterpret_cast<char*>(&cols), sizeof(cols))) {
    throw std::runtime_error(path + ": truncated matrix file");
  }
  if (rows > (1ull << 32) || cols > (1ull << 32) || rows * cols > (1ull << 34)) {
    throw std::runtime_error(path + ": implausible matrix shape");
  }
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!f.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
    throw std::runtime_error(path + ": truncated matrix file");
  }
  return m;
}

}  // namespace bagcn
