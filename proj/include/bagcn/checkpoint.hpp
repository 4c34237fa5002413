#pragma once

#include <string>

#include "bagcn/model.hpp"

namespace bagcn {

struct Checkpoint {
  ModelConfig config;
  ParamSet params;
};

// Binary checkpoint, little-endian:
//   magic "BAGCNCKP" | u32 version=1 | u32 len | config JSON | u32 count |
//   count * (u32 name_len | name | u64 rows | u64 cols | rows*cols f64)
// Arrays are the parameters under their registry names plus, when the model
// normalizes with batch statistics, bn_c.mean / bn_c.var / bn_ego.mean /
// bn_ego.var. Matrices are row-major.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamSet& ps);
Checkpoint load_checkpoint(const std::string& path);

// Bare matrix dump (u64 rows | u64 cols | f64 data, row-major); used for the
// attention matrices s1.bin / s2.bin.
void save_matrix(const std::string& path, const Mat& m);
Mat load_matrix(const std::string& path);

}  // namespace bagcn
