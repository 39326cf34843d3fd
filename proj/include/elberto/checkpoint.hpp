#pragma once

#include <cstdint>
#include <string>

#include "elberto/objectives.hpp"

namespace elberto::checkpoint {

// On-disk layout: <dir>/manifest.json lists tensor names, shapes, dtype and
// byte offsets; <dir>/params.bin holds the raw little-endian IEEE-754 values
// in manifest order. Optimizer moments, when present, follow the parameters
// in the same file under the manifest's "optimizer" section.
template <typename T>
struct Checkpoint {
    objectives::FullModel<T> model;
    long long epoch = -1;
    bool has_optimizer = false;
    objectives::FullModel<T> adam_m, adam_v;
    long long adam_step = 0;
};

template <typename T>
void save_checkpoint(const std::string& dir, const Checkpoint<T>& cp);

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& dir);  // throws on dtype/shape mismatch

// "f32" or "f64", read from the manifest without loading tensors.
std::string checkpoint_dtype(const std::string& dir);

// FNV-1a over the manifest bytes, as a hex string.
std::string checkpoint_fingerprint(const std::string& dir);

std::string file_fingerprint(const std::string& path);

}  // namespace elberto::checkpoint
