#pragma once

#include <filesystem>

#include "savfi/cnn/network.hpp"

namespace savfi::cnn {

// Model directory layout: index.txt with the net spec and one
// `tensor=<name> file=<file>` line per parameter; each parameter stored as
// a float32 TensorFile next to the index.
void save_model(const std::filesystem::path& dir,
                const ModelParams<float>& params);

ModelParams<float> load_model(const std::filesystem::path& dir);

}  // namespace savfi::cnn
