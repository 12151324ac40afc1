#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pixelseg/tensor.hpp"

namespace pixelseg {

// Checkpoint layout: a directory with one tensor file per named parameter
// and a manifest.json listing names, shapes, files and the run
// configuration. Written to a temporary directory first and renamed, so a
// crash cannot leave a torn manifest behind.
void save_checkpoint(const std::string& dir,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const std::string& config_echo_json);

// Loads parameter values into matching names; shapes must agree. Returns
// the stored configuration echo.
std::string load_checkpoint(const std::string& dir,
                            std::vector<std::pair<std::string, Tensor>>& params);

// Reads only the configuration echo from a checkpoint.
std::string read_checkpoint_config(const std::string& dir);

}  // namespace pixelseg
