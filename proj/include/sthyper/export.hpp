#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/types.h>

#include "sthyper/checkpoint.hpp"

namespace sthyper {

/// Writes `matrix` (2-D) as `<stem>.csv`, one row per line with shortest
/// round-trip formatting, and `<stem>.json` with the shape and `meta`.
void write_matrix(const torch::Tensor& matrix, const std::filesystem::path& dir, const std::string& stem,
                  const nlohmann::json& meta = nlohmann::json::object());

/// Learned structures of a checkpoint: Lambda_tilde_<l> (with the (j,k,node)
/// row index in its sidecar), S_<j>, labels_<j>, A_<j>, A_h_<l>, U_<l> and
/// omega. Returns the stems written, in order.
std::vector<std::string> export_structures(const Checkpoint& checkpoint, const std::filesystem::path& out_dir);

}  // namespace sthyper
