#pragma once

#include <string>

#include "pairbench/core/types.hpp"

namespace pairbench {

// JSONL, one record per line with keys image_id, identity_id, group, masked,
// role; UTF-8. Parse errors report the 1-based line number; duplicate
// image_ids and unknown group labels are errors.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

}  // namespace pairbench
