// Model checkpoint sidecar.
//
// Layout (everything little-endian):
//   bytes 0..3   magic "MOHR"
//   u32          version (currently 1)
//   u32 x 4      |U|, |I|, |R| (explicit relations), K
//   f32 arrays   user_vecs, item_vecs, rel_vecs ((|R|+1) rows, latent last),
//                item_bias, rel_bias
//
// Throws DataError on a bad magic, version, or truncated payload.

#pragma once

#include <filesystem>

#include "mohr/model.hpp"

namespace mohr {

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mohr
