#pragma once

#include <string>

#include "dsfcnn/model.hpp"

namespace dsf {

/// Checkpoint container: magic "DSFC", format version u32, then two framed
/// sections (trainable parameters, then optimizer/batch-norm state). Each
/// section: count u64, then per entry name length u64 + UTF-8 name, rank
/// u64, dims u64 each, data f64 each — all little-endian. Round-trips are
/// bit-exact.
void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState* adam = nullptr);

/// Restores parameters, batch-norm state, and (when present and requested)
/// Adam moments into an identically-built model. Throws FormatError on
/// malformed bytes, DataError on missing files or mismatched names/shapes.
void load_checkpoint(const std::string& path, Model& model,
                     AdamState* adam = nullptr);

}  // namespace dsf
