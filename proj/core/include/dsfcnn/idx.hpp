#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsfcnn/errors.hpp"

namespace dsf {

/// A labelled u8 image set in the IDX container format.
struct IdxDataset {
  long count = 0;
  long height = 0;
  long width = 0;
  std::vector<std::uint8_t> images;  // count * height * width
  std::vector<std::uint8_t> labels;  // count

  std::span<const std::uint8_t> image(long i) const {
    return {images.data() + i * height * width,
            static_cast<size_t>(height * width)};
  }
};

/// Parses a big-endian IDX image payload (magic 0x00000803). Throws
/// FormatError on a bad magic or truncated buffer; never reads past the
/// buffer end.
void parse_idx_images(std::span<const std::uint8_t> bytes, IdxDataset* out);

/// Parses an IDX label payload (magic 0x00000801) into out->labels.
void parse_idx_labels(std::span<const std::uint8_t> bytes, IdxDataset* out);

/// Loads and cross-validates an image/label file pair. FormatError for
/// malformed files, DataError for missing files or count mismatches.
IdxDataset load_idx(const std::string& images_path,
                    const std::string& labels_path);

}  // namespace dsf
