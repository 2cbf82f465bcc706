#include "dsfcnn/idx.hpp"

#include <fstream>

namespace dsf {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// Bounds-checked big-endian u32 reader.
std::uint32_t read_u32(std::span<const std::uint8_t> bytes, size_t offset,
                       const char* what) {
  if (offset + 4 > bytes.size())
    throw FormatError(std::string("idx: truncated while reading ") + what);
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("idx: cannot open " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<size_t>(len));
  in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw DataError("idx: short read on " + path);
  return bytes;
}

}  // namespace

void parse_idx_images(std::span<const std::uint8_t> bytes, IdxDataset* out) {
  const std::uint32_t magic = read_u32(bytes, 0, "image magic");
  if (magic != kImageMagic)
    throw FormatError("idx: bad image magic 0x" + std::to_string(magic));
  const std::uint32_t count = read_u32(bytes, 4, "image count");
  const std::uint32_t rows = read_u32(bytes, 8, "image rows");
  const std::uint32_t cols = read_u32(bytes, 12, "image cols");
  if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096)
    throw FormatError("idx: implausible image dimensions");
  const std::uint64_t need =
      16ull + static_cast<std::uint64_t>(count) * rows * cols;
  if (bytes.size() != need)
    throw FormatError("idx: image payload size mismatch (have " +
                      std::to_string(bytes.size()) + ", need " +
                      std::to_string(need) + ")");
  out->count = count;
  out->height = rows;
  out->width = cols;
  out->images.assign(bytes.begin() + 16, bytes.end());
}

void parse_idx_labels(std::span<const std::uint8_t> bytes, IdxDataset* out) {
  const std::uint32_t magic = read_u32(bytes, 0, "label magic");
  if (magic != kLabelMagic)
    throw FormatError("idx: bad label magic 0x" + std::to_string(magic));
  const std::uint32_t count = read_u32(bytes, 4, "label count");
  const std::uint64_t need = 8ull + count;
  if (bytes.size() != need)
    throw FormatError("idx: label payload size mismatch");
  out->labels.assign(bytes.begin() + 8, bytes.end());
}

IdxDataset load_idx(const std::string& images_path,
                    const std::string& labels_path) {
  IdxDataset ds;
  parse_idx_images(read_file(images_path), &ds);
  IdxDataset lbl;
  parse_idx_labels(read_file(labels_path), &lbl);
  if (static_cast<long>(lbl.labels.size()) != ds.count)
    throw DataError("idx: image/label count mismatch (" +
                    std::to_string(ds.count) + " vs " +
                    std::to_string(lbl.labels.size()) + ")");
  ds.labels = std::move(lbl.labels);
  return ds;
}

}  // namespace dsf
