#include "dsfcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dsf {

IdxDataset rotate_augment(const IdxDataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);

  IdxDataset out = ds;
  Tensor4 img(1, 1, ds.height, ds.width);
  for (long i = 0; i < ds.count; ++i) {
    const double theta = uni(rng);
    const auto src = ds.image(i);
    for (size_t p = 0; p < src.size(); ++p)
      img.data()[p] = static_cast<double>(src[p]);
    const Tensor4 rotated = rotate_interp(img, theta);
    for (size_t p = 0; p < src.size(); ++p) {
      const double v = std::clamp(rotated.data()[p], 0.0, 255.0);
      out.images[i * ds.height * ds.width + p] =
          static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

IdxDataset subset(const IdxDataset& ds, long from, long count) {
  if (from < 0 || count < 0 || from + count > ds.count)
    throw DataError("subset: range out of bounds");
  IdxDataset out;
  out.count = count;
  out.height = ds.height;
  out.width = ds.width;
  const long area = ds.height * ds.width;
  out.images.assign(ds.images.begin() + from * area,
                    ds.images.begin() + (from + count) * area);
  out.labels.assign(ds.labels.begin() + from, ds.labels.begin() + from + count);
  return out;
}

Tensor4 to_tensor(const IdxDataset& ds, int pad_to, int downscale) {
  if (pad_to < ds.height || pad_to < ds.width)
    throw InvalidArgument("to_tensor: pad_to smaller than image");
  if (downscale != 1 && downscale != 2)
    throw InvalidArgument("to_tensor: downscale must be 1 or 2");
  if (pad_to % downscale != 0)
    throw InvalidArgument("to_tensor: pad_to must be divisible by downscale");

  const long S = pad_to / downscale;
  const long oy = (pad_to - ds.height) / 2;
  const long ox = (pad_to - ds.width) / 2;
  Tensor4 out(ds.count, 1, S, S);
  std::vector<double> padded(static_cast<size_t>(pad_to) * pad_to);
  for (long i = 0; i < ds.count; ++i) {
    std::fill(padded.begin(), padded.end(), 0.0);
    const auto src = ds.image(i);
    for (long y = 0; y < ds.height; ++y)
      for (long x = 0; x < ds.width; ++x)
        padded[(y + oy) * pad_to + (x + ox)] =
            static_cast<double>(src[y * ds.width + x]) / 255.0;
    auto dst = out.plane(i, 0);
    if (downscale == 1) {
      std::copy(padded.begin(), padded.end(), dst.begin());
    } else {
      for (long y = 0; y < S; ++y)
        for (long x = 0; x < S; ++x)
          dst[y * S + x] = 0.25 * (padded[(2 * y) * pad_to + 2 * x] +
                                   padded[(2 * y) * pad_to + 2 * x + 1] +
                                   padded[(2 * y + 1) * pad_to + 2 * x] +
                                   padded[(2 * y + 1) * pad_to + 2 * x + 1]);
    }
  }
  return out;
}

std::vector<int> label_vector(const IdxDataset& ds) {
  std::vector<int> labels(ds.labels.size());
  for (size_t i = 0; i < ds.labels.size(); ++i)
    labels[i] = static_cast<int>(ds.labels[i]);
  return labels;
}

}  // namespace dsf
