#pragma once

#include <cstdint>
#include <vector>

#include "dsfcnn/idx.hpp"
#include "dsfcnn/tensor.hpp"

namespace dsf {

/// Rotates every image by an independent uniform angle in [0, 2*pi) with
/// bilinear interpolation (the rotated-digits protocol). Deterministic under
/// the seed: one angle drawn per image, in index order.
IdxDataset rotate_augment(const IdxDataset& ds, std::uint64_t seed);

/// Contiguous subset [from, from + count).
IdxDataset subset(const IdxDataset& ds, long from, long count);

/// Converts u8 images to a (count, 1, S, S) tensor normalized to [0, 1].
/// Images are centre-padded with zeros to pad_to, then average-pooled by
/// `downscale` (1 or 2).
Tensor4 to_tensor(const IdxDataset& ds, int pad_to, int downscale);

std::vector<int> label_vector(const IdxDataset& ds);

}  // namespace dsf
