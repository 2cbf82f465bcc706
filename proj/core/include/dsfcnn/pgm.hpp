#pragma once

#include <string>

#include "dsfcnn/errors.hpp"

namespace dsf {

/// Writes a binary PGM (P5), mapping [min, max] linearly to [0, 255]. A
/// constant plane maps to mid-gray (128).
void write_pgm(const std::string& path, const double* data, long height,
               long width);

}  // namespace dsf
