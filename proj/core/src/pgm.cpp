#include "dsfcnn/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace dsf {

void write_pgm(const std::string& path, const double* data, long height,
               long width) {
  double lo = data[0], hi = data[0];
  for (long i = 1; i < height * width; ++i) {
    lo = std::min(lo, data[i]);
    hi = std::max(hi, data[i]);
  }
  std::vector<unsigned char> bytes(static_cast<size_t>(height) * width);
  if (hi == lo) {
    std::fill(bytes.begin(), bytes.end(), static_cast<unsigned char>(128));
  } else {
    const double scale = 255.0 / (hi - lo);
    for (long i = 0; i < height * width; ++i)
      bytes[i] = static_cast<unsigned char>(
          std::lround((data[i] - lo) * scale));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("pgm: write failed for " + path);
}

}  // namespace dsf
