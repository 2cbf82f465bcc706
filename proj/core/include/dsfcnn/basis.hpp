#pragma once

#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsfcnn/errors.hpp"

namespace dsf {

/// Per-ring angular frequency caps: entries (ring j, max frequency A_j).
/// Rings are strictly increasing from 0 and every cap is >= 0.
struct FrequencySpec {
  std::vector<std::pair<int, int>> entries;

  /// Number of (j, k) basis filters: sum of (A_j + 1).
  int coefficient_count() const;

  /// Real parameters per filter: sum of (1 + 2*A_j). The k = 0 coefficient
  /// is real; every k >= 1 coefficient contributes a real and an imaginary
  /// part.
  long real_param_count() const;

  /// Throws InvalidArgument when the structure is malformed or a ring does
  /// not fit a filter of the given size (needs 2j + 1 <= size).
  void validate(int filter_size) const;

  /// Non-fatal notes, e.g. a k >= 1 frequency on ring 0 (the angular phase
  /// is singular at the grid centre, so those filters carry no centre
  /// sample).
  std::vector<std::string> warnings() const;

  /// Parses "0:0,1:2,2:3,3:2".
  static FrequencySpec parse(const std::string& text);
  std::string to_string() const;

  bool operator==(const FrequencySpec&) const = default;
};

/// One sampled circular harmonic tau_j(|u|) e^{ik arg(u)} on a K x K grid,
/// u = (x - c) + i(c - y), c = (K - 1)/2. For k >= 1 the centre sample is 0:
/// the phase is undefined at u = 0 and zero is the only value that keeps the
/// rotation identity exact on the grid.
struct AtomicFilter {
  int ring = 0;
  int freq = 0;
  int size = 0;
  std::vector<std::complex<double>> samples;  // size*size, row-major
  double norm = 1.0;  // L2 norm of the raw samples before normalization
};

struct SteerableBasis {
  int size = 0;
  double sigma = 0.0;
  bool normalized = true;
  FrequencySpec spec;
  std::vector<AtomicFilter> filters;  // ordered by ring, then frequency

  int coefficient_count() const { return static_cast<int>(filters.size()); }
  const AtomicFilter& filter(int ring, int freq) const;
};

/// Gaussian radial profile exp(-(r - j)^2 / (2 sigma^2)) with mode at ring j.
double radial_profile(int ring, double sigma, double r);

/// Samples one atomic filter per (j, k) pair of the spec on the centred
/// integer grid. With normalize set, each filter is scaled to unit L2 norm
/// (the raw norm is kept on the filter).
SteerableBasis build_basis(const FrequencySpec& spec, int size, double sigma,
                           bool normalize = true);

/// Rotating an atomic filter by theta is the pure phase e^{-ik theta}.
std::vector<std::complex<double>> rotate_atomic(const AtomicFilter& f,
                                                double theta);

/// Re( sum_jk w_jk e^{-ik theta} psi_jk ): the real steerable filter at
/// orientation theta. Weights are ordered like basis.filters.
std::vector<double> synthesize_filter(
    std::span<const std::complex<double>> weights, const SteerableBasis& basis,
    double theta);

/// Real parameters per (out, in) filter pair. Hidden layers learn an
/// independent coefficient set per coset, multiplying the count by the
/// group order.
long param_count(const FrequencySpec& spec, int group_order, bool hidden);

}  // namespace dsf
