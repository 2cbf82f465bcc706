#include "dsfcnn/basis.hpp"

#include <cmath>
#include <sstream>

namespace dsf {

int FrequencySpec::coefficient_count() const {
  int n = 0;
  for (const auto& [j, a] : entries) n += a + 1;
  return n;
}

long FrequencySpec::real_param_count() const {
  long n = 0;
  for (const auto& [j, a] : entries) n += 1 + 2L * a;
  return n;
}

void FrequencySpec::validate(int filter_size) const {
  if (entries.empty()) throw InvalidArgument("FrequencySpec: empty");
  if (filter_size < 3 || filter_size % 2 == 0)
    throw InvalidArgument("FrequencySpec: filter size must be odd and >= 3");
  int expect = 0;
  for (const auto& [j, a] : entries) {
    if (j != expect)
      throw InvalidArgument("FrequencySpec: ring indices must increase from 0");
    if (a < 0) throw InvalidArgument("FrequencySpec: negative frequency cap");
    if (2 * j + 1 > filter_size)
      throw InvalidArgument("FrequencySpec: ring " + std::to_string(j) +
                            " exceeds grid radius for size " +
                            std::to_string(filter_size));
    ++expect;
  }
}

std::vector<std::string> FrequencySpec::warnings() const {
  std::vector<std::string> notes;
  if (!entries.empty() && entries.front().first == 0 &&
      entries.front().second > 0) {
    notes.push_back(
        "ring 0 carries k >= 1 frequencies; their centre sample is zeroed "
        "(phase singularity), leaving little usable support");
  }
  return notes;
}

FrequencySpec FrequencySpec::parse(const std::string& text) {
  FrequencySpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw InvalidArgument("FrequencySpec: expected j:A pairs, got '" + item +
                            "'");
    try {
      const int j = std::stoi(item.substr(0, colon));
      const int a = std::stoi(item.substr(colon + 1));
      spec.entries.emplace_back(j, a);
    } catch (const std::exception&) {
      throw InvalidArgument("FrequencySpec: unparsable entry '" + item + "'");
    }
  }
  if (spec.entries.empty())
    throw InvalidArgument("FrequencySpec: empty spec string");
  return spec;
}

std::string FrequencySpec::to_string() const {
  std::string out;
  for (const auto& [j, a] : entries) {
    if (!out.empty()) out += ',';
    out += std::to_string(j) + ':' + std::to_string(a);
  }
  return out;
}

const AtomicFilter& SteerableBasis::filter(int ring, int freq) const {
  for (const auto& f : filters)
    if (f.ring == ring && f.freq == freq) return f;
  throw InvalidArgument("SteerableBasis: no filter (j=" + std::to_string(ring) +
                        ", k=" + std::to_string(freq) + ")");
}

double radial_profile(int ring, double sigma, double r) {
  if (sigma <= 0.0) throw InvalidArgument("radial_profile: sigma must be > 0");
  if (r < 0.0) throw InvalidArgument("radial_profile: r must be >= 0");
  const double d = r - static_cast<double>(ring);
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

SteerableBasis build_basis(const FrequencySpec& spec, int size, double sigma,
                           bool normalize) {
  spec.validate(size);
  if (sigma <= 0.0) throw InvalidArgument("build_basis: sigma must be > 0");

  SteerableBasis basis;
  basis.size = size;
  basis.sigma = sigma;
  basis.normalized = normalize;
  basis.spec = spec;

  const double c = 0.5 * static_cast<double>(size - 1);
  for (const auto& [j, a] : spec.entries) {
    for (int k = 0; k <= a; ++k) {
      AtomicFilter f;
      f.ring = j;
      f.freq = k;
      f.size = size;
      f.samples.resize(static_cast<size_t>(size) * size);
      double sq = 0.0;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double re = static_cast<double>(x) - c;
          const double im = c - static_cast<double>(y);
          const double r = std::hypot(re, im);
          std::complex<double> v;
          if (k == 0) {
            v = {radial_profile(j, sigma, r), 0.0};
          } else if (r == 0.0) {
            v = {0.0, 0.0};  // centre sample: phase singularity
          } else {
            const double phi = std::atan2(im, re);
            const double tau = radial_profile(j, sigma, r);
            v = {tau * std::cos(k * phi), tau * std::sin(k * phi)};
          }
          f.samples[static_cast<size_t>(y) * size + x] = v;
          sq += std::norm(v);
        }
      }
      f.norm = std::sqrt(sq);
      if (normalize && f.norm > 0.0) {
        for (auto& v : f.samples) v /= f.norm;
      }
      basis.filters.push_back(std::move(f));
    }
  }
  return basis;
}

std::vector<std::complex<double>> rotate_atomic(const AtomicFilter& f,
                                                double theta) {
  const std::complex<double> phase =
      std::polar(1.0, -static_cast<double>(f.freq) * theta);
  std::vector<std::complex<double>> out(f.samples.size());
  for (size_t i = 0; i < f.samples.size(); ++i) out[i] = phase * f.samples[i];
  return out;
}

std::vector<double> synthesize_filter(
    std::span<const std::complex<double>> weights, const SteerableBasis& basis,
    double theta) {
  if (weights.size() != basis.filters.size())
    throw InvalidArgument("synthesize_filter: weight count " +
                          std::to_string(weights.size()) +
                          " does not match basis size " +
                          std::to_string(basis.filters.size()));
  const size_t area = static_cast<size_t>(basis.size) * basis.size;
  std::vector<double> out(area, 0.0);
  for (size_t m = 0; m < basis.filters.size(); ++m) {
    const AtomicFilter& f = basis.filters[m];
    const std::complex<double> wp =
        weights[m] * std::polar(1.0, -static_cast<double>(f.freq) * theta);
    for (size_t i = 0; i < area; ++i) {
      // Re(wp * psi) = Re(wp)Re(psi) - Im(wp)Im(psi)
      out[i] += wp.real() * f.samples[i].real() -
                wp.imag() * f.samples[i].imag();
    }
  }
  return out;
}

long param_count(const FrequencySpec& spec, int group_order, bool hidden) {
  if (group_order < 1) throw InvalidArgument("param_count: group order >= 1");
  const long base = spec.real_param_count();
  return hidden ? base * group_order : base;
}

}  // namespace dsf
