#include "dsfcnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace dsf {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'F', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("checkpoint: truncated u32");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw FormatError("checkpoint: truncated u64");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

struct Entry {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

void write_entry(std::ostream& out, const std::string& name,
                 const std::vector<std::uint64_t>& dims,
                 const std::vector<double>& data) {
  put_u64(out, name.size());
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, dims.size());
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    put_u64(out, d);
    n *= d;
  }
  if (n != data.size()) throw StateError("checkpoint: entry size bug");
  for (double v : data) put_f64(out, v);
}

std::pair<std::string, Entry> read_entry(std::istream& in) {
  const std::uint64_t name_len = get_u64(in);
  if (name_len > 4096) throw FormatError("checkpoint: implausible name length");
  std::string name(name_len, '\0');
  in.read(name.data(), static_cast<std::streamsize>(name_len));
  if (!in) throw FormatError("checkpoint: truncated name");
  Entry e;
  const std::uint64_t rank = get_u64(in);
  if (rank > 16) throw FormatError("checkpoint: implausible rank");
  std::uint64_t n = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    e.dims.push_back(get_u64(in));
    if (e.dims.back() > (1ull << 32))
      throw FormatError("checkpoint: implausible dimension");
    n *= e.dims.back();
  }
  if (n > (1ull << 32)) throw FormatError("checkpoint: implausible entry size");
  e.data.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) e.data[i] = get_f64(in);
  return {std::move(name), std::move(e)};
}

std::vector<std::uint64_t> to_u64(const std::vector<long>& dims) {
  std::vector<std::uint64_t> out;
  for (long d : dims) out.push_back(static_cast<std::uint64_t>(d));
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState* adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);

  const auto& params = model.params().all();
  put_u64(out, params.size());
  for (const auto& p : params) write_entry(out, p->name, to_u64(p->dims), p->value);

  // State section: batch-norm running moments plus optional Adam moments.
  std::uint64_t count = 0;
  for (const auto& [key, bn] : model.bn_states()) {
    (void)key;
    (void)bn;
    count += 3;
  }
  if (adam != nullptr && adam->initialized) count += 1 + 2 * params.size();
  put_u64(out, count);
  for (const auto& [key, bn] : model.bn_states()) {
    write_entry(out, "bn." + key + ".mean",
                {static_cast<std::uint64_t>(bn.running_mean.size())},
                bn.running_mean);
    write_entry(out, "bn." + key + ".var",
                {static_cast<std::uint64_t>(bn.running_var.size())},
                bn.running_var);
    write_entry(out, "bn." + key + ".init", {1},
                {bn.initialized ? 1.0 : 0.0});
  }
  if (adam != nullptr && adam->initialized) {
    write_entry(out, "adam.step", {1}, {static_cast<double>(adam->step)});
    for (size_t i = 0; i < params.size(); ++i) {
      write_entry(out, "adam.m." + params[i]->name,
                  {static_cast<std::uint64_t>(adam->m[i].size())}, adam->m[i]);
      write_entry(out, "adam.v." + params[i]->name,
                  {static_cast<std::uint64_t>(adam->v[i].size())}, adam->v[i]);
    }
  }
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, Model& model, AdamState* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));

  const std::uint64_t param_count = get_u64(in);
  if (param_count != model.params().all().size())
    throw DataError("checkpoint: parameter count mismatch");
  for (std::uint64_t i = 0; i < param_count; ++i) {
    auto [name, entry] = read_entry(in);
    Param* p = model.params().find(name);
    if (p == nullptr)
      throw DataError("checkpoint: unknown parameter '" + name + "'");
    if (entry.data.size() != p->value.size())
      throw DataError("checkpoint: size mismatch for '" + name + "'");
    p->value = std::move(entry.data);
  }

  const std::uint64_t state_count = get_u64(in);
  std::map<std::string, Entry> state;
  for (std::uint64_t i = 0; i < state_count; ++i) {
    auto [name, entry] = read_entry(in);
    state.emplace(std::move(name), std::move(entry));
  }

  for (auto& [key, bn] : model.bn_states()) {
    const auto mi = state.find("bn." + key + ".mean");
    const auto vi = state.find("bn." + key + ".var");
    const auto ii = state.find("bn." + key + ".init");
    if (mi == state.end() || vi == state.end() || ii == state.end())
      throw DataError("checkpoint: missing batch-norm state for '" + key + "'");
    bn.running_mean = mi->second.data;
    bn.running_var = vi->second.data;
    bn.initialized = ii->second.data.at(0) != 0.0;
  }

  if (adam != nullptr) {
    const auto si = state.find("adam.step");
    if (si == state.end()) {
      *adam = AdamState{};
      return;
    }
    adam->init_like(model.params());
    adam->step = static_cast<long>(si->second.data.at(0));
    const auto& params = model.params().all();
    for (size_t i = 0; i < params.size(); ++i) {
      const auto mi = state.find("adam.m." + params[i]->name);
      const auto vi = state.find("adam.v." + params[i]->name);
      if (mi == state.end() || vi == state.end())
        throw DataError("checkpoint: missing Adam state for '" +
                        params[i]->name + "'");
      if (mi->second.data.size() != params[i]->value.size() ||
          vi->second.data.size() != params[i]->value.size())
        throw DataError("checkpoint: Adam state size mismatch");
      adam->m[i] = mi->second.data;
      adam->v[i] = vi->second.data;
    }
  }
}

}  // namespace dsf
