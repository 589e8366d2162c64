#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gsn/errors.hpp"
#include "gsn/params.hpp"
#include "gsn/tensor.hpp"

namespace gsn {

// Archive layout: a format-version line, one `name dim dim...` line per
// tensor in order, a blank separator line, then the raw little-endian
// payload. Version 1 stores 32-bit floats (the interchange format), version
// 2 stores 64-bit doubles (used where resuming must be bit-exact).

inline constexpr int kCheckpointF32 = 1;
inline constexpr int kCheckpointF64 = 2;

template <typename T>
struct ArchiveEntry {
  std::string name;
  Tensor<T> tensor;
};

namespace detail {

template <typename Store, typename T>
void write_payload(std::ostream& out, const std::vector<std::pair<std::string, const Tensor<T>*>>& entries) {
  char buf[sizeof(Store)];
  for (const auto& [name, tensor] : entries) {
    (void)name;
    for (std::int64_t i = 0; i < tensor->size(); ++i) {
      const Store v = static_cast<Store>((*tensor)[i]);
      std::memcpy(buf, &v, sizeof(Store));
      out.write(buf, sizeof(Store));
    }
  }
}

template <typename Store, typename T>
void read_payload(std::istream& in, std::vector<ArchiveEntry<T>>& entries) {
  char buf[sizeof(Store)];
  for (ArchiveEntry<T>& e : entries) {
    for (std::int64_t i = 0; i < e.tensor.size(); ++i) {
      in.read(buf, sizeof(Store));
      if (!in) throw CheckpointCorruptError("payload shorter than the header promises");
      Store v;
      std::memcpy(&v, buf, sizeof(Store));
      e.tensor[i] = static_cast<T>(v);
    }
  }
  // Trailing bytes mean the header does not describe this payload either.
  in.peek();
  if (!in.eof()) throw CheckpointCorruptError("payload longer than the header promises");
}

}  // namespace detail

template <typename T>
void write_archive(std::ostream& out,
                   const std::vector<std::pair<std::string, const Tensor<T>*>>& entries,
                   int version) {
  if (version != kCheckpointF32 && version != kCheckpointF64)
    throw CheckpointVersionError("unknown archive version " + std::to_string(version));
  out << version << '\n';
  for (const auto& [name, tensor] : entries) {
    out << name;
    for (int d = 0; d < tensor->rank(); ++d) out << ' ' << tensor->dim(d);
    out << '\n';
  }
  out << '\n';
  if (version == kCheckpointF32)
    detail::write_payload<float>(out, entries);
  else
    detail::write_payload<double>(out, entries);
}

template <typename T>
std::vector<ArchiveEntry<T>> read_archive(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointCorruptError("empty archive");
  int version = 0;
  try {
    std::size_t used = 0;
    version = std::stoi(line, &used);
    if (used != line.size()) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw CheckpointCorruptError("malformed version line: " + line);
  }
  if (version != kCheckpointF32 && version != kCheckpointF64)
    throw CheckpointVersionError("unsupported archive version " + std::to_string(version));

  std::vector<ArchiveEntry<T>> entries;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    std::istringstream fields(line);
    ArchiveEntry<T> e;
    fields >> e.name;
    Shape shape;
    int d;
    while (fields >> d) shape.push_back(d);
    if (e.name.empty() || !fields.eof()) throw CheckpointCorruptError("bad header line: " + line);
    if (shape.empty()) throw CheckpointCorruptError("header line without dimensions: " + line);
    for (int dim : shape)
      if (dim < 1) throw CheckpointCorruptError("non-positive dimension in header: " + line);
    e.tensor = Tensor<T>(shape);
    entries.push_back(std::move(e));
  }
  if (version == kCheckpointF32)
    detail::read_payload<float>(in, entries);
  else
    detail::read_payload<double>(in, entries);
  return entries;
}

/// Load archive entries into an existing registry. The archive may carry
/// extra trailing entries (optimizer state); every registry parameter must be
/// present, in registration order, with matching shape.
template <typename T>
void load_into_registry(const std::vector<ArchiveEntry<T>>& entries, ParamRegistry<T>& reg) {
  if (static_cast<int>(entries.size()) < reg.count())
    throw CheckpointVersionError("archive holds fewer tensors than the model expects");
  for (int i = 0; i < reg.count(); ++i) {
    Param<T>& p = reg.at(i);
    const ArchiveEntry<T>& e = entries[static_cast<std::size_t>(i)];
    if (e.name != p.name)
      throw CheckpointVersionError("archive entry '" + e.name + "' where model expects '" + p.name + "'");
    if (!e.tensor.same_shape(p.value))
      throw CheckpointVersionError("shape mismatch for parameter " + p.name);
    p.value = e.tensor;
  }
}

template <typename T>
void save_registry_file(const std::string& path, const ParamRegistry<T>& reg, int version) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write checkpoint: " + path);
  std::vector<std::pair<std::string, const Tensor<T>*>> entries;
  for (const Param<T>& p : reg) entries.push_back({p.name, &p.value});
  write_archive(out, entries, version);
}

template <typename T>
std::vector<ArchiveEntry<T>> read_archive_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open checkpoint: " + path);
  return read_archive<T>(in);
}

template <typename T>
void load_registry_file(const std::string& path, ParamRegistry<T>& reg) {
  load_into_registry(read_archive_file<T>(path), reg);
}

}  // namespace gsn
