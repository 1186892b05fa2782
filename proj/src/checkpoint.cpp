#include "fairtrans/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fairtrans/util.hpp"

namespace fairtrans {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& name;

  void need(size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated: " + name);
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointEntry>& entries) {
  std::string out;
  out += "FTNS";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(entries.size()));
  for (const CheckpointEntry& e : entries) {
    put_u32(out, static_cast<uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<uint32_t>(e.dims.size()));
    size_t n = 1;
    for (size_t d : e.dims) {
      put_u64(out, static_cast<uint64_t>(d));
      n *= d;
    }
    if (n != e.values.size()) {
      throw std::invalid_argument("checkpoint entry '" + e.name + "': dims do not match values");
    }
    out.append(reinterpret_cast<const char*>(e.values.data()), e.values.size() * 8);
  }
  atomic_write_file(path, out);
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::string buf = read_text_file(path);
  std::string pname = path.string();
  Reader r{buf, 0, pname};
  if (r.bytes(4) != "FTNS") throw std::runtime_error("bad checkpoint magic: " + pname);
  uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(str_format("unsupported checkpoint version %u: %s", version,
                                        pname.c_str()));
  }
  uint32_t count = r.u32();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    uint32_t name_len = r.u32();
    e.name = r.bytes(name_len);
    uint32_t rank = r.u32();
    size_t n = 1;
    e.dims.resize(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      e.dims[d] = static_cast<size_t>(r.u64());
      n *= e.dims[d];
    }
    e.values.resize(n);
    r.need(n * 8);
    std::memcpy(e.values.data(), buf.data() + r.pos, n * 8);
    r.pos += n * 8;
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<CheckpointEntry> checkpoint_entries(const ParameterSet& ps,
                                                const std::string& prefix) {
  std::vector<CheckpointEntry> out;
  for (const auto& [name, t] : ps.tensors()) {
    CheckpointEntry e;
    e.name = prefix + name;
    e.dims = t.shape();
    e.values.assign(t.values().begin(), t.values().end());
    out.push_back(std::move(e));
  }
  return out;
}

void load_checkpoint_entries(ParameterSet& ps, const std::vector<CheckpointEntry>& entries,
                             const std::string& prefix) {
  size_t loaded = 0;
  for (const CheckpointEntry& e : entries) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    std::string name = e.name.substr(prefix.size());
    Tensor& t = ps.at(name);
    if (t.shape() != e.dims) {
      throw std::runtime_error(str_format("checkpoint entry '%s': shape %s does not match %s",
                                          e.name.c_str(), shape_str(e.dims).c_str(),
                                          shape_str(t.shape()).c_str()));
    }
    auto vals = t.values_mut();
    std::copy(e.values.begin(), e.values.end(), vals.begin());
    ++loaded;
  }
  if (loaded != ps.tensors().size()) {
    throw std::runtime_error(str_format(
        "checkpoint prefix '%s': loaded %zu of %zu parameters", prefix.c_str(), loaded,
        ps.tensors().size()));
  }
}

}  // namespace fairtrans
