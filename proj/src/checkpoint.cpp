#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "kagnn/error.hpp"
#include "kagnn/train.hpp"

namespace kagnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'K', 'A', 'G', 'N', 'N', 'C', 'P', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_i64(std::string& out, int64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  int64_t i64() {
    need(8);
    int64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
  void doubles(double* dst, size_t count) {
    need(count * 8);
    std::memcpy(dst, buf.data() + pos, count * 8);
    pos += count * 8;
  }
};

}  // namespace

void checkpoint_save(Model& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kVersion);

  std::string spec = model.spec().to_json();
  put_u32(out, static_cast<uint32_t>(spec.size()));
  out += spec;
  put_i64(out, model.in_dim());
  put_i64(out, model.out_dim());

  auto bufs = model.state_buffers();
  put_u32(out, static_cast<uint32_t>(bufs.size()));
  for (const auto& b : bufs) {
    put_u32(out, static_cast<uint32_t>(b.name.size()));
    out += b.name;
    put_u32(out, static_cast<uint32_t>(b.shape.size()));
    for (int64_t d : b.shape) put_i64(out, d);
    out.append(reinterpret_cast<const char*>(b.data), static_cast<size_t>(b.numel) * 8);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: write failed: " + path);
}

Model checkpoint_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf};
  if (r.bytes(8) != std::string(kMagic, 8)) throw IoError("checkpoint: bad magic bytes");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));

  std::string spec_json = r.bytes(r.u32());
  ModelSpec spec;
  try {
    spec = ModelSpec::from_json(spec_json);
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: invalid embedded spec: ") + e.what());
  }
  int64_t in_dim = r.i64();
  int64_t out_dim = r.i64();
  if (in_dim < 1 || out_dim < 1) throw IoError("checkpoint: invalid model dimensions");

  // Parse every buffer before touching any model state.
  struct FileBuffer {
    Shape shape;
    std::vector<double> data;
  };
  std::map<std::string, FileBuffer> file_bufs;
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    uint32_t ndim = r.u32();
    if (ndim > 8) throw IoError("checkpoint: implausible buffer rank");
    FileBuffer fb;
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      int64_t dim = r.i64();
      if (dim < 0 || dim > (1 << 28)) throw IoError("checkpoint: implausible buffer dimension");
      fb.shape.push_back(dim);
      numel *= dim;
    }
    fb.data.resize(static_cast<size_t>(numel));
    r.doubles(fb.data.data(), static_cast<size_t>(numel));
    if (!file_bufs.emplace(std::move(name), std::move(fb)).second)
      throw IoError("checkpoint: duplicate buffer name");
  }
  if (r.pos != buf.size()) throw IoError("checkpoint: trailing bytes");

  Model model(spec, in_dim, out_dim, 0);
  auto bufs = model.state_buffers();
  if (bufs.size() != file_bufs.size())
    throw IoError("checkpoint: buffer count mismatch against embedded spec");
  for (const auto& b : bufs) {
    auto it = file_bufs.find(b.name);
    if (it == file_bufs.end()) throw IoError("checkpoint: missing buffer '" + b.name + "'");
    if (it->second.shape != b.shape)
      throw IoError("checkpoint: shape mismatch for buffer '" + b.name + "'");
  }
  for (const auto& b : bufs) {
    const auto& fb = file_bufs[b.name];
    std::copy(fb.data.begin(), fb.data.end(), b.data);
  }
  return model;
}

}  // namespace kagnn
