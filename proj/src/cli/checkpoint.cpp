#include "gmnmt/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gmnmt/cli/run_config.hpp"
#include "gmnmt/core/errors.hpp"

namespace gmnmt {

namespace {

constexpr char kMagic[8] = {'G', 'M', 'N', 'M', 'T', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void array(const std::vector<T>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}
  template <typename T>
  T get() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  std::string bytes() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 24)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  template <typename T>
  std::vector<T> array(std::size_t n) {
    if (n > (std::size_t{1} << 32)) fail("implausible array length");
    std::vector<T> v(n);
    read(v.data(), n * sizeof(T));
    return v;
  }
  [[noreturn]] void fail(const std::string& what) { throw DataError(origin_ + ": " + what); }

 private:
  void read(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated checkpoint");
  }
  std::istream& in_;
  std::string origin_;
};

}  // namespace

Checkpoint make_checkpoint(const Model& model, const std::map<std::string, std::string>& config,
                           const Adam* optimizer) {
  Checkpoint c;
  c.config = config;
  for (const auto& p : model.parameters().entries()) {
    CheckpointTensor t{p.name, p.tensor.shape(), {}};
    t.values.reserve(p.tensor.numel());
    for (double v : p.tensor.data()) t.values.push_back(static_cast<float>(v));
    c.tensors.push_back(std::move(t));
  }
  if (optimizer) c.optimizer = OptimizerSnapshot{optimizer->steps(), optimizer->first_moments(), optimizer->second_moments()};
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.bytes(format_key_values(checkpoint.config));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.tensors.size()));
    for (const auto& t : checkpoint.tensors) {
      w.bytes(t.name);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
      for (std::size_t d : t.shape) w.put<std::uint64_t>(d);
      w.array(t.values);
    }
    w.put<std::uint8_t>(checkpoint.optimizer ? 1 : 0);
    if (checkpoint.optimizer) {
      w.put<std::uint64_t>(checkpoint.optimizer->steps);
      for (const auto& m : checkpoint.optimizer->m) w.array(m);
      for (const auto& v : checkpoint.optimizer->v) w.array(v);
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  for (char& c : magic) c = r.get<char>();
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config = parse_key_values(r.bytes(), path.string());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.bytes();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("implausible rank for " + t.name);
    for (std::uint32_t k = 0; k < rank; ++k) t.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    t.values = r.array<float>(shape_numel(t.shape));
    c.tensors.push_back(std::move(t));
  }
  if (r.get<std::uint8_t>() != 0) {
    OptimizerSnapshot s;
    s.steps = r.get<std::uint64_t>();
    for (const auto& t : c.tensors) s.m.push_back(r.array<double>(t.values.size()));
    for (const auto& t : c.tensors) s.v.push_back(r.array<double>(t.values.size()));
    c.optimizer = std::move(s);
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after checkpoint payload");
  return c;
}

void load_parameters(Model& model, const Checkpoint& checkpoint) {
  auto& entries = model.parameters().entries();
  const std::size_t n = std::max(entries.size(), checkpoint.tensors.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= checkpoint.tensors.size())
      throw CheckpointMismatch("parameter " + entries[i].name + " is missing from the checkpoint");
    const auto& t = checkpoint.tensors[i];
    if (i >= entries.size()) throw CheckpointMismatch("checkpoint parameter " + t.name + " does not exist in the model");
    if (t.name != entries[i].name)
      throw CheckpointMismatch("parameter " + entries[i].name + " expected, checkpoint has " + t.name);
    if (t.shape != entries[i].tensor.shape())
      throw CheckpointMismatch("parameter " + t.name + " has shape " + shape_string(t.shape) + " in the checkpoint but " +
                               shape_string(entries[i].tensor.shape()) + " in the model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto dst = entries[i].tensor.mutable_data();
    const auto& src = checkpoint.tensors[i].values;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<double>(src[k]);
  }
}

}  // namespace gmnmt
