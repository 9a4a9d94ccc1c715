#include "mprl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <vector>

#include "mprl/error.hpp"

namespace mprl {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'R', 'L'};
constexpr uint32_t kVersion = 1;

struct Fnv1a64 {
  uint64_t state = 0xcbf29ce484222325ULL;
  void update(const void* data, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state ^= bytes[i];
      state *= 0x100000001b3ULL;
    }
  }
};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    require(out_.good(), ErrorKind::Io, "cannot open checkpoint for writing: " + path);
  }
  void raw(const void* data, size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void hashed(const void* data, size_t n) {
    hash_.update(data, n);
    raw(data, n);
  }
  void u32(uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    hashed(b, 4);
  }
  void u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    hashed(b, 8);
  }
  void u64_raw(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(b, 8);
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  uint64_t digest() const { return hash_.state; }
  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
  Fnv1a64 hash_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    require(in_.good(), ErrorKind::Io, "cannot open checkpoint: " + path);
  }
  void raw(void* data, size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), ErrorKind::Corrupt,
            "checkpoint truncated");
  }
  void hashed(void* data, size_t n) {
    raw(data, n);
    hash_.update(data, n);
  }
  uint32_t u32() {
    unsigned char b[4];
    hashed(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    unsigned char b[8];
    hashed(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64_raw() {
    unsigned char b[8];
    raw(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  uint64_t digest() const { return hash_.state; }

 private:
  std::ifstream in_;
  Fnv1a64 hash_;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const Vocab& vocab, const std::string& path) {
  const ModelConfig& cfg = params.config;
  require(cfg.vocab_size == vocab.size(), ErrorKind::Contract,
          "save_checkpoint: vocabulary size does not match the model config");
  Writer w(path);
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<uint32_t>(cfg.n_layers));
  w.u32(static_cast<uint32_t>(cfg.d_model));
  w.u32(static_cast<uint32_t>(cfg.n_heads));
  w.u32(static_cast<uint32_t>(cfg.d_ff));
  w.u32(static_cast<uint32_t>(cfg.vocab_size));
  w.u32(static_cast<uint32_t>(cfg.max_seq_len));
  w.u64(cfg.init_seed);

  const auto& symbols = vocab.symbols();
  w.u32(static_cast<uint32_t>(symbols.size()));
  for (const std::string& s : symbols) {
    require(s.size() < 256, ErrorKind::Contract, "save_checkpoint: symbol too long");
    unsigned char len = static_cast<unsigned char>(s.size());
    w.hashed(&len, 1);
    w.hashed(s.data(), s.size());
  }

  w.u64(static_cast<uint64_t>(params.parameter_count()));
  for (const Tensor* t : params.ordered())
    for (double v : t->values()) w.f32(static_cast<float>(v));

  w.u64_raw(w.digest());
  require(w.good(), ErrorKind::Io, "checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Corrupt, "checkpoint: bad magic bytes");
  uint32_t version = r.u32();
  require(version == kVersion, ErrorKind::Corrupt,
          "checkpoint: unsupported version " + std::to_string(version));

  ModelConfig cfg;
  cfg.n_layers = static_cast<int>(r.u32());
  cfg.d_model = static_cast<int>(r.u32());
  cfg.n_heads = static_cast<int>(r.u32());
  cfg.d_ff = static_cast<int>(r.u32());
  cfg.vocab_size = static_cast<int>(r.u32());
  cfg.max_seq_len = static_cast<int>(r.u32());
  cfg.init_seed = r.u64();

  uint32_t n_symbols = r.u32();
  require(n_symbols == static_cast<uint32_t>(cfg.vocab_size), ErrorKind::Corrupt,
          "checkpoint: symbol count does not match vocab_size");
  std::vector<std::string> symbols;
  symbols.reserve(n_symbols);
  for (uint32_t i = 0; i < n_symbols; ++i) {
    unsigned char len = 0;
    r.hashed(&len, 1);
    std::string s(len, '\0');
    if (len > 0) r.hashed(s.data(), len);
    symbols.push_back(std::move(s));
  }

  std::optional<Vocab> vocab;
  try {
    cfg.validate();
    vocab = Vocab::from_symbols(symbols);
  } catch (const Error& e) {
    fail(ErrorKind::Corrupt, std::string("checkpoint: invalid structure: ") + e.what());
  }

  ModelParams params = make_param_layout(cfg);
  uint64_t declared = r.u64();
  require(declared == static_cast<uint64_t>(params.parameter_count()), ErrorKind::Corrupt,
          "checkpoint: parameter count does not match the config");
  for (Tensor* t : params.ordered())
    for (double& v : t->values()) v = static_cast<double>(r.f32());

  uint64_t computed = r.digest();
  uint64_t stored = r.u64_raw();
  require(stored == computed, ErrorKind::Corrupt, "checkpoint: checksum mismatch");
  return LoadedCheckpoint{std::move(params), std::move(*vocab)};
}

}  // namespace mprl
