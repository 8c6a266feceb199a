// Checkpoint container:
//   8 bytes  magic "TSFMCKPT"
//   u32      format version
//   u64      config text length, then the text (serialize_model_config)
//   u64      tensor count
//   per tensor: u32 name length, name, u64 rows, u64 cols,
//               rows * cols IEEE-754 doubles in row-major order
// All integers and doubles are little-endian.

#include "tsformer/model.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tsformer {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'S', 'F', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (1u << 24)) throw CheckpointError(std::string("checkpoint: implausible length for ") + what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw CheckpointError("model config: bad integer for " + std::string(key));
  }
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw CheckpointError("model config: bad number for " + std::string(key));
  }
  return v;
}

}  // namespace

std::string serialize_model_config(const ModelConfig& c) {
  std::ostringstream os;
  os << "length=" << c.length << '\n'
     << "dim=" << c.dim << '\n'
     << "classes=" << c.classes << '\n'
     << "num_heads=" << c.num_heads << '\n'
     << "head_size=" << c.head_size << '\n'
     << "num_blocks=" << c.num_blocks << '\n'
     << "ff_dim=" << c.ff_dim << '\n'
     << "mlp_units=";
  for (std::size_t i = 0; i < c.mlp_units.size(); ++i) os << (i ? "," : "") << c.mlp_units[i];
  os << '\n'
     << "dropout=" << format_real(c.dropout) << '\n'
     << "mlp_dropout=" << format_real(c.mlp_dropout) << '\n'
     << "layernorm_epsilon=" << format_real(c.layernorm_epsilon) << '\n'
     << "norm_placement=" << to_string(c.norm_placement) << '\n';
  return os.str();
}

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig c;
  std::size_t seen = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw CheckpointError("model config: malformed line");
    const std::string_view key = line.substr(0, eq);
    const std::string_view val = line.substr(eq + 1);
    ++seen;
    if (key == "length") c.length = parse_count(key, val);
    else if (key == "dim") c.dim = parse_count(key, val);
    else if (key == "classes") c.classes = parse_count(key, val);
    else if (key == "num_heads") c.num_heads = parse_count(key, val);
    else if (key == "head_size") c.head_size = parse_count(key, val);
    else if (key == "num_blocks") c.num_blocks = parse_count(key, val);
    else if (key == "ff_dim") c.ff_dim = parse_count(key, val);
    else if (key == "mlp_units") {
      c.mlp_units.clear();
      std::string_view rest = val;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        c.mlp_units.push_back(parse_count(key, rest.substr(0, comma)));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
    } else if (key == "dropout") c.dropout = parse_double(key, val);
    else if (key == "mlp_dropout") c.mlp_dropout = parse_double(key, val);
    else if (key == "layernorm_epsilon") c.layernorm_epsilon = parse_double(key, val);
    else if (key == "norm_placement") c.norm_placement = parse_norm_placement(val);
    else throw CheckpointError("model config: unknown key " + std::string(key));
  }
  if (seen != 12) throw CheckpointError("model config: incomplete");
  return c;
}

void EncoderClassifier::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string cfg = serialize_model_config(config_);
  put<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  put<std::uint64_t>(out, params_.size());
  for (const ParamTensor& p : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

void EncoderClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  save(out);
}

EncoderClassifier EncoderClassifier::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto cfg_len = get<std::uint64_t>(in, "config length");
  EncoderClassifier model(parse_model_config(get_string(in, cfg_len, "config")));
  model.build_parameters(nullptr);

  const auto count = get<std::uint64_t>(in, "tensor count");
  if (count != model.params_.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(model.params_.size()));
  }
  for (ParamTensor& p : model.params_) {
    const auto name_len = get<std::uint32_t>(in, "tensor name length");
    const std::string name = get_string(in, name_len, "tensor name");
    if (name != p.name) throw CheckpointError("expected tensor " + p.name + ", found " + name);
    const auto rows = get<std::uint64_t>(in, "rows");
    const auto cols = get<std::uint64_t>(in, "cols");
    if (rows != static_cast<std::uint64_t>(p.value.rows()) ||
        cols != static_cast<std::uint64_t>(p.value.cols())) {
      throw CheckpointError("tensor " + name + " has unexpected shape");
    }
    if (!in.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(double) * rows * cols))) {
      throw CheckpointError("checkpoint truncated in tensor " + name);
    }
  }
  return model;
}

EncoderClassifier EncoderClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return load(in);
}

EncoderClassifier EncoderClassifier::load(const std::filesystem::path& path,
                                          const ModelConfig& expected) {
  EncoderClassifier model = load(path);
  if (!(model.config() == expected)) {
    throw CheckpointError("checkpoint config mismatch:\nstored:\n" +
                          serialize_model_config(model.config()) + "expected:\n" +
                          serialize_model_config(expected));
  }
  return model;
}

}  // namespace tsformer
