#include "bgg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bgg/errors.hpp"
#include "bgg/run_config.hpp"

namespace bgg {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as raw little-endian buffers");

constexpr char kMagic[4] = {'B', 'G', 'G', '1'};
constexpr std::uint64_t kMaxString = 1ULL << 30;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string32(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_string64(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint truncated");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > kMaxString) throw IoError("checkpoint: implausible field length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint truncated");
  return s;
}

void push_params(std::vector<NamedTensor>& out, const ParamList& params) {
  for (const auto& p : params) out.push_back({p->name, p->value});
}

void push_adam(std::vector<NamedTensor>& out, const std::string& prefix, const ParamList& params,
               const AdamState& state) {
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({prefix + ".m/" + params[i]->name, state.m[i]});
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back({prefix + ".v/" + params[i]->name, state.v[i]});
}

Tensor take(const TensorFile& file, const std::string& name, const Tensor& like) {
  const Tensor* t = file.find(name);
  if (!t) throw MismatchError("checkpoint lacks tensor '" + name + "'");
  if (t->shape() != like.shape() || t->dtype() != like.dtype()) {
    throw MismatchError("checkpoint tensor '" + name + "' has shape " + shape_str(t->shape()) +
                        ", expected " + shape_str(like.shape()));
  }
  return t->clone();
}

}  // namespace

const Tensor* TensorFile::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

void write_tensor_file(std::ostream& out, const TensorFile& file) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string64(out, file.config_json);
  put<std::uint64_t>(out, file.step);
  put<std::uint64_t>(out, file.g_adam_step);
  put<std::uint64_t>(out, file.d_adam_step);
  put_string64(out, file.rng_state);
  put<std::uint64_t>(out, file.tensors.size());
  for (const auto& [name, t] : file.tensors) {
    put_string32(out, name);
    put<std::uint8_t>(out, t.dtype() == DType::f32 ? 0 : 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    dispatch(t.dtype(), [&](auto zero) {
      using T = decltype(zero);
      const auto data = t.template data<T>();
      out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    });
  }
}

TensorFile read_tensor_file(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  TensorFile file;
  file.config_json = get_bytes(in, get<std::uint64_t>(in));
  file.step = get<std::uint64_t>(in);
  file.g_adam_step = get<std::uint64_t>(in);
  file.d_adam_step = get<std::uint64_t>(in);
  file.rng_state = get_bytes(in, get<std::uint64_t>(in));
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = get_bytes(in, get<std::uint32_t>(in));
    const auto tag = get<std::uint8_t>(in);
    if (tag > 1) throw IoError("checkpoint: unknown dtype tag for '" + nt.name + "'");
    const DType dtype = tag == 0 ? DType::f32 : DType::f64;
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw IoError("checkpoint: bad rank for '" + nt.name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in);
    try {
      nt.value = Tensor::zeros(shape, dtype);
    } catch (const ShapeError&) {
      throw IoError("checkpoint: bad shape for '" + nt.name + "'");
    }
    dispatch(dtype, [&](auto zero) {
      using T = decltype(zero);
      auto data = nt.value.template mutable_data<T>();
      in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    });
    if (!in) throw IoError("checkpoint truncated in '" + nt.name + "'");
    file.tensors.push_back(std::move(nt));
  }
  return file;
}

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    write_tensor_file(out, file);
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string());
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_tensor_file(in);
}

TensorFile to_tensor_file(const TrainState& s) {
  TensorFile f;
  f.config_json = model_config_to_json(s.config(), s.options);
  f.step = s.step;
  f.g_adam_step = s.generator_opt.step;
  f.d_adam_step = s.discriminator_opt.step;
  std::ostringstream rng;
  rng << s.rng;
  f.rng_state = rng.str();
  push_params(f.tensors, s.generator_params);
  push_params(f.tensors, s.discriminator_params);
  push_adam(f.tensors, "adam.g", s.generator_params, s.generator_opt);
  push_adam(f.tensors, "adam.d", s.discriminator_params, s.discriminator_opt);
  f.tensors.push_back({"perceptual.kernel1", s.extractor.kernel1});
  f.tensors.push_back({"perceptual.kernel2", s.extractor.kernel2});
  return f;
}

TrainState from_tensor_file(const TensorFile& f) {
  GeneratorConfig model;
  TrainOptions options;
  try {
    model_config_from_json(f.config_json, model, options);
  } catch (const ConfigError& e) {
    throw MismatchError(std::string("checkpoint config invalid: ") + e.what());
  }
  if (f.tensors.empty()) throw MismatchError("checkpoint holds no tensors");
  TrainState s = TrainState::create(model, options, 0, f.tensors.front().value.dtype());
  for (auto& p : s.generator_params) p->value = take(f, p->name, p->value);
  for (auto& p : s.discriminator_params) p->value = take(f, p->name, p->value);
  for (std::size_t i = 0; i < s.generator_params.size(); ++i) {
    s.generator_opt.m[i] = take(f, "adam.g.m/" + s.generator_params[i]->name, s.generator_opt.m[i]);
    s.generator_opt.v[i] = take(f, "adam.g.v/" + s.generator_params[i]->name, s.generator_opt.v[i]);
  }
  for (std::size_t i = 0; i < s.discriminator_params.size(); ++i) {
    s.discriminator_opt.m[i] = take(f, "adam.d.m/" + s.discriminator_params[i]->name, s.discriminator_opt.m[i]);
    s.discriminator_opt.v[i] = take(f, "adam.d.v/" + s.discriminator_params[i]->name, s.discriminator_opt.v[i]);
  }
  s.extractor.kernel1 = take(f, "perceptual.kernel1", s.extractor.kernel1);
  s.extractor.kernel2 = take(f, "perceptual.kernel2", s.extractor.kernel2);
  const std::size_t expected = 2 * (s.generator_params.size() + s.discriminator_params.size()) +
                               s.generator_params.size() + s.discriminator_params.size() + 2;
  if (f.tensors.size() != expected) throw MismatchError("checkpoint has unexpected extra tensors");
  s.step = f.step;
  s.generator_opt.step = f.g_adam_step;
  s.discriminator_opt.step = f.d_adam_step;
  std::istringstream rng(f.rng_state);
  rng >> s.rng;
  if (!rng) throw IoError("checkpoint: corrupt RNG state");
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  save_tensor_file(path, to_tensor_file(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return from_tensor_file(load_tensor_file(path));
}

PerceptualExtractor load_perceptual_weights(const std::filesystem::path& path, DType dtype) {
  const TensorFile f = load_tensor_file(path);
  const Tensor* k1 = f.find("kernel1");
  const Tensor* k2 = f.find("kernel2");
  if (!k1 || !k2) throw MismatchError("perceptual weights need 'kernel1' and 'kernel2'");
  if (k1->rank() != 4 || k1->dim(1) != kImageChannels || k2->rank() != 4 || k2->dim(1) != k1->dim(0)) {
    throw MismatchError("perceptual weights have incompatible shapes");
  }
  return {k1->to(dtype), k2->to(dtype)};
}

}  // namespace bgg
