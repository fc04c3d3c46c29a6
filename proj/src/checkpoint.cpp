#include "cosmic/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <type_traits>

namespace cosmic {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'S', 'M', 'I', 'C', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw Error("checkpoint truncated: " + path.string());
  return value;
}

template <typename Scalar>
void put_tensor(std::ostream& out, const Mat<Scalar>& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
  out.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(row_major.size())));
}

template <typename Stored, typename Scalar>
Mat<Scalar> get_tensor(std::istream& in, const fs::path& path) {
  const auto rows = get<std::uint64_t>(in, path);
  const auto cols = get<std::uint64_t>(in, path);
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw Error("checkpoint corrupt tensor shape: " + path.string());
  Eigen::Matrix<Stored, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(static_cast<Eigen::Index>(rows),
                                                                            static_cast<Eigen::Index>(cols));
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(Stored) * rows * cols)))
    throw Error("checkpoint truncated: " + path.string());
  return m.template cast<Scalar>();
}

template <typename Scalar>
constexpr const char* dtype_name() {
  return std::is_same_v<Scalar, float> ? "f32" : "f64";
}

nlohmann::json read_header(std::istream& in, const fs::path& path) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error("not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  const auto len = get<std::uint32_t>(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw Error("checkpoint truncated: " + path.string());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error("checkpoint header is not valid JSON: " + path.string());
  }
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const fs::path& path, const ModelParams<Scalar>& params, const CheckpointMeta& meta) {
  nlohmann::json h;
  h["format"] = "cosmic-checkpoint";
  h["version"] = kCheckpointVersion;
  h["dtype"] = dtype_name<Scalar>();
  h["input_dim"] = params.input_dim();
  h["hidden_dim"] = params.hidden_dim();
  h["n_way"] = params.n_way();
  h["seed"] = meta.seed;
  h["episode"] = meta.episode;
  h["tensors"] = {"weight", "head_weight", "head_bias"};
  h["config"] = meta.config;
  const std::string text = h.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_tensor<Scalar>(out, params.weight);
  put_tensor<Scalar>(out, params.head_weight);
  put_tensor<Scalar>(out, Mat<Scalar>(params.head_bias));
  if (!out) throw Error("I/O error writing checkpoint " + path.string());
}

nlohmann::json read_checkpoint_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint not found: " + path.string());
  return read_header(in, path);
}

template <typename Scalar>
ModelParams<Scalar> load_checkpoint(const fs::path& path, nlohmann::json* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint not found: " + path.string());
  const auto h = read_header(in, path);
  const std::string dtype = h.value("dtype", "");
  ModelParams<Scalar> p;
  auto read_all = [&]<typename Stored>() {
    p.weight = get_tensor<Stored, Scalar>(in, path);
    p.head_weight = get_tensor<Stored, Scalar>(in, path);
    const Mat<Scalar> bias = get_tensor<Stored, Scalar>(in, path);
    if (bias.cols() != 1) throw Error("checkpoint head_bias must be a column: " + path.string());
    p.head_bias = bias.col(0);
  };
  if (dtype == "f32")
    read_all.template operator()<float>();
  else if (dtype == "f64")
    read_all.template operator()<double>();
  else
    throw Error("checkpoint has unknown dtype '" + dtype + "': " + path.string());
  if (p.head_weight.rows() != p.weight.cols() || p.head_weight.cols() != p.head_bias.size())
    throw Error("checkpoint tensor shapes are inconsistent: " + path.string());
  if (h.value("input_dim", -1L) != p.weight.rows() || h.value("hidden_dim", -1L) != p.weight.cols())
    throw Error("checkpoint header dims disagree with tensors: " + path.string());
  if (header) *header = h;
  return p;
}

template void save_checkpoint<float>(const fs::path&, const ModelParams<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const fs::path&, const ModelParams<double>&, const CheckpointMeta&);
template ModelParams<float> load_checkpoint<float>(const fs::path&, nlohmann::json*);
template ModelParams<double> load_checkpoint<double>(const fs::path&, nlohmann::json*);

}  // namespace cosmic
