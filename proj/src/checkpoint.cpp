#include "gdcl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace gdcl::nnet {

namespace {

constexpr std::array<char, 8> kMagic{'G', 'D', 'C', 'L', 'M', 'O', 'D', 'L'};
// Guards against absurd allocations when reading a corrupt file.
constexpr std::uint64_t kMaxDim = 1u << 20;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw InvalidInput("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_layer(std::ostream& out, const Layer& l) {
  put_u64(out, static_cast<std::uint64_t>(l.weight.rows()));
  put_u64(out, static_cast<std::uint64_t>(l.weight.cols()));
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f64(out, l.weight(r, c));
  for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f64(out, l.bias(r));
}

Layer get_layer(std::istream& in) {
  const auto rows = get_u64(in);
  const auto cols = get_u64(in);
  if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim)
    throw InvalidInput("checkpoint: implausible layer shape");
  Layer l{Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
          Vector(static_cast<Eigen::Index>(rows))};
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = get_f64(in);
  for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = get_f64(in);
  return l;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, kCheckpointVersion);
  put_u64(out, model.input_dim());
  const auto& p = model.params();
  put_u64(out, p.trunk.size());
  for (const auto& l : p.trunk) put_layer(out, l);
  put_u64(out, p.heads.size());
  for (const auto& l : p.heads) put_layer(out, l);
  if (!out) throw Error("checkpoint: write failed");
}

Model load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw InvalidInput("checkpoint: bad magic");
  const auto version = get_u64(in);
  if (version != kCheckpointVersion)
    throw InvalidInput("checkpoint: unsupported version " + std::to_string(version));
  const auto input_dim = get_u64(in);
  ParamSet params;
  const auto n_trunk = get_u64(in);
  if (n_trunk > 64) throw InvalidInput("checkpoint: implausible trunk depth");
  for (std::uint64_t i = 0; i < n_trunk; ++i) params.trunk.push_back(get_layer(in));
  const auto n_heads = get_u64(in);
  if (n_heads > kMaxDim) throw InvalidInput("checkpoint: implausible head count");
  std::vector<std::size_t> sizes;
  for (std::uint64_t i = 0; i < n_heads; ++i) {
    params.heads.push_back(get_layer(in));
    sizes.push_back(static_cast<std::size_t>(params.heads.back().weight.rows()));
  }
  if (input_dim == 0 || input_dim > kMaxDim) throw InvalidInput("checkpoint: implausible input_dim");
  return Model(static_cast<std::size_t>(input_dim), std::move(params), std::move(sizes));
}

}  // namespace gdcl::nnet
