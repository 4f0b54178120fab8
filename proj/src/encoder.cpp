#include "cfl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cfl {

Eigen::VectorXd build_weights(const DeviceProfile& profile, int assigned_load,
                              double t_star,
                              const std::vector<int>& systematic_set) {
  if (assigned_load == 0 && !systematic_set.empty()) {
    throw std::invalid_argument(
        "zero assigned load with a nonempty systematic set");
  }
  if (static_cast<int>(systematic_set.size()) != assigned_load) {
    throw std::invalid_argument("systematic set size must equal the load");
  }
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(profile.local_points);
  if (assigned_load == 0) return weights;

  const double p_return = return_probability(profile, assigned_load, t_star);
  const double w = std::sqrt(1.0 - p_return);
  for (const int k : systematic_set) {
    if (k < 0 || k >= profile.local_points) {
      throw std::invalid_argument("systematic index out of range");
    }
    weights[k] = w;
  }
  return weights;
}

Eigen::MatrixXd draw_generator(int parity_rows, int points,
                               GeneratorFamily family, RandomStream& rng) {
  Eigen::MatrixXd g(parity_rows, points);
  for (int r = 0; r < parity_rows; ++r) {
    for (int k = 0; k < points; ++k) {
      if (family == GeneratorFamily::kGaussian) {
        g(r, k) = rng.normal();
      } else {
        g(r, k) = rng.uniform() < 0.5 ? -1.0 : 1.0;
      }
    }
  }
  return g;
}

EncodedShard encode_with_generator(const LocalDataset& data,
                                   const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& generator,
                                   int device_id) {
  const auto points = data.features.rows();
  if (data.labels.size() != points) {
    throw std::invalid_argument("feature rows and label count differ");
  }
  if (weights.size() != points || generator.cols() != points) {
    throw std::invalid_argument("weights/generator shape mismatch");
  }
  EncodedShard shard;
  shard.device_id = device_id;
  const Eigen::MatrixXd weighted = weights.asDiagonal() * data.features;
  shard.parity_features = generator * weighted;
  shard.parity_labels = generator * (weights.cwiseProduct(data.labels));
  return shard;
}

std::pair<EncodedShard, EncoderPrivateState> encode_local(
    const LocalDataset& data, const Eigen::VectorXd& weights,
    const std::vector<int>& systematic_set, int parity_rows,
    GeneratorFamily family, RandomStream& rng, int device_id) {
  if (parity_rows < 0) throw std::invalid_argument("negative parity rows");
  if (data.features.rows() == 0) throw std::invalid_argument("empty dataset");

  EncoderPrivateState state;
  state.weights = weights;
  state.systematic_set = systematic_set;
  state.generator = draw_generator(parity_rows,
                                   static_cast<int>(data.features.rows()),
                                   family, rng);
  EncodedShard shard =
      encode_with_generator(data, weights, state.generator, device_id);
  return {std::move(shard), std::move(state)};
}

CompositeParity accumulate_parity(const std::vector<EncodedShard>& shards) {
  CompositeParity composite;
  if (shards.empty()) return composite;
  const auto rows = shards.front().parity_features.rows();
  const auto cols = shards.front().parity_features.cols();
  composite.features = Eigen::MatrixXd::Zero(rows, cols);
  composite.labels = Eigen::VectorXd::Zero(rows);
  for (const auto& shard : shards) {
    if (shard.parity_features.rows() != rows ||
        shard.parity_features.cols() != cols ||
        shard.parity_labels.size() != rows) {
      throw std::invalid_argument(
          "shard dimension mismatch: parity count must agree across devices");
    }
    composite.features += shard.parity_features;
    composite.labels += shard.parity_labels;
    ++composite.contributor_count;
  }
  return composite;
}

std::vector<int> choose_systematic_set(int points, int size,
                                       RandomStream& rng) {
  if (size < 0 || size > points) {
    throw std::invalid_argument("systematic set size out of range");
  }
  std::vector<int> indices(points);
  std::iota(indices.begin(), indices.end(), 0);
  // Partial Fisher-Yates; only the first `size` slots matter.
  for (int i = 0; i < size; ++i) {
    const int j = i + static_cast<int>(rng.uniform() * (points - i));
    std::swap(indices[i], indices[std::min(j, points - 1)]);
  }
  indices.resize(size);
  std::sort(indices.begin(), indices.end());
  return indices;
}

namespace {

constexpr std::uint32_t kShardMagic = 0x43464c53;  // "CFLS"
constexpr std::uint32_t kShardVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_shard(const EncodedShard& shard) {
  const auto c = static_cast<std::uint32_t>(shard.parity_features.rows());
  const auto d = static_cast<std::uint32_t>(shard.parity_features.cols());
  std::vector<std::uint8_t> bytes;
  bytes.reserve(20 + 8 * size_t(c) * (d + 1));
  put_u32(bytes, kShardMagic);
  put_u32(bytes, kShardVersion);
  put_u32(bytes, static_cast<std::uint32_t>(shard.device_id));
  put_u32(bytes, c);
  put_u32(bytes, d);
  auto put_f64 = [&bytes](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    for (int i = 0; i < 8; ++i) bytes.push_back((bits >> (8 * i)) & 0xff);
  };
  for (std::uint32_t r = 0; r < c; ++r) {
    for (std::uint32_t j = 0; j < d; ++j) put_f64(shard.parity_features(r, j));
  }
  for (std::uint32_t r = 0; r < c; ++r) put_f64(shard.parity_labels(r));
  return bytes;
}

EncodedShard deserialize_shard(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20 || get_u32(bytes, 0) != kShardMagic) {
    throw std::invalid_argument("not a parity shard");
  }
  if (get_u32(bytes, 4) != kShardVersion) {
    throw std::invalid_argument("unsupported shard version");
  }
  EncodedShard shard;
  shard.device_id = static_cast<int>(get_u32(bytes, 8));
  const std::uint32_t c = get_u32(bytes, 12);
  const std::uint32_t d = get_u32(bytes, 16);
  if (bytes.size() != 20 + 8 * size_t(c) * (d + 1)) {
    throw std::invalid_argument("truncated parity shard");
  }
  auto get_f64 = [&bytes](size_t pos) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(bytes[pos + i]) << (8 * i);
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
  };
  shard.parity_features.resize(c, d);
  shard.parity_labels.resize(c);
  size_t pos = 20;
  for (std::uint32_t r = 0; r < c; ++r) {
    for (std::uint32_t j = 0; j < d; ++j, pos += 8) {
      shard.parity_features(r, j) = get_f64(pos);
    }
  }
  for (std::uint32_t r = 0; r < c; ++r, pos += 8) {
    shard.parity_labels(r) = get_f64(pos);
  }
  return shard;
}

}  // namespace cfl
