#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cfl/delay_model.hpp"
#include "cfl/random.hpp"

namespace cfl {

/// Raw training data held by one device: feature rows and scalar labels.
struct LocalDataset {
  Eigen::MatrixXd features;  // ell x d
  Eigen::VectorXd labels;    // ell
};

enum class GeneratorFamily { kGaussian, kBernoulliHalf };

/// Generator, weights and puncturing choice of one device. This never
/// leaves the device: only the EncodedShard is serializable.
struct EncoderPrivateState {
  Eigen::MatrixXd generator;        // c x ell
  Eigen::VectorXd weights;          // diagonal of W, length ell
  std::vector<int> systematic_set;  // indices processed as raw data
};

/// Parity rows shared with the server: G * W * X and G * W * y.
struct EncodedShard {
  int device_id = 0;
  Eigen::MatrixXd parity_features;  // c x d
  Eigen::VectorXd parity_labels;    // c
};

/// Entrywise sum of all devices' shards held by the server.
struct CompositeParity {
  Eigen::MatrixXd features;  // c x d
  Eigen::VectorXd labels;    // c
  int contributor_count = 0;
};

/// Diagonal weights for one device: sqrt(P{T >= t_star}) evaluated at the
/// assigned load on the systematic indices, 1 on punctured indices.
Eigen::VectorXd build_weights(const DeviceProfile& profile, int assigned_load,
                              double t_star,
                              const std::vector<int>& systematic_set);

/// Draw a c x ell generator. The Bernoulli(1/2) family is centered and
/// scaled to +-1 so that (1/c) G^T G concentrates at the identity, which
/// the parity-gradient aggregation relies on.
Eigen::MatrixXd draw_generator(int parity_rows, int points,
                               GeneratorFamily family, RandomStream& rng);

/// Encode with an explicitly supplied generator (deterministic).
EncodedShard encode_with_generator(const LocalDataset& data,
                                   const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& generator,
                                   int device_id = 0);

/// Weighted random linear encoding of one device's data. Returns the shard
/// destined for the server and the private state kept on the device.
/// parity_rows = 0 yields an empty shard (uncoded operation).
std::pair<EncodedShard, EncoderPrivateState> encode_local(
    const LocalDataset& data, const Eigen::VectorXd& weights,
    const std::vector<int>& systematic_set, int parity_rows,
    GeneratorFamily family, RandomStream& rng, int device_id = 0);

/// Entrywise sum of shards; all must share dimensions (c, d).
CompositeParity accumulate_parity(const std::vector<EncodedShard>& shards);

/// Uniformly random subset of {0, ..., points-1} of the given size,
/// returned sorted.
std::vector<int> choose_systematic_set(int points, int size,
                                       RandomStream& rng);

/// Byte layout of the only artifact that crosses the device -> server
/// boundary before training: a 20-byte header (magic, version, device id,
/// c, d) followed by row-major 64-bit parity features and parity labels.
std::vector<std::uint8_t> serialize_shard(const EncodedShard& shard);
EncodedShard deserialize_shard(const std::vector<std::uint8_t>& bytes);

}  // namespace cfl
