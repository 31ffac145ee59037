#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tvr/core/rng.hpp"
#include "tvr/core/tensor.hpp"

namespace tvr {

struct EmbeddingRecord {
  std::string pair_id;
  RowVector text;  // 1 x d
  Matrix frames;   // M x d
};

struct EmbeddingDataset {
  std::uint32_t dim = 0;
  std::uint32_t frames_per_video = 0;
  std::string split = "train";
  std::string source = "unknown";
  std::vector<EmbeddingRecord> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

// Throws DataError describing the first violated invariant: shape agreement,
// unique ids, finite values, nonzero norms.
void validate(const EmbeddingDataset& ds);

// Binary layout, little-endian:
//   "EMBD" | u32 version=1 | u32 d | u32 M | u64 count
//   per record: u16 id length | id bytes | d x f32 text | M x d x f32 frames
// plus a JSON manifest at <path>.json with dim, frames_per_video, count, split, source.
void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path);
EmbeddingDataset load_dataset(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& path);

struct SynthOptions {
  std::size_t pairs = 256;
  std::uint32_t dim = 64;
  std::uint32_t frames = 8;
  double noise = 0.1;  // sigma_data
  double drift = 0.5;  // alpha
  std::uint64_t seed = 0;
  std::string split = "train";
};

// Prototype-plus-drift synthetic pairs. Per pair: g ~ N(0, I/d); a unit
// direction u; frames f_j = normalize(g + drift * (j/M) * u + noise * zeta_j)
// for j = 1..M and text t = normalize(mean_j f_j + noise * zeta_t), with every
// zeta ~ N(0, I/d). Values are rounded to f32 so the in-memory dataset equals
// its on-disk image.
EmbeddingDataset synth_generate(const SynthOptions& opts);

struct PairBatch {
  Matrix texts;                // B x d
  std::vector<Matrix> frames;  // B stacks of M x d
  std::vector<std::string> pair_ids;
  std::vector<std::size_t> indices;  // positions in the source dataset

  std::size_t size() const { return frames.size(); }
};

PairBatch make_batch(const EmbeddingDataset& ds, const std::vector<std::size_t>& indices);

// Epoch-based batching without replacement; the final batch of an epoch may
// be short. With shuffle on, each epoch's order is a fresh permutation drawn
// from the supplied Rng.
class BatchIterator {
 public:
  BatchIterator(const EmbeddingDataset& ds, std::size_t batch_size, bool shuffle, Rng& rng);

  PairBatch next();
  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const;

 private:
  void start_epoch();

  const EmbeddingDataset* ds_;
  std::size_t batch_size_;
  bool shuffle_;
  Rng* rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace tvr
