#include "tvr/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "tvr/core/error.hpp"
#include "tvr/io/binary.hpp"

namespace tvr {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'D'};
constexpr std::uint32_t kVersion = 1;

void check_row(const std::string& id, const Matrix& m) {
  if (!m.allFinite()) throw DataError("non-finite embedding at pair_id " + id);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (m.row(r).squaredNorm() == 0.0) throw DataError("zero-norm embedding at pair_id " + id);
}

double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  std::filesystem::path m = path;
  m += ".json";
  return m;
}

void validate(const EmbeddingDataset& ds) {
  if (ds.dim == 0 || ds.frames_per_video == 0) throw DataError("dataset dimensions must be positive");
  std::set<std::string> seen;
  for (const auto& rec : ds.items) {
    if (rec.text.size() != static_cast<Eigen::Index>(ds.dim))
      throw DataError("text dimension mismatch at pair_id " + rec.pair_id);
    if (rec.frames.rows() != static_cast<Eigen::Index>(ds.frames_per_video) ||
        rec.frames.cols() != static_cast<Eigen::Index>(ds.dim))
      throw DataError("frame stack shape mismatch at pair_id " + rec.pair_id);
    if (rec.pair_id.size() > 0xFFFF) throw DataError("pair_id too long: " + rec.pair_id.substr(0, 32));
    if (!seen.insert(rec.pair_id).second) throw DataError("duplicate pair_id " + rec.pair_id);
    check_row(rec.pair_id, Matrix(rec.text));
    check_row(rec.pair_id, rec.frames);
  }
}

void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  validate(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  io::write_pod<std::uint32_t>(out, kVersion);
  io::write_pod<std::uint32_t>(out, ds.dim);
  io::write_pod<std::uint32_t>(out, ds.frames_per_video);
  io::write_pod<std::uint64_t>(out, ds.items.size());
  std::vector<float> buf;
  for (const auto& rec : ds.items) {
    io::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(rec.pair_id.size()));
    out.write(rec.pair_id.data(), static_cast<std::streamsize>(rec.pair_id.size()));
    buf.resize(ds.dim);
    for (std::uint32_t k = 0; k < ds.dim; ++k) buf[k] = static_cast<float>(rec.text(k));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    buf.resize(static_cast<std::size_t>(rec.frames.size()));
    for (Eigen::Index k = 0; k < rec.frames.size(); ++k) buf[static_cast<std::size_t>(k)] = static_cast<float>(rec.frames.data()[k]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw DataError("write failed: " + path.string());

  nlohmann::json manifest = {{"dim", ds.dim},
                             {"frames_per_video", ds.frames_per_video},
                             {"count", ds.items.size()},
                             {"split", ds.split},
                             {"source", ds.source}};
  std::ofstream mout(manifest_path(path), std::ios::trunc);
  if (!mout) throw DataError("cannot open for writing: " + manifest_path(path).string());
  mout << manifest.dump(2) << "\n";
  if (!mout) throw DataError("write failed: " + manifest_path(path).string());
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) throw DataError("unrecognized format");
  const auto version = io::read_pod<std::uint32_t>(in);
  if (version != kVersion) throw DataError("unsupported version " + std::to_string(version));

  EmbeddingDataset ds;
  ds.dim = io::read_pod<std::uint32_t>(in);
  ds.frames_per_video = io::read_pod<std::uint32_t>(in);
  const auto count = io::read_pod<std::uint64_t>(in);
  if (ds.dim == 0 || ds.frames_per_video == 0) throw DataError("dataset dimensions must be positive");

  std::vector<float> buf;
  ds.items.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t r = 0; r < count; ++r) {
    EmbeddingRecord rec;
    const auto len = io::read_pod<std::uint16_t>(in);
    rec.pair_id.resize(len);
    io::read_bytes(in, rec.pair_id.data(), len);
    buf.resize(ds.dim);
    io::read_bytes(in, reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
    rec.text.resize(ds.dim);
    for (std::uint32_t k = 0; k < ds.dim; ++k) rec.text(k) = buf[k];
    const std::size_t nf = static_cast<std::size_t>(ds.frames_per_video) * ds.dim;
    buf.resize(nf);
    io::read_bytes(in, reinterpret_cast<char*>(buf.data()), nf * sizeof(float));
    rec.frames.resize(ds.frames_per_video, ds.dim);
    for (std::size_t k = 0; k < nf; ++k) rec.frames.data()[k] = buf[k];
    ds.items.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after final record");

  std::ifstream min(manifest_path(path));
  if (!min) throw DataError("missing manifest: " + manifest_path(path).string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(min);
    if (manifest.at("dim").get<std::uint32_t>() != ds.dim ||
        manifest.at("frames_per_video").get<std::uint32_t>() != ds.frames_per_video ||
        manifest.at("count").get<std::uint64_t>() != count)
      throw DataError("manifest does not match binary header");
    ds.split = manifest.at("split").get<std::string>();
    ds.source = manifest.value("source", std::string("unknown"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }

  validate(ds);
  return ds;
}

EmbeddingDataset synth_generate(const SynthOptions& opts) {
  if (opts.pairs < 1) throw InvalidArgument("synth_generate: pairs must be >= 1");
  if (opts.dim < 1 || opts.frames < 1) throw InvalidArgument("synth_generate: dim and frames must be >= 1");
  if (opts.noise < 0.0 || opts.drift < 0.0) throw InvalidArgument("synth_generate: noise and drift must be >= 0");

  const Eigen::Index d = opts.dim;
  const Eigen::Index m = opts.frames;
  const double unit_std = 1.0 / std::sqrt(static_cast<double>(d));

  EmbeddingDataset ds;
  ds.dim = opts.dim;
  ds.frames_per_video = opts.frames;
  ds.split = opts.split;
  ds.source = "synthetic";
  ds.items.reserve(opts.pairs);

  auto normalize = [](RowVector v) {
    const double n = v.norm();
    if (n == 0.0) throw NumericalError("synth_generate: degenerate draw");
    return RowVector(v / n);
  };

  for (std::size_t p = 0; p < opts.pairs; ++p) {
    Rng rng(derive_seed(opts.seed, p));
    RowVector g = rng.normal_matrix(1, d, unit_std);
    RowVector u = normalize(rng.normal_matrix(1, d, 1.0));
    EmbeddingRecord rec;
    rec.pair_id = "synth-" + std::to_string(p);
    rec.frames.resize(m, d);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double progress = static_cast<double>(j + 1) / static_cast<double>(m);
      RowVector zeta = rng.normal_matrix(1, d, unit_std);
      rec.frames.row(j) = normalize(g + opts.drift * progress * u + opts.noise * zeta);
    }
    RowVector zeta_t = rng.normal_matrix(1, d, unit_std);
    rec.text = normalize(RowVector(rec.frames.colwise().mean()) + opts.noise * zeta_t);
    rec.text = rec.text.unaryExpr(&round_f32);
    rec.frames = rec.frames.unaryExpr(&round_f32);
    ds.items.push_back(std::move(rec));
  }
  validate(ds);
  return ds;
}

PairBatch make_batch(const EmbeddingDataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw InvalidArgument("make_batch: empty selection");
  PairBatch b;
  b.texts.resize(static_cast<Eigen::Index>(indices.size()), ds.dim);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& rec = ds.items.at(indices[k]);
    b.texts.row(static_cast<Eigen::Index>(k)) = rec.text;
    b.frames.push_back(rec.frames);
    b.pair_ids.push_back(rec.pair_id);
  }
  b.indices = indices;
  return b;
}

BatchIterator::BatchIterator(const EmbeddingDataset& ds, std::size_t batch_size, bool shuffle, Rng& rng)
    : ds_(&ds), batch_size_(batch_size), shuffle_(shuffle), rng_(&rng) {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (ds.empty()) throw InvalidArgument("cannot batch an empty dataset");
  start_epoch();
  epoch_ = 0;
}

std::size_t BatchIterator::batches_per_epoch() const { return (ds_->size() + batch_size_ - 1) / batch_size_; }

void BatchIterator::start_epoch() {
  order_.resize(ds_->size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_) {
    // Fisher-Yates driven by the explicit Rng so the order is reproducible.
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_->index(i)]);
  }
  cursor_ = 0;
}

PairBatch BatchIterator::next() {
  if (cursor_ >= order_.size()) {
    start_epoch();
    ++epoch_;
  }
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return make_batch(*ds_, idx);
}

}  // namespace tvr
