#include "tvr/train/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "tvr/core/error.hpp"
#include "tvr/io/binary.hpp"

namespace tvr {

namespace {

constexpr char kMagic[4] = {'T', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_name(std::ostream& out, const std::string& s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidArgument("name too long for checkpoint");
  io::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_name(std::istream& in) {
  const auto n = io::read_pod<std::uint16_t>(in);
  std::string s(n, '\0');
  io::read_bytes(in, s.data(), n);
  return s;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& in) {
  const auto rows = io::read_pod<std::uint32_t>(in);
  const auto cols = io::read_pod<std::uint32_t>(in);
  Matrix m(rows, cols);
  io::read_bytes(in, reinterpret_cast<char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const CheckpointState& state) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, 4);
    io::write_pod(out, kVersion);
    io::write_pod<std::uint64_t>(out, state.config_hash);
    io::write_pod<std::uint64_t>(out, state.step);
    const std::string cfg = to_json(state.config).dump();
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    const auto all = params.all();
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(all.size()));
    for (const Parameter* p : all) {
      write_name(out, p->name);
      write_matrix(out, p->value);
    }

    io::write_pod<std::int64_t>(out, state.optimizer.step);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(state.optimizer.moments.size()));
    for (const auto& [name, m] : state.optimizer.moments) {
      write_name(out, name);
      write_matrix(out, m.first);
      write_matrix(out, m.second);
    }

    io::write_pod<std::uint64_t>(out, state.buffer.capacity());
    io::write_pod<double>(out, state.buffer.reuse_prob());
    io::write_pod<std::uint64_t>(out, state.buffer.size());
    for (std::size_t i = 0; i < state.buffer.size(); ++i) {
      write_matrix(out, state.buffer.texts()[i]);
      write_matrix(out, state.buffer.frame_stacks()[i]);
    }
    if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  io::read_bytes(in, magic, 4);
  if (std::string_view(magic, 4) != std::string_view(kMagic, 4)) throw DataError("unrecognized format");
  if (io::read_pod<std::uint32_t>(in) != kVersion) throw DataError("unsupported version");
  LoadedCheckpoint out;
  CheckpointState& st = out.state;
  st.config_hash = io::read_pod<std::uint64_t>(in);
  st.step = io::read_pod<std::uint64_t>(in);
  const auto cfg_len = io::read_pod<std::uint32_t>(in);
  std::string cfg(cfg_len, '\0');
  io::read_bytes(in, cfg.data(), cfg_len);
  try {
    st.config = config_from_json(nlohmann::json::parse(cfg));
  } catch (const nlohmann::json::exception&) {
    throw DataError("malformed checkpoint config");
  }
  out.model = std::make_unique<Model>(model_config(st.config));
  ParamStore& store = out.model->params();

  const auto count = io::read_pod<std::uint32_t>(in);
  if (count != store.size()) throw DataError("checkpoint parameter count does not match the model");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_name(in);
    Matrix value = read_matrix(in);
    if (!store.contains(name)) throw DataError("checkpoint holds unknown parameter '" + name + "'");
    Parameter& p = store.at(name);
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols())
      throw DataError("checkpoint shape mismatch for '" + name + "'");
    p.value = std::move(value);
  }

  st.optimizer.step = io::read_pod<std::int64_t>(in);
  const auto moments = io::read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < moments; ++i) {
    const std::string name = read_name(in);
    AdamMoments m;
    m.first = read_matrix(in);
    m.second = read_matrix(in);
    st.optimizer.moments.emplace(name, std::move(m));
  }

  const auto capacity = io::read_pod<std::uint64_t>(in);
  const auto reuse = io::read_pod<double>(in);
  st.buffer = ReplayBuffer(capacity, reuse);
  const auto stored = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < stored; ++i) {
    ChainSample s;
    s.text = read_matrix(in);
    s.frames = read_matrix(in);
    st.buffer.push(s);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after final record");
  return out;
}

}  // namespace tvr
