#include "rapnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace rapnet {

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;
constexpr std::uint64_t kMaxLength = std::uint64_t(1) << 40;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > kMaxLength) throw CheckpointError("checkpoint field length out of range");
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ResponseModel& model) {
  out.write(kCheckpointMagic, kMagicLen);
  const std::string cfg = model.config().to_text();
  put_u64(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto params = model.parameters();
  put_u64(out, params.size());
  for (const auto* p : params) {
    put_u64(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u64(out, 2);
    put_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    put_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Index i = 0; i < p->value.size(); ++i) put_f64(out, p->value.data()[i]);
  }
}

std::unique_ptr<ResponseModel> read_checkpoint(std::istream& in) {
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::memcmp(magic, kCheckpointMagic, kMagicLen) != 0)
    throw CheckpointError("not a RAPNET1 checkpoint");
  ModelConfig cfg;
  try {
    cfg = ModelConfig::parse(get_bytes(in, get_u64(in)));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  auto model = make_model(cfg, 0);
  auto params = model->parameters();
  const std::uint64_t count = get_u64(in);
  if (count != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                          std::to_string(params.size()));
  for (auto* p : params) {
    const std::string name = get_bytes(in, get_u64(in));
    if (name != p->name) throw CheckpointError("checkpoint parameter '" + name + "' where '" + p->name + "' expected");
    const std::uint64_t rank = get_u64(in);
    if (rank != 2) throw CheckpointError("parameter '" + name + "' has rank " + std::to_string(rank));
    const std::uint64_t rows = get_u64(in), cols = get_u64(in);
    if (rows != static_cast<std::uint64_t>(p->value.rows()) || cols != static_cast<std::uint64_t>(p->value.cols()))
      throw CheckpointError("parameter '" + name + "' has shape [" + std::to_string(rows) + "x" + std::to_string(cols) +
                            "], model expects " + shape_str(p->value));
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = get_f64(in);
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const ResponseModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

std::unique_ptr<ResponseModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace rapnet
