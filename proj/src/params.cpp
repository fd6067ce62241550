#include "cnmt/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace cnmt {

std::size_t ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::value_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

Gradients::Gradients(const ParamSet& params) {
  buffers.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) buffers[i].assign(params[i].size(), 0.0);
}

void Gradients::zero() {
  for (auto& b : buffers) std::fill(b.begin(), b.end(), 0.0);
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < buffers.size(); ++i)
    for (std::size_t j = 0; j < buffers[i].size(); ++j) buffers[i][j] += other.buffers[i][j];
}

void Gradients::scale(double s) {
  for (auto& b : buffers)
    for (double& v : b) v *= s;
}

double Gradients::norm() const {
  double s = 0.0;
  for (const auto& b : buffers)
    for (double v : b) s += v * v;
  return std::sqrt(s);
}

Binder::Binder(Tape& tape, const ParamSet& params, Gradients* grads)
    : tape_(tape), params_(params), grads_(grads), bound_(params.size()), has_(params.size(), false) {}

Var Binder::operator()(std::size_t index) {
  if (!has_[index]) {
    bound_[index] = grads_ ? tape_.leaf(params_[index], grads_->buffers[index].data())
                           : tape_.view(params_[index]);
    has_[index] = true;
  }
  return bound_[index];
}

// ---------------------------------------------------------------- file format

namespace {

constexpr char kMagic[8] = {'C', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_string32(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::istream& in;
  const std::string& path;

  void bytes(char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw std::runtime_error("checkpoint '" + path + "' is truncated");
  }
  std::uint64_t uint(int width) {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::string string(std::uint64_t n) {
    if (n > (1ULL << 32)) throw std::runtime_error("checkpoint '" + path + "' is corrupt");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 8);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [key, value] : ckpt.metadata) {
    put_string32(out, key);
    put_u64(out, value.size());
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const Tensor& t = ckpt.params[i];
    put_string32(out, ckpt.params.name(i));
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_u64(out, d);
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("error while writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  Reader r{in, path};
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint file");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint '" + path + "' has unsupported version " +
                             std::to_string(version));
  Checkpoint ckpt;
  const auto n_meta = r.uint(4);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string key = r.string(r.uint(4));
    ckpt.metadata[key] = r.string(r.uint(8));
  }
  const auto n_params = r.uint(4);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = r.string(r.uint(4));
    const auto rank = r.uint(4);
    if (rank < 1 || rank > 2) throw std::runtime_error("checkpoint '" + path + "' is corrupt");
    std::vector<std::size_t> shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.uint(8));
    Tensor t(shape);
    for (double& v : t.values) v = std::bit_cast<double>(r.uint(8));
    ckpt.params.add(std::move(name), std::move(t));
  }
  return ckpt;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a_hex(data);
}

}  // namespace cnmt
