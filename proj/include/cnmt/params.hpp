#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cnmt/tape.hpp"
#include "cnmt/tensor.hpp"

namespace cnmt {

/// Ordered collection of named trainable tensors.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& operator[](const std::string& name) { return tensors_[index(name)]; }
  const Tensor& operator[](const std::string& name) const { return tensors_[index(name)]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t value_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradient buffers aligned with a ParamSet.
struct Gradients {
  std::vector<std::vector<double>> buffers;

  Gradients() = default;
  explicit Gradients(const ParamSet& params);
  void zero();
  void add(const Gradients& other);
  void scale(double s);
  double norm() const;
};

/// Creates tape leaves for parameters on first use; one binder per tape.
/// With grads == nullptr parameters enter the tape untracked.
class Binder {
 public:
  Binder(Tape& tape, const ParamSet& params, Gradients* grads);
  Var operator()(std::size_t index);
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  const ParamSet& params_;
  Gradients* grads_;
  std::vector<Var> bound_;
  std::vector<bool> has_;
};

/// Flat container file: magic, format version, string metadata, then named
/// parameters as rank + dims + little-endian IEEE-754 doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParamSet params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a 64-bit digest, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

}  // namespace cnmt
