#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace mprl {

/// Dense row-major tensor of 64-bit reals with an optional gradient
/// buffer of the same length. Copies share storage; the tape relies on
/// that to accumulate gradients into parameters across ops.
///
/// Buffers come from a thread-local recycling pool: training builds and
/// drops a few hundred tensors per step, and the pool turns that churn
/// into pointer swaps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled

  static Tensor zeros(std::vector<int> shape);
  /// Values left unwritten; for outputs that are fully overwritten.
  static Tensor uninitialized(std::vector<int> shape);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);

  bool defined() const { return storage_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(int i) const;
  int rank() const;
  int64_t size() const;

  std::span<double> values();
  std::span<const double> values() const;
  double* data();
  const double* data() const;

  /// Value of a single-element tensor. Contract error otherwise.
  double item() const;

  bool has_grad() const;
  void ensure_grad();  // allocates zeroed storage on first use
  void zero_grad();
  std::span<double> grad();
  std::span<const double> grad() const;

  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

  struct Storage;  // buffer bookkeeping, defined in tensor.cpp

 private:
  std::shared_ptr<Storage> storage_;
};

int64_t shape_size(const std::vector<int>& shape);

}  // namespace mprl
