#include "mprl/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <unordered_map>

#include "mprl/error.hpp"

namespace mprl {

namespace {

// Recycled buffers, bucketed by capacity rounded up to 256 doubles.
// Bounded so pathological shapes cannot pin unbounded memory.
class BufferPool {
 public:
  static constexpr int64_t kGranule = 256;
  static constexpr size_t kMaxPooledBuffers = 1024;

  double* acquire(int64_t len, int64_t& capacity_out) {
    int64_t cap = round_up(len);
    auto& bucket = buckets_[cap];
    if (!bucket.empty()) {
      double* buf = bucket.back();
      bucket.pop_back();
      --pooled_;
      capacity_out = cap;
      return buf;
    }
    capacity_out = cap;
    return new double[static_cast<size_t>(cap)];
  }

  void release(double* buf, int64_t capacity) {
    if (buf == nullptr) return;
    if (pooled_ >= kMaxPooledBuffers) {
      delete[] buf;
      return;
    }
    buckets_[capacity].push_back(buf);
    ++pooled_;
  }

  ~BufferPool() {
    for (auto& [cap, bucket] : buckets_)
      for (double* buf : bucket) delete[] buf;
  }

 private:
  static int64_t round_up(int64_t len) {
    return ((len + kGranule - 1) / kGranule) * kGranule;
  }

  std::unordered_map<int64_t, std::vector<double*>> buckets_;
  size_t pooled_ = 0;
};

BufferPool& pool() {
  thread_local BufferPool instance;
  return instance;
}

}  // namespace

struct Tensor::Storage {
  std::vector<int> shape;
  int64_t len = 0;
  double* values = nullptr;
  int64_t values_cap = 0;
  double* grad = nullptr;
  int64_t grad_cap = 0;

  ~Storage() {
    pool().release(values, values_cap);
    pool().release(grad, grad_cap);
  }
};

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    require(d >= 0, ErrorKind::Dimension, "negative dimension");
    n *= d;
  }
  return n;
}

namespace {

std::shared_ptr<Tensor::Storage> make_storage(std::vector<int> shape) {
  int64_t n = shape_size(shape);
  auto s = std::make_shared<Tensor::Storage>();
  s->shape = std::move(shape);
  s->len = n;
  s->values = pool().acquire(n, s->values_cap);
  return s;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) {
  storage_ = make_storage(std::move(shape));
  std::fill_n(storage_->values, storage_->len, 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::uninitialized(std::vector<int> shape) {
  Tensor t;
  t.storage_ = make_storage(std::move(shape));
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  require(shape_size(shape) == static_cast<int64_t>(values.size()), ErrorKind::Dimension,
          "value count does not match shape");
  Tensor t = uninitialized(std::move(shape));
  std::copy(values.begin(), values.end(), t.storage_->values);
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

const std::vector<int>& Tensor::shape() const { return storage_->shape; }

int Tensor::dim(int i) const {
  require(i >= 0 && i < rank(), ErrorKind::Index, "dim index out of range");
  return storage_->shape[static_cast<size_t>(i)];
}

int Tensor::rank() const { return static_cast<int>(storage_->shape.size()); }

int64_t Tensor::size() const { return storage_->len; }

std::span<double> Tensor::values() { return {storage_->values, static_cast<size_t>(storage_->len)}; }
std::span<const double> Tensor::values() const {
  return {storage_->values, static_cast<size_t>(storage_->len)};
}
double* Tensor::data() { return storage_->values; }
const double* Tensor::data() const { return storage_->values; }

double Tensor::item() const {
  require(size() == 1, ErrorKind::Contract, "item() requires a scalar tensor");
  return storage_->values[0];
}

bool Tensor::has_grad() const { return defined() && storage_->grad != nullptr; }

void Tensor::ensure_grad() {
  if (storage_->grad == nullptr) {
    storage_->grad = pool().acquire(storage_->len, storage_->grad_cap);
    std::fill_n(storage_->grad, storage_->len, 0.0);
  }
}

void Tensor::zero_grad() {
  if (storage_->grad != nullptr) std::fill_n(storage_->grad, storage_->len, 0.0);
}

std::span<double> Tensor::grad() {
  require(has_grad(), ErrorKind::Contract, "gradient buffer not allocated");
  return {storage_->grad, static_cast<size_t>(storage_->len)};
}

std::span<const double> Tensor::grad() const {
  require(has_grad(), ErrorKind::Contract, "gradient buffer not allocated");
  return {storage_->grad, static_cast<size_t>(storage_->len)};
}

}  // namespace mprl
