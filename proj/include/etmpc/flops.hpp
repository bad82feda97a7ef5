#pragma once

// Instrumented flop accounting for the naive region backend. Multiplies and
// adds cost one flop, divisions ten. Work is booked into one of two buckets:
// the inversion of G_A H^-1 G_A' and every other matrix operation.

#include <cstdint>

#include "etmpc/linalg.hpp"

namespace etmpc {

class FlopCounter {
 public:
  enum class Bucket { inversion, matrix };

  static constexpr std::int64_t kDivisionCost = 10;

  void set_bucket(Bucket b) noexcept { bucket_ = b; }
  Bucket bucket() const noexcept { return bucket_; }

  void add_flops(std::int64_t count) noexcept {
    (bucket_ == Bucket::inversion ? inversion_ : matrix_) += count;
  }
  void add_divisions(std::int64_t count) noexcept { add_flops(kDivisionCost * count); }

  /// Arithmetic actually executed by the inversion routine, kept apart from
  /// the charged figure (see counted::gauss_jordan_inverse).
  void add_executed_inversion(std::int64_t count) noexcept { executed_inversion_ += count; }

  std::int64_t inversion() const noexcept { return inversion_; }
  std::int64_t matrix() const noexcept { return matrix_; }
  std::int64_t total() const noexcept { return inversion_ + matrix_; }
  std::int64_t executed_inversion() const noexcept { return executed_inversion_; }

  void reset() noexcept { *this = FlopCounter{}; }

 private:
  Bucket bucket_ = Bucket::matrix;
  std::int64_t inversion_ = 0;
  std::int64_t matrix_ = 0;
  std::int64_t executed_inversion_ = 0;
};

/// RAII bucket switch.
class BucketScope {
 public:
  BucketScope(FlopCounter* counter, FlopCounter::Bucket b) : counter_(counter) {
    if (counter_) {
      saved_ = counter_->bucket();
      counter_->set_bucket(b);
    }
  }
  ~BucketScope() {
    if (counter_) counter_->set_bucket(saved_);
  }
  BucketScope(const BucketScope&) = delete;
  BucketScope& operator=(const BucketScope&) = delete;

 private:
  FlopCounter* counter_;
  FlopCounter::Bucket saved_ = FlopCounter::Bucket::matrix;
};

/// Plain triple-loop kernels that book their arithmetic into a counter
/// (which may be null). No blocking, no vectorization: the counts are the point.
namespace counted {

/// a * b. Each output entry costs l multiplies and l-1 adds, i.e. rows*cols*(2l-1)
/// in total. The formula is applied literally, so an empty inner
/// dimension (l = 0) books -rows*cols.
Matrix multiply(const Matrix& a, const Matrix& b, FlopCounter* counter);

/// a - b, rows*cols flops.
Matrix subtract(const Matrix& a, const Matrix& b, FlopCounter* counter);

/// Gauss-Jordan inverse with partial pivoting. Throws Error(rank_deficient) on
/// a pivot below kPivotTolerance * ||m||_inf.
///
/// The charged cost is (2n^3 + 18n^2 + 10n) / 3: the pivot step on a
/// trailing block of size r books r divisions and (r-1)(r+1) multiply-adds.
/// The executed sweep costs 2n^3 - n^2 + 10n, which the schedule overcounts
/// below n = 4 and undercounts above. It is reported separately via
/// FlopCounter::executed_inversion().
Matrix gauss_jordan_inverse(const Matrix& m, FlopCounter* counter);

}  // namespace counted

}  // namespace etmpc
