#ifndef W2A_NUMERICS_TENSOR_H_
#define W2A_NUMERICS_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace w2a {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeProduct(const Shape& shape);

// Dense row-major array of doubles. Rank-1 tensors behave as a single row
// for the matrix-shaped operations; everything of rank >= 2 is viewed as
// [shape[0], product(rest)].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value) { return Tensor({1}, {value}); }
  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Same data, new shape; the element count must match.
  Tensor Reshaped(Shape shape) const;
  void Fill(double value);
  bool AllFinite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// C (+)= op(A) * op(B) for row-major matrices.
void Gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool trans_a, bool trans_b,
          bool accumulate);

}  // namespace w2a

#endif  // W2A_NUMERICS_TENSOR_H_
