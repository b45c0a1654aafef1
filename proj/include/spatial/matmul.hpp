#pragma once

// Square matrix multiplication schedules. Operands sit row-major on an n x n
// subgrid anchored at the origin, entry (i, j) on processor (i, j); the
// product ends on the same processors.

#include <cstdint>
#include <iosfwd>

#include <Eigen/Dense>

#include "spatial/core.hpp"

namespace spatial {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntMatrix = Matrix<std::int64_t>;
using RealMatrix = Matrix<double>;

template <class T>
struct MatmulOutput {
  Matrix<T> c;
  bool overflow = false;         // integer mode: an intermediate left the int64 range
  std::uint64_t peak_words = 0;  // most operand words held by one processor at once
  std::int64_t grid_side = 0;    // side of the working grid
};

struct StrassenConfig {
  std::int64_t cutoff = 0;  // k: unroll breadth-first while the side exceeds k; 0 means k = n
};

/// Cubic triple loop.
template <class T>
Matrix<T> multiply_oracle(const Matrix<T>& a, const Matrix<T>& b);

/// Cannon's algorithm on the n x n grid: skew, then n rounds of
/// multiply-accumulate and unit circular shifts.
template <class T>
AlgorithmResult<MatmulOutput<T>> cannon(const Matrix<T>& a, const Matrix<T>& b, const RunOptions& opts = {});

/// Space-sharing Strassen. Each macro-step unrolls three levels into 343
/// calls on n/8 blocks, run as 6 sequential chunks of at most 64 calls on an
/// 8 x 8 tiling of a grid of side n * ceil(sqrt(log2 n)). Sides are padded to
/// a power of 2; when log2 n is not a multiple of 3 the first step unrolls
/// only the remaining 1 or 2 levels in a single chunk. In strict mode a
/// processor holding more than limits.local_memory_words words throws.
template <class T>
AlgorithmResult<MatmulOutput<T>> s3mm(const Matrix<T>& a, const Matrix<T>& b, const RunOptions& opts = {});

/// Breadth-first Strassen (two levels, 49 calls on a 7 x 7 subdivision) while
/// the side exceeds k, then s3mm. k = n gives exactly s3mm.
template <class T>
AlgorithmResult<MatmulOutput<T>> s3mm_bfs_dfs(const Matrix<T>& a, const Matrix<T>& b, const StrassenConfig& cfg,
                                              const RunOptions& opts = {});

// Matrix files ---------------------------------------------------------------

enum class ElementType : std::uint8_t { Int64 = 0, Float64 = 1 };

struct MatrixData {
  ElementType type = ElementType::Int64;
  IntMatrix ints;
  RealMatrix reals;
};

/// Comma-separated rows. Integer type when every field parses as an integer.
MatrixData read_matrix_csv(std::istream& in);
void write_matrix_csv(std::ostream& out, const MatrixData& m);

/// Little-endian: u64 n, u8 element type, then n^2 8-byte entries row-major.
MatrixData read_matrix_binary(std::istream& in);
void write_matrix_binary(std::ostream& out, const MatrixData& m);

}  // namespace spatial
