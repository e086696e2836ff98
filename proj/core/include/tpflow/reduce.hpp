#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

// Deterministic summation and parallel helpers.  All reductions happen
// over a fixed block decomposition that does not depend on the thread
// count, then combine block results by a pairwise tree in index order,
// so results are bitwise identical no matter how many workers ran.

namespace tpflow::reduce {

// Number of worker threads used by parallel loops.  Defaults to the
// TPFLOW_THREADS environment variable (capped at 256), with a fallback
// of 1 if unset or unparsable.  Oversubscription is allowed so the
// thread-count independence of results can be exercised anywhere.
int thread_count();
void set_thread_count(int n);

// Pairwise tree sum of a contiguous range.
double pairwise_sum(std::span<const double> xs);

// Evaluates block_sum(b) for b in [0, blocks) across workers and
// combines the results with a pairwise tree in block order.
double parallel_block_sum(int blocks, const std::function<double(int)>& block_sum);

// Evaluates block_term(b) into per-block matrices and sums them in block
// order (matrix analogue of parallel_block_sum; used for covector and
// form-matrix accumulation).
Eigen::MatrixXd parallel_block_matrix_sum(
    int blocks, int rows, int cols,
    const std::function<void(int, Eigen::MatrixXd&)>& block_term);

// Plain static-partition parallel for over [0, count).
void parallel_for(int count, const std::function<void(int)>& body);

} // namespace tpflow::reduce
