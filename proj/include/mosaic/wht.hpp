#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mosaic/mat.hpp"

namespace mosaic {

enum class Ordering { sylvester, sequency };

// The +/-1 orthogonal measurement basis of side `order` (a power of two).
// Rows satisfy Phi Phi^T = k I with k = order. Entries are computed from bit
// parity rather than stored, so large orders stay cheap.
//
// Sylvester ordering is the Kronecker recursion H_{2N} = [[H,H],[H,-H]];
// sequency ordering permutes rows so row r has exactly r-1 sign changes
// (1-based). Row 1 is all ones under both orderings.
class HadamardBasis {
public:
    explicit HadamardBasis(int order, Ordering ordering = Ordering::sylvester);

    int order() const { return order_; }
    Ordering ordering() const { return ordering_; }
    // The scale constant k in Y = Phi X Phi^T / k. Equals order.
    double scale() const { return static_cast<double>(order_); }

    // Entry of Phi at 0-based (row, col); always +1 or -1.
    int entry(int row, int col) const {
        int nr = ordering_ == Ordering::sequency ? static_cast<int>(natural_[row]) : row;
        return (__builtin_popcount(static_cast<unsigned>(nr & col)) & 1) ? -1 : 1;
    }

    std::vector<double> row(int r) const;

    // Sylvester row index backing row r of this basis.
    int natural_row(int r) const {
        return ordering_ == Ordering::sequency ? static_cast<int>(natural_[r]) : r;
    }

    // Dense materialization, for oracles and small-order checks only.
    Mat dense() const;

private:
    int order_;
    int log2_order_;
    Ordering ordering_;
    std::vector<std::uint32_t> natural_;  // sequency row -> sylvester row
};

// In-place unnormalized butterfly; computes H v for the Sylvester-ordered
// matrix of size v.size(), which must be a power of two. Only additions and
// subtractions, O(N log N).
void fwht_radix2(std::span<double> v);

// Phi v and Phi^T v for the basis ordering at hand.
std::vector<double> fwht(std::vector<double> v, const HadamardBasis& basis);
std::vector<double> fwht_transpose(std::vector<double> v, const HadamardBasis& basis);

// Full sampling map Y = Phi X Phi^T / k and its exact inverse
// X = Phi^T Y Phi / k.
Mat sample_full(const Mat& patch, const HadamardBasis& basis);
Mat inverse_full(const Mat& grid, const HadamardBasis& basis);

// Single measurement phi_i X phi_j^T / k at 1-based (i, j); equals
// sample_full(X)(i-1, j-1).
double measurement_at(const Mat& patch, const HadamardBasis& basis, int i, int j);

// Maps a {1,-1}-basis measurement q_i to its {1,0}-basis equivalent
// p_i = (q_i + 1^T x) / 2, given the all-ones measurement 1^T x.
inline double convert_h10_measurement(double q_i, double ones_measurement) {
    return (q_i + ones_measurement) / 2.0;
}

}  // namespace mosaic
