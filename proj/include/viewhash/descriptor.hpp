#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "viewhash/bitvec.hpp"

namespace vh {

// Quantized feature values: 0 = no feature, 1-8 = gradient orientation bins,
// 9-16 = normal orientation bins. One 16-bit one-hot field per grid cell.
constexpr int kValuesPerCell = 16;
constexpr int kMaxCellValue = 16;

struct Quat {
    double w = 1, x = 0, y = 0, z = 0;

    double dot(const Quat& o) const {
        return w * o.w + x * o.x + y * o.y + z * o.z;
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Quat normalized() const {
        double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
};

struct QuantizedViewGrid {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::uint8_t> cells;       // row-major, values in [0,16]
    std::vector<std::uint8_t> foreground;  // same layout, 0/1 flags

    std::size_t cell_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

struct BinaryDescriptor {
    BitVec bits;                  // d = width*height*16
    std::uint32_t object_id = 0;
    std::uint32_t view_id = 0;
    Quat pose;                    // unit quaternion
    std::uint16_t scale_cluster = 0;
    std::uint32_t foreground_cell_count = 0;
    std::uint16_t grid_width = 0;
    std::uint16_t grid_height = 0;
    bool spread_applied = false;  // provenance: keys learn on spread, matching uses unspread

    std::size_t bit_width() const { return bits.size(); }
};

struct DescriptorSet {
    std::vector<BinaryDescriptor> descriptors;  // descriptor id = index
    std::uint16_t scale_cluster = 0;
    std::uint32_t bit_width = 0;
    std::uint16_t grid_width = 0;
    std::uint16_t grid_height = 0;

    std::size_t size() const { return descriptors.size(); }
};

// One-hot encoding: cell value v in [1,16] sets bit 16*cell + (v-1); 0 sets none.
BinaryDescriptor binarize(const QuantizedViewGrid& grid);

// Inverse of binarize for one-hot descriptors (at most one bit per cell).
QuantizedViewGrid debinarize(const BinaryDescriptor& desc);

// OR each cell's field over the Chebyshev ball of the given cell radius.
BinaryDescriptor spread(const BinaryDescriptor& desc, int radius);

// Count of cells whose ANDed fields are nonzero, divided by the template's
// foreground cell count. In [0,1] for unspread templates.
double similarity(const BinaryDescriptor& window, const BinaryDescriptor& templ);

// Same score on raw bit planes (window bits already extracted).
double similarity_bits(const BitVec& window_bits, const BitVec& templ_bits,
                       std::uint32_t templ_foreground_cells);

}  // namespace vh
