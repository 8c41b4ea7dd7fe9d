#include "viewhash/descriptor.hpp"

#include <algorithm>
#include <stdexcept>

namespace vh {

BinaryDescriptor binarize(const QuantizedViewGrid& grid) {
    const std::size_t cells = grid.cell_count();
    if (grid.cells.size() != cells || grid.foreground.size() != cells)
        throw std::invalid_argument("binarize: grid buffers do not match width*height");

    BinaryDescriptor d;
    d.bits = BitVec(cells * kValuesPerCell);
    d.grid_width = grid.width;
    d.grid_height = grid.height;
    std::uint32_t fg = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        const int v = grid.cells[c];
        if (v < 0 || v > kMaxCellValue)
            throw std::invalid_argument("binarize: cell value outside [0,16]");
        if (v > 0) d.bits.set(c * kValuesPerCell + (v - 1));
        if (grid.foreground[c]) ++fg;
    }
    d.foreground_cell_count = fg;
    return d;
}

QuantizedViewGrid debinarize(const BinaryDescriptor& desc) {
    QuantizedViewGrid g;
    g.width = desc.grid_width;
    g.height = desc.grid_height;
    const std::size_t cells = g.cell_count();
    g.cells.assign(cells, 0);
    g.foreground.assign(cells, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        std::uint16_t f = desc.bits.field16(c);
        if (f == 0) continue;
        if ((f & (f - 1)) != 0)
            throw std::invalid_argument("debinarize: cell field is not one-hot");
        g.cells[c] = static_cast<std::uint8_t>(std::countr_zero(f) + 1);
        g.foreground[c] = 1;
    }
    return g;
}

BinaryDescriptor spread(const BinaryDescriptor& desc, int radius) {
    if (radius < 0) throw std::invalid_argument("spread: negative radius");
    BinaryDescriptor out = desc;
    if (radius == 0) return out;
    const int w = desc.grid_width;
    const int h = desc.grid_height;
    BitVec bits(desc.bits.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint16_t acc = 0;
            const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
            const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx)
                    acc |= desc.bits.field16(static_cast<std::size_t>(yy) * w + xx);
            bits.set_field16(static_cast<std::size_t>(y) * w + x, acc);
        }
    }
    out.bits = std::move(bits);
    out.spread_applied = true;
    return out;
}

double similarity_bits(const BitVec& window_bits, const BitVec& templ_bits,
                       std::uint32_t templ_foreground_cells) {
    if (window_bits.size() != templ_bits.size())
        throw std::invalid_argument("similarity: descriptor widths differ");
    if (templ_foreground_cells == 0)
        throw std::invalid_argument("similarity: template has no foreground cells");
    std::size_t hit_cells = 0;
    for (std::size_t i = 0; i < window_bits.word_count(); ++i) {
        std::uint64_t a = window_bits.word(i) & templ_bits.word(i);
        if (!a) continue;
        hit_cells += (a & 0xFFFFULL) != 0;
        hit_cells += (a & 0xFFFF0000ULL) != 0;
        hit_cells += (a & 0xFFFF00000000ULL) != 0;
        hit_cells += (a & 0xFFFF000000000000ULL) != 0;
    }
    return static_cast<double>(hit_cells) / templ_foreground_cells;
}

double similarity(const BinaryDescriptor& window, const BinaryDescriptor& templ) {
    return similarity_bits(window.bits, templ.bits, templ.foreground_cell_count);
}

}  // namespace vh
