#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ffsim/errors.hpp"

namespace ffsim {

// Physical size of one lattice cell in meters.
inline constexpr double kCellSize = 0.4;

struct Cell {
  int row = 0;  // exit-to-entrance axis, the exit wall is row 0
  int col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// True when the step x -> y changes both coordinates.
inline bool is_diagonal(Cell x, Cell y) { return x.row != y.row && x.col != y.col; }

/// Rectangular room with one exit on the short wall at row 0 and the
/// entrance along the opposite wall.
///
/// The static field holds the Euclidean distance (in cells) to the nearest
/// exit cell. Walls are not cells; they only clip neighborhoods.
class Room {
 public:
  static Room build(int length_cells, int width_cells, int exit_width_cells = 1) {
    if (length_cells < 3 || width_cells < 3) {
      throw ConfigError("room must be at least 3x3 cells, got " + std::to_string(length_cells) +
                        "x" + std::to_string(width_cells));
    }
    if (width_cells % 2 == 0) {
      throw ConfigError("room width must be odd so the exit is centered, got " +
                        std::to_string(width_cells));
    }
    if (exit_width_cells < 1 || exit_width_cells % 2 == 0 || exit_width_cells >= width_cells) {
      throw ConfigError("exit width must be odd, positive and narrower than the room, got " +
                        std::to_string(exit_width_cells));
    }

    Room room;
    room.length_ = length_cells;
    room.width_ = width_cells;
    const int center = width_cells / 2;
    const int half_exit = exit_width_cells / 2;
    for (int c = center - half_exit; c <= center + half_exit; ++c) room.exit_cells_.push_back({0, c});
    for (int c = 0; c < width_cells; ++c) room.entrance_cells_.push_back({length_cells - 1, c});

    room.field_.resize(room.cell_count());
    for (int r = 0; r < length_cells; ++r) {
      for (int c = 0; c < width_cells; ++c) {
        double best = std::numeric_limits<double>::infinity();
        for (const Cell& e : room.exit_cells_) {
          const double dr = r - e.row;
          const double dc = c - e.col;
          best = std::min(best, std::sqrt(dr * dr + dc * dc));
        }
        room.field_[room.index({r, c})] = best;
      }
    }
    return room;
  }

  int length() const { return length_; }
  int width() const { return width_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(length_) * width_; }

  // Center exit cell.
  Cell exit() const { return exit_cells_[exit_cells_.size() / 2]; }
  const std::vector<Cell>& exit_cells() const { return exit_cells_; }
  const std::vector<Cell>& entrance_cells() const { return entrance_cells_; }

  bool contains(Cell x) const { return x.row >= 0 && x.row < length_ && x.col >= 0 && x.col < width_; }
  bool is_exit(Cell x) const { return x.row == 0 && std::abs(x.col - exit().col) <= int(exit_cells_.size()) / 2; }

  std::size_t index(Cell x) const { return static_cast<std::size_t>(x.row) * width_ + x.col; }
  Cell cell_at(std::size_t i) const { return {int(i / width_), int(i % width_)}; }

  double static_field(Cell x) const {
    require_inside(x);
    return field_[index(x)];
  }

  /// Moore neighborhood of x clipped by the walls, x itself included.
  /// Cells are listed row-major, so the order is stable.
  std::vector<Cell> neighborhood(Cell x) const {
    require_inside(x);
    std::vector<Cell> cells;
    cells.reserve(9);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const Cell y{x.row + dr, x.col + dc};
        if (contains(y)) cells.push_back(y);
      }
    }
    return cells;
  }

 private:
  Room() = default;

  void require_inside(Cell x) const {
    if (!contains(x)) {
      throw std::out_of_range("cell (" + std::to_string(x.row) + "," + std::to_string(x.col) +
                              ") lies outside the room");
    }
  }

  int length_ = 0;
  int width_ = 0;
  std::vector<Cell> exit_cells_;
  std::vector<Cell> entrance_cells_;
  std::vector<double> field_;
};

}  // namespace ffsim
